#ifndef ORRLAB_GREEN_HPP
#define ORRLAB_GREEN_HPP

// The variable-coefficient elliptic operator
//   Delta_t = dz^2 + (h+1)^2 (dv - t dz)^2 + (h+1)(dv h)(dv - t dz)
// and its inverse by three interchangeable methods:
//   multiplier : exact -1/((xi-tk)^2 + k^2), valid when h = 0;
//   direct     : per-mode banded LU of the exact spectral operator in xi
//                (the coefficient multiplications are convolutions with the
//                truncated Fourier kernels of h(h+2) and (h+1)dvh, so the
//                per-k matrix is banded; same Z/W split as the Neumann route);
//   neumann    : Y^{-1} = sum_n Z^{-1} (W Z^{-1})^n with Z the constant-
//                coefficient part and W the convolution part.
//
// apply_delta_t uses the same truncated kernels, so apply o invert is
// consistent to machine precision by construction.

#include <lapacke.h>

#include <algorithm>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include "orrlab/fft.hpp"
#include "orrlab/grid.hpp"

namespace orrlab {

// sparse xi-lattice convolution kernel: signed offset -> Fourier-series coeff
struct ConvKernel {
    std::vector<std::pair<int, cplx>> entries;
    int half_width = 0;
    // DFT of the (thresholded) taps on a zero-padded 2N circular lattice;
    // lets accumulate() run the exact linear convolution in O(N log N)
    std::vector<cplx> taps_hat;

    bool empty() const { return entries.empty(); }

    // out(m) += sum_e coeff(e) * u(m - off_e), linear (no wrap), restricted to
    // the conjugation-symmetric lattice |m| <= N/2 - 1 (the Nyquist slot has
    // no partner and is handled diagonally everywhere in this module). Source
    // and result supports fit inside the padded lattice, so the circular
    // convolution below is the exact linear one for the same taps.
    void accumulate(const Grid& g, const cplx* u_slots, cplx* out_slots) const {
        const int N = g.N_v, M = 2 * N;
        std::vector<cplx> up(M, cplx(0, 0));
        for (int m = -N / 2 + 1; m <= N / 2 - 1; ++m)
            up[m >= 0 ? m : m + M] = u_slots[g.slot_of(m)];
        up = detail::fft1d(std::move(up), FFTW_FORWARD);
        for (int i = 0; i < M; ++i) up[i] *= taps_hat[i] / (double)M;
        up = detail::fft1d(std::move(up), FFTW_BACKWARD);
        for (int m = -N / 2 + 1; m <= N / 2 - 1; ++m)
            out_slots[g.slot_of(m)] += up[m >= 0 ? m : m + M];
    }
};

namespace detail {

// exact Fourier-series coefficients of the pointwise product a*b on a
// zero-padded (2N) grid, truncated to |m| <= N/2 and thresholded
inline ConvKernel product_kernel(const Grid& g, const std::vector<cplx>& Aphys,
                                 const std::vector<cplx>& Bphys, double rel_tol = 1e-14) {
    const int N = g.N_v, M = 2 * N;
    // series coeffs of a and b (from physical N-grids, band-limited by grid)
    std::vector<cplx> ca = fft1d(Aphys, FFTW_FORWARD);
    std::vector<cplx> cb = fft1d(Bphys, FFTW_FORWARD);
    for (auto& z : ca) z /= (double)N;
    for (auto& z : cb) z /= (double)N;
    // resynthesize on the fine grid and multiply there: exact for |m| <= N
    std::vector<cplx> fa(M, cplx(0, 0)), fb(M, cplx(0, 0));
    for (int m = -N / 2 + 1; m <= N / 2; ++m) {
        int src = m >= 0 ? m : m + N, dst = m >= 0 ? m : m + M;
        fa[dst] = ca[src];
        fb[dst] = cb[src];
    }
    fa = fft1d(std::move(fa), FFTW_BACKWARD);
    fb = fft1d(std::move(fb), FFTW_BACKWARD);
    for (int i = 0; i < M; ++i) fa[i] *= fb[i];
    fa = fft1d(std::move(fa), FFTW_FORWARD);
    double mx = 0;
    for (auto& z : fa) mx = std::max(mx, std::abs(z) / M);
    ConvKernel ker;
    // the unpaired Nyquist offset m = N/2 is dropped to keep the kernel
    // conjugation-symmetric for real coefficients
    for (int m = -N / 2 + 1; m <= N / 2 - 1; ++m) {
        cplx c = fa[m >= 0 ? m : m + M] / (double)M;
        if (std::abs(c) > rel_tol * mx) {
            ker.entries.emplace_back(m, c);
            ker.half_width = std::max(ker.half_width, std::abs(m));
        }
    }
    if (!ker.entries.empty()) {
        std::vector<cplx> taps(M, cplx(0, 0));
        for (auto& [off, cv] : ker.entries) taps[off >= 0 ? off : off + M] = cv;
        ker.taps_hat = fft1d(std::move(taps), FFTW_FORWARD);
    }
    return ker;
}

}  // namespace detail

struct EllipticCoeffs {
    Grid grid;
    double t = 0;
    SpectralField h;        // k = 0 only
    ConvKernel a2;          // kernel of h(h+2) = (h+1)^2 - 1
    ConvKernel b;           // kernel of (h+1) dv h
    double h_min = 0, h_max = 0;

    EllipticCoeffs() = default;
    EllipticCoeffs(const SpectralField& h_field, double time) : grid(h_field.grid), t(time), h(h_field) {
        for (int k = -grid.K_z; k <= grid.K_z; ++k)
            if (k != 0)
                for (int j = 0; j < grid.N_v; ++j)
                    if (std::abs(h_field.at(k, j)) > 0)
                        throw std::invalid_argument("EllipticCoeffs: h must be z-independent");
        std::vector<cplx> hp = detail::row_to_physical(grid, h.row(0));
        h_min = 1e300;
        h_max = -1e300;
        for (auto& z : hp) {
            h_min = std::min(h_min, z.real());
            h_max = std::max(h_max, z.real());
        }
        if (h_min <= -1.0)
            throw std::domain_error("EllipticCoeffs: h <= -1 somewhere (singular map)");
        std::vector<cplx> hp2(hp);  // h + 2
        for (auto& z : hp2) z += 2.0;
        a2 = detail::product_kernel(grid, hp, hp2);
        std::vector<cplx> hp1(hp);  // h + 1
        for (auto& z : hp1) z += 1.0;
        std::vector<cplx> dvh = detail::row_to_physical(grid, h.dv().row(0));
        b = detail::product_kernel(grid, hp1, dvh);
    }

    bool is_free() const { return a2.empty() && b.empty(); }
};

enum class InverseMethod { multiplier, direct, neumann };

struct InversePlan {
    InverseMethod method = InverseMethod::direct;
    int depth = 12;  // neumann truncation
    // conditioning / residual report, per z-mode
    mutable std::map<int, double> residual_report;

    InversePlan() = default;
    explicit InversePlan(InverseMethod m, int d = 12) : method(m), depth(d) {
        if (d < 0) throw std::invalid_argument("InversePlan: depth >= 0");
    }
};

namespace detail {

// W u on mode k: conv_a2(-(xi-tk)^2 u) + conv_b(i(xi-tk) u), into `out`
inline void apply_W_row(const Grid& g, const EllipticCoeffs& c, int k, const cplx* u,
                        cplx* out) {
    std::vector<cplx> tmp(g.N_v);
    if (!c.a2.empty()) {
        for (int j = 0; j < g.N_v; ++j) {
            double s = g.xi(j) - c.t * k;
            tmp[j] = -s * s * u[j];
        }
        c.a2.accumulate(g, tmp.data(), out);
    }
    if (!c.b.empty()) {
        for (int j = 0; j < g.N_v; ++j) {
            double s = g.xi(j) - c.t * k;
            tmp[j] = cplx(0, s) * u[j];
        }
        c.b.accumulate(g, tmp.data(), out);
    }
}

// direct banded solve of (Z + W) u = rhs on mode k (k may be 0 for h != 0 is
// never needed; guarded by caller). Returns relative residual in `resid`.
inline std::vector<cplx> solve_direct_row(const Grid& g, const EllipticCoeffs& c, int k,
                                          const cplx* rhs, double* resid) {
    const int N = g.N_v;
    const int W = std::max(c.a2.half_width, c.b.half_width);
    const int kl = W, ku = W, ldab = 2 * kl + ku + 1;
    // row order: p = m + N/2 - 1 for signed lattice index m in (-N/2, N/2]
    auto pos = [&](int m) { return m + N / 2 - 1; };
    std::vector<cplx> AB((size_t)ldab * N, cplx(0, 0));
    auto entry = [&](int r, int cidx) -> cplx& {
        // LAPACK band storage, column-major: AB(kl+ku+r-cidx, cidx)
        return AB[(size_t)cidx * ldab + (kl + ku + r - cidx)];
    };
    for (int m = -N / 2 + 1; m <= N / 2; ++m) {
        double s = m * g.dxi() - c.t * k;
        entry(pos(m), pos(m)) = -(double)k * k - s * s;  // Z diagonal
    }
    // W couples only within |m| <= N/2 - 1, matching ConvKernel::accumulate;
    // the Nyquist row stays purely diagonal
    for (auto& [off, cv] : c.a2.entries)
        for (int m = -N / 2 + 1; m <= N / 2 - 1; ++m) {
            int src = m - off;
            if (std::abs(src) > N / 2 - 1) continue;
            double s = src * g.dxi() - c.t * k;
            entry(pos(m), pos(src)) += cv * (-s * s);
        }
    for (auto& [off, cv] : c.b.entries)
        for (int m = -N / 2 + 1; m <= N / 2 - 1; ++m) {
            int src = m - off;
            if (std::abs(src) > N / 2 - 1) continue;
            double s = src * g.dxi() - c.t * k;
            entry(pos(m), pos(src)) += cv * cplx(0, s);
        }
    std::vector<cplx> ABf = AB;  // zgbsv overwrites with LU
    std::vector<cplx> x(N);
    for (int m = -N / 2 + 1; m <= N / 2; ++m) x[pos(m)] = rhs[g.slot_of(m)];
    std::vector<cplx> x0 = x;
    std::vector<lapack_int> ipiv(N);
    lapack_int info = LAPACKE_zgbsv(LAPACK_COL_MAJOR, N, kl, ku, 1,
                                    reinterpret_cast<lapack_complex_double*>(ABf.data()), ldab,
                                    ipiv.data(),
                                    reinterpret_cast<lapack_complex_double*>(x.data()), N);
    if (info != 0)
        throw std::runtime_error("green: banded LU failed on mode k=" + std::to_string(k) +
                                 " (info=" + std::to_string(info) + ")");
    // residual in band arithmetic
    double rn = 0, bn = 0;
    for (int r = 0; r < N; ++r) {
        cplx acc = 0;
        for (int cc = std::max(0, r - kl); cc <= std::min(N - 1, r + ku); ++cc)
            acc += AB[(size_t)cc * ldab + (kl + ku + r - cc)] * x[cc];
        rn += std::norm(acc - x0[r]);
        bn += std::norm(x0[r]);
    }
    *resid = bn == 0 ? 0 : std::sqrt(rn / bn);
    std::vector<cplx> out(N);
    for (int m = -N / 2 + 1; m <= N / 2; ++m) out[g.slot_of(m)] = x[pos(m)];
    return out;
}

inline bool row_nonzero_g(const Grid& g, const cplx* r) {
    for (int j = 0; j < g.N_v; ++j)
        if (r[j] != cplx(0, 0)) return true;
    return false;
}

}  // namespace detail

inline SpectralField apply_delta_t(const SpectralField& F, const EllipticCoeffs& c) {
    if (F.grid != c.grid) throw std::invalid_argument("apply_delta_t: grid mismatch");
    const Grid& g = F.grid;
    SpectralField out(g, F.real_symmetric);
    out.t = F.t;
    for (int k = -g.K_z; k <= g.K_z; ++k) {
        const cplx* u = F.row(k);
        cplx* o = out.row(k);
        for (int j = 0; j < g.N_v; ++j) {
            double s = g.xi(j) - c.t * k;
            o[j] = (-(double)k * k - s * s) * u[j];
        }
        detail::apply_W_row(g, c, k, u, o);
    }
    return out;
}

inline SpectralField invert(const SpectralField& F, const EllipticCoeffs& c,
                            const InversePlan& plan) {
    if (F.grid != c.grid) throw std::invalid_argument("invert: grid mismatch");
    const Grid& g = F.grid;
    for (int j = 0; j < g.N_v; ++j)
        if (std::abs(F.at(0, j)) != 0)
            throw std::invalid_argument("invert: P0 F != 0 (inverse defined on nonzero z-modes)");
    SpectralField out(g, F.real_symmetric);
    out.t = F.t;

    for (int k = -g.K_z; k <= g.K_z; ++k) {
        if (k == 0) continue;
        const cplx* u = F.row(k);
        cplx* o = out.row(k);
        if (!detail::row_nonzero_g(g, u)) {  // linear solve of 0 is 0, exactly
            plan.residual_report[k] = 0;
            continue;
        }
        switch (plan.method) {
            case InverseMethod::multiplier: {
                for (int j = 0; j < g.N_v; ++j) {
                    double s = g.xi(j) - c.t * k;
                    o[j] = -u[j] / (s * s + (double)k * k);
                }
                break;
            }
            case InverseMethod::direct: {
                if (c.is_free()) {  // banded width 0; multiplier is the exact LU
                    for (int j = 0; j < g.N_v; ++j) {
                        double s = g.xi(j) - c.t * k;
                        o[j] = -u[j] / (s * s + (double)k * k);
                    }
                    plan.residual_report[k] = 0;
                    break;
                }
                double resid = 0;
                std::vector<cplx> x = detail::solve_direct_row(g, c, k, u, &resid);
                plan.residual_report[k] = resid;
                if (resid > 1e-10)
                    throw std::runtime_error("invert(direct): residual " + std::to_string(resid) +
                                             " exceeds 1e-10 on mode k=" + std::to_string(k));
                std::copy(x.begin(), x.end(), o);
                break;
            }
            case InverseMethod::neumann: {
                std::vector<cplx> r(u, u + g.N_v), term(g.N_v), wr(g.N_v);
                std::vector<double> term_norms;
                int grow_streak = 0;
                for (int n = 0; n <= plan.depth; ++n) {
                    double tn = 0;
                    for (int j = 0; j < g.N_v; ++j) {
                        double s = g.xi(j) - c.t * k;
                        term[j] = -r[j] / (s * s + (double)k * k);  // Z^{-1} r
                        o[j] += term[j];
                        tn += std::norm(term[j]);
                    }
                    tn = std::sqrt(tn);
                    if (!term_norms.empty() && tn >= term_norms.back()) {
                        if (++grow_streak >= 3) {
                            std::string seq;
                            for (double v : term_norms) seq += std::to_string(v) + " ";
                            throw std::runtime_error(
                                "invert(neumann): divergent term norms on mode k=" +
                                std::to_string(k) + ": " + seq);
                        }
                    } else {
                        grow_streak = 0;
                    }
                    term_norms.push_back(tn);
                    if (n == plan.depth || tn == 0) break;
                    std::fill(wr.begin(), wr.end(), cplx(0, 0));
                    detail::apply_W_row(g, c, k, term.data(), wr.data());
                    // r_{n+1} = -W Z^{-1} r_n: sign so that (Z+W) sum = F
                    for (int j = 0; j < g.N_v; ++j) r[j] = -wr[j];
                }
                break;
            }
        }
    }
    return out;
}

// v |-> (Delta_t^{-1} delta-at-w on mode k)(v), sampled on the v lattice.
// At h=0 this equals e^{itk(v-w)} K(t,k,v,w) with K = -(2|k|)^{-1} e^{-|k||v-w|}.
inline std::vector<cplx> kernel_column(const EllipticCoeffs& c, int k, double w,
                                       InverseMethod method = InverseMethod::direct) {
    if (k == 0) throw std::invalid_argument("kernel_column: k != 0 required");
    const Grid& g = c.grid;
    SpectralField F(g, false);
    for (int j = 0; j < g.N_v; ++j) {
        if (g.xi_index(j) == g.N_v / 2) continue;  // Nyquist slot has no conjugate partner
        F.at(k, j) = std::exp(cplx(0, -g.xi(j) * w)) / (2 * M_PI);
    }
    SpectralField u = invert(F, c, InversePlan(method));
    return detail::row_to_physical(g, u.row(k));
}

}  // namespace orrlab

#endif
