#ifndef ORRLAB_SYMBOLS_HPP
#define ORRLAB_SYMBOLS_HPP

// Direct assembly and evaluation of the linearized-system symbols q_ij from a
// background snapshot: the evolution of g' = (f', h', theta') reads
//   d/dt g_i'(k,xi) = sum_j sum_l sum_eta q_ij(t,k,l,xi,eta) g_j'(l,eta) dxi
// plus the explicit local terms -(g2' + 1_{k=0} g1')/t and -2 g3'/t.
// The symbols are built from background Fourier coefficients and the elliptic
// kernel correction M(t,k,xi,eta), the latter extracted numerically from the
// direct inverse applied to lattice deltas. This gives a second, independent
// code path for the same operator as the field-based evolution (evolve.hpp),
// which the tests cross-check by contraction.

#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "orrlab/evolve.hpp"
#include "orrlab/green.hpp"

namespace orrlab {

// continuum transform of phi_b = e^{-(v/C0)^18}, normalized so that
// multiplication by phi_b acts as the kernel hat_phi_b(xi - eta):
// hat_phi_b(z) = (1/2pi) int phi_b(v) e^{-izv} dv (real and even)
inline double hat_phi_b(double C0, double zeta) {
    const double R = 1.5 * C0;  // integrand is ~1e-26 beyond 1.4 C0
    const int n = 20000;
    const double h = R / n;
    double acc = 0;
    for (int i = 0; i <= n; ++i) {
        double v = i * h;
        double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * std::exp(-std::pow(v / C0, 18)) * std::cos(zeta * v);
    }
    return acc * h / 3.0 / M_PI;  // even integrand: 2 * (1/2pi) * int_0^R
}

// the explicit leading symbol q11'
inline cplx q11_leading(const ParamSet& p, double t, int k, int l, double xi, double eta) {
    if (l == 0 || std::abs(l - k) != 1) return cplx(0, 0);
    double lorentz = eta * (l - k) / ((eta - t * l) * (eta - t * l) + (double)l * l);
    return cplx(lorentz * 0.5 * p.eps0 * hat_phi_b(p.C0, xi - eta), 0);
}

struct SymbolTable {
    Grid grid;
    double t = 1;
    StateTriple bg;       // background snapshot (f, h, theta)
    EllipticCoeffs ell;   // coefficients of Delta_t at the snapshot
    SpectralField phi;    // P_{!=0} Delta_t^{-1} f_bar (direct inversion)

    // composite background fields entering the symbols
    SpectralField C1, C2;  // (h+1) dz phi, (h+1) Dv phi        (transport)
    SpectralField E1, E2;  // (h+1) dv f,   (h+1) dz f          (reaction)
    SpectralField G;       // -(dz phi . Dv f - Dv phi . dz f)  (h' coefficient)
    SpectralField A12;     // 2 (h+1) Dv^2 phi + dv(h) Dv phi   (Delta_t' core)

    // lazy caches: inverse columns per (l, eta-slot), h'-mode data per eta-slot
    struct HCol {
        SpectralField phic;  // phi' correction per unit h' mode
    };
    mutable std::map<std::pair<int, int>, std::vector<cplx>> inv_cols_;
    mutable std::map<int, HCol> h_cols_;
    mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();

    // coefficient of F at row k, signed xi-index dm (0 outside the lattice)
    cplx coeff(const SpectralField& F, int k, int dm) const {
        if (std::abs(k) > grid.K_z) return cplx(0, 0);
        if (dm < -grid.N_v / 2 + 1 || dm > grid.N_v / 2) return cplx(0, 0);
        return F.row(k)[grid.slot_of(dm)];
    }
    int didx(int ja, int jb) const { return grid.xi_index(ja) - grid.xi_index(jb); }

    const std::vector<cplx>& inv_col(int l, int jeta) const {
        if (l == 0) throw std::invalid_argument("inv_col: l must be nonzero");
        std::lock_guard<std::mutex> lk(*mu_);
        auto key = std::make_pair(l, jeta);
        auto it = inv_cols_.find(key);
        if (it != inv_cols_.end()) return it->second;
        SpectralField d(grid, false);
        d.at(l, jeta) = cplx(1, 0);
        InversePlan plan(InverseMethod::direct);
        SpectralField r = invert(d, ell, plan);
        std::vector<cplx> col(r.row(l), r.row(l) + grid.N_v);
        return inv_cols_.emplace(key, std::move(col)).first->second;
    }

    // elliptic kernel correction: hat(Delta^{-1} F)(xi) =
    //   -((xi-tl)^2+l^2)^{-1} (hat F(xi) + sum_eta M(t,l,xi,eta) hat F(eta) dxi)
    cplx M_kernel(int l, int jxi, int jeta) const {
        if (l == 0) return cplx(0, 0);
        double xi = grid.xi(jxi);
        double denom = (xi - t * l) * (xi - t * l) + (double)l * l;
        cplx base = -denom * inv_col(l, jeta)[jxi];
        if (jxi == jeta) base -= cplx(1, 0);
        return base / grid.dxi();
    }

    const HCol& h_col(int jeta) const {
        {
            std::lock_guard<std::mutex> lk(*mu_);
            auto it = h_cols_.find(jeta);
            if (it != h_cols_.end()) return it->second;
        }
        // X = Delta_t'(unit h' mode) phi: a frequency shift of the composites
        double eta = grid.xi(jeta);
        SpectralField X(grid, false);
        for (int q = -grid.K_z; q <= grid.K_z; ++q)
            for (int j = 0; j < grid.N_v; ++j) {
                cplx a = coeff(A12, q, didx(j, jeta)) + cplx(0, eta) * coeff(C2, q, didx(j, jeta));
                X.at(q, j) = grid.dxi() * a;
            }
        HCol out;
        if (X.l2_norm() > 0) {
            InversePlan plan(InverseMethod::direct);
            out.phic = cplx(-1, 0) * invert(project(X, Projector::Pneq0), ell, plan);
        } else {
            out.phic = SpectralField(grid, false);
        }
        std::lock_guard<std::mutex> lk(*mu_);
        return h_cols_.emplace(jeta, std::move(out)).first->second;
    }

    // -(E1 dz - E2 dv) applied to a stream-function column, row k, slot jxi
    cplx jacobian_row(int k, int jxi, int l, const std::vector<cplx>& col) const {
        cplx acc(0, 0);
        for (int jz = 0; jz < grid.N_v; ++jz) {
            if (col[jz] == cplx(0, 0)) continue;
            cplx e1 = coeff(E1, k - l, didx(jxi, jz));
            cplx e2 = coeff(E2, k - l, didx(jxi, jz));
            acc += (e1 * cplx(0, l) - e2 * cplx(0, grid.xi(jz))) * col[jz];
        }
        return -acc;
    }
    cplx jacobian_field(int k, int jxi, const SpectralField& phicol) const {
        cplx acc(0, 0);
        for (int q = -grid.K_z; q <= grid.K_z; ++q) {
            const cplx* row = phicol.row(q);
            bool any = false;
            for (int j = 0; j < grid.N_v && !any; ++j) any = row[j] != cplx(0, 0);
            if (!any) continue;
            for (int jz = 0; jz < grid.N_v; ++jz) {
                if (row[jz] == cplx(0, 0)) continue;
                cplx e1 = coeff(E1, k - q, didx(jxi, jz));
                cplx e2 = coeff(E2, k - q, didx(jxi, jz));
                acc += (e1 * cplx(0, q) - e2 * cplx(0, grid.xi(jz))) * row[jz];
            }
        }
        return -acc;
    }

    bool has_reaction() const { return E1.l2_norm() > 0 || E2.l2_norm() > 0; }

    // transport and reaction parts of q11 (their sum is q11)
    cplx q11T(int k, int l, int jxi, int jeta) const {
        double eta = grid.xi(jeta);
        cplx acc(0, 0);
        if (k == l) acc -= cplx(0, eta) * coeff(bg.theta, 0, didx(jxi, jeta));
        acc -= coeff(C1, k - l, didx(jxi, jeta)) * cplx(0, eta - t * l);
        acc += coeff(C2, k - l, didx(jxi, jeta)) * cplx(0, l);
        return acc;
    }
    cplx q11R(int k, int l, int jxi, int jeta) const {
        if (l == 0 || !has_reaction()) return cplx(0, 0);
        return jacobian_row(k, jxi, l, inv_col(l, jeta));
    }

    // the full evaluator; (i,j) in {1,2,3}^2, lattice slots jxi, jeta
    cplx q(int i, int j, int k, int l, int jxi, int jeta) const {
        if (i == 1) {
            if (j == 1) return q11T(k, l, jxi, jeta) + q11R(k, l, jxi, jeta);
            if (l != 0) return cplx(0, 0);
            if (j == 2) {
                cplx acc = coeff(G, k, didx(jxi, jeta));
                if (has_reaction()) acc += jacobian_field(k, jxi, h_col(jeta).phic);
                return acc;
            }
            // q13 = -(dv f_bar)^(k, xi-eta)
            int d = didx(jxi, jeta);
            return -cplx(0, d * grid.dxi()) * coeff(bg.f, k, d);
        }
        if (i == 2) {
            if (j == 1 || k != 0 || l != 0) return cplx(0, 0);  // q21 == 0
            int d = didx(jxi, jeta);
            if (j == 2) return -cplx(0, grid.xi(jeta)) * coeff(bg.theta, 0, d);
            return -cplx(0, d * grid.dxi()) * coeff(bg.h, 0, d);  // q23
        }
        if (k != 0) return cplx(0, 0);
        if (j == 1) {  // q31
            if (l == 0) return cplx(0, 0);
            cplx acc = cplx(0, -l) * coeff(phi, -l, didx(jxi, jeta));
            if (bg.f.l2_norm() > 0) {
                const auto& col = inv_col(l, jeta);
                for (int jz = 0; jz < grid.N_v; ++jz) {
                    if (col[jz] == cplx(0, 0)) continue;
                    acc += coeff(bg.f, -l, didx(jxi, jz)) * cplx(0, l) * col[jz];
                }
            }
            return acc / t;
        }
        if (l != 0) return cplx(0, 0);
        if (j == 2) {  // q32 = (1/t) (f_bar . dz phi_c)^(0, xi)
            if (bg.f.l2_norm() == 0) return cplx(0, 0);
            const SpectralField& pc = h_col(jeta).phic;
            cplx acc(0, 0);
            for (int qr = -grid.K_z; qr <= grid.K_z; ++qr) {
                const cplx* row = pc.row(qr);
                for (int jz = 0; jz < grid.N_v; ++jz) {
                    if (row[jz] == cplx(0, 0)) continue;
                    acc += coeff(bg.f, -qr, didx(jxi, jz)) * cplx(0, qr) * row[jz];
                }
            }
            return acc / t;
        }
        // q33 from -dv(theta_bar theta')
        return -cplx(0, grid.xi(jxi)) * coeff(bg.theta, 0, didx(jxi, jeta));
    }

    // value-based access: xi, eta must lie on the lattice
    cplx q_at(int i, int j, int k, int l, double xi, double eta) const {
        auto slot = [&](double x) {
            double m = x / grid.dxi();
            int mi = (int)std::lround(m);
            if (std::abs(m - mi) > 1e-9 || mi < -grid.N_v / 2 + 1 || mi > grid.N_v / 2)
                throw std::invalid_argument("q_at: frequency off the lattice");
            return grid.slot_of(mi);
        };
        return q(i, j, k, l, slot(xi), slot(eta));
    }
};

inline SymbolTable assemble(const StateTriple& snapshot, double t) {
    SymbolTable S;
    S.grid = snapshot.f.grid;
    S.t = t;
    S.bg = snapshot;
    S.ell = EllipticCoeffs(snapshot.h, t);
    const Grid& g = S.grid;
    InversePlan plan(InverseMethod::direct);
    SpectralField fneq = project(snapshot.f, Projector::Pneq0);
    S.phi = fneq.l2_norm() > 0 ? invert(fneq, S.ell, plan) : SpectralField(g, true);

    auto with_h1 = [&](const SpectralField& W) {  // (h_bar + 1) W
        SpectralField r = detail::conv_multiply(snapshot.h, W);
        r += W;
        return r;
    };
    SpectralField dvphi = S.phi.dv_shear(t);
    S.C1 = with_h1(S.phi.dz());
    S.C2 = with_h1(dvphi);
    S.E1 = with_h1(snapshot.f.dv());
    S.E2 = with_h1(snapshot.f.dz());
    {
        SpectralField perp = detail::conv_multiply(S.phi.dz(), snapshot.f.dv_shear(t));
        perp -= detail::conv_multiply(dvphi, snapshot.f.dz());
        S.G = cplx(-1, 0) * perp;
    }
    S.A12 = cplx(2, 0) * with_h1(dvphi.dv_shear(t));
    S.A12 += detail::conv_multiply(snapshot.h.dv(), dvphi);
    return S;
}

// contract the symbol table against a state: the independent-path RHS
inline StateTriple contract(const SymbolTable& S, const StateTriple& gp) {
    const Grid& g = S.grid;
    if (gp.f.grid != g) throw std::invalid_argument("contract: grid mismatch");
    StateTriple r;
    r.f = SpectralField(g, false);
    r.h = SpectralField(g, false);
    r.theta = SpectralField(g, false);
    r.t = S.t;
    const double w = g.dxi();

    auto add_sources = [&](int j, const SpectralField& src) {
        for (int l = -g.K_z; l <= g.K_z; ++l) {
            if (j != 1 && l != 0) continue;
            const cplx* row = src.row(l);
            for (int jeta = 0; jeta < g.N_v; ++jeta) {
                cplx c = row[jeta];
                if (c == cplx(0, 0)) continue;
                c *= w;
                for (int k = -g.K_z; k <= g.K_z; ++k)
                    for (int jxi = 0; jxi < g.N_v; ++jxi) {
                        cplx v = S.q(1, j, k, l, jxi, jeta);
                        if (v != cplx(0, 0)) r.f.at(k, jxi) += v * c;
                    }
                for (int jxi = 0; jxi < g.N_v; ++jxi) {
                    cplx v2 = S.q(2, j, 0, l, jxi, jeta);
                    if (v2 != cplx(0, 0)) r.h.at(0, jxi) += v2 * c;
                    cplx v3 = S.q(3, j, 0, l, jxi, jeta);
                    if (v3 != cplx(0, 0)) r.theta.at(0, jxi) += v3 * c;
                }
            }
        }
    };
    add_sources(1, gp.f);
    add_sources(2, gp.h);
    add_sources(3, gp.theta);

    // the explicit local terms of the system, outside the q_ij sums
    r.h.axpy(-1.0 / S.t, gp.h);
    r.h.axpy(-1.0 / S.t, project(gp.f, Projector::P0));
    r.theta.axpy(-2.0 / S.t, gp.theta);
    return r;
}

// shape ratio of the reaction bound: max over the sampled lattice of
// |q11^R| ((xi - t l)^2 + l^2) / (e^{-|k-l|-|xi-eta|} (|xi|+|k|+1))
inline double reaction_shape_ratio(const SymbolTable& S, int stride = 16) {
    const Grid& g = S.grid;
    double best = 0;
    for (int k = -g.K_z; k <= g.K_z; ++k)
        for (int l = -g.K_z; l <= g.K_z; ++l) {
            if (l == 0) continue;
            for (int jxi = 0; jxi < g.N_v; jxi += stride)
                for (int jeta = 0; jeta < g.N_v; jeta += stride) {
                    double xi = g.xi(jxi), eta = g.xi(jeta);
                    double R = std::abs(S.q11R(k, l, jxi, jeta));
                    if (R == 0) continue;
                    double num = R * ((xi - S.t * l) * (xi - S.t * l) + (double)l * l);
                    double den = std::exp(-std::abs(k - l) - std::abs(xi - eta)) *
                                 (std::abs(xi) + std::abs(k) + 1);
                    best = std::max(best, num / den);
                }
        }
    return best;
}

inline std::string symbol_slice_csv(const SymbolTable& S, int i, int j, int k, int l,
                                    int stride = 8) {
    std::string out = "k,l,xi,eta,re,im\n";
    char buf[200];
    for (int jxi = 0; jxi < S.grid.N_v; jxi += stride)
        for (int jeta = 0; jeta < S.grid.N_v; jeta += stride) {
            cplx v = S.q(i, j, k, l, jxi, jeta);
            if (v == cplx(0, 0)) continue;
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g\n", k, l,
                          S.grid.xi(jxi), S.grid.xi(jeta), v.real(), v.imag());
            out += buf;
        }
    return out;
}

}  // namespace orrlab

#endif
