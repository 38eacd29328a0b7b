#ifndef ORRLAB_ECHO_HPP
#define ORRLAB_ECHO_HPP

// The critical-interval echo cascade: construction of the background profile
// phi_b = e^{-(v/C0)^18}, the perturbation profile phi_p (spectrum in [-1,1],
// unit L2 norm, built as an N_conv-fold convolution of box indicators — the
// truncated Denjoy-Carleman construction giving e^{-|v|/log^2|v|}-type decay),
// the smooth cutoffs psi (1 on |z| <= 1/6, 0 on |z| >= 1/4), the seeded state
// beta_{k0}(v) = (eps1/2) e^{i eta0 v} phi_p(k0 sqrt(sigma) v), and the
// per-critical-interval recurrence
//   forward  (t_m -> t_{m-1}, k1 < m <= k0):
//       beta_{m +- 1} +-= (alpha k0^2 eta*/(m^2 eta0)) phi_b . beta_m
//   backward (t_{m-1} -> t_m, k0 < m <= k2): direction-reversed signs plus the
//       theta-coupling rows k = +-1 fed by (coef/pi) dv phi_b . beta_theta.
// The forward orientation (+ on the m+1 row) is fixed by direct comparison
// against the linearized PDE, which anti-correlates with the opposite choice.
// Error terms are deliberately absent from the model; they are measured by the
// PDE comparison (compare.hpp).
//
// Profile norms here are physical L2(dv) norms on the periodized lattice,
// matching the per-row L2 bookkeeping of the cascade analysis.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "orrlab/fft.hpp"
#include "orrlab/grid.hpp"
#include "orrlab/params.hpp"

namespace orrlab {

namespace detail {

// Unit-integral N_conv-fold convolution of centered boxes with widths
// a_n = c/(n log^2(n+2)), c fixed so sum a_n = 1 exactly; the guard checks the
// normalized widths really sum to 1 before use. Sampled on a uniform grid of
// M points spanning [-span/2, span/2]; returns samples (trapezoid-integrable).
struct FineProfile {
    double s0 = 0, ds = 0;
    std::vector<double> f;
    double eval(double s) const {  // linear interpolation, 0 outside
        double u = (s - s0) / ds;
        if (u < 0 || u >= (double)f.size() - 1) return 0;
        int i = (int)u;
        double w = u - i;
        return (1 - w) * f[i] + w * f[i + 1];
    }
};

inline FineProfile box_cascade(int N_conv, double total_width, int M, double span) {
    if (N_conv < 3) throw std::invalid_argument("box_cascade: N_conv >= 3 required");
    std::vector<double> raw(N_conv);
    double s = 0;
    for (int n = 1; n <= N_conv; ++n) {
        raw[n - 1] = 1.0 / (n * std::pow(std::log(n + 2.0), 2));
        s += raw[n - 1];
    }
    double check = 0;
    for (auto& a : raw) {
        a /= s;
        check += a;
    }
    if (check < 0.99 || check > 1.01)
        throw std::runtime_error("box_cascade: normalized widths sum " + std::to_string(check) +
                                 " outside [0.99, 1.01]");
    for (auto& a : raw) a *= total_width;

    FineProfile p;
    p.ds = span / M;
    p.s0 = -span / 2;
    p.f.assign(M + 1, 0.0);
    // exact start: the trapezoid box_{a1} * box_{a2} (heights normalized to
    // unit integral), then iterated moving averages for the remaining boxes
    double a1 = raw[0], a2 = raw[1];
    for (int i = 0; i <= M; ++i) {
        double x = std::abs(p.s0 + i * p.ds);
        double hi = (a1 + a2) / 2, lo = (a1 - a2) / 2;
        if (x >= hi) continue;
        p.f[i] = (x <= lo ? 1.0 : (hi - x) / (hi - lo)) / a1;
    }
    std::vector<double> cum(M + 2), next(M + 1);
    for (int n = 2; n < N_conv; ++n) {
        double a = raw[n];
        cum[0] = 0;
        for (int i = 0; i <= M; ++i)
            cum[i + 1] = cum[i] + (i < M ? 0.5 * (p.f[i] + p.f[i + 1]) * p.ds : 0);
        auto C = [&](double x) {  // cumulative integral up to coordinate x
            double u = (x - p.s0) / p.ds;
            if (u <= 0) return 0.0;
            if (u >= M) return cum[M + 1];
            int i = (int)u;
            double w = u - i;
            double seg = 0.5 * (p.f[i] + (1 - w) * p.f[i] + w * p.f[i + 1]) * (w * p.ds);
            return cum[i] + seg;
        };
        for (int i = 0; i <= M; ++i) {
            double x = p.s0 + i * p.ds;
            next[i] = (C(x + a / 2) - C(x - a / 2)) / a;
        }
        p.f.swap(next);
    }
    // the convolution of centered boxes is even; enforce the symmetry exactly
    // (removes the residual roundoff skew of the sweep above)
    for (int i = 0; 2 * i <= M; ++i) {
        double avg = 0.5 * (p.f[i] + p.f[M - i]);
        p.f[i] = p.f[M - i] = avg;
    }
    return p;
}

}  // namespace detail

struct ProfileLibrary {
    double C0 = 10;
    int N_conv = 30;
    detail::FineProfile phat;      // spectrum of phi_p, supported in [-1/2, 1/2]
    detail::FineProfile psi_ramp;  // raw psi samples on its support

    double phi_b(double v) const { return std::exp(-std::pow(v / C0, 18)); }
    double dphi_b(double v) const {
        return -18.0 * std::pow(v / C0, 17) / C0 * std::exp(-std::pow(v / C0, 18));
    }
    double phi_p_hat(double s) const { return phat.eval(s); }
    double psi_raw(double z) const { return psi_ramp.eval(z); }
    double psi(double z) const {  // clamped to the prescribed plateaus
        double a = std::abs(z);
        if (a <= 1.0 / 6) return 1.0;
        if (a >= 1.0 / 4) return 0.0;
        return psi_raw(z);
    }
    // physical profile phi_p(v) = int phat(s) e^{isv} ds (real, even)
    double phi_p(double v) const {
        double acc = 0;
        for (size_t i = 0; i + 1 < phat.f.size(); ++i) {
            double sa = phat.s0 + i * phat.ds, sb = sa + phat.ds;
            acc += 0.5 * (phat.f[i] * std::cos(sa * v) + phat.f[i + 1] * std::cos(sb * v)) *
                   phat.ds;
        }
        return acc;
    }
};

inline ProfileLibrary build_profiles(const ParamSet& p, int N_conv = 30) {
    if (N_conv < 8) throw std::invalid_argument("build_profiles: N_conv >= 8 required");
    ProfileLibrary lib;
    lib.C0 = p.C0;
    lib.N_conv = N_conv;
    const int M = 1 << 16;
    lib.phat = detail::box_cascade(N_conv, 1.0, M, 1.2);
    // normalize ||phi_p||_{L2} = 1: by Plancherel, 2 pi int |phat|^2 ds = 1
    double q = 0;
    for (size_t i = 0; i + 1 < lib.phat.f.size(); ++i)
        q += 0.5 * (lib.phat.f[i] * lib.phat.f[i] + lib.phat.f[i + 1] * lib.phat.f[i + 1]) *
             lib.phat.ds;
    double scale = 1.0 / std::sqrt(2 * M_PI * q);
    for (auto& v : lib.phat.f) v *= scale;

    // psi = indicator[-5/24, 5/24] * (unit-integral kernel of support 1/24):
    // equals 1 on |z| <= 1/6 and 0 on |z| >= 1/4
    detail::FineProfile kern = detail::box_cascade(N_conv, 1.0 / 12, M / 8, 0.1);
    std::vector<double> cum(kern.f.size());
    cum[0] = 0;
    for (size_t i = 0; i + 1 < kern.f.size(); ++i)
        cum[i + 1] = cum[i] + 0.5 * (kern.f[i] + kern.f[i + 1]) * kern.ds;
    auto K = [&](double x) {
        double u = (x - kern.s0) / kern.ds;
        if (u <= 0) return 0.0;
        if (u >= (double)kern.f.size() - 1) return cum.back();
        int i = (int)u;
        double w = u - i;
        return (1 - w) * cum[i] + w * cum[i + 1];
    };
    lib.psi_ramp.ds = 0.6 / M * 8;
    lib.psi_ramp.s0 = -0.3;
    lib.psi_ramp.f.resize(M / 8 + 1);
    for (size_t i = 0; i < lib.psi_ramp.f.size(); ++i) {
        double z = lib.psi_ramp.s0 + i * lib.psi_ramp.ds;
        lib.psi_ramp.f[i] = K(z + 5.0 / 24) - K(z - 5.0 / 24);
    }
    // psi is even; enforce it exactly on the symmetric sample grid
    for (size_t i = 0, n = lib.psi_ramp.f.size(); 2 * i < n; ++i) {
        double avg = 0.5 * (lib.psi_ramp.f[i] + lib.psi_ramp.f[n - 1 - i]);
        lib.psi_ramp.f[i] = lib.psi_ramp.f[n - 1 - i] = avg;
    }
    return lib;
}

// ---------------------------------------------------------------------------

enum class EchoDirection { forward, backward };

// physical L2(dv) norm of a sampled v-profile
inline double profile_l2(const Grid& g, const std::vector<cplx>& row) {
    double s = 0;
    for (const auto& z : row) s += std::norm(z);
    return std::sqrt(s * g.L_v / g.N_v);
}

struct RecurrenceState {
    Grid grid;
    std::map<int, std::vector<cplx>> beta;  // k -> physical v-profile
    std::vector<cplx> beta_h, beta_theta;
    int m = 0;  // index of the critical time the state currently sits at
    double k_star = 0, eta_star = 0;
    EchoDirection dir = EchoDirection::forward;

    const std::vector<cplx>& row(int k) const {
        static const std::vector<cplx> empty;
        auto it = beta.find(k);
        return it == beta.end() ? empty : it->second;
    }
    double F() const {  // sup_k ||beta_k||_2
        double best = 0;
        for (auto& [k, r] : beta) best = std::max(best, profile_l2(grid, r));
        return best;
    }
    double B() const {  // ||beta_m||_2
        auto it = beta.find(m);
        return it == beta.end() ? 0.0 : profile_l2(grid, it->second);
    }
};

// seeded data at T0: beta_{k0}(v) = (eps1/2) e^{i eta0 v} phi_p(k0 sqrt(sigma) v),
// built spectrally so the Fourier support lies exactly in
// [eta* - k0 sqrt(sigma), eta* + k0 sqrt(sigma)].
inline RecurrenceState seed_state(const ParamSet& p, const ProfileLibrary& lib, const Grid& g,
                                  double k_star = 0, double eta_star = 0,
                                  EchoDirection dir = EchoDirection::forward) {
    if (k_star == 0) k_star = p.k0;
    if (eta_star == 0) eta_star = p.eta0;
    if (p.eps1 <= 0) throw std::invalid_argument("seed_state: eps1 must be set");
    const double a = p.k0 * std::sqrt(p.sigma);
    if (eta_star + a >= g.xi_max() || eta_star - a <= -g.xi_max())
        throw std::invalid_argument("seed_state: grid cannot represent eta* +- k0 sqrt(sigma)");
    if (a < 4 * g.dxi())
        throw std::invalid_argument("seed_state: spectral width k0 sqrt(sigma) unresolved");

    RecurrenceState s;
    s.grid = g;
    s.m = (int)std::lround(k_star);
    s.k_star = k_star;
    s.eta_star = eta_star;
    s.dir = dir;
    std::vector<cplx> hat(g.N_v, cplx(0, 0));
    for (int j = 0; j < g.N_v; ++j) {
        double u = (g.xi(j) - eta_star) / a;
        if (std::abs(u) <= 0.5) hat[j] = (p.eps1 / 2) * lib.phi_p_hat(u) / a;
    }
    // beta(v) = int hat e^{i xi v} dxi -> unnormalized backward FFT times dxi
    for (auto& z : hat) z *= g.dxi();
    s.beta[s.m] = detail::fft1d(std::move(hat), FFTW_BACKWARD);
    s.beta_h.assign(g.N_v, cplx(0, 0));
    s.beta_theta.assign(g.N_v, cplx(0, 0));
    return s;
}

// One critical-interval update. theta_row_sign exposes the open sign of the
// theta-coupling rows (+1 in the backward relation as stated; the eta*-scaled
// variant carries -1); the PDE comparison arbitrates.
inline RecurrenceState recurrence_step(RecurrenceState s, const ProfileLibrary& lib,
                                       const ParamSet& p, double theta_row_sign = 1.0) {
    const Grid& g = s.grid;
    const bool fwd = s.dir == EchoDirection::forward;
    const int mu = fwd ? s.m : s.m + 1;
    if (fwd && !(mu > p.k1 && mu <= p.k0))
        throw std::out_of_range("recurrence_step: forward requires k1 < m <= k0");
    if (!fwd && !(mu > p.k0 && mu <= p.k2))
        throw std::out_of_range("recurrence_step: backward requires k0 < m <= k2");

    const double coef = p.alpha * p.k0 * (double)p.k0 * (s.eta_star / p.eta0) / ((double)mu * mu);
    auto ensure = [&](int k) -> std::vector<cplx>& {
        auto& r = s.beta[k];
        if (r.empty()) r.assign(g.N_v, cplx(0, 0));
        return r;
    };
    if (s.beta.count(mu)) {
        std::vector<cplx> src = s.beta.at(mu);  // copy: targets may alias
        for (int j = 0; j < g.N_v; ++j) src[j] *= lib.phi_b(g.v_coord(j));
        // forward (recurrence toward t_{m-1}): beta_{m+-1} +-= coef src
        // backward (toward t_m): beta_{m+-1} -+= coef src
        double up = fwd ? coef : -coef;
        auto& plus = ensure(mu + 1);
        auto& minus = ensure(mu - 1);
        for (int j = 0; j < g.N_v; ++j) {
            plus[j] += up * src[j];
            minus[j] -= up * src[j];
        }
    }
    if (!fwd) {  // theta-coupling rows k = +-1
        double any = 0;
        for (auto& z : s.beta_theta) any += std::norm(z);
        if (any > 0) {
            auto& r1 = ensure(1);
            auto& rm1 = ensure(-1);
            const double c = theta_row_sign * coef / M_PI;
            for (int j = 0; j < g.N_v; ++j) {
                cplx inc = c * lib.dphi_b(g.v_coord(j)) * s.beta_theta[j];
                r1[j] += inc;
                rm1[j] += inc;
            }
        }
    }
    s.m = fwd ? mu - 1 : mu;
    return s;
}

struct GrowthRow {
    int m = 0;
    double t_m = 0, B = 0, F = 0, ratio = 0, model_coeff = 0, pde_gap = 0;
};

struct GrowthResult {
    RecurrenceState state;
    std::vector<GrowthRow> rows;  // rows[0] is the seed, then one per step
};

inline GrowthResult run_growth(RecurrenceState s0, int steps, const ProfileLibrary& lib,
                               const ParamSet& p, double theta_row_sign = 1.0) {
    GrowthResult r;
    auto record = [&](const RecurrenceState& s, double prevB, bool first) {
        GrowthRow row;
        row.m = s.m;
        row.t_m = 2.0 * s.eta_star / (2.0 * s.m + 1.0);
        row.B = s.B();
        row.F = s.F();
        row.ratio = first || prevB == 0 ? 0 : row.B / prevB;
        int mu = s.dir == EchoDirection::forward ? s.m + 1 : s.m;
        row.model_coeff =
            p.alpha * p.k0 * (double)p.k0 * (s.eta_star / p.eta0) / ((double)mu * mu);
        r.rows.push_back(row);
        return row.B;
    };
    double prevB = record(s0, 0, true);
    for (int i = 0; i < steps; ++i) {
        s0 = recurrence_step(std::move(s0), lib, p, theta_row_sign);
        prevB = record(s0, prevB, false);
    }
    r.state = std::move(s0);
    return r;
}

inline std::string growth_csv(const GrowthResult& r) {
    std::string out = "m,t_m,B_m,F_m,ratio,model_coeff,pde_gap\n";
    char buf[256];
    for (const auto& w : r.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", w.m, w.t_m,
                      w.B, w.F, w.ratio, w.model_coeff, w.pde_gap);
        out += buf;
    }
    return out;
}

}  // namespace orrlab

#endif
