#ifndef ORRLAB_DIAGNOSTICS_HPP
#define ORRLAB_DIAGNOSTICS_HPP

// Weighted-energy functionals and localization reports evaluated on states
// and trajectories:
//   - the resonance weights A_{k,beta}(t,xi) = 1/((xi-kt)^2 + beta^2 k^2) and
//     their exponentially summed form A_*;
//   - the energies M0 (shifted-analytic exponents tau lambda0(t)), M1 (plain
//     A-weights), M2 (A-weights at scale Q = eps0^{-1} (log k0)^{-3});
//   - the lambda/H/mu weight system for the localization energy M(t), with
//     mu(t,xi) computed by adaptive quadrature refined at the resonance
//     times xi/q of the Lorentzian spikes of H;
//   - the physical-localization functional zeta-mass with
//     zeta(v) = exp(|v| / log+(|v|)^3).
// All exponential weights are evaluated in the log domain; energies saturate
// (with a flag) instead of overflowing.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "orrlab/evolve.hpp"
#include "orrlab/grid.hpp"
#include "orrlab/norms.hpp"
#include "orrlab/params.hpp"

namespace orrlab {

// ---------------------------------------------------------------------------
// A-weights
// ---------------------------------------------------------------------------

enum class EnergyPreset { M0, M1, M2 };

struct WeightSpec {
    double beta = 1.0;     // weight scale; eps0^{-1/2} for A_k, Q for the M2 family
    int k_star = 0;        // frequency shift (M0 only)
    double eta_star = 0.0;
    double tau = 1.0;      // exponent scale in [1/2, 2] (M0 only)
    double T0 = 1.0;       // lambda0 reference time

    void validate() const {
        if (!(beta >= 1.0)) throw std::invalid_argument("WeightSpec: beta >= 1 required");
        if (!(tau >= 0.5 && tau <= 2.0))
            throw std::invalid_argument("WeightSpec: tau in [1/2, 2] required");
        if (!(T0 > 0)) throw std::invalid_argument("WeightSpec: T0 > 0 required");
    }

    static WeightSpec M0(const ParamSet& p, int k_star, double eta_star, double tau = 1.0) {
        return {1.0 / std::sqrt(p.eps0), k_star, eta_star, tau, p.T0};
    }
    static WeightSpec M1(const ParamSet& p) { return {1.0 / std::sqrt(p.eps0), 0, 0.0, 1.0, p.T0}; }
    // Q = eps0^{-1} (log k0)^{-3}
    static WeightSpec M2(const ParamSet& p) {
        double Q = 1.0 / (p.eps0 * std::pow(std::log((double)p.k0), 3));
        return {std::max(1.0, Q), 0, 0.0, 1.0, p.T0};
    }
};

// lambda0(t) = 1 - |log t - log T0| / (log T0)^2
inline double lambda0(double t, double T0) {
    if (!(t > 0)) throw std::invalid_argument("lambda0: t > 0 required");
    double l = std::log(T0);
    return 1.0 - std::abs(std::log(t) - l) / (l * l);
}

// A_{k,beta}(t,xi); the k = 0 branch is 1/(xi^2 + beta^2)
inline double weight_A(double t, int k, double xi, const WeightSpec& spec) {
    if (k == 0) return 1.0 / (xi * xi + spec.beta * spec.beta);
    double d = xi - k * t;
    return 1.0 / (d * d + spec.beta * spec.beta * (double)k * (double)k);
}

// A_*(t,xi) = sum_k e^{-2|k|} A_k(t,xi) over the representable range |k| <= kmax
inline double weight_A_star(double t, double xi, const WeightSpec& spec, int kmax) {
    double s = 0;
    for (int k = -kmax; k <= kmax; ++k) s += std::exp(-2.0 * std::abs(k)) * weight_A(t, k, xi, spec);
    return s;
}

// ---------------------------------------------------------------------------
// The Fourier-weighted energies M0 / M1 / M2.
//
//   M = sum_k int A_k(t,xi) W0(k,xi) |f^(k,xi)|^2 dxi
//     + sum_{j=h,theta} int A_*(t,xi) W*(xi) |g_j^(0,xi)|^2 dxi
// with W0 = exp(tau lambda0(t) (|k-k*| + |xi-eta*|)), W* the same at k = 0,
// for the M0 preset, and W == 1 for M1/M2 (which differ only in beta).
// ---------------------------------------------------------------------------

inline double energy(const StateTriple& g, double t, EnergyPreset preset, const WeightSpec& spec,
                     bool* saturated = nullptr) {
    spec.validate();
    const Grid& gr = g.f.grid;
    const double ldxi = std::log(gr.dxi());
    const double lam = preset == EnergyPreset::M0 ? spec.tau * lambda0(t, spec.T0) : 0.0;
    bool sat = false;
    double sum = 0;

    auto add = [&](double logw, double a2) {
        if (a2 == 0) return;
        double le = logw + std::log(a2) + ldxi;
        if (le > 700.0) {
            sat = true;
            sum = std::numeric_limits<double>::max();
            return;
        }
        if (sum < std::numeric_limits<double>::max()) sum += std::exp(le);
    };

    for (int k = -gr.K_z; k <= gr.K_z; ++k) {
        const cplx* row = g.f.row(k);
        for (int j = 0; j < gr.N_v; ++j) {
            double xi = gr.xi(j);
            double logw = std::log(weight_A(t, k, xi, spec)) +
                          lam * (std::abs(k - spec.k_star) + std::abs(xi - spec.eta_star));
            add(logw, std::norm(row[j]));
        }
    }
    for (const SpectralField* F : {&g.h, &g.theta}) {
        const cplx* row = F->row(0);
        for (int j = 0; j < gr.N_v; ++j) {
            double xi = gr.xi(j);
            double logw = std::log(weight_A_star(t, xi, spec, gr.K_z)) +
                          lam * (std::abs(spec.k_star) + std::abs(xi - spec.eta_star));
            add(logw, std::norm(row[j]));
        }
    }
    if (saturated) *saturated = sat;
    return sum;
}

// ---------------------------------------------------------------------------
// The lambda/H/mu localization weight system.
//
// Below the reference time T0 (the [T2,T0] regime):
//   H(t,xi)   = E (eps0 + eps0 eta0 / t^2) + C0^{1/3} sum_{|k| > k0/2} H(t,k,xi)
//   lambda(t) = C0^{2/3} - C0^{1/3} |t - T0| / T0
//   mu(t,xi)  = -int_t^{T0} H(t',xi) dt'
// Above T0 (the [T0,T1] regime):
//   H(t,xi)   = eps0 + sum_{|k-k0| <= 2 sigma k0} H(t,k,xi)
//   lambda(t) = 1 - E (t - T0) / (sqrt(sigma) T0)
//   mu(t,xi)  = -E int_{T0}^t H(t',xi) dt'
// with H(t,k,xi) = sum_{q != 0} e^{-2|k-q|} eps0 eta0 / ((xi-tq)^2 + q^2) in
// both regimes, and weight exponent mu + lambda (|k-k0| + s |xi-eta0|) where
// s = 1 below T0 and sqrt(sigma) above.
//
// C0 and E here are weight-system constants, chosen independently of the
// background's C0; desk-scale guidance in the tests.
// ---------------------------------------------------------------------------

namespace detail {

template <typename F>
inline double simpson_adapt(const F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_adapt(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_adapt(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

template <typename F>
inline double adaptive_simpson(const F& f, double a, double b, double tol) {
    if (b <= a) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return simpson_adapt(f, a, b, fa, fm, fb, whole, tol * std::max(1.0, std::abs(whole)), 24);
}

}  // namespace detail

struct WeightSystem {
    double eps0 = 0.1, eta0 = 1.0, T0 = 1.0, sigma = 0.3;
    int k0 = 2;
    double C0 = 1.0;  // weight-system constant (lambda scale)
    double E = 4.0;   // weight-system constant (mu scale)
    int qmax = 16;    // truncation of the q-sum in H(t,k,xi)
    int kcap = 32;    // truncation of the k-sum in H(t,xi)
    double quad_tol = 1e-8;

    static WeightSystem from(const ParamSet& p, double C0w = 1.0, double Ew = 4.0) {
        WeightSystem w;
        w.eps0 = p.eps0;
        w.eta0 = p.eta0;
        w.T0 = p.T0;
        w.sigma = p.sigma;
        w.k0 = p.k0;
        w.C0 = C0w;
        w.E = Ew;
        return w;
    }

    double H_k(double t, int k, double xi) const {
        double s = 0;
        for (int q = -qmax; q <= qmax; ++q) {
            if (q == 0) continue;
            double d = xi - t * q;
            s += std::exp(-2.0 * std::abs(k - q)) * eps0 * eta0 / (d * d + (double)q * q);
        }
        return s;
    }

    // the two regimes have different formulas; `below` selects explicitly so
    // integrals never sample the wrong branch at the shared endpoint T0
    double H(double t, double xi, bool below) const {
        if (below) {
            double s = E * (eps0 + eps0 * eta0 / (t * t));
            double inner = 0;
            for (int k = -kcap; k <= kcap; ++k)
                if (2 * std::abs(k) > k0) inner += H_k(t, k, xi);
            return s + std::cbrt(C0) * inner;
        }
        double s = eps0;
        int band = (int)std::ceil(2.0 * sigma * k0);
        for (int k = k0 - band; k <= k0 + band; ++k) s += H_k(t, k, xi);
        return s;
    }
    double H(double t, double xi) const { return H(t, xi, t <= T0); }

    double lambda(double t) const {
        if (t <= T0) return std::pow(C0, 2.0 / 3.0) - std::cbrt(C0) * (T0 - t) / T0;
        return 1.0 - E * (t - T0) / (std::sqrt(sigma) * T0);
    }

    double mu(double t, double xi) const {
        if (t == T0) return 0.0;
        double a = std::min(t, T0), b = std::max(t, T0);
        // split at the resonance times xi/q inside [a,b], then refine
        std::set<double> cuts = {a, b};
        for (int q = -qmax; q <= qmax; ++q) {
            if (q == 0) continue;
            double tc = xi / q;
            if (tc > a && tc < b) cuts.insert(tc);
        }
        const bool below = t < T0;
        auto f = [&](double s) { return H(s, xi, below); };
        double I = 0;
        double prev = *cuts.begin();
        for (auto it = std::next(cuts.begin()); it != cuts.end(); ++it) {
            I += detail::adaptive_simpson(f, prev, *it, quad_tol);
            prev = *it;
        }
        return t < T0 ? -I : -E * I;
    }

    double log_weight(double t, int k, double xi) const {
        double s = t <= T0 ? 1.0 : std::sqrt(sigma);
        return mu(t, xi) + lambda(t) * (std::abs(k - k0) + s * std::abs(xi - eta0));
    }

};

// M(t): all three components, all k rows, weight exp(log_weight)
inline double weighted_energy(const StateTriple& g, double t, const WeightSystem& w,
                              bool* saturated = nullptr) {
    const Grid& gr = g.f.grid;
    const double ldxi = std::log(gr.dxi());
    bool sat = false;
    double sum = 0;
    // mu is k-independent: evaluate once per xi slot
    std::vector<double> mu_slot(gr.N_v);
    for (int j = 0; j < gr.N_v; ++j) mu_slot[j] = w.mu(t, gr.xi(j));
    const double lam = w.lambda(t);
    const double s = t <= w.T0 ? 1.0 : std::sqrt(w.sigma);
    for (const SpectralField* F : {&g.f, &g.h, &g.theta})
        for (int k = -gr.K_z; k <= gr.K_z; ++k) {
            const cplx* row = F->row(k);
            for (int j = 0; j < gr.N_v; ++j) {
                double a2 = std::norm(row[j]);
                if (a2 == 0) continue;
                double le = mu_slot[j] +
                            lam * (std::abs(k - w.k0) + s * std::abs(gr.xi(j) - w.eta0)) +
                            std::log(a2) + ldxi;
                if (le > 700.0) {
                    sat = true;
                    sum = std::numeric_limits<double>::max();
                    break;
                }
                if (sum < std::numeric_limits<double>::max()) sum += std::exp(le);
            }
        }
    if (saturated) *saturated = sat;
    return sum;
}

// measured Holder constant of mu(t,.) over sampled xi pairs (finite by
// construction; the magnitude is reported, not asserted)
inline double mu_holder_constant(const WeightSystem& w, double t, double xi_lo, double xi_hi,
                                 int samples) {
    if (samples < 2) throw std::invalid_argument("mu_holder_constant: samples >= 2");
    double best = 0;
    double prev_xi = xi_lo, prev_mu = w.mu(t, xi_lo);
    for (int i = 1; i < samples; ++i) {
        double xi = xi_lo + (xi_hi - xi_lo) * i / (samples - 1);
        double m = w.mu(t, xi);
        best = std::max(best, std::abs(m - prev_mu) / std::abs(xi - prev_xi));
        prev_xi = xi;
        prev_mu = m;
    }
    return best;
}

// ---------------------------------------------------------------------------
// zeta physical localization: zeta(v) = exp(|v| / log+(|v|)^3)
// ---------------------------------------------------------------------------

inline double zeta_weight(double v) {
    double a = std::abs(v);
    double l = log_plus(a);
    return std::exp(a / (l * l * l));
}

// sum_k int zeta(k0 sqrt(sigma) v) |beta_k(v)|^2 dv over physical v-profiles
inline double zeta_mass(const std::map<int, std::vector<cplx>>& beta, const Grid& g,
                        const ParamSet& p) {
    const double a = p.k0 * std::sqrt(p.sigma);
    const double dv = g.L_v / g.N_v;
    double s = 0;
    for (const auto& [k, row] : beta) {
        (void)k;
        if ((int)row.size() != g.N_v)
            throw std::invalid_argument("zeta_mass: profile length != N_v");
        for (int j = 0; j < g.N_v; ++j) s += zeta_weight(a * g.v_coord(j)) * std::norm(row[j]);
    }
    return s * dv;
}

// extract physical v-profiles from the f rows in the band |k - kc| <= half
inline std::map<int, std::vector<cplx>> beta_profiles(const SpectralField& f, int kc, int half) {
    std::map<int, std::vector<cplx>> out;
    const Grid& g = f.grid;
    for (int k = std::max(-g.K_z, kc - half); k <= std::min(g.K_z, kc + half); ++k)
        out[k] = detail::row_to_physical(g, f.row(k));
    return out;
}

// ---------------------------------------------------------------------------
// EnergyReport: one diagnostics row per snapshot
// ---------------------------------------------------------------------------

struct EnergyReport {
    double t = 0;
    double M0 = 0, M1 = 0, M2 = 0;
    double gevrey = 0, sobolev2 = 0, l2 = 0;
    double far_mass = 0;  // Fourier mass outside the (k0, eta0) box, relative
    double zeta = 0;      // zeta-weighted physical mass of the near-k0 band
    bool saturated = false;
};

inline EnergyReport diagnose(const StateTriple& g, double t, const ParamSet& p,
                             double box_k = 0, double box_xi = 0, int N1_desk = 3) {
    EnergyReport r;
    r.t = t;
    bool s0 = false, s1 = false, s2 = false;
    r.M0 = energy(g, t, EnergyPreset::M0, WeightSpec::M0(p, p.k0, p.eta0), &s0);
    r.M1 = energy(g, t, EnergyPreset::M1, WeightSpec::M1(p), &s1);
    r.M2 = energy(g, t, EnergyPreset::M2, WeightSpec::M2(p), &s2);
    r.saturated = s0 || s1 || s2;
    // the paper-scale N1 makes the log correction collapse the weight to 1;
    // reports use a desk-scale power so the norm actually separates scales
    r.gevrey = norm(g.f, NormSpec::gevrey_star(N1_desk));
    r.sobolev2 = norm(g.f, NormSpec::sobolev(2.0));
    r.l2 = st_norm(g);
    double bk = box_k > 0 ? box_k : std::max(2.0, 0.5 * p.k0);
    double bx = box_xi > 0 ? box_xi : std::max(8.0, 2.0 * p.eta0 / 3.0);
    // mass outside the union of the (k0, eta0) box and its conjugate mirror
    // (real states carry half their mass on the mirrored frequencies)
    {
        const Grid& gr = g.f.grid;
        double outside = 0, total2 = 0;
        for (int k = -gr.K_z; k <= gr.K_z; ++k)
            for (int j = 0; j < gr.N_v; ++j) {
                double a2 = std::norm(g.f.at(k, j));
                if (a2 == 0) continue;
                total2 += a2;
                double xi = gr.xi(j);
                bool in_pos = std::abs(k - p.k0) <= bk && std::abs(xi - p.eta0) <= bx;
                bool in_neg = std::abs(k + p.k0) <= bk && std::abs(xi + p.eta0) <= bx;
                if (!in_pos && !in_neg) outside += a2;
            }
        r.far_mass = total2 > 0 ? outside / total2 : 0.0;
    }
    int half = std::max(1, (int)std::lround(p.sigma * p.k0));
    r.zeta = zeta_mass(beta_profiles(g.f, p.k0, half), g.f.grid, p);
    return r;
}

inline std::string energy_csv_header() {
    return "t,M0,M1,M2,gevrey,sobolev2,l2,far_mass,zeta,saturated\n";
}

inline std::string energy_csv_row(const EnergyReport& r) {
    char buf[320];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  r.t, r.M0, r.M1, r.M2, r.gevrey, r.sobolev2, r.l2, r.far_mass, r.zeta,
                  r.saturated ? 1 : 0);
    return buf;
}

// ---------------------------------------------------------------------------
// Soft trend reports: differential-inequality shapes are logged, not asserted
// ---------------------------------------------------------------------------

struct TrendReport {
    std::vector<double> times;
    std::vector<double> values;
    double worst_drop = 0.0;  // largest relative decrease between consecutive samples
    double worst_rise = 0.0;  // largest relative increase
};

template <typename F>
inline TrendReport trend(const Trajectory& tr, const F& functional) {
    TrendReport r;
    for (const auto& s : tr.snaps) {
        r.times.push_back(s.t);
        r.values.push_back(functional(s));
    }
    for (size_t i = 1; i < r.values.size(); ++i) {
        double a = r.values[i - 1], b = r.values[i];
        if (a > 0) {
            r.worst_drop = std::max(r.worst_drop, (a - b) / a);
            r.worst_rise = std::max(r.worst_rise, (b - a) / a);
        }
    }
    return r;
}

}  // namespace orrlab

#endif
