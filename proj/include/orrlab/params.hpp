#ifndef ORRLAB_PARAMS_HPP
#define ORRLAB_PARAMS_HPP

// Parameter regime for the shear-flow echo laboratory: the base frequency k0,
// the small parameters (sigma, alpha, eps0, eps1), the derived resonance
// frequency eta0 = 2 k0^2 alpha / (pi eps0), the critical-time partition
// t_m = 2 eta0 / (2m+1), and the growth-product / Stirling analysis.

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace orrlab {

enum class Regime { desk, paper };

// Named integer exponents used throughout (kept as constants; the desk regime
// never raises anything to these powers, they parameterize the norms/weights).
struct PaperConstants {
    int N0 = 9000;   // Sobolev exponent of the headline theorem
    int N1 = 60000;  // log-correction power in the Gevrey-type weight kappa
    int N2 = 30;     // sigma = (log k0)^(-N2)
    int N3 = 30000;  // eps0  = (log k0)^(-N3)
    int N  = 3000;
    int Nprime = 30;
};

struct ParamSet {
    Regime regime = Regime::desk;
    int k0 = 0;

    double sigma = 0, alpha = 0, eps0 = 0;
    double eps1 = 0;           // 0 means "not set"
    double eta0 = 0;
    double T0 = 0, T1 = 0, T2 = 0, T3 = 0;
    double k1 = 0, k2 = 0, k3 = 0;   // truncated to integer parts; double to
                                     // survive paper-scale magnitudes

    // log-scale copies, authoritative in the paper regime where the linear
    // values can underflow (eps0 = (log k0)^(-30000)).
    double log_sigma = 0, log_eps0 = 0, log_eta0 = 0;
    double log_alpha_m1 = 0;  // log(alpha - 1); alpha itself can round to 1.0 at paper scale

    PaperConstants consts;

    // never-pinned absolute constants of the analysis, configurable
    double C = 1.0, D = 10.0, E = 100.0;
    double C0 = 10.0;  // cutoff scale of the background profile phi_b

    double t_m(double m) const { return 2.0 * eta0 / (2.0 * m + 1.0); }

    std::string serialize() const;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}
}  // namespace detail

// Build a fully-derived ParamSet.
//  desk regime: overrides must supply sigma, alpha, eps0 (eps1, C, D, E, C0
//               optional); eta0 and the T_j are derived.
//  paper regime: no overrides permitted; sigma/alpha/eps0 are functions of k0
//               and the linear fields may underflow -- the log fields hold.
inline ParamSet derive_params(int k0, Regime regime,
                              const std::map<std::string, double>& overrides = {}) {
    using detail::require;
    require(k0 >= 2, "derive_params: k0 >= 2 required");
    ParamSet p;
    p.regime = regime;
    p.k0 = k0;

    if (regime == Regime::paper) {
        require(overrides.empty(), "derive_params: paper regime permits no overrides");
        const double llk = std::log(std::log((double)k0));
        p.log_sigma = -p.consts.N2 * llk;
        p.log_eps0 = -p.consts.N3 * llk;
        p.sigma = std::exp(p.log_sigma);
        p.eps0 = std::exp(p.log_eps0);  // may underflow to 0; log field is authoritative
        p.alpha = 1.0 + std::exp(2.0 * p.log_sigma);
        p.log_alpha_m1 = 2.0 * p.log_sigma;
        p.log_eta0 = std::log(2.0 * k0 * (double)k0 * p.alpha / M_PI) - p.log_eps0;
        p.eta0 = std::exp(p.log_eta0);  // may overflow; log field is authoritative
    } else {
        auto get = [&](const char* key) {
            auto it = overrides.find(key);
            require(it != overrides.end(),
                    std::string("derive_params: desk regime requires override '") + key + "'");
            return it->second;
        };
        p.sigma = get("sigma");
        p.alpha = get("alpha");
        p.eps0 = get("eps0");
        require(p.sigma > 0 && p.sigma < 1, "derive_params: sigma in (0,1) violated");
        require(p.alpha > 1, "derive_params: alpha > 1 violated");
        require(p.eps0 > 0 && p.eps0 < 1, "derive_params: eps0 in (0,1) violated");
        for (auto& [key, val] : overrides) {
            if (key == "eps1") p.eps1 = val;
            else if (key == "C") p.C = val;
            else if (key == "D") p.D = val;
            else if (key == "E") p.E = val;
            else if (key == "C0") p.C0 = val;
            else if (key != "sigma" && key != "alpha" && key != "eps0")
                throw std::invalid_argument("derive_params: unknown override '" + key + "'");
        }
        p.eta0 = 2.0 * k0 * (double)k0 * p.alpha / (M_PI * p.eps0);
        p.log_alpha_m1 = std::log(p.alpha - 1.0);
        p.log_sigma = std::log(p.sigma);
        p.log_eps0 = std::log(p.eps0);
        p.log_eta0 = std::log(p.eta0);
        if (p.eps1 != 0) {
            require(p.eps1 > 0 && p.eps1 < 1, "derive_params: eps1 in (0,1) violated");
        }
    }

    // k1 = (1-sigma) k0,  k2 = eps0^{-1/40} sqrt(eta0),  k3 = eps0^{-1/40} k0,
    // truncated to integer parts.
    p.k1 = std::floor((1.0 - p.sigma) * k0);
    p.k2 = std::floor(std::exp(-p.log_eps0 / 40.0 + 0.5 * p.log_eta0));
    p.k3 = std::floor(std::exp(-p.log_eps0 / 40.0) * k0);
    p.T0 = p.t_m(k0);
    p.T1 = p.t_m(p.k1);
    p.T2 = p.t_m(p.k2);
    p.T3 = p.t_m(p.k3);

    if (regime == Regime::desk) {
        require(p.k1 >= 1, "derive_params: k1 = floor((1-sigma)k0) >= 1 violated");
        require(p.k2 > k0, "derive_params: ordering k2 > k0 violated");
        require(p.T1 > p.T0 && p.T0 > p.T2, "derive_params: ordering T1 > T0 > T2 violated");
    } else if (p.eps1 != 0) {
        // eps1 in [e^{-2 sigma^2 k0}, e^{-sigma^2 k0/2}] -- only meaningful at
        // paper scale; desk runs need eps1 << eps0 instead.
        const double s2k = p.sigma * p.sigma * k0;
        require(p.eps1 >= std::exp(-2.0 * s2k) && p.eps1 <= std::exp(-0.5 * s2k),
                "derive_params: eps1 outside [e^{-2 sigma^2 k0}, e^{-sigma^2 k0/2}]");
    }
    return p;
}

inline std::string ParamSet::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "k0 = " << k0 << "\n"
       << "sigma = " << sigma << "\n"
       << "alpha = " << alpha << "\n"
       << "eps0 = " << eps0 << "\n"
       << "eps1 = " << eps1 << "\n"
       << "eta0 = " << eta0 << "\n"
       << "T0 = " << T0 << "\n"
       << "T1 = " << T1 << "\n"
       << "T2 = " << T2 << "\n"
       << "T3 = " << T3 << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Critical-time partition: interval [t_m, t_{m-1}] contains exactly the
// resonance eta0/m.

struct CriticalGrid {
    int m_lo = 0, m_hi = 0;
    std::map<int, double> times;       // m -> t_m
    std::map<int, double> resonances;  // m -> eta0/m
};

inline CriticalGrid critical_times(const ParamSet& p, int m_lo, int m_hi) {
    if (m_lo < 1) throw std::domain_error("critical_times: m_lo >= 1 required");
    if (m_lo > m_hi) throw std::invalid_argument("critical_times: m_lo <= m_hi required");
    CriticalGrid g;
    g.m_lo = m_lo;
    g.m_hi = m_hi;
    for (int m = m_lo; m <= m_hi; ++m) {
        g.times[m] = p.t_m(m);
        g.resonances[m] = p.eta0 / m;
        // containment eta0/m in [t_m, t_{m-1}]: exact identities
        //   eta0/m - t_m = eta0/(m(2m+1)),  t_{m-1} - eta0/m = eta0/(m(2m-1)).
        if (!(g.resonances[m] >= g.times[m] && g.resonances[m] <= p.t_m(m - 1)))
            throw std::logic_error("critical_times: containment invariant failed");
    }
    return g;
}

// ---------------------------------------------------------------------------
// The amplification envelope nu of the upper-bound iteration.
//
// The two prescribed branches, (1+eps0^{2/5}) max(1,beta) for beta >= 2 eps0^{3/5}
// and the plateau 1 + 4 eps0^{3/5} for beta <= eps0^{3/5}, can cross for
// moderate eps0 (any eps0 > 4^{-5}); nu must be non-decreasing, so we take the
// monotone envelope: the upper branch is floored at the plateau value.

inline double nu(double beta, double eps0) {
    if (beta < 0 || beta > 2) throw std::domain_error("nu: beta outside [0,2]");
    if (!(eps0 > 0 && eps0 < 1)) throw std::domain_error("nu: eps0 outside (0,1)");
    const double lo = std::pow(eps0, 3.0 / 5.0);
    const double plateau = 1.0 + 4.0 * lo;
    auto upper = [&](double b) { return (1.0 + std::pow(eps0, 2.0 / 5.0)) * std::max(1.0, b); };
    if (beta >= 2.0 * lo) return std::max(upper(beta), plateau);
    if (beta <= lo) return plateau;
    const double hi_val = std::max(upper(2.0 * lo), plateau);
    return plateau + (hi_val - plateau) * (beta - lo) / lo;  // linear bridge
}

// ---------------------------------------------------------------------------
// Growth product of the cascade: sum of log max(1, alpha k0^2 / m^2) (or of
// log nu(alpha k0^2/m^2)) over a range of critical intervals, in log domain.

enum class GrowthMode { max1, with_nu };

inline double growth_product(const ParamSet& p, int m_lo, int m_hi,
                             GrowthMode mode = GrowthMode::max1) {
    if (m_lo > m_hi) return 0.0;  // empty product
    if (m_lo < 1) throw std::domain_error("growth_product: m_lo >= 1 required");
    double s = 0.0;
    for (int m = m_lo; m <= m_hi; ++m) {
        const double am = p.alpha * p.k0 * (double)p.k0 / ((double)m * m);
        if (mode == GrowthMode::max1)
            s += std::log(std::max(1.0, am));
        else
            s += std::log(nu(std::min(am, 2.0), p.eps0));
    }
    return s;
}

// b(sigma) = sigma^2 + 4 sigma^3 / 3; the growth product over ((1-sigma)k0, k0]
// equals b(sigma) k0 + O(sigma^4 k0) by Stirling.
inline double stirling_b(double sigma) {
    return sigma * sigma + 4.0 * sigma * sigma * sigma / 3.0;
}

}  // namespace orrlab

#endif
