#ifndef ORRLAB_NORMS_HPP
#define ORRLAB_NORMS_HPP

// The norm family: Gevrey-type G*_lambda with the log-corrected weight
// kappa(k,xi) = (|k|+|xi|)^{1/2} / (log+(|k|+|xi|))^{N1}, log+(x) = log(2+x),
// plus analytic A_lambda, Sobolev H^s and plain L2. All weights are evaluated
// in the log domain per coefficient, with saturation errors instead of inf.

#include <cmath>
#include <stdexcept>
#include <string>

#include "orrlab/grid.hpp"

namespace orrlab {

inline double log_plus(double x) { return std::log(2.0 + std::abs(x)); }

inline double kappa(int k, double xi, int N1) {
    double s = std::abs((double)k) + std::abs(xi);
    return std::sqrt(s) / std::pow(log_plus(s), N1);
}

enum class NormKind { gevrey_star, gevrey_lambda, analytic, sobolev, l2 };

struct NormSpec {
    NormKind kind = NormKind::l2;
    double lambda = 1.0;
    double s = 0.0;
    int N1 = 1;

    static NormSpec gevrey_star(int N1) { return {NormKind::gevrey_star, 1.0, 0.0, N1}; }
    static NormSpec gevrey(double lambda, int N1) {
        return {NormKind::gevrey_lambda, lambda, 0.0, N1};
    }
    static NormSpec analytic(double lambda) { return {NormKind::analytic, lambda, 0.0, 0}; }
    static NormSpec sobolev(double s) { return {NormKind::sobolev, 1.0, s, 0}; }
    static NormSpec l2() { return {NormKind::l2, 0.0, 0.0, 0}; }

    void validate() const {
        if ((kind == NormKind::gevrey_star || kind == NormKind::gevrey_lambda ||
             kind == NormKind::analytic) &&
            !(lambda > 0))
            throw std::invalid_argument("NormSpec: lambda > 0 required");
        if (kind == NormKind::sobolev && s < 0)
            throw std::invalid_argument("NormSpec: s >= 0 required");
    }

    // log of the squared weight e^{2 lambda kappa} (etc.) at a mode
    double log_weight2(int k, double xi) const {
        switch (kind) {
            case NormKind::gevrey_star:
                return 2.0 * kappa(k, xi, N1);
            case NormKind::gevrey_lambda:
                return 2.0 * lambda * kappa(k, xi, N1);
            case NormKind::analytic:
                return 2.0 * lambda * (std::abs((double)k) + std::abs(xi));
            case NormKind::sobolev:
                return s * std::log(1.0 + k * (double)k + xi * xi);
            case NormKind::l2:
                return 0.0;
        }
        return 0.0;
    }
};

inline double norm(const SpectralField& F, const NormSpec& spec) {
    spec.validate();
    const Grid& g = F.grid;
    const double ldxi = std::log(g.dxi());
    double sum = 0;
    for (int k = -g.K_z; k <= g.K_z; ++k)
        for (int j = 0; j < g.N_v; ++j) {
            double a2 = std::norm(F.at(k, j));
            if (a2 == 0) continue;
            double le = spec.log_weight2(k, g.xi(j)) + std::log(a2) + ldxi;
            if (le > 700.0)
                throw std::overflow_error(
                    "norm: weighted term overflow at (k,xi)=(" + std::to_string(k) + "," +
                    std::to_string(g.xi(j)) + ")");
            sum += std::exp(le);
        }
    return std::sqrt(sum);
}

}  // namespace orrlab

#endif
