#ifndef ORRLAB_INTERP_HPP
#define ORRLAB_INTERP_HPP

// Periodic cubic Hermite interpolation on the uniform (wrapped) lattice.
// Node derivatives come from the 4th-order centered stencil, giving O(h^4)
// interpolation of smooth data; an optional Hyman-style clamp keeps the
// interpolant monotone wherever the data is (used for coordinate maps).

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace orrlab {

class PeriodicInterp {
  public:
    PeriodicInterp() = default;
    // samples f_i at x = i*step (mod period), i = 0..n-1, period = n*step;
    // the wrapped lattice ordering of grid.hpp is exactly this layout
    PeriodicInterp(double step, std::vector<double> samples, bool monotone_clamp = false)
        : h_(step), n_((int)samples.size()), f_(std::move(samples)), d_(n_) {
        if (n_ < 4 || step <= 0) throw std::invalid_argument("PeriodicInterp: n >= 4, step > 0");
        period_ = n_ * h_;
        auto fp = [&](int i) { return f_[((i % n_) + n_) % n_]; };
        for (int i = 0; i < n_; ++i)
            d_[i] = (fp(i - 2) - 8 * fp(i - 1) + 8 * fp(i + 1) - fp(i + 2)) / (12 * h_);
        if (monotone_clamp) {
            for (int i = 0; i < n_; ++i) {
                double dl = (fp(i) - fp(i - 1)) / h_, dr = (fp(i + 1) - fp(i)) / h_;
                if (dl * dr <= 0) {
                    d_[i] = 0;
                } else {
                    double cap = 3 * std::min(std::abs(dl), std::abs(dr));
                    if (std::abs(d_[i]) > cap) d_[i] = (d_[i] > 0 ? cap : -cap);
                }
            }
        }
    }

    double period() const { return period_; }

    double eval(double x) const {
        auto [i, s] = locate(x);
        double s2 = s * s, s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * f_[i] + (s3 - 2 * s2 + s) * h_ * d_[i] +
               (-2 * s3 + 3 * s2) * f_[(i + 1) % n_] + (s3 - s2) * h_ * d_[(i + 1) % n_];
    }

    double deriv(double x) const {
        auto [i, s] = locate(x);
        double s2 = s * s;
        return ((6 * s2 - 6 * s) * f_[i] + (3 * s2 - 4 * s + 1) * h_ * d_[i] +
                (-6 * s2 + 6 * s) * f_[(i + 1) % n_] + (3 * s2 - 2 * s) * h_ * d_[(i + 1) % n_]) /
               h_;
    }

  private:
    std::pair<int, double> locate(double x) const {
        double u = std::fmod(x, period_);
        if (u < 0) u += period_;
        int i = (int)std::floor(u / h_);
        if (i >= n_) i = n_ - 1;  // u == period_ after roundoff
        return {i, u / h_ - i};
    }

    double h_ = 1, period_ = 1;
    int n_ = 0;
    std::vector<double> f_, d_;
};

// complex samples: interpolate real and imaginary parts independently
class PeriodicInterpC {
  public:
    PeriodicInterpC() = default;
    PeriodicInterpC(double step, const std::vector<std::complex<double>>& samples) {
        std::vector<double> re(samples.size()), im(samples.size());
        for (size_t i = 0; i < samples.size(); ++i) {
            re[i] = samples[i].real();
            im[i] = samples[i].imag();
        }
        re_ = PeriodicInterp(step, std::move(re));
        im_ = PeriodicInterp(step, std::move(im));
    }
    std::complex<double> eval(double x) const { return {re_.eval(x), im_.eval(x)}; }

  private:
    PeriodicInterp re_, im_;
};

// Solve x + G(x) = target for the unique root of a strictly increasing shift
// map (G periodic, 1 + G' > 0). Newton from x = target with a bisection
// safeguard on the bracket [target - max|G|, target + max|G|].
inline double invert_shift_map(const PeriodicInterp& G, double target, double tol = 1e-13,
                               int max_iter = 200) {
    double x = target;
    double lo = target - 0, hi = target + 0;
    {  // bracket from the sampled amplitude of G
        double amp = std::abs(G.eval(target)) + 1;
        lo = target - amp;
        hi = target + amp;
        while (lo + G.eval(lo) > target) lo -= amp;
        while (hi + G.eval(hi) < target) hi += amp;
    }
    for (int it = 0; it < max_iter; ++it) {
        double r = x + G.eval(x) - target;
        if (std::abs(r) <= tol * (1 + std::abs(target))) return x;
        if (r > 0) hi = x;
        else lo = x;
        double dp = 1 + G.deriv(x);
        double xn = dp > 1e-6 ? x - r / dp : 0.5 * (lo + hi);
        if (xn <= lo || xn >= hi) xn = 0.5 * (lo + hi);
        x = xn;
    }
    throw std::runtime_error("invert_shift_map: no convergence (map nearly singular?)");
}

}  // namespace orrlab

#endif
