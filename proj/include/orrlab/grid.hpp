#ifndef ORRLAB_GRID_HPP
#define ORRLAB_GRID_HPP

// Truncated Fourier representation of functions on T_z x (periodized) R_v.
//
// Conventions (fixed for the whole artifact):
//   F(z,v) = sum_k sum_xi Fhat(k,xi) e^{i(kz + xi v)} dxi,   dxi = 2pi/L_v,
// matching the continuum transform Fhat = (2pi)^{-2} iint e^{-i(kz+xi v)} F.
// The L2 norm is taken on the Fourier side:
//   |F|_2^2 = sum_k sum_xi |Fhat|^2 dxi  ( = (2pi)^{-2} iint |F|^2 dz dv ).
//
// Physical sample arrays use FFT ("wrapped") ordering in both directions:
// index j corresponds to coordinate (j < N/2 ? j : j-N) * (period/N), so that
// no phase factors appear in the transforms.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "orrlab/params.hpp"

namespace orrlab {

using cplx = std::complex<double>;

struct Grid {
    int K_z = 0;      // z-modes k in [-K_z, K_z]
    int N_v = 0;      // number of v lattice points (power of two)
    double L_v = 2 * M_PI;
    double dealias = 2.0 / 3.0;

    Grid() = default;
    Grid(int Kz, int Nv, double Lv) : K_z(Kz), N_v(Nv), L_v(Lv) {
        if (Kz < 0 || Nv < 2 || (Nv & (Nv - 1)) != 0 || Lv <= 0)
            throw std::invalid_argument("Grid: need K_z >= 0, N_v a power of two, L_v > 0");
    }

    int n_rows() const { return 2 * K_z + 1; }
    double dxi() const { return 2 * M_PI / L_v; }
    double xi_max() const { return M_PI * N_v / L_v; }
    // signed lattice index of slot j
    int xi_index(int j) const { return j <= N_v / 2 ? j : j - N_v; }
    double xi(int j) const { return xi_index(j) * dxi(); }
    int slot_of(int m) const { return m >= 0 ? m : m + N_v; }  // signed index -> slot
    double v_coord(int j) const { return xi_index(j) * (L_v / N_v); }

    bool operator==(const Grid& o) const {
        return K_z == o.K_z && N_v == o.N_v && L_v == o.L_v;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }

    // resolvability of the seeded frequency when attached to a parameter set
    void bind_check(const ParamSet& p, double margin = 8.0) const {
        if (xi_max() < 2 * p.eta0 + margin)
            throw std::invalid_argument("Grid: pi N_v / L_v < 2 eta0 + margin");
    }
};

class SpectralField {
  public:
    Grid grid;
    bool real_symmetric = true;
    double t = 0;  // carried time stamp (optional)

    SpectralField() = default;
    explicit SpectralField(const Grid& g, bool real_sym = true)
        : grid(g), real_symmetric(real_sym), c_(g.n_rows() * (size_t)g.N_v, cplx(0, 0)) {}

    size_t size() const { return c_.size(); }
    cplx* data() { return c_.data(); }
    const cplx* data() const { return c_.data(); }

    // k in [-K_z, K_z], j a v-lattice slot in [0, N_v)
    cplx& at(int k, int j) { return c_[(size_t)(k + grid.K_z) * grid.N_v + j]; }
    const cplx& at(int k, int j) const { return c_[(size_t)(k + grid.K_z) * grid.N_v + j]; }
    cplx* row(int k) { return c_.data() + (size_t)(k + grid.K_z) * grid.N_v; }
    const cplx* row(int k) const { return c_.data() + (size_t)(k + grid.K_z) * grid.N_v; }

    void set_zero() { std::fill(c_.begin(), c_.end(), cplx(0, 0)); }

    SpectralField& operator+=(const SpectralField& o) { return axpy(1.0, o); }
    SpectralField& operator-=(const SpectralField& o) { return axpy(-1.0, o); }
    SpectralField& operator*=(cplx s) {
        for (auto& z : c_) z *= s;
        return *this;
    }
    SpectralField& axpy(cplx a, const SpectralField& o) {
        check_same_grid(o);
        for (size_t i = 0; i < c_.size(); ++i) c_[i] += a * o.c_[i];
        real_symmetric = real_symmetric && o.real_symmetric && a.imag() == 0;
        return *this;
    }

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(cplx s, SpectralField a) { return a *= s; }

    // d/dz: multiply mode k by ik
    SpectralField dz() const {
        SpectralField r(*this);
        for (int k = -grid.K_z; k <= grid.K_z; ++k) {
            cplx ik(0, k);
            cplx* p = r.row(k);
            for (int j = 0; j < grid.N_v; ++j) p[j] *= ik;
        }
        return r;
    }
    // d/dv: multiply by i xi
    SpectralField dv() const {
        SpectralField r(*this);
        for (int k = -grid.K_z; k <= grid.K_z; ++k) {
            cplx* p = r.row(k);
            for (int j = 0; j < grid.N_v; ++j) p[j] *= cplx(0, grid.xi(j));
        }
        return r;
    }
    // (d/dv - t d/dz): multiply by i (xi - t k)
    SpectralField dv_shear(double time) const {
        SpectralField r(*this);
        for (int k = -grid.K_z; k <= grid.K_z; ++k) {
            cplx* p = r.row(k);
            for (int j = 0; j < grid.N_v; ++j) p[j] *= cplx(0, grid.xi(j) - time * k);
        }
        return r;
    }

    double l2_norm() const {
        double s = 0;
        for (const auto& z : c_) s += std::norm(z);
        return std::sqrt(s * grid.dxi());
    }

    cplx mean_mode() const { return at(0, 0) * grid.dxi(); }  // (2pi)^{-2} iint F

    // Hermitian symmetry defect, relative
    double reality_defect() const {
        double num = 0, den = 0;
        for (int k = -grid.K_z; k <= grid.K_z; ++k)
            for (int j = 0; j < grid.N_v; ++j) {
                int jm = (grid.N_v - j) % grid.N_v;
                cplx d = at(k, j) - std::conj(at(-k, jm));
                num += std::norm(d);
                den += std::norm(at(k, j));
            }
        return den == 0 ? 0 : std::sqrt(num / den);
    }
    void enforce_reality() {
        for (int k = 0; k <= grid.K_z; ++k)
            for (int j = 0; j < grid.N_v; ++j) {
                int jm = (grid.N_v - j) % grid.N_v;
                cplx avg = 0.5 * (at(k, j) + std::conj(at(-k, jm)));
                at(k, j) = avg;
                at(-k, jm) = std::conj(avg);
            }
        real_symmetric = true;
    }

    // embed into a larger grid (same dxi), exact
    SpectralField resample(const Grid& g2) const {
        if (std::abs(g2.dxi() - grid.dxi()) > 1e-12 * grid.dxi())
            throw std::invalid_argument("resample: xi lattices differ");
        SpectralField r(g2, real_symmetric);
        r.t = t;
        int Kc = std::min(grid.K_z, g2.K_z);
        int Mc = std::min(grid.N_v, g2.N_v) / 2;
        for (int k = -Kc; k <= Kc; ++k)
            for (int m = -Mc + 1; m < Mc; ++m)
                r.at(k, g2.slot_of(m)) = at(k, grid.slot_of(m));
        return r;
    }

    void check_same_grid(const SpectralField& o) const {
        if (grid != o.grid) throw std::invalid_argument("SpectralField: grid mismatch");
    }

  private:
    std::vector<cplx> c_;
};

enum class Projector { P0, Pneq0 };

inline SpectralField project(const SpectralField& F, Projector which) {
    SpectralField r(F.grid, F.real_symmetric);
    r.t = F.t;
    if (which == Projector::P0) {
        for (int j = 0; j < F.grid.N_v; ++j) r.at(0, j) = F.at(0, j);
    } else {
        r = F;
        for (int j = 0; j < F.grid.N_v; ++j) r.at(0, j) = 0;
    }
    return r;
}

// Weighted mass of coefficients outside a box around (k*, eta*):
//   sum_{outside} e^{2 rate (|k-k*| + |xi-eta*|)} |Fhat|^2 dxi
inline double localization_mass(const SpectralField& F, double k_star, double eta_star,
                                double dk_box, double dxi_box, double rate) {
    if (dk_box <= 0 || dxi_box <= 0)
        throw std::invalid_argument("localization_mass: box must be positive");
    const Grid& g = F.grid;
    double s = 0;
    for (int k = -g.K_z; k <= g.K_z; ++k)
        for (int j = 0; j < g.N_v; ++j) {
            double ddk = std::abs(k - k_star), ddx = std::abs(g.xi(j) - eta_star);
            if (ddk <= dk_box && ddx <= dxi_box) continue;
            double a2 = std::norm(F.at(k, j));
            if (a2 == 0) continue;
            double le = 2 * rate * (ddk + ddx) + std::log(a2) + std::log(g.dxi());
            if (le > 700)
                throw std::overflow_error("localization_mass: weight overflow at (k,xi)=(" +
                                          std::to_string(k) + "," + std::to_string(g.xi(j)) + ")");
            s += std::exp(le);
        }
    return s;
}

// deterministic random band-limited test field
inline SpectralField random_field(const Grid& g, int k_band, int xi_band, uint64_t seed,
                                  bool real_sym = true) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    SpectralField F(g, real_sym);
    int kb = std::min(k_band, g.K_z), xb = std::min(xi_band, g.N_v / 2 - 1);
    for (int k = -kb; k <= kb; ++k)
        for (int m = -xb; m <= xb; ++m) F.at(k, g.slot_of(m)) = cplx(U(rng), U(rng));
    if (real_sym) F.enforce_reality();
    return F;
}

}  // namespace orrlab

#endif
