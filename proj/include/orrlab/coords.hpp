#ifndef ORRLAB_COORDS_HPP
#define ORRLAB_COORDS_HPP

// The change of variables (x,y) <-> (z,v) behind the whole laboratory:
//   z = x - t v(t,y),   v(t,y) = y - (gamma(y) + int_1^t dy^{-1} P0 omega dtau)/t,
//   f(t,z,v) = omega(t,x,y),  h = dy v - 1,  theta = dt v,
// its converse (reconstructing omega from (f,h,theta)), and the conserved
// constraint chi = t(h+1) dv theta + P0 f + h together with int h/(h+1) dv = 0.
//
// dy^{-1} is spectral division by i*xi on the zero-mean profile, with the
// free constant fixed so the antiderivative vanishes at the domain end
// y = -L_v/2 (the periodized surrogate of "vanishes at infinity").
// Compositions use monotone-safe periodic cubic interpolation (interp.hpp);
// the map itself is inverted by Newton on its interpolant, so grid values
// v(y*) = v_j hold exactly and oscillatory phases are applied in closed form.

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "orrlab/fft.hpp"
#include "orrlab/grid.hpp"
#include "orrlab/interp.hpp"

namespace orrlab {

// omega(t,x,y) sampled on a tensor grid: x period 2pi with N_x columns
// (x_i = 2pi i/N_x), y periodized to grid.L_v on the wrapped v lattice
// (y_j = grid.v_coord(j)).
struct PhysicalVorticity {
    Grid grid;  // supplies the y lattice and the retained |k| <= K_z x-modes
    int N_x = 0;
    double t = 1;
    std::vector<double> data;  // data[ix * grid.N_v + j]

    PhysicalVorticity() = default;
    PhysicalVorticity(const Grid& g, int nx, double time)
        : grid(g), N_x(nx), t(time), data((size_t)nx * g.N_v, 0.0) {
        if (nx < 2 * g.K_z + 2)
            throw std::invalid_argument("PhysicalVorticity: N_x must resolve |k| <= K_z");
    }

    double& at(int ix, int j) { return data[(size_t)ix * grid.N_v + j]; }
    double at(int ix, int j) const { return data[(size_t)ix * grid.N_v + j]; }
    double x_coord(int ix) const { return 2 * M_PI * ix / N_x; }
    double y_coord(int j) const { return grid.v_coord(j); }

    double integral() const {  // iint omega dx dy by the trapezoid rule (exact, periodic)
        double s = 0;
        for (double v : data) s += v;
        return s * (2 * M_PI / N_x) * (grid.L_v / grid.N_v);
    }
    double max_abs() const {
        double m = 0;
        for (double v : data) m = std::max(m, std::abs(v));
        return m;
    }
    double l2() const {  // (2pi)^{-1} sqrt(iint omega^2), matching the spectral-side norm
        double s = 0;
        for (double v : data) s += v * v;
        return std::sqrt(s * (2 * M_PI / N_x) * (grid.L_v / grid.N_v)) / (2 * M_PI);
    }
};

struct CoordinateMap {
    Grid grid;
    double t = 1;
    std::vector<double> v_of_y;  // v(t, y_j) at y lattice slots
    std::vector<double> y_of_v;  // y with v(t,y) = v_j, at v lattice slots
    std::vector<double> dvdy;    // dy v at y lattice slots (= h(v(y)) + 1)
    std::vector<double> gamma;   // the gauge profile at y lattice slots

    // max_j | dy v (y_j) * dv y (v(y_j)) - 1 |
    double jacobian_defect() const {
        std::vector<double> dydv(grid.N_v);
        for (int j = 0; j < grid.N_v; ++j) dydv[j] = 1.0 / dvdy_at_v(j);
        PeriodicInterp I(grid.L_v / grid.N_v, dydv);
        double worst = 0;
        for (int j = 0; j < grid.N_v; ++j)
            worst = std::max(worst, std::abs(dvdy[j] * I.eval(v_of_y[j]) - 1.0));
        return worst;
    }

  private:
    // dv/dy expressed at the v lattice: interpolate dvdy(y) at y_of_v
    double dvdy_at_v(int j) const {
        PeriodicInterp I(grid.L_v / grid.N_v, dvdy);
        return I.eval(y_of_v[j]);
    }
};

struct StateTriple {
    SpectralField f;
    SpectralField h;      // k = 0 only
    SpectralField theta;  // k = 0 only
    double t = 1;
    std::pair<double, double> residual{0, 0};  // constraint residual at construction
};

namespace detail {

// spectral antiderivative of a (near) zero-mean periodic profile, anchored to
// vanish at the domain end y = -L_v/2 (slot N/2); the mean is dropped and the
// unpaired Nyquist mode zeroed
inline std::vector<double> dy_inverse(const Grid& g, const std::vector<double>& f) {
    const int N = g.N_v;
    std::vector<cplx> a(N);
    for (int j = 0; j < N; ++j) a[j] = f[j];
    a = fft1d(std::move(a), FFTW_FORWARD);
    a[0] = 0;
    a[N / 2] = 0;
    for (int m = -N / 2 + 1; m <= N / 2 - 1; ++m)
        if (m != 0) a[g.slot_of(m)] /= cplx(0, m * g.dxi());
    a = fft1d(std::move(a), FFTW_BACKWARD);
    std::vector<double> out(N);
    for (int j = 0; j < N; ++j) out[j] = a[j].real() / N;
    double anchor = out[N / 2];
    for (double& v : out) v -= anchor;
    return out;
}

// spectral derivative of a periodic profile (Nyquist zeroed)
inline std::vector<double> dy_deriv(const Grid& g, const std::vector<double>& f) {
    const int N = g.N_v;
    std::vector<cplx> a(N);
    for (int j = 0; j < N; ++j) a[j] = f[j];
    a = fft1d(std::move(a), FFTW_FORWARD);
    a[N / 2] = 0;
    for (int j = 0; j < N; ++j) a[j] *= cplx(0, g.xi(j));
    a = fft1d(std::move(a), FFTW_BACKWARD);
    std::vector<double> out(N);
    for (int j = 0; j < N; ++j) out[j] = a[j].real() / N;
    return out;
}

// x-Fourier coefficient k of one y row: (1/N_x) sum_i omega(x_i, y_j) e^{-ik x_i}
inline std::vector<cplx> x_mode(const PhysicalVorticity& w, int k) {
    std::vector<cplx> out(w.grid.N_v, cplx(0, 0));
    for (int ix = 0; ix < w.N_x; ++ix) {
        cplx ph = std::exp(cplx(0, -k * w.x_coord(ix))) / (double)w.N_x;
        const double* row = w.data.data() + (size_t)ix * w.grid.N_v;
        for (int j = 0; j < w.grid.N_v; ++j) out[j] += ph * row[j];
    }
    return out;
}

inline void require_profile(const SpectralField& F, const char* name) {
    for (int k = -F.grid.K_z; k <= F.grid.K_z; ++k)
        if (k != 0)
            for (int j = 0; j < F.grid.N_v; ++j)
                if (std::abs(F.at(k, j)) > 0)
                    throw std::invalid_argument(std::string(name) + ": nonzero z-modes");
}

}  // namespace detail

// (first, second) = ( || t(h+1) dv theta + P0 f + h ||_2 , | int h/(h+1) dv | )
inline std::pair<double, double> constraint_residual(const StateTriple& g, double t) {
    const Grid& gr = g.f.grid;
    detail::require_profile(g.h, "constraint_residual: h");
    detail::require_profile(g.theta, "constraint_residual: theta");
    std::vector<cplx> hp = detail::row_to_physical(gr, g.h.row(0));
    std::vector<cplx> dth = detail::row_to_physical(gr, g.theta.dv().row(0));
    std::vector<cplx> f0 = detail::row_to_physical(gr, g.f.row(0));
    std::vector<cplx> chi(gr.N_v);
    double second = 0;
    for (int j = 0; j < gr.N_v; ++j) {
        chi[j] = t * (hp[j] + 1.0) * dth[j] + f0[j] + hp[j];
        second += (hp[j] / (hp[j] + 1.0)).real();
    }
    second = std::abs(second) * gr.L_v / gr.N_v;
    std::vector<cplx> chat = detail::row_to_spectral(gr, chi);
    double s = 0;
    for (auto& z : chat) s += std::norm(z);
    return {std::sqrt(s * gr.dxi()), second};
}

// forward change of variables at one time. `gamma` and `accum` (the running
// time integral int_1^t dy^{-1} P0 omega dtau) are sampled on the y lattice;
// both vanish at the domain end.
inline std::pair<StateTriple, CoordinateMap> forward_transform(
    const PhysicalVorticity& w, const std::vector<double>& gamma,
    const std::vector<double>& accum) {
    const Grid& g = w.grid;
    const int N = g.N_v;
    const double t = w.t;
    if (t < 1) throw std::invalid_argument("forward_transform: t >= 1 required");
    if ((int)gamma.size() != N || (int)accum.size() != N)
        throw std::invalid_argument("forward_transform: gamma/accum must live on the y lattice");
    if (std::abs(w.integral()) > 1e-8 * (1 + w.max_abs()) * (2 * M_PI * g.L_v))
        throw std::invalid_argument("forward_transform: omega has nonzero mean");
    if (std::abs(gamma[N / 2] + accum[N / 2]) > 1e-8 * (1 + std::abs(gamma[N / 2])))
        throw std::invalid_argument(
            "forward_transform: gamma + accum must vanish at the domain end");

    // the shift A(y) = (gamma + accum)/t, so v = y - A(y)
    std::vector<double> A(N);
    for (int j = 0; j < N; ++j) A[j] = (gamma[j] + accum[j]) / t;
    std::vector<double> dA = detail::dy_deriv(g, A);

    CoordinateMap cm;
    cm.grid = g;
    cm.t = t;
    cm.gamma = gamma;
    cm.v_of_y.resize(N);
    cm.dvdy.resize(N);
    for (int j = 0; j < N; ++j) {
        cm.v_of_y[j] = g.v_coord(j) - A[j];
        cm.dvdy[j] = 1.0 - dA[j];
        if (cm.dvdy[j] <= 0)
            throw std::domain_error("forward_transform: singular map (dy v <= 0)");
    }

    // invert the map: y*(v_j) solves y - A(y) = v_j
    const double step = g.L_v / N;
    std::vector<double> negA(N);
    for (int j = 0; j < N; ++j) negA[j] = -A[j];
    PeriodicInterp shift(step, negA, /*monotone_clamp=*/false);
    cm.y_of_v.resize(N);
    for (int j = 0; j < N; ++j) cm.y_of_v[j] = invert_shift_map(shift, g.v_coord(j));

    // profiles on the y lattice
    std::vector<cplx> p0 = detail::x_mode(w, 0);
    std::vector<double> p0r(N), theta_y(N), h_y(N);
    for (int j = 0; j < N; ++j) p0r[j] = p0[j].real();
    std::vector<double> B = detail::dy_inverse(g, p0r);
    for (int j = 0; j < N; ++j) {
        theta_y[j] = (A[j] - B[j]) / t;  // dt v = A/t - (dy^{-1} P0 omega)/t
        h_y[j] = cm.dvdy[j] - 1.0;
    }

    // compose onto the v lattice through y*(v)
    PeriodicInterp Ih(step, h_y), Ith(step, theta_y);
    StateTriple out;
    out.t = t;
    out.f = SpectralField(g, true);
    out.h = SpectralField(g, true);
    out.theta = SpectralField(g, true);
    out.f.t = out.h.t = out.theta.t = t;
    std::vector<cplx> hv(N), thv(N);
    for (int j = 0; j < N; ++j) {
        hv[j] = Ih.eval(cm.y_of_v[j]);
        thv[j] = Ith.eval(cm.y_of_v[j]);
    }
    auto hrow = detail::row_to_spectral(g, hv);
    auto throw_ = detail::row_to_spectral(g, thv);
    std::copy(hrow.begin(), hrow.end(), out.h.row(0));
    std::copy(throw_.begin(), throw_.end(), out.theta.row(0));

    // f_k(v_j) = omega_k(y*(v_j)) e^{i k t v_j}; v(y*) = v_j exactly by the
    // Newton inversion, so the oscillatory phase never enters interpolation
    std::vector<cplx> fk(N);
    for (int k = 0; k <= g.K_z; ++k) {
        std::vector<cplx> wk = k == 0 ? p0 : detail::x_mode(w, k);
        PeriodicInterpC Iw(step, wk);
        for (int j = 0; j < N; ++j)
            fk[j] = Iw.eval(cm.y_of_v[j]) * std::exp(cplx(0, k * t * g.v_coord(j)));
        auto frow = detail::row_to_spectral(g, fk);
        std::copy(frow.begin(), frow.end(), out.f.row(k));
        if (k > 0)  // omega is real: f_{-k}(xi) = conj(f_k(-xi))
            for (int j = 0; j < N; ++j)
                out.f.at(-k, (N - j) % N) = std::conj(frow[j]);
    }
    out.f.enforce_reality();
    out.h.enforce_reality();
    out.theta.enforce_reality();
    out.residual = constraint_residual(out, t);
    return {std::move(out), std::move(cm)};
}

// converse construction: rebuild omega(t,x,y) = f(t, x - t v(y), v(y)) with
// v(y) integrated from dy v = h(v) + 1 and v - y vanishing at the domain end.
// The returned map's gamma is the single-snapshot gauge t*(y - v(y)) (i.e.
// what forward_transform expects with a zero accumulator at this time).
inline std::pair<PhysicalVorticity, CoordinateMap> inverse_transform(
    const StateTriple& st, double t, int N_x = 0, double constraint_tol = 1e-6) {
    const Grid& g = st.f.grid;
    const int N = g.N_v;
    if (t < 1) throw std::invalid_argument("inverse_transform: t >= 1 required");
    detail::require_profile(st.h, "inverse_transform: h");
    detail::require_profile(st.theta, "inverse_transform: theta");
    if (N_x == 0) N_x = next_pow2(std::max(8, 3 * g.K_z + 1));

    std::vector<cplx> hp = detail::row_to_physical(g, st.h.row(0));
    std::vector<double> r(N), hreal(N);
    double second = 0;
    for (int j = 0; j < N; ++j) {
        hreal[j] = hp[j].real();
        if (hreal[j] <= -1.0)
            throw std::domain_error("inverse_transform: h <= -1 somewhere (singular map)");
        r[j] = hreal[j] / (hreal[j] + 1.0);
        second += r[j];
    }
    second *= g.L_v / N;
    if (std::abs(second) > constraint_tol)
        throw std::invalid_argument("inverse_transform: int h/(h+1) dv = " +
                                    std::to_string(second) + " violates the map constraint");

    // y(v) = v - H(v) with H the anchored antiderivative of h/(h+1)
    std::vector<double> H = detail::dy_inverse(g, r);
    CoordinateMap cm;
    cm.grid = g;
    cm.t = t;
    cm.y_of_v.resize(N);
    for (int j = 0; j < N; ++j) cm.y_of_v[j] = g.v_coord(j) - H[j];

    // invert to v(y) on the y lattice
    const double step = g.L_v / N;
    std::vector<double> negH(N);
    for (int j = 0; j < N; ++j) negH[j] = -H[j];
    PeriodicInterp shift(step, negH, /*monotone_clamp=*/false);
    cm.v_of_y.resize(N);
    cm.dvdy.resize(N);
    cm.gamma.resize(N);
    PeriodicInterp Ihr(step, hreal);
    for (int j = 0; j < N; ++j) {
        double vs = invert_shift_map(shift, g.v_coord(j));
        cm.v_of_y[j] = vs;
        cm.dvdy[j] = Ihr.eval(vs) + 1.0;
        cm.gamma[j] = t * (g.v_coord(j) - vs);
    }

    // omega_k(y_j) = f_k(v(y_j)) e^{-i k t v(y_j)}, then sum the x-series
    PhysicalVorticity w(g, N_x, t);
    for (int k = 0; k <= g.K_z; ++k) {
        std::vector<cplx> fkp = detail::row_to_physical(g, st.f.row(k));
        PeriodicInterpC If(step, fkp);
        std::vector<cplx> wk(N);
        for (int j = 0; j < N; ++j)
            wk[j] = If.eval(cm.v_of_y[j]) * std::exp(cplx(0, -k * t * cm.v_of_y[j]));
        double weight = k == 0 ? 1.0 : 2.0;  // k and -k are conjugate for real omega
        for (int ix = 0; ix < w.N_x; ++ix) {
            cplx ph = std::exp(cplx(0, k * w.x_coord(ix)));
            for (int j = 0; j < N; ++j)
                w.at(ix, j) += weight * (k == 0 ? wk[j].real() : (ph * wk[j]).real());
        }
    }
    return {std::move(w), std::move(cm)};
}

}  // namespace orrlab

#endif
