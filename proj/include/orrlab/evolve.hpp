#ifndef ORRLAB_EVOLVE_HPP
#define ORRLAB_EVOLVE_HPP

// Time integration of the transformed Euler system
//   dt f = -theta dv f - (h+1) (dz phi Dv f - Dv phi dz f),      Dv = dv - t dz,
//   dt h = -theta dv h - (P0 f + h)/t,
//   dt theta = -2 theta/t - theta dv theta + (1/t) P0(f dz phi),
//   phi = Pneq0 Delta_t^{-1} f,
// of its linearization around a stored background trajectory (including the
// Delta_t' correction to phi'), and of the truncated operator L_* = Q L11 Q
// with Q the (k, xi) cutoff 1_{|k - k0| <= D sigma k0} psi((xi - eta0)/k0)
// (applied symmetrically at -(k0, eta0) so reality is preserved).
//
// Explicit RK4 with per-window step refinement near each resonance eta*/m
// (the reaction kernel is a Lorentzian of O(1) width in t), 2/3-dealiased
// pseudo-spectral products, dense snapshots plus cubic time interpolation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "orrlab/coords.hpp"
#include "orrlab/echo.hpp"
#include "orrlab/green.hpp"
#include "orrlab/grid.hpp"
#include "orrlab/params.hpp"

namespace orrlab {

enum class TimeDirection { forward, backward };
enum class RhsKind { nonlinear, linearized, linearized_truncated };

struct EvolutionConfig {
    double t_a = 1, t_b = 2;
    double dt_base = 0.1;
    int refine_factor = 10;
    double critical_window = 5.0;       // half-width around each resonance
    std::vector<double> resonances;     // times eta*/m to refine around
    TimeDirection direction = TimeDirection::forward;
    RhsKind rhs = RhsKind::nonlinear;
    double snap_interval = 1.0;
    int neumann_depth = 0;              // 0 -> direct elliptic solves
    int max_retries = 3;
    double blowup_factor = 1e8;

    void validate() const {
        if (!(t_a < t_b)) throw std::invalid_argument("EvolutionConfig: t_a < t_b required");
        if (!(dt_base > 0 && dt_base <= 0.5))
            throw std::invalid_argument("EvolutionConfig: 0 < dt_base <= 0.5 required");
        if (refine_factor < 1)
            throw std::invalid_argument("EvolutionConfig: refine_factor >= 1 required");
        if (dt_base / refine_factor > 0.1 + 1e-12)
            throw std::invalid_argument(
                "EvolutionConfig: refined step dt_base/refine_factor must be <= 0.1");
        if (snap_interval <= 0)
            throw std::invalid_argument("EvolutionConfig: snap_interval > 0 required");
    }
    bool in_window(double t) const {
        for (double r : resonances)
            if (std::abs(t - r) <= critical_window) return true;
        return false;
    }
    double dt_at(double t) const { return in_window(t) ? dt_base / refine_factor : dt_base; }
};

// refine around every resonance eta*/m falling inside [t_a, t_b]
inline void fill_resonances(EvolutionConfig& cfg, const ParamSet& p, double eta_star = 0) {
    if (eta_star == 0) eta_star = p.eta0;
    cfg.resonances.clear();
    for (int m = 1; m <= (int)(eta_star / cfg.t_a) + 1; ++m) {
        double r = eta_star / m;
        if (r >= cfg.t_a - cfg.critical_window && r <= cfg.t_b + cfg.critical_window)
            cfg.resonances.push_back(r);
        if (r < cfg.t_a - cfg.critical_window) break;
    }
}

struct IntegrationError : std::runtime_error {
    double t_last;
    explicit IntegrationError(double t)
        : std::runtime_error("integration failed after max step retries at t = " +
                             std::to_string(t)),
          t_last(t) {}
};

// ---------------------------------------------------------------------------
// state arithmetic

inline void st_axpy(StateTriple& y, double a, const StateTriple& x) {
    y.f.axpy(a, x.f);
    y.h.axpy(a, x.h);
    y.theta.axpy(a, x.theta);
}
inline StateTriple st_zero_like(const StateTriple& s) {
    StateTriple z;
    z.f = SpectralField(s.f.grid, s.f.real_symmetric);
    z.h = SpectralField(s.h.grid, s.h.real_symmetric);
    z.theta = SpectralField(s.theta.grid, s.theta.real_symmetric);
    z.t = s.t;
    return z;
}
inline double st_norm(const StateTriple& s) {
    return std::sqrt(std::pow(s.f.l2_norm(), 2) + std::pow(s.h.l2_norm(), 2) +
                     std::pow(s.theta.l2_norm(), 2));
}

// ---------------------------------------------------------------------------

struct Trajectory {
    Grid grid;
    std::vector<StateTriple> snaps;  // ascending in time
    std::string provenance;

    double t_min() const { return snaps.front().t; }
    double t_max() const { return snaps.back().t; }
    bool covers(double a, double b) const { return t_min() <= a + 1e-9 && b <= t_max() + 1e-9; }

    // cubic (4-point Lagrange) interpolation in time
    StateTriple at(double t) const {
        if (snaps.empty()) throw std::logic_error("Trajectory::at: empty");
        if (t < t_min() - 1e-9 || t > t_max() + 1e-9)
            throw std::out_of_range("Trajectory::at: t outside stored span");
        size_t hi = 0;
        while (hi + 1 < snaps.size() && snaps[hi].t < t) ++hi;
        if (std::abs(snaps[hi].t - t) < 1e-12) {
            StateTriple s = snaps[hi];
            s.t = t;
            return s;
        }
        int n = (int)snaps.size();
        int i0 = std::max(0, std::min((int)hi - 2, n - 4));
        int cnt = std::min(4, n);
        StateTriple out = st_zero_like(snaps[0]);
        out.t = t;
        for (int i = i0; i < i0 + cnt; ++i) {
            double w = 1;
            for (int j = i0; j < i0 + cnt; ++j)
                if (j != i) w *= (t - snaps[j].t) / (snaps[i].t - snaps[j].t);
            st_axpy(out, w, snaps[i]);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// dealiased products by z-convolution and pointwise v multiplication

namespace detail {

inline bool row_nonzero(const SpectralField& F, int k) {
    const cplx* r = F.row(k);
    for (int j = 0; j < F.grid.N_v; ++j)
        if (r[j] != cplx(0, 0)) return true;
    return false;
}

inline SpectralField conv_multiply(const SpectralField& A, const SpectralField& B) {
    if (A.grid != B.grid) throw std::invalid_argument("conv_multiply: grid mismatch");
    const Grid& g = A.grid;
    const int K = g.K_z, N = g.N_v;
    std::vector<int> ka, kb;
    for (int k = -K; k <= K; ++k) {
        if (row_nonzero(A, k)) ka.push_back(k);
        if (row_nonzero(B, k)) kb.push_back(k);
    }
    std::vector<std::vector<cplx>> pa(ka.size()), pb(kb.size());
    for (size_t i = 0; i < ka.size(); ++i) pa[i] = row_to_physical(g, A.row(ka[i]));
    for (size_t i = 0; i < kb.size(); ++i) pb[i] = row_to_physical(g, B.row(kb[i]));

    SpectralField out(g, A.real_symmetric && B.real_symmetric);
    std::vector<cplx> acc(N);
    const int jcut = (int)(g.dealias * (N / 2));
    for (int k = -K; k <= K; ++k) {
        std::fill(acc.begin(), acc.end(), cplx(0, 0));
        bool any = false;
        for (size_t i = 0; i < ka.size(); ++i) {
            int need = k - ka[i];
            auto it = std::lower_bound(kb.begin(), kb.end(), need);
            if (it == kb.end() || *it != need) continue;
            const auto& x = pa[i];
            const auto& y = pb[it - kb.begin()];
            for (int j = 0; j < N; ++j) acc[j] += x[j] * y[j];
            any = true;
        }
        if (!any) continue;
        std::vector<cplx> coeffs = row_to_spectral(g, acc);
        cplx* o = out.row(k);
        for (int j = 0; j < N; ++j)
            if (std::abs(g.xi_index(j)) <= jcut) o[j] = coeffs[j];
    }
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// right-hand sides

namespace detail {

inline InversePlan make_plan(int neumann_depth) {
    return neumann_depth > 0 ? InversePlan(InverseMethod::neumann, neumann_depth)
                             : InversePlan(InverseMethod::direct);
}

// -(h+1) [dz(phi) Dv(F) - Dv(phi) dz(F)]  (the transport by grad-perp phi)
inline SpectralField perp_transport(const SpectralField& phi, const SpectralField& F,
                                    const SpectralField& h, double t) {
    SpectralField perp = conv_multiply(phi.dz(), F.dv_shear(t));
    perp -= conv_multiply(phi.dv_shear(t), F.dz());
    SpectralField out = conv_multiply(h, perp);
    out += perp;
    return cplx(-1, 0) * out;
}

}  // namespace detail

inline StateTriple nonlinear_rhs(const StateTriple& s, double t, int neumann_depth = 0) {
    EllipticCoeffs c(s.h, t);
    SpectralField phi = invert(project(s.f, Projector::Pneq0), c,
                               detail::make_plan(neumann_depth));
    StateTriple r = st_zero_like(s);
    r.t = t;

    r.f = detail::perp_transport(phi, s.f, s.h, t);
    r.f -= detail::conv_multiply(s.theta, s.f.dv());

    r.h = cplx(-1, 0) * detail::conv_multiply(s.theta, s.h.dv());
    SpectralField p0f = project(s.f, Projector::P0);
    p0f += s.h;
    r.h.axpy(-1.0 / t, p0f);

    r.theta = cplx(-2.0 / t, 0) * s.theta;
    r.theta -= detail::conv_multiply(s.theta, s.theta.dv());
    r.theta.axpy(1.0 / t, project(detail::conv_multiply(s.f, phi.dz()), Projector::P0));
    return r;
}

// background context for the linear right-hand sides: the underline fields at
// time t, resampled onto the working grid, with phi_bar solved on the
// background's own (smaller) grid
struct BackgroundAt {
    StateTriple b;         // on the working grid
    SpectralField phi;     // Pneq0 Delta_t^{-1} f_bar, on the working grid
    EllipticCoeffs ell;    // coefficients of Delta_t from h_bar on the working grid

    BackgroundAt(const Trajectory& bg, double t, const Grid& work, int neumann_depth) {
        StateTriple raw = bg.at(t);
        EllipticCoeffs cb(raw.h, t);
        SpectralField phi_small =
            invert(project(raw.f, Projector::Pneq0), cb, detail::make_plan(neumann_depth));
        if (bg.grid != work) {
            b.f = raw.f.resample(work);
            b.h = raw.h.resample(work);
            b.theta = raw.theta.resample(work);
            b.t = t;
            phi = phi_small.resample(work);
        } else {
            b = std::move(raw);
            phi = std::move(phi_small);
        }
        ell = EllipticCoeffs(b.h, t);
    }
};

inline StateTriple linearized_rhs(const StateTriple& s, double t, const Trajectory& bg,
                                  int neumann_depth = 0,
                                  const std::function<StateTriple(double)>* forcing = nullptr) {
    const Grid& g = s.f.grid;
    BackgroundAt u(bg, t, g, neumann_depth);
    InversePlan plan = detail::make_plan(neumann_depth);

    // phi' = Pneq0 Delta_bar^{-1} f' - Delta_bar^{-1} (Delta_t' phi_bar)
    SpectralField phi1 = invert(project(s.f, Projector::Pneq0), u.ell, plan);
    {
        // Delta_t' = 2(h_bar+1)h' Dv^2 + (h' dv h_bar + (h_bar+1) dv h') Dv
        SpectralField a = detail::conv_multiply(u.b.h, s.h);
        a += s.h;  // (h_bar + 1) h'
        SpectralField bcoef = detail::conv_multiply(s.h, u.b.h.dv());
        bcoef += detail::conv_multiply(u.b.h, s.h.dv());
        bcoef += s.h.dv();
        SpectralField dtp = detail::conv_multiply(cplx(2, 0) * a, u.phi.dv_shear(t).dv_shear(t));
        dtp += detail::conv_multiply(bcoef, u.phi.dv_shear(t));
        if (dtp.l2_norm() > 0) phi1 -= invert(project(dtp, Projector::Pneq0), u.ell, plan);
    }

    StateTriple r = st_zero_like(s);
    r.t = t;
    // f-row
    r.f = detail::perp_transport(u.phi, s.f, u.b.h, t);       // -(h_bar+1) grad-perp(phi_bar) . grad f'
    r.f += detail::perp_transport(phi1, u.b.f, u.b.h, t);     // -(h_bar+1) grad-perp(phi') . grad f_bar
    {
        // -h' grad-perp(phi_bar) . grad f_bar
        SpectralField perp = detail::conv_multiply(u.phi.dz(), u.b.f.dv_shear(t));
        perp -= detail::conv_multiply(u.phi.dv_shear(t), u.b.f.dz());
        r.f -= detail::conv_multiply(s.h, perp);
    }
    r.f -= detail::conv_multiply(u.b.theta, s.f.dv());
    r.f -= detail::conv_multiply(s.theta, u.b.f.dv());

    // h-row
    r.h = cplx(-1, 0) * detail::conv_multiply(u.b.theta, s.h.dv());
    r.h -= detail::conv_multiply(s.theta, u.b.h.dv());
    SpectralField p0f = project(s.f, Projector::P0);
    p0f += s.h;
    r.h.axpy(-1.0 / t, p0f);

    // theta-row
    r.theta = cplx(-2.0 / t, 0) * s.theta;
    r.theta -= detail::conv_multiply(s.theta, u.b.theta).dv();
    SpectralField drive = detail::conv_multiply(u.b.f, phi1.dz());
    drive += detail::conv_multiply(s.f, u.phi.dz());
    r.theta.axpy(1.0 / t, project(drive, Projector::P0));

    if (forcing && *forcing) st_axpy(r, 1.0, (*forcing)(t));
    return r;
}

// the symmetric cutoff Q of L_* (bumps at +-(k0, eta0); disjoint since
// eta0/k0 > 1/2 always holds at desk scale)
struct TruncationBox {
    double k0 = 0, eta0 = 0, width_k = 0;  // width_k = D sigma k0
    const ProfileLibrary* lib = nullptr;

    double q(int k, double xi) const {
        double s = 0;
        if (std::abs(k - k0) <= width_k) s += lib->psi((xi - eta0) / k0);
        if (std::abs(k + k0) <= width_k) s += lib->psi((xi + eta0) / k0);
        return s;
    }
    SpectralField apply(const SpectralField& F) const {
        SpectralField out(F.grid, F.real_symmetric);
        out.t = F.t;
        for (int k = -F.grid.K_z; k <= F.grid.K_z; ++k) {
            const cplx* src = F.row(k);
            cplx* dst = out.row(k);
            for (int j = 0; j < F.grid.N_v; ++j) {
                double w = q(k, F.grid.xi(j));
                if (w != 0) dst[j] = w * src[j];
            }
        }
        return out;
    }
};

inline StateTriple truncated_rhs(const StateTriple& s, double t, const Trajectory& bg,
                                 const TruncationBox& box, int neumann_depth = 0) {
    const Grid& g = s.f.grid;
    BackgroundAt u(bg, t, g, neumann_depth);
    SpectralField qf = box.apply(s.f);
    SpectralField phi = invert(project(qf, Projector::Pneq0), u.ell,
                               detail::make_plan(neumann_depth));
    SpectralField L11 = detail::perp_transport(u.phi, qf, u.b.h, t);
    L11 += detail::perp_transport(phi, u.b.f, u.b.h, t);
    L11 -= detail::conv_multiply(u.b.theta, qf.dv());
    StateTriple r = st_zero_like(s);
    r.t = t;
    r.f = box.apply(L11);
    return r;
}

// ---------------------------------------------------------------------------
// the RK4 driver

namespace detail {

inline bool state_ok(const StateTriple& s, double cap) {
    double n = st_norm(s);
    return std::isfinite(n) && n <= cap;
}

using RhsFn = std::function<StateTriple(const StateTriple&, double)>;

inline StateTriple rk4_step(const StateTriple& s, double t, double dt, const RhsFn& rhs) {
    StateTriple k1 = rhs(s, t);
    StateTriple s2 = s;
    st_axpy(s2, dt / 2, k1);
    StateTriple k2 = rhs(s2, t + dt / 2);
    StateTriple s3 = s;
    st_axpy(s3, dt / 2, k2);
    StateTriple k3 = rhs(s3, t + dt / 2);
    StateTriple s4 = s;
    st_axpy(s4, dt, k3);
    StateTriple k4 = rhs(s4, t + dt);
    StateTriple out = s;
    st_axpy(out, dt / 6, k1);
    st_axpy(out, dt / 3, k2);
    st_axpy(out, dt / 3, k3);
    st_axpy(out, dt / 6, k4);
    out.t = t + dt;
    return out;
}

// step with recursive halving on non-finite / exploding states
inline StateTriple safe_step(const StateTriple& s, double t, double dt, const RhsFn& rhs,
                             double cap, int retries) {
    StateTriple out = rk4_step(s, t, dt, rhs);
    if (state_ok(out, cap)) return out;
    if (retries <= 0) throw IntegrationError(t);
    StateTriple mid = safe_step(s, t, dt / 2, rhs, cap, retries - 1);
    return safe_step(mid, t + dt / 2, dt / 2, rhs, cap, retries - 1);
}

}  // namespace detail

inline Trajectory integrate(StateTriple s0, const EvolutionConfig& cfg,
                            const detail::RhsFn& rhs_signed_time) {
    cfg.validate();
    const bool fwd = cfg.direction == TimeDirection::forward;
    const double t_start = fwd ? cfg.t_a : cfg.t_b;
    const double t_end = fwd ? cfg.t_b : cfg.t_a;
    const double sgn = fwd ? 1.0 : -1.0;
    const double cap = cfg.blowup_factor * std::max(1.0, st_norm(s0));

    // landing points: uniform snapshot times plus resonances in span
    std::vector<double> marks;
    for (double t = cfg.t_a; t < cfg.t_b + 1e-12; t += cfg.snap_interval) marks.push_back(t);
    for (double r : cfg.resonances)
        if (r > cfg.t_a && r < cfg.t_b) marks.push_back(r);
    marks.push_back(cfg.t_b);
    std::sort(marks.begin(), marks.end());

    Trajectory traj;
    traj.grid = s0.f.grid;
    traj.provenance = std::string("rhs=") + std::to_string((int)cfg.rhs) +
                      " dt_base=" + std::to_string(cfg.dt_base) +
                      " dir=" + (fwd ? "forward" : "backward");
    s0.t = t_start;
    traj.snaps.push_back(s0);

    double t = t_start;
    while (std::abs(t - t_end) > 1e-10) {
        double dt = cfg.dt_at(t);
        // clamp so we land exactly on the next mark in travel direction
        double next = t_end;
        for (double m : marks) {
            if (fwd && m > t + 1e-10) {
                next = m;
                break;
            }
            if (!fwd && m < t - 1e-10) next = m;  // marks ascending: keep last below t
        }
        dt = std::min(dt, std::abs(next - t));
        s0 = detail::safe_step(s0, t, sgn * dt, rhs_signed_time, cap, cfg.max_retries);
        t = fwd ? t + dt : t - dt;
        s0.t = t;
        if (std::abs(t - next) < 1e-10 || std::abs(t - t_end) < 1e-10) traj.snaps.push_back(s0);
    }
    if (!fwd) std::reverse(traj.snaps.begin(), traj.snaps.end());
    return traj;
}

// ---------------------------------------------------------------------------
// entry points

inline StateTriple background_data(const ParamSet& p, const Grid& g) {
    StateTriple s;
    s.t = 1;
    s.f = SpectralField(g, true);
    s.h = SpectralField(g, true);
    s.theta = SpectralField(g, true);
    std::vector<cplx> row(g.N_v);
    for (int j = 0; j < g.N_v; ++j) {
        double v = g.v_coord(j);
        row[j] = (p.eps0 / 2) * std::exp(-std::pow(v / p.C0, 18));
    }
    auto coeffs = detail::row_to_spectral(g, row);
    std::copy(coeffs.begin(), coeffs.end(), s.f.row(1));
    for (int j = 0; j < g.N_v; ++j) s.f.at(-1, (g.N_v - j) % g.N_v) = std::conj(coeffs[j]);
    return s;
}

inline Trajectory evolve_background(const ParamSet& p, const Grid& g, EvolutionConfig cfg) {
    if (cfg.rhs != RhsKind::nonlinear)
        throw std::invalid_argument("evolve_background: cfg.rhs must be nonlinear");
    if (std::abs(cfg.t_a - 1.0) > 1e-12)
        throw std::invalid_argument("evolve_background: t_a = 1 required");
    cfg.direction = TimeDirection::forward;
    StateTriple s0 = background_data(p, g);
    int depth = cfg.neumann_depth;
    return integrate(std::move(s0), cfg,
                     [depth](const StateTriple& s, double t) {
                         return nonlinear_rhs(s, t, depth);
                     });
}

inline Trajectory evolve_nonlinear(StateTriple s0, EvolutionConfig cfg) {
    if (cfg.rhs != RhsKind::nonlinear)
        throw std::invalid_argument("evolve_nonlinear: cfg.rhs must be nonlinear");
    int depth = cfg.neumann_depth;
    return integrate(std::move(s0), cfg,
                     [depth](const StateTriple& s, double t) {
                         return nonlinear_rhs(s, t, depth);
                     });
}

inline Trajectory evolve_linearized(const Trajectory& bg, StateTriple g0, EvolutionConfig cfg,
                                    std::function<StateTriple(double)> forcing = {}) {
    if (cfg.rhs != RhsKind::linearized)
        throw std::invalid_argument("evolve_linearized: cfg.rhs must be linearized");
    if (!bg.covers(cfg.t_a, cfg.t_b))
        throw std::invalid_argument("evolve_linearized: background does not cover t_span");
    int depth = cfg.neumann_depth;
    auto fptr = std::make_shared<std::function<StateTriple(double)>>(std::move(forcing));
    return integrate(std::move(g0), cfg,
                     [&bg, depth, fptr](const StateTriple& s, double t) {
                         return linearized_rhs(s, t, bg, depth, fptr.get());
                     });
}

inline Trajectory evolve_linearized_truncated(const Trajectory& bg, StateTriple g0,
                                              EvolutionConfig cfg, const TruncationBox& box) {
    if (cfg.rhs != RhsKind::linearized_truncated)
        throw std::invalid_argument(
            "evolve_linearized_truncated: cfg.rhs must be linearized_truncated");
    if (!bg.covers(cfg.t_a, cfg.t_b))
        throw std::invalid_argument("evolve_linearized_truncated: background span too short");
    // the truncated flow lives inside the cutoff box: project the data once,
    // so out-of-box data yields the zero trajectory
    g0.f = box.apply(g0.f);
    g0.h.set_zero();
    g0.theta.set_zero();
    int depth = cfg.neumann_depth;
    return integrate(std::move(g0), cfg,
                     [&bg, &box, depth](const StateTriple& s, double t) {
                         return truncated_rhs(s, t, bg, box, depth);
                     });
}

// iint f/(h+1) dz dv: the pullback of the conserved iint omega dx dy
inline double transported_mass(const StateTriple& s) {
    const Grid& g = s.f.grid;
    std::vector<cplx> hp = detail::row_to_physical(g, s.h.row(0));
    std::vector<cplx> f0 = detail::row_to_physical(g, s.f.row(0));
    cplx acc = 0;
    for (int j = 0; j < g.N_v; ++j) acc += f0[j] / (hp[j] + 1.0);
    return (acc * (2 * M_PI) * (g.L_v / (double)g.N_v)).real();
}

}  // namespace orrlab

#endif
