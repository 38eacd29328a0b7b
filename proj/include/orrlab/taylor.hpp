#ifndef ORRLAB_TAYLOR_HPP
#define ORRLAB_TAYLOR_HPP

// The Taylor hierarchy of the perturbation around a background trajectory:
// multilinear stream-function corrections Phi_p, nonlinearities N_p, the
// inductive levels g^(n) (linear flows forced by Z^(n-1)), the (n,q)
// frequency-center decomposition, the approximate-solution residual E^(n),
// and the amplitude envelope B(t).
//
// Conventions:
//   Phi_0 = phi_bar; Phi_p = sum over r in [p/2, p] and over orderings of
//   B_i in {Delta_t', Delta_t**} with exactly p - r of them Delta_t**, of
//   (-1)^r prod_i (Delta_bar^{-1} B_i) phi_bar. Argument slots are consumed
//   left to right by the operators written outermost first.
//   N_p acts on ordered p-tuples; the symmetrization happens in the ordered
//   composition sums that assemble Z^(n-1) and E^(n).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "orrlab/echo.hpp"
#include "orrlab/evolve.hpp"
#include "orrlab/green.hpp"

namespace orrlab {

// shared per-time data for the multilinear evaluations: the background
// snapshot (resampled to the working grid), the elliptic coefficients of
// Delta_bar at that time, and phi_bar
struct TaylorContext {
    Grid grid;
    double t = 1;
    StateTriple bg;
    EllipticCoeffs ell;
    SpectralField phi;  // Pneq0 Delta_bar^{-1} f_bar
    InversePlan plan;

    TaylorContext(const StateTriple& snapshot, double time, const Grid& work,
                  int neumann_depth = 0)
        : grid(work), t(time), plan(detail::make_plan(neumann_depth)) {
        if (snapshot.f.grid != work) {
            bg.f = snapshot.f.resample(work);
            bg.h = snapshot.h.resample(work);
            bg.theta = snapshot.theta.resample(work);
            bg.t = time;
        } else {
            bg = snapshot;
            bg.t = time;
        }
        ell = EllipticCoeffs(bg.h, t);
        SpectralField fneq = project(bg.f, Projector::Pneq0);
        phi = fneq.l2_norm() > 0 ? invert(fneq, ell, plan) : SpectralField(work, true);
    }

    SpectralField inv0(const SpectralField& F) const {
        if (F.l2_norm() == 0) return SpectralField(grid, F.real_symmetric);
        return invert(F, ell, plan);
    }
};

namespace detail {

// all operator orderings: sequences over {1 = Delta_t', 2 = Delta_t**}
// summing to p (r = length, p - r = number of 2's, automatically)
inline std::vector<std::vector<int>> phi_sequences(int p) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int rem) {
        if (rem == 0) {
            out.push_back(cur);
            return;
        }
        for (int s = 1; s <= 2 && s <= rem; ++s) {
            cur.push_back(s);
            rec(rem - s);
            cur.pop_back();
        }
    };
    rec(p);
    return out;
}

// dz(psi) Dv(F) - Dv(psi) dz(F): the unsigned grad-perp Jacobian core
inline SpectralField perp_core(const SpectralField& psi, const SpectralField& F, double t) {
    SpectralField r = conv_multiply(psi.dz(), F.dv_shear(t));
    r -= conv_multiply(psi.dv_shear(t), F.dz());
    return r;
}

}  // namespace detail

// Phi_p(h^1, ..., h^p); each h must live on k = 0 only
inline SpectralField phi_p(const std::vector<SpectralField>& hs, const TaylorContext& cx) {
    const Grid& g = cx.grid;
    const int p = (int)hs.size();
    if (p == 0) return cx.phi;
    bool realsym = cx.phi.real_symmetric;
    for (const auto& h : hs) {
        if (h.grid != g) throw std::invalid_argument("phi_p: grid mismatch");
        for (int k = -g.K_z; k <= g.K_z; ++k)
            if (k != 0 && detail::row_nonzero(h, k))
                throw std::invalid_argument("phi_p: arguments must be z-independent");
        realsym = realsym && h.real_symmetric;
    }
    SpectralField total(g, realsym);
    total.t = cx.t;
    for (const auto& h : hs)
        if (h.l2_norm() == 0) return total;  // multilinearity
    if (cx.phi.l2_norm() == 0) return total;

    for (const auto& seq : detail::phi_sequences(p)) {
        const int r = (int)seq.size();
        std::vector<int> off(r);
        for (int i = 0, c = 0; i < r; c += seq[i++]) off[i] = c;
        SpectralField W = cx.phi;
        for (int i = r - 1; i >= 0 && W.l2_norm() > 0; --i) {
            SpectralField D2 = W.dv_shear(cx.t).dv_shear(cx.t);
            SpectralField D1 = W.dv_shear(cx.t);
            SpectralField rhs(g, false);
            if (seq[i] == 1) {
                // Delta_t'[a] = 2(h_bar+1)a Dv^2 + (a dv h_bar + (h_bar+1) dv a) Dv
                const SpectralField& a = hs[off[i]];
                SpectralField c2 = detail::conv_multiply(cx.bg.h, a);
                c2 += a;
                rhs = detail::conv_multiply(cplx(2, 0) * c2, D2);
                SpectralField c1 = detail::conv_multiply(a, cx.bg.h.dv());
                c1 += detail::conv_multiply(cx.bg.h, a.dv());
                c1 += a.dv();
                rhs += detail::conv_multiply(c1, D1);
            } else {
                // Delta_t**[a,b] = (ab) Dv^2 + (1/2)(a dv b + b dv a) Dv
                const SpectralField& a = hs[off[i]];
                const SpectralField& b = hs[off[i] + 1];
                rhs = detail::conv_multiply(detail::conv_multiply(a, b), D2);
                SpectralField c1 = detail::conv_multiply(a, b.dv());
                c1 += detail::conv_multiply(b, a.dv());
                rhs += detail::conv_multiply(cplx(0.5, 0) * c1, D1);
            }
            W = cx.inv0(project(rhs, Projector::Pneq0));
        }
        total.axpy(r % 2 ? cplx(-1, 0) : cplx(1, 0), W);
    }
    total.real_symmetric = realsym;
    return total;
}

// N_p(g^1, ..., g^p) on an ordered tuple: the degree-p nonlinearity, with the
// perturbation slots consumed first-to-last in the order the factors are
// written, and Phi_0 = phi_bar closing the lowest-degree products
inline StateTriple n_p(const std::vector<StateTriple>& gs, const TaylorContext& cx) {
    const int p = (int)gs.size();
    if (p < 2) throw std::invalid_argument("n_p: p >= 2 required");
    const Grid& g = cx.grid;
    bool realsym = cx.bg.f.real_symmetric;
    for (const auto& s : gs) {
        if (s.f.grid != g) throw std::invalid_argument("n_p: grid mismatch");
        realsym = realsym && s.f.real_symmetric && s.h.real_symmetric &&
                  s.theta.real_symmetric;
    }
    StateTriple r;
    r.f = SpectralField(g, realsym);
    r.h = SpectralField(g, realsym);
    r.theta = SpectralField(g, realsym);
    r.t = cx.t;

    auto hs = [&](int from) {
        std::vector<SpectralField> v;
        for (int i = from; i < p; ++i) v.push_back(gs[i].h);
        return v;
    };
    const double t = cx.t;

    // ----- first component
    if (p == 2 && gs[0].theta.l2_norm() > 0 && gs[1].f.l2_norm() > 0)
        r.f -= detail::conv_multiply(gs[0].theta, gs[1].f.dv());
    if (p == 3 && gs[0].h.l2_norm() > 0 && gs[1].f.l2_norm() > 0) {
        SpectralField psi = cx.inv0(project(gs[2].f, Projector::Pneq0));
        if (psi.l2_norm() > 0)
            r.f += detail::conv_multiply(gs[0].h, detail::perp_core(psi, gs[1].f, t));
    }
    SpectralField Pp = phi_p(hs(0), cx);
    SpectralField Pm1 = phi_p(hs(1), cx);
    SpectralField Pm2 = phi_p(hs(2), cx);  // p = 2 -> phi_bar
    if (Pp.l2_norm() > 0 && cx.bg.f.l2_norm() > 0)
        r.f += detail::perp_transport(Pp, cx.bg.f, cx.bg.h, t);
    if (Pm1.l2_norm() > 0) {
        if (gs[0].f.l2_norm() > 0) r.f += detail::perp_transport(Pm1, gs[0].f, cx.bg.h, t);
        if (gs[0].h.l2_norm() > 0 && cx.bg.f.l2_norm() > 0)
            r.f -= detail::conv_multiply(gs[0].h, detail::perp_core(Pm1, cx.bg.f, t));
    }
    if (Pm2.l2_norm() > 0 && gs[0].h.l2_norm() > 0 && gs[1].f.l2_norm() > 0)
        r.f -= detail::conv_multiply(gs[0].h, detail::perp_core(Pm2, gs[1].f, t));

    // ----- second component
    if (p == 2 && gs[0].theta.l2_norm() > 0 && gs[1].h.l2_norm() > 0)
        r.h -= detail::conv_multiply(gs[0].theta, gs[1].h.dv());

    // ----- third component
    if (p == 2) {
        if (gs[0].theta.l2_norm() > 0 && gs[1].theta.l2_norm() > 0)
            r.theta -= detail::conv_multiply(gs[0].theta, gs[1].theta.dv());
        if (gs[0].f.l2_norm() > 0) {
            SpectralField psi = cx.inv0(project(gs[1].f, Projector::Pneq0));
            if (psi.l2_norm() > 0)
                r.theta.axpy(1.0 / t, project(detail::conv_multiply(gs[0].f, psi.dz()),
                                              Projector::P0));
        }
    }
    {
        SpectralField drive(g, false);
        bool any = false;
        if (Pm1.l2_norm() > 0 && gs[0].f.l2_norm() > 0) {
            drive += detail::conv_multiply(gs[0].f, Pm1.dz());
            any = true;
        }
        if (Pp.l2_norm() > 0 && cx.bg.f.l2_norm() > 0) {
            drive += detail::conv_multiply(cx.bg.f, Pp.dz());
            any = true;
        }
        if (any) r.theta.axpy(1.0 / t, project(drive, Projector::P0));
    }
    r.f.real_symmetric = realsym;
    r.h.real_symmetric = realsym;
    r.theta.real_symmetric = realsym;
    return r;
}

// N(G) truncated at degree p_max
inline StateTriple n_total(const StateTriple& G, const TaylorContext& cx, int p_max) {
    StateTriple r;
    r.f = SpectralField(cx.grid, G.f.real_symmetric);
    r.h = SpectralField(cx.grid, G.h.real_symmetric);
    r.theta = SpectralField(cx.grid, G.theta.real_symmetric);
    r.t = cx.t;
    for (int p = 2; p <= p_max; ++p) {
        std::vector<StateTriple> gs(p, G);
        st_axpy(r, 1.0, n_p(gs, cx));
    }
    return r;
}

// ---------------------------------------------------------------------------
// conjugate reflection: hat G(k, xi) = conj hat F(-k, -xi)

inline SpectralField conj_reflect(const SpectralField& F) {
    const Grid& g = F.grid;
    SpectralField out(g, F.real_symmetric);
    out.t = F.t;
    for (int k = -g.K_z; k <= g.K_z; ++k) {
        const cplx* src = F.row(-k);
        cplx* dst = out.row(k);
        for (int j = 0; j < g.N_v; ++j) dst[(g.N_v - j) % g.N_v] = std::conj(src[j]);
    }
    return out;
}

inline StateTriple st_conj_reflect(const StateTriple& s) {
    StateTriple r;
    r.f = conj_reflect(s.f);
    r.h = conj_reflect(s.h);
    r.theta = conj_reflect(s.theta);
    r.t = s.t;
    return r;
}

// ---------------------------------------------------------------------------
// seeds

// the analytic half of the seed: (eps1 e^{i(k0 z + eta0 v)} phi_p(k0 sqrt(sigma) v)/2, 0, 0)
inline StateTriple perturb_data_half(const ParamSet& p, const ProfileLibrary& lib,
                                     const Grid& g) {
    if (p.k0 > g.K_z) throw std::invalid_argument("perturb_data_half: k0 exceeds grid K_z");
    StateTriple s;
    s.f = SpectralField(g, false);
    s.h = SpectralField(g, false);
    s.theta = SpectralField(g, false);
    s.t = p.T0;
    const double a = p.k0 * std::sqrt(p.sigma);
    std::vector<cplx> prof(g.N_v);
    for (int j = 0; j < g.N_v; ++j) {
        double v = g.v_coord(j);
        prof[j] = 0.5 * p.eps1 * std::exp(cplx(0, p.eta0 * v)) * lib.phi_p(a * v);
    }
    auto coeffs = detail::row_to_spectral(g, prof);
    std::copy(coeffs.begin(), coeffs.end(), s.f.row(p.k0));
    return s;
}

// the real seed g^(1)(T0) = (eps1 cos(k0 z + eta0 v) phi_p(k0 sqrt(sigma) v), 0, 0)
inline StateTriple perturb_data(const ParamSet& p, const ProfileLibrary& lib, const Grid& g) {
    StateTriple half = perturb_data_half(p, lib, g);
    StateTriple s = st_conj_reflect(half);
    st_axpy(s, 1.0, half);
    s.t = p.T0;
    s.f.real_symmetric = true;
    s.h.real_symmetric = true;
    s.theta.real_symmetric = true;
    return s;
}

// the analytic (q = +1) part of a general real seed: rows k >= 1 plus half of
// the k = 0 row
inline StateTriple positive_part(const StateTriple& s) {
    const Grid& g = s.f.grid;
    StateTriple r;
    r.f = SpectralField(g, false);
    r.h = SpectralField(g, false);
    r.theta = SpectralField(g, false);
    r.t = s.t;
    auto split = [&](const SpectralField& src, SpectralField& dst) {
        for (int k = 1; k <= g.K_z; ++k)
            std::copy(src.row(k), src.row(k) + g.N_v, dst.row(k));
        for (int j = 0; j < g.N_v; ++j) dst.at(0, j) = 0.5 * src.at(0, j);
    };
    split(s.f, r.f);
    split(s.h, r.h);
    split(s.theta, r.theta);
    return r;
}

// ---------------------------------------------------------------------------
// the hierarchy

struct HierarchyConfig {
    int n_max = 3;
    int p_max = 4;
    double t_lo = 0, t_hi = 0;  // span around the seed time T0
    EvolutionConfig evo;        // template: dt, refinement, depth, snapshots
    bool decompose = true;      // also build the (n, q) decomposition
};

struct Hierarchy {
    Grid grid;
    int n_max = 0, p_max = 0;
    double T0 = 0;
    std::map<int, Trajectory> levels;                        // n -> g^(n)
    std::map<std::pair<int, int>, Trajectory> decompositions;  // (n,q) -> g^(n,q)
    std::vector<double> tau;  // tau_n = 1 - n eta0^{-(N'+1)}, n = 1..n_max

    StateTriple G(double t) const {  // G^(n_max)(t)
        StateTriple out = levels.at(1).at(t);
        for (int n = 2; n <= n_max; ++n) st_axpy(out, 1.0, levels.at(n).at(t));
        return out;
    }
};

namespace detail {

// ordered compositions of n into p parts >= 1
inline std::vector<std::vector<int>> compositions(int n, int p) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int rem, int parts) {
        if (parts == 1) {
            if (rem >= 1) {
                cur.push_back(rem);
                out.push_back(cur);
                cur.pop_back();
            }
            return;
        }
        for (int v = 1; v <= rem - (parts - 1); ++v) {
            cur.push_back(v);
            rec(rem - v, parts - 1);
            cur.pop_back();
        }
    };
    rec(n, p);
    return out;
}

// q-splittings: q_j in {-n_j, -n_j+2, ..., n_j} with sum q
inline void q_splits(const std::vector<int>& ns, int q,
                     const std::function<void(const std::vector<int>&)>& emit) {
    std::vector<int> cur;
    std::function<void(size_t, int)> rec = [&](size_t i, int rem) {
        if (i == ns.size()) {
            if (rem == 0) emit(cur);
            return;
        }
        int tail = 0;
        for (size_t j = i + 1; j < ns.size(); ++j) tail += ns[j];
        for (int qi = -ns[i]; qi <= ns[i]; qi += 2) {
            if (std::abs(rem - qi) > tail) continue;
            cur.push_back(qi);
            rec(i + 1, rem - qi);
            cur.pop_back();
        }
    };
    rec(0, q);
}

// small per-time cache of TaylorContexts (RK4 revisits the same times)
struct ContextCache {
    const Trajectory* bg = nullptr;
    Grid work;
    int depth = 0;
    mutable std::vector<std::pair<double, std::shared_ptr<TaylorContext>>> slots;

    std::shared_ptr<TaylorContext> at(double t) const {
        for (auto& s : slots)
            if (std::abs(s.first - t) < 1e-12) return s.second;
        auto cx = std::make_shared<TaylorContext>(bg->at(t), t, work, depth);
        if (slots.size() >= 8) slots.erase(slots.begin());
        slots.emplace_back(t, cx);
        return cx;
    }
};

// evolve the linear flow from a state at an interior time out to both span
// endpoints, merging into one ascending trajectory
inline Trajectory evolve_two_sided(const Trajectory& bg, const StateTriple& s0,
                                   EvolutionConfig evo, double t_lo, double t_hi,
                                   std::function<StateTriple(double)> forcing) {
    const double T0 = s0.t;
    evo.rhs = RhsKind::linearized;
    Trajectory out;
    out.grid = s0.f.grid;
    out.provenance = "hierarchy level";
    if (t_lo < T0 - 1e-12) {
        EvolutionConfig e = evo;
        e.t_a = t_lo;
        e.t_b = T0;
        e.direction = TimeDirection::backward;
        Trajectory back = evolve_linearized(bg, s0, e, forcing);
        out.snaps = std::move(back.snaps);
    } else {
        out.snaps.push_back(s0);
        out.snaps.back().t = T0;
    }
    if (t_hi > T0 + 1e-12) {
        EvolutionConfig e = evo;
        e.t_a = T0;
        e.t_b = t_hi;
        e.direction = TimeDirection::forward;
        Trajectory fwd = evolve_linearized(bg, s0, e, forcing);
        out.snaps.pop_back();  // both sides store the T0 snapshot
        for (auto& s : fwd.snaps) out.snaps.push_back(std::move(s));
    }
    return out;
}

inline Trajectory reflect_trajectory(const Trajectory& tr) {
    Trajectory out;
    out.grid = tr.grid;
    out.provenance = tr.provenance + " (conjugate reflection)";
    for (const auto& s : tr.snaps) out.snaps.push_back(st_conj_reflect(s));
    return out;
}

}  // namespace detail

inline Hierarchy build_hierarchy(const ParamSet& p, const StateTriple& seed,
                                 const Trajectory& bg, const HierarchyConfig& cfg) {
    if (cfg.n_max < 1 || cfg.n_max > 6)
        throw std::invalid_argument("build_hierarchy: 1 <= n_max <= 6 required");
    if (cfg.p_max < 2) throw std::invalid_argument("build_hierarchy: p_max >= 2 required");
    if (!(cfg.t_lo <= seed.t && seed.t <= cfg.t_hi))
        throw std::invalid_argument("build_hierarchy: seed time outside span");
    if (!bg.covers(cfg.t_lo, cfg.t_hi))
        throw std::invalid_argument("build_hierarchy: background does not cover span");

    Hierarchy H;
    H.grid = seed.f.grid;
    H.n_max = cfg.n_max;
    H.p_max = cfg.p_max;
    H.T0 = seed.t;
    for (int n = 1; n <= cfg.n_max; ++n)
        H.tau.push_back(1.0 - n * std::exp(-(p.consts.Nprime + 1) * p.log_eta0));

    detail::ContextCache cache{&bg, H.grid, cfg.evo.neumann_depth, {}};

    H.levels[1] = detail::evolve_two_sided(bg, seed, cfg.evo, cfg.t_lo, cfg.t_hi, {});
    if (cfg.decompose) {
        StateTriple sp = positive_part(seed);
        H.decompositions[{1, 1}] =
            detail::evolve_two_sided(bg, sp, cfg.evo, cfg.t_lo, cfg.t_hi, {});
        StateTriple sm = st_conj_reflect(sp);
        sm.t = seed.t;
        H.decompositions[{1, -1}] =
            detail::evolve_two_sided(bg, sm, cfg.evo, cfg.t_lo, cfg.t_hi, {});
    }

    for (int n = 2; n <= cfg.n_max; ++n) {
        auto z_forcing = [&H, &cache, n](double t) {
            auto cx = cache.at(t);
            StateTriple r;
            r.f = SpectralField(cx->grid, true);
            r.h = SpectralField(cx->grid, true);
            r.theta = SpectralField(cx->grid, true);
            r.t = t;
            for (int pp = 2; pp <= std::min(n, H.p_max); ++pp)
                for (const auto& comp : detail::compositions(n, pp)) {
                    std::vector<StateTriple> gs;
                    for (int ni : comp) gs.push_back(H.levels.at(ni).at(t));
                    st_axpy(r, 1.0, n_p(gs, *cx));
                }
            return r;
        };
        StateTriple z0;
        z0.f = SpectralField(H.grid, true);
        z0.h = SpectralField(H.grid, true);
        z0.theta = SpectralField(H.grid, true);
        z0.t = H.T0;
        H.levels[n] = detail::evolve_two_sided(bg, z0, cfg.evo, cfg.t_lo, cfg.t_hi, z_forcing);

        if (cfg.decompose) {
            for (int q = n; q >= -n; q -= 2) {
                auto zq_forcing = [&H, &cache, n, q](double t) {
                    auto cx = cache.at(t);
                    StateTriple r;
                    r.f = SpectralField(cx->grid, false);
                    r.h = SpectralField(cx->grid, false);
                    r.theta = SpectralField(cx->grid, false);
                    r.t = t;
                    for (int pp = 2; pp <= std::min(n, H.p_max); ++pp)
                        for (const auto& comp : detail::compositions(n, pp))
                            detail::q_splits(comp, q, [&](const std::vector<int>& qs) {
                                std::vector<StateTriple> gs;
                                for (size_t i = 0; i < comp.size(); ++i)
                                    gs.push_back(
                                        H.decompositions.at({comp[i], qs[i]}).at(t));
                                st_axpy(r, 1.0, n_p(gs, *cx));
                            });
                    return r;
                };
                StateTriple zq0;
                zq0.f = SpectralField(H.grid, false);
                zq0.h = SpectralField(H.grid, false);
                zq0.theta = SpectralField(H.grid, false);
                zq0.t = H.T0;
                H.decompositions[{n, q}] =
                    detail::evolve_two_sided(bg, zq0, cfg.evo, cfg.t_lo, cfg.t_hi, zq_forcing);
            }
        }
    }
    return H;
}

// E^(n): all compositions with every part <= n_max but total degree > n_max,
// truncated at degree p_max
inline StateTriple residual_E(const Hierarchy& H, const Trajectory& bg, double t,
                              int neumann_depth = 0) {
    TaylorContext cx(bg.at(t), t, H.grid, neumann_depth);
    std::map<int, StateTriple> gn;
    for (int n = 1; n <= H.n_max; ++n) gn[n] = H.levels.at(n).at(t);
    StateTriple r;
    r.f = SpectralField(H.grid, true);
    r.h = SpectralField(H.grid, true);
    r.theta = SpectralField(H.grid, true);
    r.t = t;
    std::vector<int> cur;
    std::function<void(int, int)> rec = [&](int parts_left, int total) {
        if (parts_left == 0) {
            if (total > H.n_max) {
                std::vector<StateTriple> gs;
                for (int ni : cur) gs.push_back(gn.at(ni));
                st_axpy(r, 1.0, n_p(gs, cx));
            }
            return;
        }
        for (int v = 1; v <= H.n_max; ++v) {
            cur.push_back(v);
            rec(parts_left - 1, total + v);
            cur.pop_back();
        }
    };
    for (int p = 2; p <= H.p_max; ++p) rec(p, 0);
    return r;
}

// fraction of the L2 mass inside the diamond |k - kc| + |xi - xic| <= w
inline double box_mass_fraction(const StateTriple& s, double kc, double xic, double w) {
    const Grid& g = s.f.grid;
    double inb = 0, tot = 0;
    for (const SpectralField* F : {&s.f, &s.h, &s.theta})
        for (int k = -g.K_z; k <= g.K_z; ++k)
            for (int j = 0; j < g.N_v; ++j) {
                double m = std::norm(F->at(k, j));
                tot += m;
                if (std::abs(k - kc) + std::abs(g.xi(j) - xic) <= w) inb += m;
            }
    return tot > 0 ? inb / tot : 1.0;
}

inline std::string hierarchy_csv(const Hierarchy& H, double k0, double eta0, double w) {
    std::string out = "n,q,t,l2,box_mass\n";
    char buf[200];
    for (const auto& [key, tr] : H.decompositions) {
        auto [n, q] = key;
        for (const auto& s : tr.snaps) {
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", n, q, s.t, st_norm(s),
                          box_mass_fraction(s, q * k0, q * eta0, w));
            out += buf;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// the amplitude envelope B(t) = B1(t) B2(t)

struct EnvelopeB {
    ParamSet p;
    std::vector<double> knot_t;   // ascending: t_{k2}, ..., t_{k1}
    std::vector<double> log_b1;   // log B1 at the knots
    double D = 0;

    double B1(double t) const {
        if (t <= knot_t.front()) return std::exp(log_b1.front());  // constant on [1, T2]
        if (t >= knot_t.back()) return std::exp(log_b1.back());
        size_t i = 1;
        while (knot_t[i] < t) ++i;
        double w = (t - knot_t[i - 1]) / (knot_t[i] - knot_t[i - 1]);
        return std::exp((1 - w) * log_b1[i - 1] + w * log_b1[i]);
    }
    // exp of the corrector integral int_t^{T0} D (eps0^{101/100}
    //   + 1_{t' <= T2} eps0^{1/2} + 1/t' + 1_{t' <= T3} eps0 (log k0)^4
    //   + T0^{-1/4}) dt', active only below T0
    double B2(double t) const {
        if (t >= p.T0 || D == 0) return 1.0;
        double I = (p.eps0 * std::pow(p.eps0, 0.01) + std::pow(p.T0, -0.25)) * (p.T0 - t);
        I += std::sqrt(p.eps0) * std::max(0.0, std::min(p.T2, p.T0) - t);
        I += std::log(p.T0 / t);
        I += p.eps0 * std::pow(std::log((double)p.k0), 4.0) *
             std::max(0.0, std::min(p.T3, p.T0) - t);
        return std::exp(D * I);
    }
    double operator()(double t) const { return B1(t) * B2(t); }
};

// Bm: the growth ladder B_m for k1 <= m <= k0 (values at the critical times)
inline EnvelopeB envelope_B(const ParamSet& p, const std::map<int, double>& Bm) {
    const int m_lo = (int)p.k1, m_hi = (int)p.k2;
    EnvelopeB env;
    env.p = p;
    env.D = p.D;
    for (int m = m_lo; m <= p.k0; ++m) {
        auto it = Bm.find(m);
        if (it == Bm.end())
            throw std::invalid_argument("envelope_B: ladder missing m = " + std::to_string(m));
        if (!(it->second > 0))
            throw std::invalid_argument("envelope_B: ladder value B_m <= 0 at m = " +
                                        std::to_string(m));
    }
    // knots descend in m (ascend in t); below T0 the ladder continues by
    // nu(alpha_j)^10 factors per interval
    double log_ext = std::log(Bm.at(p.k0)) - std::log(2.0);
    std::vector<double> lt, lb;
    for (int m = m_hi; m >= m_lo; --m) {
        double lv;
        if (m <= p.k0) {
            lv = std::log(Bm.at(m)) - std::log(2.0);
        } else {
            lv = log_ext;
            for (int j = p.k0 + 1; j <= m; ++j) {
                double aj = std::min(2.0, p.alpha * p.k0 * (double)p.k0 / ((double)j * j));
                lv += 10.0 * std::log(nu(aj, p.eps0));
            }
        }
        lt.push_back(p.t_m(m));
        lb.push_back(lv);
    }
    for (size_t i = 1; i < lt.size(); ++i)
        if (!(lt[i] > lt[i - 1]))
            throw std::invalid_argument("envelope_B: knot times not strictly increasing");
    env.knot_t = std::move(lt);
    env.log_b1 = std::move(lb);
    return env;
}

}  // namespace orrlab

#endif
