#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "orrlab/diagnostics.hpp"
#include "orrlab/echo.hpp"
#include "orrlab/taylor.hpp"

using namespace orrlab;
using Catch::Approx;

namespace {

ParamSet micro() {
    return derive_params(2, Regime::desk,
                         {{"sigma", 0.3},
                          {"alpha", 1.09},
                          {"eps0", 0.3},
                          {"eps1", 1e-3},
                          {"C0", 10.0}});
}

Grid tgrid() { return Grid(7, 512, 8 * M_PI); }

const Trajectory& micro_bg() {
    static Trajectory bg = [] {
        EvolutionConfig c;
        c.t_a = 1;
        c.t_b = 8;
        c.dt_base = 0.1;
        c.refine_factor = 1;
        c.neumann_depth = 8;
        c.snap_interval = 0.5;
        return evolve_background(micro(), tgrid(), c);
    }();
    return bg;
}

StateTriple st_zero(const Grid& g, double t) {
    StateTriple s;
    s.f = SpectralField(g, true);
    s.h = SpectralField(g, true);
    s.theta = SpectralField(g, true);
    s.t = t;
    return s;
}

}  // namespace

TEST_CASE("weight_A: resonance, zero mode, symmetry, time-derivative bound") {
    WeightSpec spec{3.0, 0, 0.0, 1.0, 4.0};

    SECTION("resonance xi = kt gives exactly 1/(beta^2 k^2)") {
        for (int k : {1, -1, 2, 5, -7})
            CHECK(weight_A(2.5, k, 2.5 * k, spec) == 1.0 / (9.0 * k * k));
    }

    SECTION("k = 0 branch") {
        CHECK(weight_A(17.0, 0, 2.0, spec) == 1.0 / (4.0 + 9.0));
        CHECK(weight_A(1.0, 0, 0.0, spec) == 1.0 / 9.0);
    }

    SECTION("symmetry A_k(t,xi) = A_{-k}(t,-xi) exactly") {
        for (int k : {0, 1, 2, 3, 6})
            for (double xi : {-11.0, -0.5, 0.0, 3.25, 40.0})
                CHECK(weight_A(3.7, k, xi, spec) == weight_A(3.7, -k, -xi, spec));
    }

    SECTION("|dA/dt| <= (2/beta) A pointwise (sampled)") {
        const double d = 1e-6;
        for (int k : {1, 2, -3, 5})
            for (double xi : {-20.0, -3.0, 0.0, 2.0, 7.5, 31.0})
                for (double t : {1.0, 2.0, 3.9, 10.0}) {
                    double a = weight_A(t, k, xi, spec);
                    double rate = std::abs(weight_A(t + d, k, xi, spec) - a) / d;
                    CHECK(rate <= (2.0 / spec.beta) * a * (1.0 + 1e-3));
                }
    }

    SECTION("A_* sums the exponentially damped family") {
        double expect = 0;
        for (int k = -7; k <= 7; ++k) expect += std::exp(-2.0 * std::abs(k)) * weight_A(2.0, k, 1.0, spec);
        CHECK(weight_A_star(2.0, 1.0, spec, 7) == Approx(expect).epsilon(1e-15));
    }

    SECTION("validation") {
        WeightSpec bad = spec;
        bad.beta = 0.5;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        bad = spec;
        bad.tau = 3.0;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    }
}

TEST_CASE("energy: zero state, single mode, homogeneity, presets, saturation") {
    ParamSet p = micro();
    Grid g(5, 256, 8 * M_PI);
    const double t = 3.0;

    SECTION("zero state gives zero for every preset") {
        StateTriple z = st_zero(g, t);
        for (auto preset : {EnergyPreset::M0, EnergyPreset::M1, EnergyPreset::M2})
            CHECK(energy(z, t, preset,
                         preset == EnergyPreset::M0 ? WeightSpec::M0(p, p.k0, p.eta0)
                                                    : WeightSpec::M1(p)) == 0.0);
    }

    SECTION("single f-mode under M1 is a^2 A_k dxi") {
        StateTriple s = st_zero(g, t);
        s.f = SpectralField(g, false);
        const int k = 2, j = 17;
        const cplx a(3e-4, -1e-4);
        s.f.at(k, j) = a;
        WeightSpec spec = WeightSpec::M1(p);
        double expect = std::norm(a) * weight_A(t, k, g.xi(j), spec) * g.dxi();
        CHECK(energy(s, t, EnergyPreset::M1, spec) == Approx(expect).epsilon(1e-12));
    }

    SECTION("quadratic homogeneity under doubling") {
        StateTriple s;
        s.f = random_field(g, 3, 30, 811, true);
        s.h = random_field(g, 0, 30, 812, true);
        s.theta = random_field(g, 0, 30, 813, true);
        s.t = t;
        StateTriple s2 = s;
        s2.f *= cplx(2, 0);
        s2.h *= cplx(2, 0);
        s2.theta *= cplx(2, 0);
        for (auto preset : {EnergyPreset::M0, EnergyPreset::M1, EnergyPreset::M2}) {
            WeightSpec spec = preset == EnergyPreset::M0 ? WeightSpec::M0(p, p.k0, p.eta0, 0.5)
                              : preset == EnergyPreset::M2 ? WeightSpec::M2(p)
                                                           : WeightSpec::M1(p);
            double e1 = energy(s, t, preset, spec);
            double e2 = energy(s2, t, preset, spec);
            CHECK(e2 == Approx(4.0 * e1).epsilon(1e-13));
        }
    }

    SECTION("M2 preset carries Q = eps0^{-1} (log k0)^{-3}") {
        double Q = 1.0 / (p.eps0 * std::pow(std::log((double)p.k0), 3));
        CHECK(WeightSpec::M2(p).beta == Approx(Q).epsilon(1e-15));
        CHECK(WeightSpec::M2(p).beta >= 1.0);
    }

    SECTION("beta -> infinity: beta^2 M1 converges to the L2 mass at rate beta^-2") {
        StateTriple s = st_zero(g, t);
        s.f = SpectralField(g, false);
        for (int j = 0; j < 40; ++j) s.f.at(1, j) = cplx(0.1 + 0.01 * j, 0.02 * j);
        double S = 0;
        for (int j = 0; j < g.N_v; ++j) S += std::norm(s.f.at(1, j)) * g.dxi();
        auto err = [&](double beta) {
            WeightSpec spec{beta, 0, 0.0, 1.0, p.T0};
            return std::abs(S - beta * beta * energy(s, t, EnergyPreset::M1, spec));
        };
        double e2 = err(1e2), e3 = err(1e3);
        CHECK(e2 / e3 == Approx(100.0).epsilon(0.10));
    }

    SECTION("overflowing weights saturate with a flag instead of throwing") {
        StateTriple s = st_zero(g, t);
        s.f = SpectralField(g, false);
        s.f.at(1, 10) = cplx(1e200, 0);
        bool sat = false;
        double e = energy(s, t, EnergyPreset::M0,
                          WeightSpec{10.0, 0, -g.xi_max(), 2.0, p.T0}, &sat);
        CHECK(sat);
        CHECK(e == std::numeric_limits<double>::max());
    }
}

TEST_CASE("weight system: lambda, mu quadrature oracle, Holder constant") {
    ParamSet p = micro();
    WeightSystem w = WeightSystem::from(p, 1.0, 4.0);

    SECTION("lambda endpoints") {
        CHECK(w.lambda(p.T0) == Approx(std::pow(w.C0, 2.0 / 3.0)).epsilon(1e-14));
        CHECK(w.lambda(p.T2) ==
              Approx(std::pow(w.C0, 2.0 / 3.0) - std::cbrt(w.C0) * (p.T0 - p.T2) / p.T0)
                  .epsilon(1e-14));
        CHECK(w.lambda(p.T0 + 0.5) ==
              Approx(1.0 - w.E * 0.5 / (std::sqrt(w.sigma) * p.T0)).margin(1e-12));
    }

    SECTION("mu: zero at T0, negative elsewhere, monotone toward T0") {
        for (double xi : {0.0, p.eta0, -p.eta0, 2 * p.eta0}) {
            CHECK(w.mu(p.T0, xi) == 0.0);
            double m_far = w.mu(p.T2, xi);
            double m_mid = w.mu(0.5 * (p.T2 + p.T0), xi);
            CHECK(m_far < m_mid);
            CHECK(m_mid < 0.0);
            double m_up = w.mu(p.T0 + 0.8, xi);
            CHECK(m_up < 0.0);
        }
    }

    SECTION("adaptive quadrature matches a dense trapezoid oracle") {
        for (double xi : {p.eta0, 0.37 * p.eta0, -5.0}) {
            for (double t : {p.T2, p.T0 - 0.4, p.T0 + 0.9}) {
                double a = std::min(t, p.T0), b = std::max(t, p.T0);
                const int n = 40000;
                const bool below = t < p.T0;
                double I = 0;
                for (int i = 0; i < n; ++i) {
                    double x0 = a + (b - a) * i / n, x1 = a + (b - a) * (i + 1) / n;
                    I += 0.5 * (w.H(x0, xi, below) + w.H(x1, xi, below)) * (x1 - x0);
                }
                double expect = t < p.T0 ? -I : -w.E * I;
                if (t == p.T0) expect = 0;
                INFO("t=" << t << " xi=" << xi);
                CHECK(w.mu(t, xi) == Approx(expect).epsilon(2e-5));
            }
        }
    }

    SECTION("mu Holder constant is finite and modest") {
        double c = mu_holder_constant(w, p.T2, p.eta0 - 10, p.eta0 + 10, 81);
        INFO("measured Holder constant c = " << c);
        CHECK(std::isfinite(c));
        CHECK(c < 100.0);
    }
}

TEST_CASE("localization energy M(t) is nondecreasing on a backward desk run") {
    ParamSet p = micro();
    Grid g = tgrid();
    ProfileLibrary lib = build_profiles(p, 30);

    StateTriple seed = positive_part(perturb_data(p, lib, g));
    seed.t = p.T0;

    EvolutionConfig e;
    e.t_a = p.T2;
    e.t_b = p.T0;
    e.dt_base = 0.05;
    e.refine_factor = 1;
    e.neumann_depth = 8;
    e.snap_interval = 0.1;
    e.rhs = RhsKind::linearized;
    e.direction = TimeDirection::backward;
    Trajectory tr = evolve_linearized(micro_bg(), seed, e);

    WeightSystem w = WeightSystem::from(p, 1.0, 4.0);
    TrendReport rep = trend(tr, [&](const StateTriple& s) {
        bool sat = false;
        double M = weighted_energy(s, s.t, w, &sat);
        REQUIRE_FALSE(sat);
        return M;
    });
    REQUIRE(rep.values.size() >= 8);
    for (double M : rep.values) CHECK(std::isfinite(M));
    INFO("worst relative drop along increasing t: " << rep.worst_drop);
    CHECK(rep.worst_drop <= 0.05);

    // quadratic homogeneity of the localization energy
    StateTriple s2 = tr.snaps[3];
    double M1v = weighted_energy(s2, s2.t, w);
    s2.f *= cplx(2, 0);
    s2.h *= cplx(2, 0);
    s2.theta *= cplx(2, 0);
    CHECK(weighted_energy(s2, s2.t, w) == Approx(4.0 * M1v).epsilon(1e-12));
}

TEST_CASE("zeta mass: bounded on compact support, quadratic, finite on the seed") {
    ParamSet p = micro();
    Grid g = tgrid();
    const double a = p.k0 * std::sqrt(p.sigma);

    SECTION("support inside |v| <= 1/(k0 sqrt(sigma)) implies mass <= e * L2 mass") {
        std::map<int, std::vector<cplx>> beta;
        std::vector<cplx> row(g.N_v, cplx(0, 0));
        double plain = 0;
        for (int j = 0; j < g.N_v; ++j) {
            double v = g.v_coord(j);
            if (std::abs(v) <= 1.0 / a) {
                row[j] = cplx(std::cos(3 * v), std::sin(v));
                plain += std::norm(row[j]);
            }
        }
        plain *= g.L_v / g.N_v;
        beta[2] = row;
        double m = zeta_mass(beta, g, p);
        CHECK(m <= std::exp(1.0) * plain * (1 + 1e-12));
        CHECK(m >= plain);  // zeta >= 1
    }

    SECTION("doubling the amplitude quadruples the mass") {
        std::map<int, std::vector<cplx>> beta, beta2;
        std::vector<cplx> row(g.N_v);
        for (int j = 0; j < g.N_v; ++j)
            row[j] = std::exp(-0.05 * g.v_coord(j) * g.v_coord(j)) * cplx(1.0, 0.3);
        beta[1] = row;
        for (auto& z : row) z *= 2.0;
        beta2[1] = row;
        CHECK(zeta_mass(beta2, g, p) == Approx(4.0 * zeta_mass(beta, g, p)).epsilon(1e-14));
    }

    SECTION("seed state mass is finite and of size eps1^2 (k0 sqrt(sigma))^{-1}") {
        ProfileLibrary lib = build_profiles(p, 30);
        StateTriple seed = perturb_data(p, lib, g);
        double m = zeta_mass(beta_profiles(seed.f, p.k0, 1), g, p);
        CHECK(std::isfinite(m));
        CHECK(m > 0.0);
        CHECK(m <= 10.0 * p.eps1 * p.eps1 / a);
    }

    SECTION("length validation") {
        std::map<int, std::vector<cplx>> bad;
        bad[0] = std::vector<cplx>(7);
        CHECK_THROWS_AS(zeta_mass(bad, g, p), std::invalid_argument);
    }
}

TEST_CASE("diagnose and CSV formatting") {
    ParamSet p = micro();
    Grid g = tgrid();
    ProfileLibrary lib = build_profiles(p, 30);
    StateTriple seed = perturb_data(p, lib, g);

    EnergyReport r = diagnose(seed, p.T0, p);
    CHECK(r.t == p.T0);
    for (double v : {r.M0, r.M1, r.M2, r.gevrey, r.sobolev2, r.l2, r.zeta}) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
    }
    CHECK_FALSE(r.saturated);
    // the seed is localized at (k0, eta0): tiny relative far mass
    CHECK(r.far_mass < 1e-4);

    std::string header = energy_csv_header();
    std::string row = energy_csv_row(r);
    CHECK(std::count(header.begin(), header.end(), ',') ==
          std::count(row.begin(), row.end(), ','));
    CHECK(header.back() == '\n');
    CHECK(row.back() == '\n');
    // round-trips at full precision
    std::istringstream is(row);
    double t_back;
    is >> t_back;
    CHECK(t_back == r.t);
}
