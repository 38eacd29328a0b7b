#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "orrlab/green.hpp"

using namespace orrlab;

// random real z-independent h with given sup-norm, band-limited in xi
static SpectralField make_h(const Grid& g, double sup, uint64_t seed, int band = 10) {
    SpectralField h = random_field(g, 0, band, seed);
    auto phys = detail::row_to_physical(g, h.row(0));
    double mx = 0;
    for (auto& z : phys) mx = std::max(mx, std::abs(z.real()));
    h *= cplx(sup / mx, 0);
    return h;
}

TEST_CASE("apply_delta_t at h=0") {
    Grid g(4, 128, 2 * M_PI);
    SpectralField h0(g);
    EllipticCoeffs c(h0, 5.0);
    REQUIRE(c.is_free());

    SpectralField F(g, false);
    F.at(1, g.slot_of(5)) = 1.0;  // e^{i(z + 5v)}
    SpectralField A = apply_delta_t(F, c);
    // eigenvalue -k^2 - (xi - t k)^2 = -1 - 0 = -1 at (1,5), t=5
    CHECK(A.at(1, g.slot_of(5)).real() == Catch::Approx(-1.0).epsilon(1e-14));
    CHECK(std::abs(A.at(1, g.slot_of(5)).imag()) < 1e-15);

    SpectralField F2(g, false);
    F2.at(2, g.slot_of(-3)) = 1.0;
    double eig = -4.0 - std::pow(-3.0 - 5.0 * 2, 2);
    CHECK(apply_delta_t(F2, c).at(2, g.slot_of(-3)).real() == Catch::Approx(eig).epsilon(1e-14));
}

TEST_CASE("apply_delta_t linearity") {
    Grid g(3, 128, 4 * M_PI);
    EllipticCoeffs c(make_h(g, 0.2, 17), 2.5);
    SpectralField F = random_field(g, 3, 30, 1), G = random_field(g, 3, 30, 2);
    SpectralField lhs = apply_delta_t(cplx(0.7, 0) * F + cplx(-1.3, 0) * G, c);
    SpectralField rhs = cplx(0.7, 0) * apply_delta_t(F, c) + cplx(-1.3, 0) * apply_delta_t(G, c);
    lhs -= rhs;
    CHECK(lhs.l2_norm() <= 1e-12 * rhs.l2_norm());
}

TEST_CASE("multiplier exactness at h=0, all methods") {
    Grid g(4, 128, 2 * M_PI);
    SpectralField h0(g);
    double t = 7.0;
    EllipticCoeffs c(h0, t);
    SpectralField F = project(random_field(g, 4, 40, 9), Projector::Pneq0);
    for (auto m : {InverseMethod::multiplier, InverseMethod::direct, InverseMethod::neumann}) {
        SpectralField u = invert(F, c, InversePlan(m));
        for (int k = -4; k <= 4; ++k) {
            if (k == 0) continue;
            for (int j = 0; j < g.N_v; ++j) {
                double s = g.xi(j) - t * k;
                cplx expect = -F.at(k, j) / (s * s + k * k);
                CHECK(std::abs(u.at(k, j) - expect) <= 1e-14 * (std::abs(expect) + 1e-30));
            }
        }
    }
}

TEST_CASE("direct solve residual on 64x512 grid") {
    Grid g(32, 512, 4 * M_PI);  // 64 z-lines as (2*32+1) modes, 512 v-points
    EllipticCoeffs c(make_h(g, 0.1, 23), 3.0);
    SpectralField F = project(random_field(g, 32, 100, 31), Projector::Pneq0);
    InversePlan plan(InverseMethod::direct);
    SpectralField u = invert(F, c, plan);
    SpectralField r = apply_delta_t(u, c);
    r -= F;
    CHECK(r.l2_norm() <= 1e-8 * F.l2_norm());
    for (auto& [k, res] : plan.residual_report) CHECK(res <= 1e-10);
}

TEST_CASE("neumann agrees with direct for small h") {
    Grid g(6, 256, 4 * M_PI);
    EllipticCoeffs c(make_h(g, 0.05, 5), 4.0);
    SpectralField F = project(random_field(g, 6, 60, 77), Projector::Pneq0);
    SpectralField ud = invert(F, c, InversePlan(InverseMethod::direct));
    SpectralField u6 = invert(F, c, InversePlan(InverseMethod::neumann, 6));
    SpectralField u8 = invert(F, c, InversePlan(InverseMethod::neumann, 8));
    SpectralField d6 = u6;
    d6 -= ud;
    SpectralField d8 = u8;
    d8 -= ud;
    CHECK(d6.l2_norm() <= 1e-6 * ud.l2_norm());
    CHECK(d8.l2_norm() <= 1e-6 * ud.l2_norm());
    // geometric improvement with depth
    CHECK(d8.l2_norm() < d6.l2_norm());
}

TEST_CASE("invert validation and divergence detection") {
    Grid g(3, 128, 2 * M_PI);
    EllipticCoeffs c(make_h(g, 0.05, 3), 2.0);
    SpectralField F = random_field(g, 3, 20, 4);  // has a P0 part
    CHECK_THROWS_AS(invert(F, c, InversePlan(InverseMethod::direct)), std::invalid_argument);

    SpectralField hbig = make_h(g, 0.9, 8);
    hbig.at(0, 0) += 1.4 / g.dxi();  // shift: h in about [0.5, 2.3], far from perturbative
    EllipticCoeffs big(hbig, 2.0);
    SpectralField Fp = project(F, Projector::Pneq0);
    CHECK_THROWS_AS(invert(Fp, big, InversePlan(InverseMethod::neumann, 12)),
                    std::runtime_error);
}

TEST_CASE("invert is linear and inverts apply_delta_t") {
    Grid g(4, 128, 4 * M_PI);
    EllipticCoeffs c(make_h(g, 0.15, 13), 6.0);
    SpectralField F = project(random_field(g, 4, 30, 21), Projector::Pneq0);
    SpectralField G = project(random_field(g, 4, 30, 22), Projector::Pneq0);
    InversePlan pl(InverseMethod::direct);
    SpectralField lhs = invert(cplx(2.0, 0) * F + cplx(-0.5, 0) * G, c, pl);
    SpectralField rhs = cplx(2.0, 0) * invert(F, c, pl) + cplx(-0.5, 0) * invert(G, c, pl);
    lhs -= rhs;
    CHECK(lhs.l2_norm() <= 1e-10 * rhs.l2_norm());

    SpectralField round = invert(apply_delta_t(F, c), c, pl);
    round -= F;
    CHECK(round.l2_norm() <= 1e-8 * F.l2_norm());
}

TEST_CASE("Orr critical time: multiplier peaks at t = xi/k") {
    Grid g(2, 256, 2 * M_PI);
    SpectralField h0(g);
    SpectralField F(g, false);
    F.at(2, g.slot_of(100)) = 1.0;  // mode (k, eta) = (2, 100)
    double best_t = -1, best = 0, dt = 0.5;
    for (double t = 0; t <= 100; t += dt) {
        EllipticCoeffs c(h0, t);
        double a = std::abs(invert(F, c, InversePlan(InverseMethod::multiplier))
                                .at(2, g.slot_of(100)));
        if (a > best) {
            best = a;
            best_t = t;
        }
    }
    CHECK(std::abs(best_t - 50.0) <= dt);
}

TEST_CASE("kernel column") {
    double t = 3.0, w = 1.25;
    // free case against the closed-form kernel: needs a large xi range (the
    // band-limited delta's truncation tail ~ 1/xi_max) and a long period (to
    // suppress periodic images e^{-k(L-d)})
    Grid gf(3, 131072, 8 * M_PI);
    SpectralField hf(gf);
    EllipticCoeffs cfree(hf, t);
    for (int k : {1, 2, 3}) {
        auto col = kernel_column(cfree, k, w);
        for (int j = 0; j < gf.N_v; j += 1117) {
            double v = gf.v_coord(j);
            double d = std::abs(v - w);
            d = std::min(d, gf.L_v - d);  // periodic distance
            if (d < 0.5 || d > 0.35 * gf.L_v) continue;  // near the source / seam
            double expect = std::exp(-k * d) / (2.0 * k);
            CHECK(std::abs(col[j]) == Catch::Approx(expect).margin(1e-6));
            // phase factor e^{itk(v-w)} times real negative kernel
            cplx phase = std::exp(cplx(0, t * k * (v - w)));
            CHECK(std::abs(col[j] + phase * expect) < 1e-6);
        }
    }
    // decay bound and +-k symmetry with h != 0
    Grid g(3, 4096, 4 * M_PI);
    EllipticCoeffs c(make_h(g, 0.1, 40, 6), t);
    for (int k : {1, 2}) {
        auto colp = kernel_column(c, k, w);
        auto colm = kernel_column(c, -k, w);
        for (int j = 0; j < g.N_v; j += 3) {
            double d = std::abs(g.v_coord(j) - w);
            d = std::min(d, g.L_v - d);
            CHECK(std::abs(colp[j]) <= 2.0 / k * std::exp(-k * d / 2) + 1e-9);
            CHECK(std::abs(colp[j]) == Catch::Approx(std::abs(colm[j])).margin(1e-9));
        }
    }
}
