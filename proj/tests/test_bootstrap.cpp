#include <cmath>
#include <numbers>

#include "doctest.h"
#include "loopcft/bootstrap.hpp"
#include "loopcft/errors.hpp"

using namespace loopcft;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr KacIndex kSpin = KacIndex::twice(0, 1);

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

// Ising spin on the half-plane, identity and energy blocks in the bulk channel.
double ising_g(BoundaryCondition bc, double sigma, double lambda) {
    const double r = std::sqrt(1.0 - sigma);
    const double pre = std::pow(sigma * (1.0 - sigma), -0.125);
    const double one = std::sqrt(0.5 * (1.0 + r)), eps = std::sqrt(0.5 * (1.0 - r));
    return lambda * pre * (bc == BoundaryCondition::wired ? one + eps : one - eps);
}

}  // namespace

TEST_CASE("closed form values") {
    CHECK(ratio_wired_closed_form(Coupling::from_q(2.0)) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(ratio_wired_closed_form(Coupling::from_q(1.0)) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
    CHECK(ratio_wired_closed_form(Coupling::from_q(3.0)) == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-14));
    CHECK_THROWS_AS(ratio_wired_closed_form(Coupling::from_beta_sq(1.0 / 3.0)), PoleError);
}

TEST_CASE("f_function edge cases") {
    const auto c = Coupling::from_q(2.5);
    CHECK(f_function(2, kSpin, kSpin, 0.5, 1, c).value == 0.0);
    CHECK_THROWS_AS(f_function(3, kSpin, kSpin, 0.5, 5, c), DomainError);
    CHECK_THROWS_AS(f_function(1, kSpin, kSpin, 1.0, 5, c), DomainError);

    for (double q : {1.0, 2.0, 3.0}) CHECK(weight(1, 3, Coupling::from_q(q)) > 0.0);
    for (int n = 1; n <= 5; ++n) CHECK(std::fabs(one_point_amplitude(n, Coupling::from_q(4.0))) < 1e-15);

    // sigma^{2 Delta} F1 -> C R of the N = 1 term
    const double ds = weight(kSpin, c);
    const double lead = ope_coefficient(1, kSpin, kSpin, c) * one_point_amplitude(1, c);
    const double s = 1e-6;
    CHECK(rel(std::pow(s, 2.0 * ds) * f_function(1, kSpin, kSpin, s, 31, c).value, lead) < 1e-4);
}

TEST_CASE("spin connectivity against Ising at q = 2") {
    const auto c = Coupling::from_q(2.0);
    const double lambda = two_point_result(BoundaryCondition::wired, c).lambda;
    CHECK(lambda == doctest::Approx(0.774833558768131).epsilon(1e-11));
    for (double sigma : {0.1, 0.3, 0.5, 0.7, 0.9}) {
        for (auto bc : {BoundaryCondition::wired, BoundaryCondition::free}) {
            CHECK(rel(g_connectivity(bc, sigma, c), ising_g(bc, sigma, lambda)) < 1e-9);
        }
    }
}

TEST_CASE("wired minus free is twice F2") {
    const auto c = Coupling::from_beta_sq(0.7731415926);
    for (double sigma : {0.2, 0.5, 0.8}) {
        const double f2 = f_function(2, kSpin, kSpin, sigma, 31, c).value;
        const double d = g_connectivity(BoundaryCondition::wired, sigma, c) - g_connectivity(BoundaryCondition::free, sigma, c);
        CHECK(rel(d, 2.0 * f2) < 1e-12);
    }
}

TEST_CASE("connectivities are non-negative") {
    for (double q : {1.0, 2.0, 3.0}) {
        const auto c = Coupling::from_q(q);
        for (int i = 0; i <= 9; ++i) {
            const double sigma = 0.05 + 0.1 * i;
            CHECK(g_connectivity(BoundaryCondition::wired, sigma, c) >= 0.0);
            CHECK(g_connectivity(BoundaryCondition::free, sigma, c) >= 0.0);
        }
    }
}

TEST_CASE("truncation stability") {
    for (double q : {1.5, 2.5}) {
        const auto c = Coupling::from_q(q);
        BootstrapOptions wide;
        wide.n_s = 62;
        for (auto bc : {BoundaryCondition::wired, BoundaryCondition::free})
            CHECK(rel(g_connectivity(bc, 0.5, c), g_connectivity(bc, 0.5, c, wide)) < 1e-9);
    }
}

TEST_CASE("two point results on the q grid") {
    for (double q : {1.0, 1.5, 2.0, 2.5, 3.0}) {
        const auto c = Coupling::from_q(q);
        const auto w = two_point_result(BoundaryCondition::wired, c);
        const auto f = two_point_result(BoundaryCondition::free, c);
        CAPTURE(q);
        CHECK(w.residual < 1e-8);
        CHECK(f.residual < 1e-8);
        CHECK(w.lambda == doctest::Approx(f.lambda).epsilon(1e-12));
        CHECK(rel(w.lambda_numeric, w.lambda) < 1e-6);
        CHECK(w.boundary_weight == 0.0);
        CHECK(f.boundary_weight == doctest::Approx(weight(3, 1, c)).epsilon(1e-14));
        // lambda / mu comes out as the reciprocal of the closed form
        CHECK(std::fabs(w.ratio * ratio_wired_closed_form(c) - 1.0) < 1e-9);
        CHECK(w.mu > 0.0);
        CHECK(f.mu > 0.0);
    }
    // Ising: mu_wired = sqrt 2 lambda, mu_free = lambda / sqrt 2
    const auto c2 = Coupling::from_q(2.0);
    CHECK(two_point_result(BoundaryCondition::free, c2).ratio == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
    CHECK(two_point_result(BoundaryCondition::wired, c2).ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
}

TEST_CASE("irrational coupling needs no regularization") {
    const auto c = Coupling::from_beta_sq(0.7331415926);
    CHECK_FALSE(near_rational_coupling(c));
    CHECK(near_rational_coupling(Coupling::from_q(2.0)));
    const auto w = two_point_result(BoundaryCondition::wired, c);
    CHECK_FALSE(w.regularized);
    CHECK(std::fabs(w.ratio * ratio_wired_closed_form(c) - 1.0) < 1e-12);
}

TEST_CASE("boundary channel behaviour near sigma = 1") {
    BootstrapOptions deep;
    deep.order = 40;
    for (double q : {1.0, 2.0, 3.0}) {
        const auto c = Coupling::from_q(q);
        const double ds = weight(kSpin, c), d31 = weight(3, 1, c);
        const double g1 = g_connectivity(BoundaryCondition::free, 0.95, c, deep);
        const double g2 = g_connectivity(BoundaryCondition::free, 0.995, c, deep);
        const double slope = std::log(g2 / g1) / std::log(0.005 / 0.05);
        CAPTURE(q);
        // G itself goes like (1 - sigma)^{Delta_b - 2 Delta}
        CHECK(std::fabs(slope - (d31 - 2.0 * ds)) < 1e-2);
        CHECK(std::fabs(slope + 2.0 * ds - d31) < 1e-2);

        const double mu = two_point_result(BoundaryCondition::wired, c).mu;
        const double gw = g_connectivity(BoundaryCondition::wired, 0.999, c, deep);
        CHECK(gw * std::pow(1e-3, 2.0 * ds) / mu == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("spin weight of the first even field is positive") {
    for (int i = 0; i <= 28; ++i) {
        const double q = 1.0 + 0.1 * i;
        CHECK(weight(1, 2, Coupling::from_q(q)) > 0.0);
    }
}

TEST_CASE("solve_crossing linearity and wired leading constant") {
    const auto c = Coupling::from_q(1.5);
    const SpectrumAnsatz ansatz;
    std::map<int, double> zero;
    for (int n = 1; n <= 31; ++n) zero[n] = 0.0;
    const auto s0 = solve_crossing(kSpin, kSpin, zero, ansatz, c);
    CHECK(s0.residual == 0.0);
    for (const auto& [n, d] : s0.boundary_constants) CHECK(d == 0.0);

    const auto sw = solve_crossing(kSpin, kSpin, spin_bulk_constants(BoundaryCondition::wired, c, 31), ansatz, c);
    CHECK(sw.residual < 1e-8);
    CHECK(sw.sample_points.size() == 40u);
    // even-N boundary fields have genuine block poles
    for (int n : sw.excluded) CHECK(n % 2 == 0);
    // mu from the direct limit of (1 - sigma)^{2 Delta} G
    const double ds = weight(kSpin, c);
    const double a = weight(3, 1, c);
    BootstrapOptions deep;
    deep.order = 40;
    auto scaled = [&](double t) {
        return std::pow(t, 2.0 * ds) * g_connectivity(BoundaryCondition::wired, 1.0 - t, c, deep);
    };
    const double t1 = 1e-2, t2 = 1e-3;
    const double direct = (scaled(t2) * std::pow(t1, a) - scaled(t1) * std::pow(t2, a)) / (std::pow(t1, a) - std::pow(t2, a));
    CHECK(rel(direct, sw.boundary_constants.at(1)) < 1e-3);

    BootstrapOptions few;
    few.samples = 10;
    CHECK_THROWS_AS(solve_crossing(kSpin, kSpin, zero, ansatz, c, few), DomainError);
}

TEST_CASE("fuseau parity") {
    const auto c = Coupling::from_q(2.0);
    CHECK(g_fuseau(1, 2, 0.5, c) == 0.0);
    CHECK(g_fuseau(2, 3, 0.3, c) == 0.0);
    CHECK(g_fuseau(4, 1, 0.7, c) == 0.0);

    const double v = g_fuseau(1, 1, 0.5, c);
    BootstrapOptions wide;
    wide.n_s = 41;
    CHECK(rel(v, g_fuseau(1, 1, 0.5, c, wide)) < 1e-12);
    CHECK(v == doctest::Approx(0.810987197822726).epsilon(1e-11));

    const auto g = Coupling::from_q(2.5);
    for (int k = 1; k <= 7; k += 2)
        CHECK(rel(ope_coefficient(k, KacIndex::twice(1, 0), KacIndex::twice(3, 0), g),
                  ope_coefficient(k, KacIndex::twice(3, 0), KacIndex::twice(1, 0), g)) < 1e-13);
    CHECK(g_fuseau(3, 3, 0.4, c) > 0.0);

    for (auto [n, m] : {std::pair{1, 2}, {2, 3}, {1, 4}}) {
        const auto bulk = fuseau_bulk_constants(n, m, g, 31);
        CHECK(bulk.empty());
        const auto sol = solve_crossing(KacIndex::twice(n, 0), KacIndex::twice(m, 0), bulk, SpectrumAnsatz{}, g);
        for (const auto& [k, d] : sol.boundary_constants) CHECK(std::fabs(d) < 1e-8);
    }
    CHECK_FALSE(fuseau_bulk_constants(1, 1, g, 31).empty());
}
