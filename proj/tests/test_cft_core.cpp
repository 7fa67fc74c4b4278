#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "loopcft/cft_core.hpp"
#include "loopcft/errors.hpp"

using namespace loopcft;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr KacIndex kSpin = KacIndex::twice(0, 1);

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

}  // namespace

TEST_CASE("coupling_from_q branch") {
    auto c2 = Coupling::from_q(2.0);
    CHECK(c2.beta_sq == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(c2.central_charge == doctest::Approx(0.5).epsilon(1e-14));

    auto c1 = Coupling::from_q(1.0);
    CHECK(c1.beta_sq == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(std::fabs(c1.central_charge) < 1e-14);

    auto c3 = Coupling::from_q(3.0);
    CHECK(c3.beta_sq == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(c3.central_charge == doctest::Approx(0.8).epsilon(1e-14));

    auto c4 = Coupling::from_q(4.0);
    CHECK(c4.beta_sq == 1.0);
    CHECK(c4.central_charge == 1.0);

    CHECK_THROWS_AS(Coupling::from_q(0.0), DomainError);
    CHECK_THROWS_AS(Coupling::from_q(4.5), DomainError);
    CHECK_THROWS_AS(Coupling::from_q(-1.0), DomainError);
}

TEST_CASE("coupling round trip") {
    for (double q : {1.0, 1.5, 2.0, 2.5, 3.0, 3.5}) {
        auto c = Coupling::from_q(q);
        CHECK(c.beta_sq > 0.5);
        CHECK(c.beta_sq <= 1.0);
        const double cs = std::cos(kPi * c.beta_sq);
        CHECK(std::fabs(4.0 * cs * cs - q) < 1e-14);
        CHECK(std::fabs(Coupling::from_beta_sq(c.beta_sq).q - q) < 1e-14);
    }
}

TEST_CASE("Kac weights") {
    auto c2 = Coupling::from_q(2.0);
    CHECK(weight(KacIndex::integer(1, 1), c2) == 0.0);
    CHECK(weight(kSpin, c2) == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
    CHECK(weight(KacIndex::integer(3, 1), c2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(weight(KacIndex::integer(1, 2), c2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(weight(KacIndex::integer(1, 3), c2) == doctest::Approx(5.0 / 3.0).epsilon(1e-14));

    for (double q : {0.5, 1.0, 2.7, 3.9}) {
        auto c = Coupling::from_q(q);
        CHECK(std::fabs(weight(KacIndex::integer(1, 1), c)) < 1e-15);
        for (int r2 = -6; r2 <= 6; ++r2)
            for (int s2 = -6; s2 <= 6; ++s2)
                CHECK(weight(KacIndex::twice(r2, s2), c) == weight(KacIndex::twice(-r2, -s2), c));
    }
}

TEST_CASE("field labels") {
    CHECK(FieldLabel::spin().kac() == KacIndex::twice(0, 1));
    CHECK(FieldLabel::fuseau(3).kac() == KacIndex::twice(3, 0));
    CHECK(FieldLabel::degenerate(4).kac() == KacIndex::integer(1, 4));
    CHECK(FieldLabel::boundary(3).kac() == KacIndex::integer(3, 1));
    CHECK(KacIndex::twice(3, 0).to_string() == "(3/2,0)");
    CHECK(KacIndex::integer(1, 2).to_string() == "(1,2)");
}

TEST_CASE("one_point_amplitude") {
    auto c2 = Coupling::from_q(2.0);
    CHECK(one_point_amplitude(1, c2) == doctest::Approx(-std::sqrt(3.0) / 2.0).epsilon(1e-14));
    // P_(1,2) = (beta - 2/beta)/2, so R = sin(pi (1 - 2/beta^2)) = sin(-5 pi / 3) = sqrt(3)/2
    CHECK(one_point_amplitude(2, c2) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
    auto c4 = Coupling::from_q(4.0);
    for (int n = 1; n <= 5; ++n) CHECK(std::fabs(one_point_amplitude(n, c4)) < 1e-14);
}

TEST_CASE("spin-spin structure constant against the independent reference") {
    // lambda = C^{(1,1)} R_(1,1), from a 100-digit evaluation of the raw
    // Gamma_beta integral continued through 1/beta shifts.
    struct Ref {
        double beta_sq, lambda;
    };
    const Ref refs[] = {
        {0.75, 0.774833558768131},
        {2.0 / 3.0, 0.836690373809544},
        {0.7, 0.867906534167864},
        {0.8, 0.578789020519746},
    };
    for (const auto& r : refs) {
        auto c = Coupling::from_beta_sq(r.beta_sq);
        const double lam = ope_coefficient(1, kSpin, kSpin, c) * one_point_amplitude(1, c);
        INFO("beta^2 = " << r.beta_sq);
        CHECK(rel(lam, r.lambda) < 1e-12);
    }
    // The coefficient itself is negative at Q = 2; the product with R is positive.
    CHECK(ope_coefficient(1, kSpin, kSpin, Coupling::from_q(2.0)) < 0.0);
}

TEST_CASE("ope_coefficient symmetry under exchange of the two fields") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> b2(0.52, 0.98);
    std::uniform_int_distribution<int> idx(0, 5);
    int tested = 0;
    for (int trial = 0; trial < 60; ++trial) {
        auto c = Coupling::from_beta_sq(b2(rng));
        KacIndex a = KacIndex::twice(idx(rng), idx(rng) % 2);
        KacIndex b = KacIndex::twice(idx(rng), idx(rng) % 2);
        const int n = 1 + idx(rng);
        try {
            const double ab = ope_coefficient(n, a, b, c);
            const double ba = ope_coefficient(n, b, a, c);
            CHECK(rel(ba, ab) < 1e-12);
            ++tested;
        } catch (const PoleError&) {
        }
    }
    CHECK(tested > 40);
}

TEST_CASE("ope_coefficient zero prefactor and poles") {
    // beta = 1: P_(1,1) = 0 and both sine factors vanish.
    CHECK(ope_coefficient(1, kSpin, kSpin, Coupling::from_q(4.0)) == 0.0);
    // beta^2 = 3/4, N = 4: 2 P_(1,4) = beta - 4/beta = -3 beta - 1/beta, a numerator pole.
    auto c2 = Coupling::from_q(2.0);
    CHECK_THROWS_AS(ope_coefficient(4, kSpin, kSpin, c2), PoleError);
    for (int n = 2; n <= 12; ++n) {
        try {
            ope_coefficient(n, kSpin, kSpin, c2);
        } catch (const PoleError& e) {
            const std::string msg = e.what();
            CHECK((msg.find("numerator") != std::string::npos || msg.find("(e1,e2,e3)") != std::string::npos));
        }
    }
    CHECK_THROWS_AS(ope_coefficient(0, kSpin, kSpin, c2), DomainError);
}

TEST_CASE("ope_coefficient is finite for large N") {
    auto c = Coupling::from_beta_sq(0.71);
    for (int n = 1; n <= 41; ++n) {
        auto v = log_ope_coefficient(n, kSpin, kSpin, c);
        CHECK(std::isfinite(v.log_abs));
    }
}
