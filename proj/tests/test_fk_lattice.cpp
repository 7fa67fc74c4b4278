#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "loopcft/errors.hpp"
#include "loopcft/fk_lattice.hpp"

using namespace loopcft;

namespace {

const auto kFree = BoundaryCondition::free;
const auto kWired = BoundaryCondition::wired;

double rel(double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); }

}  // namespace

TEST_CASE("state counts") {
    CHECK(enumerate_states(Geometry::critical(1, Topology::strip, kFree, 2.0)).size() == 1u);
    CHECK(enumerate_states(Geometry::critical(3, Topology::strip, kFree, 2.0)).size() == 5u);
    // {123} and {13}{2}: sites 1 and 3 are always joined through the boundary
    CHECK(enumerate_states(Geometry::critical(3, Topology::strip, kWired, 2.0)).size() == 2u);
    CHECK(enumerate_states(Geometry::critical(3, Topology::strip, kFree, 2.0), 1).size() == 10u);
    CHECK(enumerate_states(Geometry::critical(3, Topology::strip, kFree, 2.0), 2).size() == 12u);
    CHECK(enumerate_states(Geometry::critical(5, Topology::cylinder, kFree, 2.0)).size() == 42u);
    CHECK(enumerate_states(Geometry::critical(9, Topology::strip, kFree, 2.0)).size() == 4862u);

    CHECK_THROWS_AS(enumerate_states(Geometry::critical(15, Topology::strip, kFree, 2.0)), CapacityError);
    CHECK_THROWS_AS(enumerate_states(Geometry::critical(4, Topology::strip, kFree, 2.0)), DomainError);
}

TEST_CASE("state keys") {
    const auto space = enumerate_states(Geometry::critical(7, Topology::strip, kFree, 2.0), 2);
    for (std::size_t i = 0; i < space.size(); i += 37) {
        const auto s = space.state(i);
        CHECK(space.find(s) == static_cast<std::int64_t>(i));
        CHECK(s.marks() == 2);
    }
    PartitionState s;
    s.labels = {3, 3, 1, 3, 0};
    s.mark_a = 1;
    s.canonicalize();
    CHECK(s.labels == std::vector<int>{0, 0, 1, 0, 2});
    CHECK(s.mark_a == 1);
}

TEST_CASE("state cache round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "loopcft_test_cache";
    std::filesystem::remove_all(dir);
    const auto g = Geometry::critical(5, Topology::strip, kWired, 2.0);
    const auto a = cached_states(g, 1, dir);
    const auto b = cached_states(g, 1, dir);
    REQUIRE(a->size() == b->size());
    for (std::size_t i = 0; i < a->size(); ++i) CHECK(a->key(i) == b->key(i));
    CHECK(b->wired());

    const auto bad = dir / "bad.bin";
    std::ofstream(bad) << "not a cache";
    CHECK_THROWS_AS(StateSpace::load(bad), DomainError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("apply_row basics") {
    const auto g = Geometry::critical(5, Topology::strip, kFree, 2.0);
    auto space = std::make_shared<const StateSpace>(enumerate_states(g));
    WeightedStateVector zero{space, std::vector<double>(space->size(), 0.0)};
    const auto out = apply_row(zero, g);
    for (double x : out.amplitudes) CHECK(x == 0.0);

    const auto other = Geometry::critical(5, Topology::cylinder, kFree, 2.0);
    CHECK_THROWS_AS(apply_row(zero, other), DomainError);
    WeightedStateVector wrong{space, std::vector<double>(3, 0.0)};
    CHECK_THROWS_AS(apply_row(wrong, g), DomainError);
}

TEST_CASE("hand-computed lattices") {
    const auto g = Geometry::critical(1, Topology::strip, kFree, 2.0);
    CHECK(connectivity(g, 0, {0, 0}, {0, 0}) == 1.0);
    const auto bf0 = brute_force_oracle(g, 0, {0, 0}, {0, 0});
    CHECK(bf0.edges == 0);
    CHECK(bf0.connectivity == 1.0);

    // one vertical edge: Z = q^2 + v q, connected weight v q
    const double v = std::sqrt(2.0);
    const auto bf = brute_force_oracle(g, 1, {0, 0}, {1, 0});
    CHECK(bf.partition_function == doctest::Approx(4.0 + 2.0 * v).epsilon(1e-15));
    CHECK(bf.connectivity == doctest::Approx(v - 1.0).epsilon(1e-14));
    CHECK(connectivity(g, 1, {0, 0}, {1, 0}) == doctest::Approx(v - 1.0).epsilon(1e-14));
    CHECK(std::exp(log_partition_function(g, 1)) == doctest::Approx(4.0 + 2.0 * v).epsilon(1e-14));
}

TEST_CASE("transfer matrix against exhaustive enumeration") {
    struct Case {
        int l, rows;
        Topology t;
        BoundaryCondition bc;
    };
    const Case cases[] = {{3, 2, Topology::strip, kFree},  {3, 3, Topology::strip, kWired}, {5, 1, Topology::strip, kFree},
                          {5, 2, Topology::strip, kWired}, {3, 3, Topology::cylinder, kFree}, {3, 4, Topology::strip, kFree}};
    for (double q : {1.0, 2.0, 3.25}) {
        for (const auto& c : cases) {
            const auto g = Geometry::critical(c.l, c.t, c.bc, q);
            CAPTURE(g.describe());
            CAPTURE(c.rows);
            const int m = g.middle_column();
            for (auto [a, b] : {std::pair{Site{0, m}, Site{c.rows, m}}, {Site{0, 0}, Site{c.rows, c.l - 1}},
                                {Site{1, 0}, Site{1, c.l - 1}}, {Site{c.rows, 0}, Site{0, m}}}) {
                const auto bf = brute_force_oracle(g, c.rows, a, b);
                CHECK(bf.edges <= 26);
                CHECK(rel(connectivity(g, c.rows, a, b), bf.connectivity) < 1e-10);
            }
            CHECK(std::fabs(log_partition_function(g, c.rows) -
                            std::log(brute_force_oracle(g, c.rows, {0, 0}, {0, 0}).partition_function)) < 1e-12);
        }
    }
    // the largest lattice allowed
    const auto g = Geometry::critical(5, Topology::cylinder, kFree, 2.0);
    const auto bf = brute_force_oracle(g, 2, {0, 2}, {2, 2});
    CHECK(bf.edges == 25);
    CHECK(rel(connectivity(g, 2, {0, 2}, {2, 2}), bf.connectivity) < 1e-10);
    CHECK_THROWS_AS(brute_force_oracle(Geometry::critical(5, Topology::strip, kFree, 2.0), 3, {0, 0}, {0, 0}),
                    CapacityError);
}

TEST_CASE("correlator with finite ends against enumeration") {
    const auto g = Geometry::critical(3, Topology::strip, kFree, 2.0);
    CorrelatorOptions opt;
    opt.end_rows = 0;
    const auto c = correlator(g, 3, opt);
    REQUIRE(c.values.size() == 4u);
    CHECK(c.values[0] == doctest::Approx(1.0).epsilon(1e-14));
    for (int u = 1; u <= 3; ++u) CHECK(rel(c.values[u], brute_force_oracle(g, u, {0, 1}, {u, 1}).connectivity) < 1e-10);

    opt.end_rows = 1;
    const auto d = correlator(Geometry::critical(3, Topology::strip, kWired, 3.25), 2, opt);
    for (int u = 0; u <= 2; ++u)
        CHECK(rel(d.values[u], brute_force_oracle(Geometry::critical(3, Topology::strip, kWired, 3.25), u + 2, {1, 1},
                                                  {u + 1, 1})
                                   .connectivity) < 1e-10);
}

TEST_CASE("Ising spin representation") {
    for (auto t : {Topology::strip, Topology::cylinder}) {
        for (auto bc : {kFree, kWired}) {
            if (t == Topology::cylinder && bc == kWired) continue;
            for (int l : {3, 5, 7}) {
                for (int rows : {6, 14}) {
                    const auto g = Geometry::critical(l, t, bc, 2.0);
                    CAPTURE(g.describe());
                    for (auto [a, b] : {std::pair{Site{0, l / 2}, Site{rows, l / 2}}, {Site{2, 0}, Site{rows - 1, l - 2}}}) {
                        CHECK(rel(connectivity(g, rows, a, b), ising_spin_correlator(g, rows, a, b)) < 1e-10);
                    }
                }
            }
        }
    }
}

TEST_CASE("probability bounds and long-distance behaviour") {
    for (double q : {1.0, 2.0, 3.0}) {
        for (auto bc : {kFree, kWired}) {
            const auto g = Geometry::critical(5, Topology::strip, bc, q);
            const auto c = correlator(g, 150);
            for (double x : c.values) {
                CHECK(x >= 0.0);
                CHECK(x <= 1.0 + 1e-12);
            }
            if (bc == kWired)
                CHECK(c.values.back() > 0.1);
            else
                CHECK(c.values.back() < 1e-6);
        }
    }
}

TEST_CASE("amplitude and gap on synthetic series") {
    CorrelatorSeries pure, shifted, drifting;
    for (int u = 0; u <= 60; ++u) {
        pure.distances.push_back(u);
        pure.values.push_back(3.0 * std::exp(-0.2 * u));
        shifted.distances.push_back(u);
        shifted.values.push_back(0.5 + 3.0 * std::exp(-0.2 * u));
        drifting.distances.push_back(u);
        drifting.values.push_back(3.0 * std::exp(-0.2 * u) + std::exp(-0.21 * u));
    }
    const auto a = amplitude_and_gap(pure);
    CHECK(a.amplitude == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(a.gap == doctest::Approx(0.2).epsilon(1e-12));
    const auto b = amplitude_and_gap(shifted, true);
    CHECK(b.background == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b.amplitude == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(b.gap == doctest::Approx(0.2).epsilon(1e-8));
    CHECK_THROWS_AS(amplitude_and_gap(drifting), ConvergenceError);
}

TEST_CASE("gaps follow the expected scaling") {
    // Ising: cylinder gap 4 pi Delta / L with Delta = 1/16
    const double target = std::numbers::pi / (4.0 * 9.0);
    const auto c9 = amplitude_and_gap(correlator(Geometry::critical(9, Topology::cylinder, kFree, 2.0), 270));
    CHECK(std::fabs(c9.gap / target - 1.0) < 0.02);

    const auto c7 = amplitude_and_gap(correlator(Geometry::critical(7, Topology::cylinder, kFree, 1.5), 210));
    const auto c11 = amplitude_and_gap(correlator(Geometry::critical(11, Topology::cylinder, kFree, 1.5), 330));
    CHECK(std::fabs(c7.gap * 7.0 / (c11.gap * 11.0) - 1.0) < 0.1);

    // free strip: gap L / pi approaches Delta_(3,1) = 1/2 from below
    double last = 0.0;
    for (int l : {5, 7, 9}) {
        const auto s = amplitude_and_gap(correlator(Geometry::critical(l, Topology::strip, kFree, 2.0), 30 * l));
        const double x = s.gap * l / std::numbers::pi;
        CHECK(x > last);
        CHECK(x < 0.5);
        last = x;
    }
    CHECK(last > 0.45);
}

TEST_CASE("lattice ratio at small widths") {
    const auto w = lattice_ratio(5, 2.0, kWired);
    const auto f = lattice_ratio(5, 2.0, kFree);
    CHECK(w.amplitude_cylinder == doctest::Approx(f.amplitude_cylinder).epsilon(1e-12));
    CHECK(w.ratio == doctest::Approx(0.6971976514).epsilon(1e-8));
    CHECK(f.ratio == doctest::Approx(1.4572946127).epsilon(1e-8));
    CHECK_THROWS_AS(lattice_ratio(4, 2.0, kWired), DomainError);
}
