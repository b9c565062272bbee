#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sbranch/functionals.hpp"
#include "sbranch/oracle.hpp"
#include "sbranch/rng.hpp"
#include "sbranch/simulator.hpp"

using namespace sbranch;
using namespace sbranch::testing;

TEST_CASE("expectation of the exponential statistic") {
    const GeneratorMatrix gen = make_birth_death(16);
    const auto& space = gen.space();
    const Configuration one = Configuration::single(0, 1);
    const Distribution dist = oracle_distribution(gen, std::nullopt, 0.0, 1.0, one);

    SUBCASE("zero weights recover the mass on the states") {
        const TestFunction zero = TestFunction::constant(0.0, 1);
        double state_mass = 0.0;
        for (double v : dist.values) state_mass += v;
        CHECK(laplace(dist, zero, space) == doctest::Approx(state_mass).epsilon(1e-14));

        // With a wide truncation next to no mass escapes, so the log
        // expectation sits at zero.
        const GeneratorMatrix wide = make_birth_death(32);
        const Distribution big = oracle_distribution(wide, std::nullopt, 0.0, 1.0, one);
        CHECK(std::abs(log_laplace(big, zero, wide.space())) <= 1e-7);
    }
    SUBCASE("a point mass evaluates the statistic directly") {
        Distribution point;
        point.values.assign(space.num_states(), 0.0);
        point.values[*space.index_of(Configuration::single(0, 2))] = 1.0;
        const TestFunction s = TestFunction::constant(-0.5, 1);
        CHECK(laplace(point, s, space) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    }
    SUBCASE("log of an all-zero distribution is a domain error") {
        Distribution none;
        none.values.assign(space.num_states(), 0.0);
        none.tail = 1.0;
        const TestFunction s = TestFunction::constant(-1.0, 1);
        CHECK_THROWS_AS(log_laplace(none, s, space), DomainError);
    }
}

TEST_CASE("two independent routes to the expectation agree") {
    const GeneratorMatrix gen = make_birth_death(32);
    const auto& space = gen.space();
    const Configuration one = Configuration::single(0, 1);
    const TestFunction s = TestFunction::constant(-1.0, 1);

    const double via_matrix =
        laplace(oracle_distribution(gen, std::nullopt, 0.0, 1.0, one), s, space);
    const Estimate mc = estimate_functional(make_birth_death_law(), one,
                                            SimOptions{0.0, 1.0, 320, {}, {}}, s, 20000, 31);
    CHECK(std::abs(mc.mean() - via_matrix) <= 3.0 * mc.std_error());
}

TEST_CASE("density-form functional on the standard row") {
    const GeneratorMatrix gen = make_birth_death(16);
    const Configuration one = Configuration::single(0, 1);
    const TestFunction s = TestFunction::constant(-1.0, 1);

    // Row of one particle: 0.5 to empty, 1.0 to two particles, -1.5 stays.
    const double expected_raw =
        0.5 * std::exp(0.0) + 1.0 * std::exp(-2.0) - 1.5 * std::exp(-1.0);
    const DensityFunctional d = density_functional(gen, std::nullopt, one, s);
    CHECK(d.raw == doctest::Approx(expected_raw).epsilon(1e-14));
    CHECK(d.normalized == doctest::Approx(std::exp(1.0) * expected_raw).epsilon(1e-14));
}

TEST_CASE("density-form functional edge rows") {
    const GeneratorMatrix gen = make_birth_death(8);
    const TestFunction s = TestFunction::constant(-0.3, 1);
    SUBCASE("empty configuration row vanishes") {
        const DensityFunctional d = density_functional(gen, std::nullopt, Configuration(), s);
        CHECK(d.raw == 0.0);
        CHECK(d.normalized == 0.0);
    }
    SUBCASE("frozen generator vanishes everywhere") {
        const ParticleLaw law = make_frozen_law();
        const GeneratorMatrix zero =
            build_generator(law, TruncatedSpace::enumerate(law.types(), 4));
        for (std::size_t i = 0; i < zero.space().num_states(); ++i) {
            const DensityFunctional d =
                density_functional(zero, std::nullopt, zero.space().state(i), s);
            CHECK(d.raw == 0.0);
            CHECK(d.normalized == 0.0);
        }
    }
}

TEST_CASE("stopped density functional excludes entry columns") {
    const GeneratorMatrix gen = make_birth_death(8);
    const StoppingSet stop({Configuration::single(0, 3)});
    const TestFunction s = TestFunction::constant(-1.0, 1);
    const Configuration two = Configuration::single(0, 2);

    // Row of two particles: 1.0 to one particle, 2.0 to three (excluded),
    // -3.0 stays.
    const DensityFunctional d = density_functional(gen, stop, two, s);
    const double expected = 1.0 * std::exp(-1.0) - 3.0 * std::exp(-2.0);
    CHECK(d.raw == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("additivity of the normalized functional") {
    const GeneratorMatrix gen = make_birth_death(40);
    const TestFunction s = TestFunction::constant(-1.0, 1);
    const Configuration one = Configuration::single(0, 1);

    SUBCASE("merging with the empty configuration is exact") {
        const AdditivityResiduals r =
            additivity_check(gen, std::nullopt, one, Configuration(), s, 0.5);
        CHECK(r.normalized == 0.0);
        CHECK(r.product <= 1e-12);
    }
    SUBCASE("two singles at a wide truncation") {
        const AdditivityResiduals r = additivity_check(gen, std::nullopt, one, one, s, 0.5);
        CHECK(r.normalized <= 1e-8);
        CHECK(r.product <= 1e-8);
    }
}

TEST_CASE("normalized additivity is exact over random triples of a two-type model") {
    const GeneratorMatrix gen = make_two_type(12);
    SplitRng rng(314, 1);
    for (int trial = 0; trial < 20; ++trial) {
        auto draw = [&]() {
            std::vector<Configuration::Entry> entries;
            std::uint32_t left = 1 + static_cast<std::uint32_t>(rng.next() % 3);
            for (std::size_t t = 0; t < 2 && left > 0; ++t) {
                const std::uint32_t n = static_cast<std::uint32_t>(rng.next() % (left + 1));
                if (n > 0) entries.emplace_back(t, n);
                left -= n;
            }
            return entries.empty() ? Configuration::single(0, 1)
                                   : Configuration(std::move(entries));
        };
        const Configuration a1 = draw(), a2 = draw();
        std::vector<double> svals = {-2.0 * rng.uniform(), -2.0 * rng.uniform()};
        const TestFunction s = TestFunction::from_values(svals);

        const DensityFunctional dm = density_functional(gen, std::nullopt, a1.plus(a2), s);
        const DensityFunctional d1 = density_functional(gen, std::nullopt, a1, s);
        const DensityFunctional d2 = density_functional(gen, std::nullopt, a2, s);
        CHECK(std::abs(dm.normalized - d1.normalized - d2.normalized) <= 1e-12);
    }
}

TEST_CASE("raising a weight raises the expectation") {
    const GeneratorMatrix gen = make_two_type(10);
    const auto& space = gen.space();
    const Configuration start({{0, 1}, {1, 1}});
    const Distribution dist = oracle_distribution(gen, std::nullopt, 0.0, 0.6, start);

    const TestFunction lo = TestFunction::from_values({-1.0, -0.5});
    const TestFunction hi = TestFunction::from_values({-0.8, -0.5});
    CHECK(laplace(dist, hi, space) > laplace(dist, lo, space));
    CHECK(log_laplace(dist, hi, space) > log_laplace(dist, lo, space));
}

TEST_CASE("admissible weights keep the expectation in (0, 1]") {
    const GeneratorMatrix gen = make_two_type(10);
    const auto& space = gen.space();
    SplitRng rng(555, 2);
    const Distribution dist = oracle_distribution(gen, std::nullopt, 0.0, 0.5,
                                                  Configuration({{0, 1}, {1, 1}}));
    for (int trial = 0; trial < 10; ++trial) {
        const TestFunction s =
            TestFunction::from_values({-3.0 * rng.uniform(), -3.0 * rng.uniform()});
        REQUIRE(s.laplace_admissible());
        const double f = laplace(dist, s, space);
        CHECK(f > 0.0);
        CHECK(f <= 1.0 + 1e-12);
    }
    CHECK(!TestFunction::from_values({-1.0, 0.1}).laplace_admissible());
}

TEST_CASE("short-interval link between the two functional forms") {
    const GeneratorMatrix gen = make_birth_death(16);
    const Configuration one = Configuration::single(0, 1);
    const TestFunction s = TestFunction::constant(-1.0, 1);

    SUBCASE("frozen generator gives a zero residual") {
        const ParticleLaw law = make_frozen_law();
        const GeneratorMatrix zero =
            build_generator(law, TruncatedSpace::enumerate(law.types(), 4));
        CHECK(derivative_link_check(zero, std::nullopt, Configuration::single(0, 1), s,
                                    1e-3) <= 1e-12);
    }
    SUBCASE("the residual shrinks at first order") {
        const double r3 = derivative_link_check(gen, std::nullopt, one, s, 1e-3);
        const double r4 = derivative_link_check(gen, std::nullopt, one, s, 1e-4);
        CHECK(r3 / r4 > 5.0);
        CHECK(r3 / r4 < 20.0);
    }
    SUBCASE("stopped variant behaves the same from a state away from the set") {
        const StoppingSet stop({Configuration::single(0, 3)});
        const double r3 = derivative_link_check(gen, stop, one, s, 1e-3);
        const double r4 = derivative_link_check(gen, stop, one, s, 1e-4);
        CHECK(r3 / r4 > 5.0);
        CHECK(r3 / r4 < 20.0);
    }
    CHECK_THROWS_AS(derivative_link_check(gen, std::nullopt, one, s, 0.0), DomainError);
}
