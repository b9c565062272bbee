#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sbranch/oracle.hpp"

using namespace sbranch;
using namespace sbranch::testing;

TEST_CASE("zero time and zero generator give the identity") {
    const GeneratorMatrix gen = make_birth_death(6);
    const DenseMatrix I0 = exp_transition(gen, 0.0);
    for (std::size_t i = 0; i < I0.n; ++i)
        for (std::size_t j = 0; j < I0.n; ++j)
            CHECK(I0.at(i, j) == (i == j ? 1.0 : 0.0));

    const ParticleLaw frozen = make_frozen_law();
    const GeneratorMatrix zero =
        build_generator(frozen, TruncatedSpace::enumerate(frozen.types(), 4));
    const DenseMatrix I1 = exp_transition(zero, 3.7);
    for (std::size_t i = 0; i < I1.n; ++i)
        for (std::size_t j = 0; j < I1.n; ++j)
            CHECK(I1.at(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("rows are stochastic") {
    const GeneratorMatrix gen = make_birth_death(32);
    const DenseMatrix P = exp_transition(gen, 1.0);
    for (std::size_t i = 0; i < P.n; ++i) {
        CHECK(P.row_sum(i) == doctest::Approx(1.0).epsilon(1e-10));
        for (std::size_t j = 0; j < P.n; ++j) CHECK(P.at(i, j) >= 0.0);
    }
}

TEST_CASE("extinction mass matches the closed form") {
    const GeneratorMatrix gen = make_birth_death(32);  // b = 1.0, d = 0.5
    const Configuration one = Configuration::single(0, 1);
    for (double t : {0.25, 0.5, 1.0, 2.0}) {
        const double expected = birth_death_extinction(1.0, 0.5, t);
        CHECK(extinction_probability(gen, std::nullopt, t, one) ==
              doctest::Approx(expected).epsilon(1e-7));
    }
    CHECK(extinction_probability(gen, std::nullopt, 0.0, one) == 0.0);
}

TEST_CASE("pure-death extinction is the exponential lifetime law") {
    const GeneratorMatrix gen = make_birth_death(8, 1.0, 1.0);  // death only
    const double p = extinction_probability(gen, std::nullopt, 1.0,
                                            Configuration::single(0, 1));
    CHECK(p == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-10));
}

TEST_CASE("transition matrices compose as a semigroup") {
    const GeneratorMatrix gen = make_birth_death(16);
    const DenseMatrix a = exp_transition(gen, 0.4);
    const DenseMatrix b = exp_transition(gen, 0.6);
    const DenseMatrix direct = exp_transition(gen, 1.0);
    const DenseMatrix composed = a.multiply(b);
    for (std::size_t i = 0; i < direct.n; ++i)
        for (std::size_t j = 0; j < direct.n; ++j)
            CHECK(composed.at(i, j) == doctest::Approx(direct.at(i, j)).epsilon(1e-9));
}

TEST_CASE("absorbing a stopping set zeroes exactly those rows") {
    const GeneratorMatrix gen = make_birth_death(8);
    const StoppingSet stop({Configuration::single(0, 3)});
    const GeneratorMatrix absorbed = absorb(gen, stop);
    const auto& space = gen.space();
    const std::size_t three = *space.index_of(Configuration::single(0, 3));
    CHECK(absorbed.stay_rate(three) == 0.0);
    CHECK(absorbed.jump_row(three).empty());
    for (std::size_t i = 0; i < space.num_states(); ++i) {
        if (i == three) continue;
        CHECK(absorbed.stay_rate(i) == gen.stay_rate(i));
        CHECK(absorbed.jump_row(i).size() == gen.jump_row(i).size());
        CHECK(std::abs(absorbed.row_sum(i)) <= kRowSumTol);
    }

    SUBCASE("empty set leaves the generator unchanged") {
        const GeneratorMatrix same = absorb(gen, StoppingSet());
        for (std::size_t i = 0; i < gen.num_indices(); ++i)
            CHECK(same.stay_rate(i) == gen.stay_rate(i));
    }
}

TEST_CASE("mass on stopped states is nondecreasing in time") {
    const GeneratorMatrix gen = make_birth_death(8);
    const StoppingSet stop({Configuration::single(0, 3)});
    const Configuration one = Configuration::single(0, 1);
    const std::size_t three = *gen.space().index_of(Configuration::single(0, 3));
    double prev = 0.0;
    for (double t : {0.2, 0.4, 0.8, 1.6, 3.2}) {
        const double mass = oracle_distribution(gen, stop, 0.0, t, one).values[three];
        CHECK(mass >= prev - 1e-12);
        prev = mass;
    }
}

TEST_CASE("stopped extinction counts the stopping set and the empty state") {
    const GeneratorMatrix gen = make_birth_death(8);
    const StoppingSet stop({Configuration::single(0, 3)});
    const Configuration one = Configuration::single(0, 1);
    const Distribution d = oracle_distribution(gen, stop, 0.0, 1.0, one);
    const double expected = d.values[*gen.space().index_of(Configuration())] +
                            d.values[*gen.space().index_of(Configuration::single(0, 3))];
    CHECK(extinction_probability(gen, stop, 1.0, one) ==
          doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("ordinary extinction is nondecreasing and approaches one when subcritical") {
    const GeneratorMatrix gen = make_birth_death(32, 1.4, 5.0 / 7.0);  // b=0.4, d=1.0
    const Configuration one = Configuration::single(0, 1);
    double prev = 0.0;
    for (double t : {1.0, 2.0, 5.0, 10.0, 20.0}) {
        const double p = extinction_probability(gen, std::nullopt, t, one);
        CHECK(p >= prev);
        prev = p;
    }
    CHECK(prev >= 0.999);
}

TEST_CASE("dense size limit raises a capacity error") {
    const GeneratorMatrix gen = make_birth_death(32);
    CHECK_THROWS_AS(exp_transition(gen, 1.0, 8), CapacityError);
}

TEST_CASE("modulated durations rescale the oracle") {
    auto c = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    TimeModulation mod(c, 1.5, [](double t) { return t - 0.5 * std::cos(t); });
    const GeneratorMatrix plain = make_birth_death(12);
    const GeneratorMatrix scaled = make_birth_death(12, 1.5, 1.0 / 3.0, mod);
    const Configuration one = Configuration::single(0, 1);

    const double duration = mod.integral(0.0, 1.0);
    const Distribution via_model = oracle_distribution(scaled, std::nullopt, 0.0, 1.0, one);
    const Distribution via_rescale =
        oracle_distribution(plain, std::nullopt, 0.0, duration, one);
    CHECK(Distribution::sup_distance(via_model, via_rescale) <= 1e-12);
}

TEST_CASE("the propagator agrees with the dense transition matrix") {
    const GeneratorMatrix gen = make_birth_death(10);
    std::vector<double> v(gen.num_indices(), 0.0);
    v[*gen.space().index_of(Configuration())] = 2.0;
    v[*gen.space().index_of(Configuration::single(0, 2))] = -1.0;

    const UniformizedPropagator prop(gen, v, 1.5);
    for (double tau : {0.0, 0.3, 0.9, 1.5}) {
        const DenseMatrix P = exp_transition(gen, tau);
        const std::vector<double> u = prop.at(tau);
        for (std::size_t i = 0; i < P.n; ++i) {
            double expected = 0.0;
            for (std::size_t j = 0; j < P.n; ++j) expected += P.at(i, j) * v[j];
            CHECK(u[i] == doctest::Approx(expected).epsilon(1e-10));
        }
    }
    CHECK_THROWS_AS(prop.at(2.0), DomainError);
}
