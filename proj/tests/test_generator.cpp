#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sbranch/generator.hpp"
#include "sbranch/rng.hpp"

using namespace sbranch;
using namespace sbranch::testing;

namespace {

double entry(const GeneratorMatrix& gen, std::size_t row, std::size_t col) {
    if (row == col) return gen.stay_rate(row);
    for (const auto& e : gen.jump_row(row))
        if (e.col == col) return e.rate;
    return 0.0;
}

}  // namespace

TEST_CASE("aggregation of the per-particle law into configuration rates") {
    const GeneratorMatrix gen = make_birth_death(8);
    const auto& space = gen.space();
    const std::size_t two = *space.index_of(Configuration::single(0, 2));

    // 2 particles * rate 1.5 split 1/3 death : 2/3 birth.
    CHECK(gen.stay_rate(two) == doctest::Approx(-3.0).epsilon(1e-15));
    CHECK(entry(gen, two, *space.index_of(Configuration::single(0, 1))) ==
          doctest::Approx(1.0).epsilon(1e-15));
    CHECK(entry(gen, two, *space.index_of(Configuration::single(0, 3))) ==
          doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("the empty configuration is absorbing") {
    const GeneratorMatrix gen = make_birth_death(4);
    const std::size_t zero = *gen.space().index_of(Configuration());
    CHECK(gen.stay_rate(zero) == 0.0);
    CHECK(gen.jump_row(zero).empty());
    CHECK(gen.stay_rate(gen.space().overflow_index()) == 0.0);
    CHECK(gen.jump_row(gen.space().overflow_index()).empty());
}

TEST_CASE("self-returning events carry no rate") {
    TypeSpace types({1.0});
    TypeLaw tl;
    tl.rate = 2.0;
    tl.offspring.push_back({Configuration::single(0, 1), 1.0});
    const ParticleLaw law(types, {tl});
    const GeneratorMatrix gen = build_generator(law, TruncatedSpace::enumerate(types, 5));
    for (std::size_t i = 0; i < gen.num_indices(); ++i) {
        CHECK(gen.stay_rate(i) == 0.0);
        CHECK(gen.jump_row(i).empty());
    }
}

TEST_CASE("events past the cap route to the overflow sentinel") {
    const GeneratorMatrix gen = make_birth_death(3);
    const auto& space = gen.space();
    const std::size_t three = *space.index_of(Configuration::single(0, 3));
    CHECK(entry(gen, three, space.overflow_index()) == doctest::Approx(3.0 * 1.0));
    CHECK(gen.row_sum(three) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("generator axioms hold for randomized laws") {
    SplitRng rng(2024, 1);
    for (int trial = 0; trial < 10; ++trial) {
        TypeSpace types({1.0, 2.0});
        std::vector<TypeLaw> laws(2);
        for (auto& tl : laws) {
            tl.rate = 0.2 + 2.0 * rng.uniform();
            const double p0 = rng.uniform(), p1 = rng.uniform(), p2 = rng.uniform();
            const double z = p0 + p1 + p2;
            tl.offspring.push_back({Configuration(), p0 / z});
            tl.offspring.push_back({Configuration::single(0, 2), p1 / z});
            tl.offspring.push_back({Configuration({{0, 1}, {1, 1}}), p2 / z});
        }
        const ParticleLaw law(types, laws);
        const GeneratorMatrix gen =
            build_generator(law, TruncatedSpace::enumerate(types, 6));
        for (std::size_t i = 0; i < gen.num_indices(); ++i) {
            CHECK(gen.stay_rate(i) <= 0.0);
            for (const auto& e : gen.jump_row(i)) CHECK(e.rate >= 0.0);
            CHECK(std::abs(gen.row_sum(i)) <= kRowSumTol);
        }
    }
}

TEST_CASE("stay rate is additive over merged populations") {
    const GeneratorMatrix gen = make_two_type(10);
    const auto& space = gen.space();
    const Configuration a1({{0, 2}}), a2({{0, 1}, {1, 2}});
    const double qm = gen.stay_rate(*space.index_of(a1.plus(a2)));
    const double q1 = gen.stay_rate(*space.index_of(a1));
    const double q2 = gen.stay_rate(*space.index_of(a2));
    CHECK(qm == doctest::Approx(q1 + q2).epsilon(1e-14));
}

TEST_CASE("row partitions") {
    const GeneratorMatrix gen = make_birth_death(8);
    const auto& space = gen.space();
    const StoppingSet stop({Configuration::single(0, 3)});
    const StopMask mask = StopMask::resolve(stop, space);
    const StopMask nomask = StopMask::none(space);
    const std::size_t two = *space.index_of(Configuration::single(0, 2));

    SUBCASE("empty stopping set collapses the partitions") {
        const auto p1 = partition_row(gen, two, RowPart::JumpAll, nomask);
        const auto p2 = partition_row(gen, two, RowPart::JumpAvoiding, nomask);
        const auto into = partition_row(gen, two, RowPart::IntoStop, nomask);
        REQUIRE(p1.size() == p2.size());
        for (std::size_t i = 0; i < p1.size(); ++i) {
            CHECK(p1[i].col == p2[i].col);
            CHECK(p1[i].rate == p2[i].rate);
        }
        CHECK(into.empty());
        const auto full = partition_row(gen, two, RowPart::ExcludingStop, nomask);
        CHECK(full.size() == p1.size() + 1);  // diagonal included
    }

    SUBCASE("stop-set entries split off") {
        const auto into = partition_row(gen, two, RowPart::IntoStop, mask);
        REQUIRE(into.size() == 1);
        CHECK(into[0].col == *space.index_of(Configuration::single(0, 3)));
        CHECK(into[0].rate == doctest::Approx(2.0));
        const auto avoid = partition_row(gen, two, RowPart::JumpAvoiding, mask);
        REQUIRE(avoid.size() == 1);
        CHECK(avoid[0].col == *space.index_of(Configuration::single(0, 1)));
        CHECK(avoid[0].rate == doctest::Approx(1.0));
    }

    SUBCASE("into-stop and excluding-stop reassemble the full row exactly") {
        for (std::size_t row = 0; row < space.num_states(); ++row) {
            const auto into = partition_row(gen, row, RowPart::IntoStop, mask);
            const auto rest = partition_row(gen, row, RowPart::ExcludingStop, mask);
            double sum = 0.0;
            for (const auto& e : into) sum += e.rate;
            for (const auto& e : rest) sum += e.rate;
            CHECK(sum == doctest::Approx(gen.row_sum(row)).epsilon(1e-15));
            CHECK(std::abs(sum) <= kRowSumTol);
        }
    }

    SUBCASE("stay plus jumps is zero") {
        for (std::size_t row = 0; row < space.num_states(); ++row) {
            double sum = gen.stay_rate(row);
            for (const auto& e : partition_row(gen, row, RowPart::JumpAll, nomask))
                sum += e.rate;
            CHECK(std::abs(sum) <= kRowSumTol);
        }
    }
}

TEST_CASE("stay-weight integral") {
    const GeneratorMatrix gen = make_birth_death(8);
    const Configuration two = Configuration::single(0, 2);

    CHECK(log_stay_weight(gen, 1.0, 1.0, two) == 0.0);
    CHECK(log_stay_weight(gen, 0.0, 0.5, two) == doctest::Approx(-1.5).epsilon(1e-14));
    CHECK(log_stay_weight(gen, 0.0, 7.0, Configuration()) == 0.0);
    CHECK_THROWS_AS(log_stay_weight(gen, 1.0, 0.5, two), DomainError);

    // Weights are probabilities.
    for (std::size_t i = 0; i < gen.space().num_states(); ++i) {
        const double w = std::exp(log_stay_weight(gen, 0.0, 1.7, i));
        CHECK(w > 0.0);
        CHECK(w <= 1.0);
    }
}

TEST_CASE("scalar modulation scales the stay-weight integral") {
    auto c = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    const double t1 = 0.25, t2 = 1.75;
    const double exact = (t2 - t1) + 0.5 * (std::cos(t1) - std::cos(t2));

    SUBCASE("quadrature route") {
        const GeneratorMatrix gen = make_birth_death(8, 1.5, 1.0 / 3.0,
                                                     TimeModulation(c, 1.5));
        const double j = log_stay_weight(gen, t1, t2, Configuration::single(0, 2));
        CHECK(j == doctest::Approx(-3.0 * exact).epsilon(1e-12));
    }
    SUBCASE("antiderivative route") {
        TimeModulation mod(c, 1.5, [](double t) { return t - 0.5 * std::cos(t); });
        const GeneratorMatrix gen = make_birth_death(8, 1.5, 1.0 / 3.0, mod);
        const double j = log_stay_weight(gen, t1, t2, Configuration::single(0, 2));
        CHECK(j == doctest::Approx(-3.0 * exact).epsilon(1e-14));
    }
}

TEST_CASE("law validation") {
    TypeSpace types({1.0});
    SUBCASE("offspring probabilities must normalize") {
        TypeLaw tl;
        tl.rate = 1.0;
        tl.offspring.push_back({Configuration(), 0.9});
        CHECK_THROWS_AS(ParticleLaw(types, {tl}), DomainError);
    }
    SUBCASE("negative rates rejected") {
        TypeLaw tl;
        tl.rate = -1.0;
        CHECK_THROWS_AS(ParticleLaw(types, {tl}), DomainError);
    }
    SUBCASE("brood cap enforced") {
        TypeLaw tl;
        tl.rate = 1.0;
        tl.offspring.push_back({Configuration::single(0, 3), 1.0});
        CHECK_THROWS_AS(ParticleLaw(types, {tl}, 2), DomainError);
        CHECK_NOTHROW(ParticleLaw(types, {tl}, 3));
    }
    SUBCASE("law must match the space's types") {
        const ParticleLaw law = make_birth_death_law();
        const TypeSpace other({2.0});
        CHECK_THROWS_AS(build_generator(law, TruncatedSpace::enumerate(other, 4)),
                        DomainError);
    }
}
