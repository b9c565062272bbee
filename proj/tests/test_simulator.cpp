#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sbranch/oracle.hpp"
#include "sbranch/simulator.hpp"

using namespace sbranch;
using namespace sbranch::testing;

namespace {

SimOptions basic_opts(double horizon, std::uint64_t cap = 320) {
    SimOptions opts;
    opts.horizon = horizon;
    opts.cap = cap;
    return opts;
}

}  // namespace

TEST_CASE("a frozen law never jumps") {
    const ParticleLaw law = make_frozen_law();
    SplitRng rng(1, 0);
    const Configuration start = Configuration::single(0, 3);
    const Trajectory traj = simulate(law, start, basic_opts(5.0), rng);
    CHECK(traj.outcome == Outcome::AliveAtHorizon);
    CHECK(traj.jump_times.empty());
    CHECK(traj.terminal() == start);
}

TEST_CASE("starting empty is immediately extinct") {
    const ParticleLaw law = make_birth_death_law();
    SplitRng rng(1, 0);
    const Trajectory traj = simulate(law, Configuration(), basic_opts(1.0), rng);
    CHECK(traj.outcome == Outcome::Extinct);
    CHECK(traj.jump_times.empty());
}

TEST_CASE("starting inside the stopping set is rejected") {
    const ParticleLaw law = make_birth_death_law();
    SimOptions opts = basic_opts(1.0);
    opts.stop = StoppingSet({Configuration::single(0, 3)});
    SplitRng rng(1, 0);
    CHECK_THROWS_AS(simulate(law, Configuration::single(0, 3), opts, rng), DomainError);
}

TEST_CASE("identical seeds give byte-identical trajectories") {
    const ParticleLaw law = make_birth_death_law();
    SplitRng a(99, 7), b(99, 7);
    const Trajectory ta = simulate(law, Configuration::single(0, 2), basic_opts(2.0), a);
    const Trajectory tb = simulate(law, Configuration::single(0, 2), basic_opts(2.0), b);
    CHECK(ta.serialize() == tb.serialize());

    // Different streams diverge almost surely.
    SplitRng c(99, 8);
    const Trajectory tc = simulate(law, Configuration::single(0, 2), basic_opts(2.0), c);
    CHECK(ta.serialize() != tc.serialize());
}

TEST_CASE("stopped trajectories never visit the set early and stay frozen") {
    const ParticleLaw law = make_birth_death_law();
    SimOptions opts = basic_opts(4.0);
    const StoppingSet stop({Configuration::single(0, 3)});
    opts.stop = stop;
    int stopped_seen = 0;
    for (std::uint64_t i = 0; i < 200; ++i) {
        SplitRng rng(5, i);
        const Trajectory traj = simulate(law, Configuration::single(0, 1), opts, rng);
        if (traj.stopped_at) {
            ++stopped_seen;
            CHECK(traj.outcome == Outcome::StoppedInSet);
            CHECK(stop.contains(traj.stopped_at->second));
            CHECK(traj.states.back() == traj.stopped_at->second);
            for (std::size_t j = 0; j + 1 < traj.states.size(); ++j)
                CHECK(!stop.contains(traj.states[j]));
        }
    }
    CHECK(stopped_seen > 0);  // the set is reachable at this horizon
}

TEST_CASE("the cap turns runaway growth into an overflow outcome") {
    const ParticleLaw law = make_birth_death_law(3.0, 0.05);  // strongly supercritical
    SimOptions opts = basic_opts(6.0, 16);
    int overflowed = 0;
    for (std::uint64_t i = 0; i < 50; ++i) {
        SplitRng rng(17, i);
        const Trajectory traj = simulate(law, Configuration::single(0, 2), opts, rng);
        if (traj.outcome == Outcome::Overflowed) {
            ++overflowed;
            CHECK(traj.terminal().total() > opts.cap);
        }
    }
    CHECK(overflowed > 0);
}

TEST_CASE("extinct fraction agrees with the closed form within three sigma") {
    const ParticleLaw law = make_birth_death_law();  // b=1, d=0.5
    const double expected = birth_death_extinction(1.0, 0.5, 1.0);
    const Estimate est =
        estimate_event(law, Configuration::single(0, 1), basic_opts(1.0),
                       [](const Configuration& c) { return c.empty(); }, 20000, 42);
    CHECK(std::abs(est.mean() - expected) <= 3.0 * est.std_error());
}

TEST_CASE("event estimates are exact at the edges") {
    const ParticleLaw law = make_birth_death_law();
    SUBCASE("always-true predicate") {
        const Estimate est =
            estimate_event(law, Configuration::single(0, 1), basic_opts(0.5),
                           [](const Configuration&) { return true; }, 500, 9);
        CHECK(est.mean() == 1.0);
        CHECK(est.std_error() == 0.0);
    }
    SUBCASE("terminal in an empty stopping set") {
        const StoppingSet empty;
        const Estimate est = estimate_event(
            law, Configuration::single(0, 1), basic_opts(0.5),
            [&](const Configuration& c) { return empty.contains(c); }, 500, 9);
        CHECK(est.mean() == 0.0);
    }
}

TEST_CASE("functional estimates") {
    const ParticleLaw law = make_birth_death_law();
    SUBCASE("zero weight function scores one exactly") {
        const TestFunction s = TestFunction::constant(0.0, 1);
        const Estimate est = estimate_functional(law, Configuration::single(0, 1),
                                                 basic_opts(1.0), s, 400, 3);
        CHECK(est.mean() == 1.0);
        CHECK(est.std_error() == 0.0);
    }
    SUBCASE("zero horizon scores the start state with no spread") {
        const TestFunction s = TestFunction::constant(-1.0, 1);
        const Estimate est = estimate_functional(law, Configuration::single(0, 2),
                                                 basic_opts(0.0), s, 100, 3);
        CHECK(est.mean() == std::exp(-2.0));
        CHECK(est.std_error() == 0.0);
    }
    SUBCASE("finite weights are required") {
        const TestFunction bad = TestFunction::partial({std::nullopt});
        CHECK_THROWS_AS(estimate_functional(law, Configuration::single(0, 1),
                                            basic_opts(1.0), bad, 10, 3),
                        DomainError);
    }
}

TEST_CASE("pooled estimates from split streams equal the single run") {
    const ParticleLaw law = make_birth_death_law();
    const auto predicate = [](const Configuration& c) { return c.empty(); };
    const Configuration one = Configuration::single(0, 1);
    const SimOptions opts = basic_opts(1.0);

    SUBCASE("event kind is exact") {
        const Estimate whole = estimate_event(law, one, opts, predicate, 6000, 11);
        const Estimate left = estimate_event_range(law, one, opts, predicate, 0, 2500, 11);
        const Estimate right =
            estimate_event_range(law, one, opts, predicate, 2500, 3500, 11);
        const Estimate merged = Estimate::merged(left, right);
        CHECK(merged.replicas == whole.replicas);
        CHECK(merged.mean() == whole.mean());
        CHECK(merged.std_error() == whole.std_error());
    }
    SUBCASE("functional kind agrees to rounding") {
        const TestFunction s = TestFunction::constant(-0.7, 1);
        const Estimate whole = estimate_functional(law, one, opts, s, 6000, 11);
        const Estimate left = estimate_functional_range(law, one, opts, s, 0, 2500, 11);
        const Estimate right = estimate_functional_range(law, one, opts, s, 2500, 3500, 11);
        const Estimate merged = Estimate::merged(left, right);
        CHECK(merged.mean() == doctest::Approx(whole.mean()).epsilon(1e-12));
        CHECK(merged.std_error() == doctest::Approx(whole.std_error()).epsilon(1e-12));
    }
    SUBCASE("mismatched kinds or seeds cannot merge") {
        const Estimate a = estimate_event(law, one, opts, predicate, 10, 1);
        const Estimate b = estimate_event(law, one, opts, predicate, 10, 2);
        CHECK_THROWS_AS(Estimate::merged(a, b), ContractViolation);
    }
}

TEST_CASE("coverage of the three-sigma band across meta runs") {
    const ParticleLaw law = make_birth_death_law();
    const double expected = birth_death_extinction(1.0, 0.5, 1.0);
    const Configuration one = Configuration::single(0, 1);
    int covered = 0;
    for (std::uint64_t run = 0; run < 100; ++run) {
        const Estimate est =
            estimate_event(law, one, basic_opts(1.0),
                           [](const Configuration& c) { return c.empty(); }, 2000,
                           1000 + run);
        if (std::abs(est.mean() - expected) <= 3.0 * est.std_error()) ++covered;
    }
    CHECK(covered >= 99);
}

TEST_CASE("thinning reproduces the modulated law") {
    auto c = [](double t) { return 1.0 + 0.5 * std::sin(t); };
    TimeModulation mod(c, 1.5, [](double t) { return t - 0.5 * std::cos(t); });
    const ParticleLaw law = make_birth_death_law();
    const GeneratorMatrix gen = make_birth_death(32, 1.5, 1.0 / 3.0, mod);

    SimOptions opts = basic_opts(1.0);
    opts.modulation = mod;
    const Estimate est =
        estimate_event(law, Configuration::single(0, 1), opts,
                       [](const Configuration& c) { return c.empty(); }, 20000, 77);
    const double expected =
        extinction_probability(gen, std::nullopt, 1.0, Configuration::single(0, 1));
    CHECK(std::abs(est.mean() - expected) <= 3.0 * est.std_error());
}

TEST_CASE("overflowed replicas score zero and are counted") {
    const ParticleLaw law = make_birth_death_law(3.0, 0.05);
    SimOptions opts = basic_opts(6.0, 8);
    const TestFunction s = TestFunction::constant(0.0, 1);
    const Estimate est =
        estimate_functional(law, Configuration::single(0, 2), opts, s, 2000, 23);
    CHECK(est.overflowed > 0);
    // Every non-overflowed replica scores exp(0) = 1.
    CHECK(est.mean() == doctest::Approx(1.0 - static_cast<double>(est.overflowed) / 2000.0)
                            .epsilon(1e-12));
}
