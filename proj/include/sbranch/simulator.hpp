#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sbranch/config_space.hpp"
#include "sbranch/generator.hpp"
#include "sbranch/rng.hpp"

namespace sbranch {

enum class Outcome { AliveAtHorizon, Extinct, StoppedInSet, Overflowed };

std::string outcome_name(Outcome o);

// One sampled path: piecewise-constant states changing at the jump times.
struct Trajectory {
    double t0 = 0.0;
    double horizon = 0.0;
    Configuration initial;
    std::vector<double> jump_times;
    std::vector<Configuration> states;  // state after each jump
    std::optional<std::pair<double, Configuration>> stopped_at;
    Outcome outcome = Outcome::AliveAtHorizon;

    const Configuration& terminal() const;
    std::string serialize(const TypeSpace* types = nullptr) const;
};

struct SimOptions {
    double t0 = 0.0;
    double horizon = 0.0;
    std::uint64_t cap = 0;  // population bound; exceeding it ends the replica
    std::optional<StoppingSet> stop;
    TimeModulation modulation;
};

// Exact event-driven sample: exponential holding at the configuration's total
// rate, event particle chosen proportionally to count * rate, brood sampled
// from the offspring law. Modulation is handled by thinning against its
// maximum. Stops at the first stopping-set state, at extinction, at the
// horizon, or when the population exceeds the cap.
Trajectory simulate(const ParticleLaw& law, const Configuration& from,
                    const SimOptions& opts, SplitRng& rng);

// Monte Carlo accumulator. Event estimates hold an exact indicator count, so
// pooled runs merge exactly; functional estimates carry a running mean and
// centered second moment, merged by the parallel update.
struct Estimate {
    enum class Kind { Event, Functional };

    Kind kind = Kind::Event;
    std::uint64_t replicas = 0;
    double count = 0.0;     // event kind: number of hits
    double running_mean = 0.0;
    double m2 = 0.0;        // functional kind: sum of squared deviations
    std::uint64_t overflowed = 0;  // replicas scored with weight zero
    std::uint64_t master_seed = 0;

    double mean() const;
    double std_error() const;
    static Estimate merged(const Estimate& a, const Estimate& b);
};

using EventPredicate = std::function<bool(const Configuration&)>;

// Fraction of replicas whose terminal state satisfies the predicate.
Estimate estimate_event(const ParticleLaw& law, const Configuration& from,
                        const SimOptions& opts, const EventPredicate& event,
                        std::uint64_t replicas, std::uint64_t seed);

// Mean of exp(pairing(s, terminal state)); overflowed replicas score zero
// and are counted separately.
Estimate estimate_functional(const ParticleLaw& law, const Configuration& from,
                             const SimOptions& opts, const TestFunction& s,
                             std::uint64_t replicas, std::uint64_t seed);

// Outcome tally across replicas, one stream per replica.
struct OutcomeCounts {
    std::uint64_t replicas = 0;
    std::uint64_t alive = 0;
    std::uint64_t extinct = 0;
    std::uint64_t stopped = 0;
    std::uint64_t overflowed = 0;
};

OutcomeCounts simulate_outcomes(const ParticleLaw& law, const Configuration& from,
                                const SimOptions& opts, std::uint64_t replicas,
                                std::uint64_t seed);

// Range variants over replica streams [first, first + count); pooling two
// adjacent ranges with Estimate::merged reproduces the single full run.
Estimate estimate_event_range(const ParticleLaw& law, const Configuration& from,
                              const SimOptions& opts, const EventPredicate& event,
                              std::uint64_t first, std::uint64_t count, std::uint64_t seed);
Estimate estimate_functional_range(const ParticleLaw& law, const Configuration& from,
                                   const SimOptions& opts, const TestFunction& s,
                                   std::uint64_t first, std::uint64_t count,
                                   std::uint64_t seed);

}  // namespace sbranch
