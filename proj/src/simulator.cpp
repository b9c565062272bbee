#include "sbranch/simulator.hpp"

#include <cmath>
#include <sstream>

namespace sbranch {

std::string outcome_name(Outcome o) {
    switch (o) {
        case Outcome::AliveAtHorizon: return "alive-at-horizon";
        case Outcome::Extinct: return "extinct";
        case Outcome::StoppedInSet: return "stopped-in-set";
        case Outcome::Overflowed: return "overflowed";
    }
    return "?";
}

const Configuration& Trajectory::terminal() const {
    if (stopped_at) return stopped_at->second;
    return states.empty() ? initial : states.back();
}

std::string Trajectory::serialize(const TypeSpace* types) const {
    std::ostringstream os;
    os.precision(17);
    os << "t0=" << t0 << " horizon=" << horizon << " initial=" << initial.str(types)
       << " outcome=" << outcome_name(outcome);
    if (stopped_at)
        os << " stopped_at=" << stopped_at->first << ":" << stopped_at->second.str(types);
    os << "\n";
    for (std::size_t i = 0; i < jump_times.size(); ++i)
        os << jump_times[i] << " -> " << states[i].str(types) << "\n";
    return os.str();
}

Trajectory simulate(const ParticleLaw& law, const Configuration& from,
                    const SimOptions& opts, SplitRng& rng) {
    if (opts.horizon < opts.t0) throw DomainError("simulate: horizon must be >= t0");
    if (opts.stop && opts.stop->contains(from))
        throw DomainError("simulate: start configuration lies in the stopping set");

    Trajectory traj;
    traj.t0 = opts.t0;
    traj.horizon = opts.horizon;
    traj.initial = from;

    Configuration state = from;
    double t = opts.t0;
    const double c_max = opts.modulation.max_scale();

    if (state.empty()) {
        traj.outcome = Outcome::Extinct;
        return traj;
    }

    while (true) {
        double total_rate = 0.0;
        for (const auto& [type, count] : state.entries())
            total_rate += static_cast<double>(count) * law.law(type).rate;
        if (total_rate == 0.0) {
            traj.outcome = Outcome::AliveAtHorizon;
            return traj;
        }

        // Proposal clock at the modulation ceiling; thinning keeps it exact.
        double t_next = t;
        while (true) {
            t_next += rng.exponential(total_rate * c_max);
            if (t_next >= opts.horizon) break;
            if (opts.modulation.trivial()) break;
            if (rng.uniform() * c_max < opts.modulation.at(t_next)) break;
        }
        if (t_next >= opts.horizon) {
            traj.outcome = Outcome::AliveAtHorizon;
            return traj;
        }
        t = t_next;

        // Pick the transforming particle proportionally to count * rate.
        double u = rng.uniform() * total_rate;
        std::size_t chosen_type = state.entries().front().first;
        for (const auto& [type, count] : state.entries()) {
            const double w = static_cast<double>(count) * law.law(type).rate;
            if (w == 0.0) continue;
            chosen_type = type;
            if (u < w) break;
            u -= w;
        }

        // Sample the brood.
        const auto& offspring = law.law(chosen_type).offspring;
        double v = rng.uniform();
        const Configuration* brood = &offspring.front().config;
        for (const auto& o : offspring) {
            if (o.prob == 0.0) continue;
            brood = &o.config;
            if (v < o.prob) break;
            v -= o.prob;
        }

        state = state.replace_one(chosen_type, *brood);
        traj.jump_times.push_back(t);
        traj.states.push_back(state);

        if (opts.stop && opts.stop->contains(state)) {
            traj.stopped_at = {t, state};
            traj.outcome = Outcome::StoppedInSet;
            return traj;
        }
        if (state.empty()) {
            traj.outcome = Outcome::Extinct;
            return traj;
        }
        if (opts.cap > 0 && state.total() > opts.cap) {
            traj.outcome = Outcome::Overflowed;
            return traj;
        }
    }
}

double Estimate::mean() const {
    if (replicas == 0) return 0.0;
    return kind == Kind::Event ? count / static_cast<double>(replicas) : running_mean;
}

double Estimate::std_error() const {
    if (replicas == 0) return 0.0;
    const double n = static_cast<double>(replicas);
    if (kind == Kind::Event) {
        const double p = mean();
        return std::sqrt(std::max(0.0, p * (1.0 - p)) / n);
    }
    if (replicas < 2) return 0.0;
    return std::sqrt(std::max(0.0, m2 / (n - 1.0)) / n);
}

Estimate Estimate::merged(const Estimate& a, const Estimate& b) {
    if (a.kind != b.kind) throw ContractViolation("Estimate: cannot merge different kinds");
    if (a.master_seed != b.master_seed)
        throw ContractViolation("Estimate: cannot merge different master seeds");
    if (a.replicas == 0) return b;
    if (b.replicas == 0) return a;
    Estimate out = a;
    out.replicas = a.replicas + b.replicas;
    out.count = a.count + b.count;
    out.overflowed = a.overflowed + b.overflowed;
    const double na = static_cast<double>(a.replicas);
    const double nb = static_cast<double>(b.replicas);
    const double delta = b.running_mean - a.running_mean;
    out.running_mean = a.running_mean + delta * nb / (na + nb);
    out.m2 = a.m2 + b.m2 + delta * delta * na * nb / (na + nb);
    return out;
}

namespace {

// Pairwise reduction over replica streams keeps the accumulated moments
// independent of how a run is split across workers.
template <typename Score>
Estimate reduce_range(Estimate::Kind kind, std::uint64_t first, std::uint64_t count,
                      std::uint64_t seed, const Score& score) {
    if (count <= 512) {
        Estimate e;
        e.kind = kind;
        e.master_seed = seed;
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto [value, overflowed] = score(first + i);
            ++e.replicas;
            e.count += value != 0.0 ? 1.0 : 0.0;
            const double delta = value - e.running_mean;
            e.running_mean += delta / static_cast<double>(e.replicas);
            e.m2 += delta * (value - e.running_mean);
            if (overflowed) ++e.overflowed;
        }
        return e;
    }
    const std::uint64_t half = count / 2;
    return Estimate::merged(reduce_range(kind, first, half, seed, score),
                            reduce_range(kind, first + half, count - half, seed, score));
}

}  // namespace

Estimate estimate_event_range(const ParticleLaw& law, const Configuration& from,
                              const SimOptions& opts, const EventPredicate& event,
                              std::uint64_t first, std::uint64_t count, std::uint64_t seed) {
    if (count < 1) throw DomainError("estimate_event: at least one replica required");
    return reduce_range(Estimate::Kind::Event, first, count, seed,
                        [&](std::uint64_t stream) -> std::pair<double, bool> {
                            SplitRng rng(seed, stream);
                            Trajectory traj = simulate(law, from, opts, rng);
                            const bool ovf = traj.outcome == Outcome::Overflowed;
                            return {event(traj.terminal()) ? 1.0 : 0.0, ovf};
                        });
}

Estimate estimate_event(const ParticleLaw& law, const Configuration& from,
                        const SimOptions& opts, const EventPredicate& event,
                        std::uint64_t replicas, std::uint64_t seed) {
    return estimate_event_range(law, from, opts, event, 0, replicas, seed);
}

Estimate estimate_functional_range(const ParticleLaw& law, const Configuration& from,
                                   const SimOptions& opts, const TestFunction& s,
                                   std::uint64_t first, std::uint64_t count,
                                   std::uint64_t seed) {
    if (count < 1) throw DomainError("estimate_functional: at least one replica required");
    for (std::size_t i = 0; i < law.dim(); ++i)
        if (!s.defined(i) || !std::isfinite(s.at(i)))
            throw DomainError("estimate_functional: weight function must be finite on all types");
    return reduce_range(Estimate::Kind::Functional, first, count, seed,
                        [&](std::uint64_t stream) -> std::pair<double, bool> {
                            SplitRng rng(seed, stream);
                            Trajectory traj = simulate(law, from, opts, rng);
                            if (traj.outcome == Outcome::Overflowed) return {0.0, true};
                            return {std::exp(pairing(s, traj.terminal())), false};
                        });
}

Estimate estimate_functional(const ParticleLaw& law, const Configuration& from,
                             const SimOptions& opts, const TestFunction& s,
                             std::uint64_t replicas, std::uint64_t seed) {
    return estimate_functional_range(law, from, opts, s, 0, replicas, seed);
}

OutcomeCounts simulate_outcomes(const ParticleLaw& law, const Configuration& from,
                                const SimOptions& opts, std::uint64_t replicas,
                                std::uint64_t seed) {
    if (replicas < 1) throw DomainError("simulate_outcomes: at least one replica required");
    OutcomeCounts counts;
    counts.replicas = replicas;
    for (std::uint64_t i = 0; i < replicas; ++i) {
        SplitRng rng(seed, i);
        switch (simulate(law, from, opts, rng).outcome) {
            case Outcome::AliveAtHorizon: ++counts.alive; break;
            case Outcome::Extinct: ++counts.extinct; break;
            case Outcome::StoppedInSet: ++counts.stopped; break;
            case Outcome::Overflowed: ++counts.overflowed; break;
        }
    }
    return counts;
}

}  // namespace sbranch
