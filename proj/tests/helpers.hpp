#pragma once

#include <cmath>

#include "sbranch/generator.hpp"

namespace sbranch::testing {

// Single-type model: events at `rate`, death with probability p_death,
// split into two otherwise. Per-particle birth rate = rate * (1 - p_death),
// death rate = rate * p_death.
inline ParticleLaw make_birth_death_law(double rate = 1.5, double p_death = 1.0 / 3.0) {
    TypeSpace types({1.0});
    TypeLaw tl;
    tl.rate = rate;
    tl.offspring.push_back({Configuration(), p_death});
    tl.offspring.push_back({Configuration::single(0, 2), 1.0 - p_death});
    return ParticleLaw(types, {tl});
}

inline GeneratorMatrix make_birth_death(std::uint32_t cap, double rate = 1.5,
                                        double p_death = 1.0 / 3.0,
                                        TimeModulation mod = {}) {
    const ParticleLaw law = make_birth_death_law(rate, p_death);
    return build_generator(law, TruncatedSpace::enumerate(law.types(), cap), std::move(mod));
}

// Two types with a cross-type brood.
inline ParticleLaw make_two_type_law() {
    TypeSpace types({1.0, 2.0});
    TypeLaw a;
    a.rate = 1.0;
    a.offspring.push_back({Configuration(), 0.3});
    a.offspring.push_back({Configuration::single(0, 2), 0.4});
    a.offspring.push_back({Configuration::single(1, 1), 0.3});
    TypeLaw b;
    b.rate = 0.8;
    b.offspring.push_back({Configuration(), 0.5});
    b.offspring.push_back({Configuration({{0, 1}, {1, 1}}), 0.5});
    return ParticleLaw(types, {a, b});
}

inline GeneratorMatrix make_two_type(std::uint32_t cap) {
    const ParticleLaw law = make_two_type_law();
    return build_generator(law, TruncatedSpace::enumerate(law.types(), cap));
}

inline ParticleLaw make_frozen_law() {
    TypeSpace types({1.0});
    return ParticleLaw(types, {TypeLaw{}});
}

// Closed-form extinction probability of the linear birth-death process from
// one particle: d (e^{(b-d)t} - 1) / (b e^{(b-d)t} - d).
inline double birth_death_extinction(double b, double d, double t) {
    if (b == d) return d * t / (1.0 + d * t);
    const double e = std::exp((b - d) * t);
    return d * (e - 1.0) / (b * e - d);
}

}  // namespace sbranch::testing
