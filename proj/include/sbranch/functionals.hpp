#pragma once

#include <optional>

#include "sbranch/feller.hpp"
#include "sbranch/generator.hpp"

namespace sbranch {

// Expectation of exp(pairing(s, state)) under a distribution over the
// truncated states. Overflow and tail mass carry weight zero.
double laplace(const Distribution& dist, const TestFunction& s, const TruncatedSpace& space);

// log of the above; DomainError when the expectation vanishes.
double log_laplace(const Distribution& dist, const TestFunction& s,
                   const TruncatedSpace& space);

// Generator applied to the exponential statistic, and its normalized form:
//   raw(state)        = sum_target exp(pairing(s, target)) * rate(state, target)
//   normalized(state) = exp(-pairing(s, state)) * raw(state)
// With a stopping set, targets inside the set are excluded from the sum.
struct DensityFunctional {
    double raw = 0.0;         // includes the diagonal term
    double normalized = 0.0;  // additive over independent subpopulations
};

DensityFunctional density_functional(const GeneratorMatrix& gen,
                                     const std::optional<StoppingSet>& stop,
                                     const Configuration& state, const TestFunction& s);

// Residuals of the additivity laws on a merged population:
//   normalized(a1 + a2) = normalized(a1) + normalized(a2)   (exact)
//   laplace(a1 + a2)    = laplace(a1) * laplace(a2)         (reference route)
struct AdditivityResiduals {
    double normalized = 0.0;
    double product = 0.0;
};

AdditivityResiduals additivity_check(const GeneratorMatrix& gen,
                                     const std::optional<StoppingSet>& stop,
                                     const Configuration& a1, const Configuration& a2,
                                     const TestFunction& s, double dt);

// |[laplace over a short interval h minus exp(pairing(s, state))]/h - raw|,
// the first-order link between the functional and its density form.
double derivative_link_check(const GeneratorMatrix& gen,
                             const std::optional<StoppingSet>& stop,
                             const Configuration& state, const TestFunction& s, double h);

}  // namespace sbranch
