#include "sbranch/functionals.hpp"

#include <cmath>

#include "sbranch/oracle.hpp"

namespace sbranch {

double laplace(const Distribution& dist, const TestFunction& s, const TruncatedSpace& space) {
    if (dist.values.size() != space.num_states())
        throw ContractViolation("laplace: distribution does not match the space");
    double acc = 0.0;
    for (std::size_t i = 0; i < dist.values.size(); ++i) {
        if (dist.values[i] == 0.0) continue;
        acc += dist.values[i] * std::exp(pairing(s, space.state(i)));
    }
    if (acc < 0.0) throw ContractViolation("laplace: negative expectation from a distribution");
    return acc;
}

double log_laplace(const Distribution& dist, const TestFunction& s,
                   const TruncatedSpace& space) {
    const double f = laplace(dist, s, space);
    if (f == 0.0) throw DomainError("log_laplace: expectation is zero");
    return std::log(f);
}

DensityFunctional density_functional(const GeneratorMatrix& gen,
                                     const std::optional<StoppingSet>& stop,
                                     const Configuration& state, const TestFunction& s) {
    const TruncatedSpace& space = gen.space();
    auto idx = space.index_of(state);
    if (!idx) throw DomainError("density_functional: configuration outside the truncation");

    const StopMask mask =
        stop ? StopMask::resolve(*stop, space) : StopMask::none(space);
    const auto row = partition_row(gen, *idx, RowPart::ExcludingStop, mask);

    DensityFunctional out;
    for (const auto& e : row) {
        if (e.col >= space.num_states()) continue;  // overflow carries no statistic
        out.raw += e.rate * std::exp(pairing(s, space.state(e.col)));
    }
    out.normalized = std::exp(-pairing(s, state)) * out.raw;
    return out;
}

AdditivityResiduals additivity_check(const GeneratorMatrix& gen,
                                     const std::optional<StoppingSet>& stop,
                                     const Configuration& a1, const Configuration& a2,
                                     const TestFunction& s, double dt) {
    const TruncatedSpace& space = gen.space();
    const Configuration merged = a1.plus(a2);
    if (!space.index_of(merged))
        throw DomainError("additivity_check: merged configuration outside the truncation");

    AdditivityResiduals res;
    const DensityFunctional dm = density_functional(gen, stop, merged, s);
    const DensityFunctional d1 = density_functional(gen, stop, a1, s);
    const DensityFunctional d2 = density_functional(gen, stop, a2, s);
    res.normalized = std::abs(dm.normalized - d1.normalized - d2.normalized);

    const double fm = laplace(oracle_distribution(gen, stop, 0.0, dt, merged), s, space);
    const double f1 = laplace(oracle_distribution(gen, stop, 0.0, dt, a1), s, space);
    const double f2 = laplace(oracle_distribution(gen, stop, 0.0, dt, a2), s, space);
    res.product = std::abs(fm - f1 * f2);
    return res;
}

double derivative_link_check(const GeneratorMatrix& gen,
                             const std::optional<StoppingSet>& stop,
                             const Configuration& state, const TestFunction& s, double h) {
    if (!(h > 0.0)) throw DomainError("derivative_link_check: h must be > 0");
    const TruncatedSpace& space = gen.space();
    const double f_h = laplace(oracle_distribution(gen, stop, 0.0, h, state), s, space);
    const double f_0 = std::exp(pairing(s, state));
    const DensityFunctional d = density_functional(gen, stop, state, s);
    return std::abs((f_h - f_0) / h - d.raw);
}

}  // namespace sbranch
