#pragma once

#include <optional>
#include <vector>

#include "sbranch/feller.hpp"
#include "sbranch/generator.hpp"

namespace sbranch {

// Small dense row-major matrix; only the oracle needs one.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    DenseMatrix() = default;
    explicit DenseMatrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}
    double& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
    static DenseMatrix identity(std::size_t n);
    DenseMatrix multiply(const DenseMatrix& other) const;
    double row_sum(std::size_t i) const;
};

constexpr double kUniformizationTol = 1e-12;  // Poisson tail cut
constexpr std::size_t kDenseLimit = 4096;     // largest dense dimension

// Reference transition matrix over indices (states + overflow) by
// uniformization: a Poisson mixture of powers of I + Q/lambda with
// lambda = 1.05 * max|q|. Rates are taken as constant; with a modulation
// pass the effective duration integral(c) instead of dt.
DenseMatrix exp_transition(const GeneratorMatrix& gen, double dt,
                           std::size_t dense_limit = kDenseLimit);

// Q with every row indexed by a stopping-set member zeroed.
GeneratorMatrix absorb(const GeneratorMatrix& gen, const StoppingSet& stop);

// Row of the (optionally absorbed) reference matrix as a Distribution,
// with the Poisson cut reported as tail. Handles modulation by rescaling
// the duration.
Distribution oracle_distribution(const GeneratorMatrix& gen,
                                 const std::optional<StoppingSet>& stop, double t1,
                                 double t2, const Configuration& from);

// Mass on the empty configuration (ordinary) or on stop-set members plus the
// empty configuration (stopped) at the horizon.
double extinction_probability(const GeneratorMatrix& gen,
                              const std::optional<StoppingSet>& stop, double dt,
                              const Configuration& from);

// exp(Q * tau) applied to a fixed vector, evaluable at many tau in [0, tau_max]
// from one set of precomputed powers.
class UniformizedPropagator {
public:
    UniformizedPropagator(const GeneratorMatrix& gen, std::vector<double> v, double tau_max,
                          double tol = kUniformizationTol);
    std::vector<double> at(double tau) const;

private:
    std::size_t n_ = 0;
    double lambda_ = 0.0;
    double tau_max_ = 0.0;
    std::vector<std::vector<double>> powers_;  // M^j v
};

}  // namespace sbranch
