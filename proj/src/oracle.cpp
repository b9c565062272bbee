#include "sbranch/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace sbranch {

namespace {

constexpr double kLambdaHeadroom = 1.05;  // keeps the diagonal of M positive

// Poisson(mu) weights up to the index where the remaining tail drops below
// tol. Computed in log space around the mode for stability at large mu.
std::vector<double> poisson_weights(double mu, double tol) {
    if (mu == 0.0) return {1.0};
    std::vector<double> w;
    double logw = -mu;  // log P(0)
    double cum = 0.0;
    for (std::size_t j = 0;; ++j) {
        if (j > 0) logw += std::log(mu / static_cast<double>(j));
        w.push_back(std::exp(logw));
        cum += w.back();
        if (1.0 - cum <= tol && static_cast<double>(j) >= mu) break;
        if (j > 100000)
            throw CapacityError("poisson_weights: series did not close below tolerance");
    }
    return w;
}

// M = I + Q/lambda as a dense stochastic matrix over all indices.
DenseMatrix uniformized_step(const GeneratorMatrix& gen, double lambda) {
    const std::size_t n = gen.num_indices();
    DenseMatrix M = DenseMatrix::identity(n);
    if (lambda == 0.0) return M;
    for (std::size_t i = 0; i < n; ++i) {
        M.at(i, i) += gen.stay_rate(i) / lambda;
        for (const auto& e : gen.jump_row(i)) M.at(i, e.col) += e.rate / lambda;
    }
    return M;
}

}  // namespace

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::multiply(const DenseMatrix& other) const {
    if (n != other.n) throw ContractViolation("DenseMatrix: dimension mismatch");
    DenseMatrix out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            const double v = at(i, k);
            if (v == 0.0) continue;
            const double* src = other.a.data() + k * n;
            double* dst = out.a.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += v * src[j];
        }
    return out;
}

double DenseMatrix::row_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += at(i, j);
    return s;
}

DenseMatrix exp_transition(const GeneratorMatrix& gen, double dt, std::size_t dense_limit) {
    if (!(dt >= 0.0)) throw DomainError("exp_transition: dt must be >= 0");
    const std::size_t n = gen.num_indices();
    if (n > dense_limit)
        throw CapacityError("exp_transition: dense dimension " + std::to_string(n) +
                            " exceeds limit " + std::to_string(dense_limit));

    const double lambda = kLambdaHeadroom * gen.max_exit_rate();
    if (lambda == 0.0 || dt == 0.0) return DenseMatrix::identity(n);

    const auto weights = poisson_weights(lambda * dt, kUniformizationTol);
    const DenseMatrix M = uniformized_step(gen, lambda);

    DenseMatrix power = DenseMatrix::identity(n);
    DenseMatrix out(n);
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (j > 0) power = power.multiply(M);
        if (weights[j] == 0.0) continue;
        for (std::size_t v = 0; v < n * n; ++v) out.a[v] += weights[j] * power.a[v];
    }
    return out;
}

GeneratorMatrix absorb(const GeneratorMatrix& gen, const StoppingSet& stop) {
    GeneratorMatrix out = gen;
    const StopMask mask = StopMask::resolve(stop, gen.space());
    double max_exit = 0.0;
    for (std::size_t i = 0; i < gen.num_indices(); ++i) {
        if (mask[i]) {
            out.rows_[i].clear();
            out.diag_[i] = 0.0;
        }
        max_exit = std::max(max_exit, -out.diag_[i]);
    }
    out.max_exit_rate_ = max_exit;
    return out;
}

Distribution oracle_distribution(const GeneratorMatrix& gen,
                                 const std::optional<StoppingSet>& stop, double t1,
                                 double t2, const Configuration& from) {
    if (t2 < t1) throw DomainError("oracle_distribution: t1 <= t2 required");
    auto idx = gen.space().index_of(from);
    if (!idx)
        throw DomainError("oracle_distribution: start configuration outside the truncation");
    if (stop && stop->contains(from))
        throw DomainError("oracle_distribution: start configuration lies in the stopping set");

    const double dt_eff = gen.modulation().integral(t1, t2);
    const DenseMatrix P =
        stop ? exp_transition(absorb(gen, *stop), dt_eff) : exp_transition(gen, dt_eff);

    Distribution dist;
    const std::size_t n_states = gen.space().num_states();
    dist.values.assign(n_states, 0.0);
    for (std::size_t j = 0; j < n_states; ++j) dist.values[j] = P.at(*idx, j);
    dist.overflow = P.at(*idx, gen.space().overflow_index());
    dist.tail = std::max(0.0, 1.0 - dist.total_assigned());
    return dist;
}

double extinction_probability(const GeneratorMatrix& gen,
                              const std::optional<StoppingSet>& stop, double dt,
                              const Configuration& from) {
    Distribution dist = oracle_distribution(gen, stop, 0.0, dt, from);
    const TruncatedSpace& space = gen.space();
    double mass = dist.values[space.index_or_overflow(Configuration())];
    if (stop) {
        for (const auto& member : stop->members())
            if (auto idx = space.index_of(member)) mass += dist.values[*idx];
    }
    return mass;
}

UniformizedPropagator::UniformizedPropagator(const GeneratorMatrix& gen,
                                             std::vector<double> v, double tau_max,
                                             double tol) {
    n_ = gen.num_indices();
    if (v.size() != n_) throw ContractViolation("UniformizedPropagator: vector size mismatch");
    lambda_ = kLambdaHeadroom * gen.max_exit_rate();
    tau_max_ = tau_max;

    std::size_t terms = 1;
    if (lambda_ > 0.0 && tau_max > 0.0)
        terms = poisson_weights(lambda_ * tau_max, tol).size();

    powers_.reserve(terms);
    powers_.push_back(std::move(v));
    std::vector<double> next(n_);
    for (std::size_t j = 1; j < terms; ++j) {
        const auto& cur = powers_.back();
        for (std::size_t i = 0; i < n_; ++i) {
            double acc = cur[i] + gen.stay_rate(i) / lambda_ * cur[i];
            for (const auto& e : gen.jump_row(i)) acc += e.rate / lambda_ * cur[e.col];
            next[i] = acc;
        }
        powers_.push_back(next);
    }
}

std::vector<double> UniformizedPropagator::at(double tau) const {
    if (tau < 0.0 || tau > tau_max_ * (1.0 + 1e-12))
        throw DomainError("UniformizedPropagator: tau outside the prepared range");
    if (lambda_ == 0.0 || tau == 0.0) return powers_.front();
    std::vector<double> out(n_, 0.0);
    const auto weights = poisson_weights(lambda_ * tau, kUniformizationTol);
    const std::size_t terms = std::min(weights.size(), powers_.size());
    for (std::size_t j = 0; j < terms; ++j)
        for (std::size_t i = 0; i < n_; ++i) out[i] += weights[j] * powers_[j][i];
    return out;
}

}  // namespace sbranch
