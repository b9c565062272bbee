#include "sbranch/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace sbranch {

namespace {

// P_m(x) and its derivative by the three-term recurrence.
std::pair<double, double> legendre_value(std::size_t m, double x) {
    double p0 = 1.0, p1 = x;
    if (m == 0) return {1.0, 0.0};
    for (std::size_t k = 2; k <= m; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
        p0 = p1;
        p1 = pk;
    }
    const double dp = m * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

// Barycentric evaluation of the i-th Lagrange basis through `nodes` at x.
double lagrange_basis(const std::vector<double>& nodes, const std::vector<double>& bary,
                      std::size_t i, double x) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        const double dx = x - nodes[k];
        if (dx == 0.0) return k == i ? 1.0 : 0.0;
        const double term = bary[k] / dx;
        den += term;
        if (k == i) num = term;
    }
    return num / den;
}

GaussLegendre build_rule(std::size_t m) {
    if (m < 2) throw std::invalid_argument("gauss_legendre: need at least 2 nodes");
    GaussLegendre rule;
    rule.nodes.resize(m);
    rule.weights.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        // Standard starting guess, then Newton.
        double x = std::cos(M_PI * (static_cast<double>(m - i) - 0.25) /
                            (static_cast<double>(m) + 0.5));
        for (int it = 0; it < 100; ++it) {
            auto [p, dp] = legendre_value(m, x);
            const double step = p / dp;
            x -= step;
            if (std::abs(step) < 1e-15) break;
        }
        auto [p, dp] = legendre_value(m, x);
        (void)p;
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }

    std::vector<double> bary(m, 1.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k)
            if (k != i) bary[i] /= (rule.nodes[i] - rule.nodes[k]);

    // Integrate each basis polynomial over [node_j, 1] with an m-point rule
    // on that sub-range; degree m-1 <= 2m-1, so this is exact.
    rule.suffix.assign(m, std::vector<double>(m, 0.0));
    rule.prefix.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t j = 0; j < m; ++j) {
        const double lo = rule.nodes[j], hi = 1.0;
        const double half = 0.5 * (hi - lo);
        for (std::size_t q = 0; q < m; ++q) {
            const double x = lo + half * (rule.nodes[q] + 1.0);
            const double w = half * rule.weights[q];
            for (std::size_t i = 0; i < m; ++i)
                rule.suffix[i][j] += w * lagrange_basis(rule.nodes, bary, i, x);
        }
        for (std::size_t i = 0; i < m; ++i)
            rule.prefix[i][j] = rule.weights[i] - rule.suffix[i][j];
    }
    return rule;
}

}  // namespace

GaussLegendre gauss_legendre(std::size_t m) {
    static std::mutex mu;
    static std::map<std::size_t, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, build_rule(m)).first;
    return it->second;
}

}  // namespace sbranch
