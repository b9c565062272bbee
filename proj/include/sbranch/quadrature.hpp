#pragma once

#include <cstddef>
#include <vector>

namespace sbranch {

// Gauss-Legendre rule on [-1, 1] plus the matrices needed to integrate the
// degree-(m-1) interpolant through the nodes over sub-ranges of the panel.
struct GaussLegendre {
    std::vector<double> nodes;     // ascending in (-1, 1)
    std::vector<double> weights;   // full-panel weights, sum to 2
    // suffix[i][j] = integral of the i-th Lagrange basis polynomial over
    // [node_j, 1]. Row sums reproduce `weights` when j indexes -1.
    std::vector<std::vector<double>> suffix;
    // prefix[i][j] = integral over [-1, node_j] = weights[i] - suffix[i][j].
    std::vector<std::vector<double>> prefix;

    std::size_t size() const { return nodes.size(); }
};

// Nodes by Newton iteration on the Legendre polynomial; sub-range integrals
// of the Lagrange basis are themselves evaluated with an exact-degree rule.
GaussLegendre gauss_legendre(std::size_t m);

// Integral of f over [a, b] with a composite rule: `panels` equal panels of
// `m` Gauss-Legendre nodes each.
template <typename F>
double integrate_composite(F&& f, double a, double b, std::size_t m, std::size_t panels) {
    if (b <= a) return 0.0;
    const GaussLegendre rule = gauss_legendre(m);
    const double width = (b - a) / static_cast<double>(panels);
    double acc = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = a + width * static_cast<double>(p);
        for (std::size_t i = 0; i < m; ++i) {
            const double x = lo + 0.5 * width * (rule.nodes[i] + 1.0);
            acc += 0.5 * width * rule.weights[i] * f(x);
        }
    }
    return acc;
}

}  // namespace sbranch
