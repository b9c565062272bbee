#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "sbranch/generator.hpp"
#include "sbranch/quadrature.hpp"

namespace sbranch {

// Truncation and quadrature controls for the jump-count series.
struct SeriesControl {
    int k_max = 30;          // highest jump count summed
    double tail_tol = 1e-6;  // acceptable unassigned mass at k_max
    int quad_nodes = 12;     // Gauss-Legendre nodes per panel

    void validate() const;
};

// Probability vector over the truncated states, with the mass that left the
// truncation (overflow) and the mass not yet assigned by the series (tail)
// tracked separately.
struct Distribution {
    std::vector<double> values;
    double overflow = 0.0;
    double tail = 0.0;

    double total_assigned() const;
    void check(double slack = 1e-9) const;
    static double sup_distance(const Distribution& a, const Distribution& b,
                               bool include_overflow = true);
};

// Sub-probability mass contributed by paths with exactly k jumps.
struct SeriesTerm {
    int k = 0;
    std::vector<double> values;  // over states
    double overflow = 0.0;

    double mass() const;
};

// Shared time grid for one (t1, t2) interval: uniform panels, Gauss-Legendre
// nodes inside each, with the modulation integral accumulated along it.
// Panel width is chosen so that max|q| * integral(c) per panel stays small,
// keeping every exponential factor in the sweep well conditioned.
class SeriesGrid {
public:
    static std::shared_ptr<const SeriesGrid> build(const GeneratorMatrix& gen, double t1,
                                                   double t2, const SeriesControl& ctl);

    double t1 = 0.0, t2 = 0.0;
    std::size_t nodes_per_panel = 0;
    std::size_t panels = 0;
    double half_width = 0.0;  // half of one panel width
    double c_total = 0.0;     // integral of the modulation over [t1, t2]

    std::vector<double> node_time;  // panels * m, panel-major
    std::vector<double> crel;       // modulation integral from panel start to node
    std::vector<double> cnode;      // modulation integral from t1 to node
    std::vector<double> cscale;     // modulation value at node
    std::vector<double> panel_dc;   // modulation integral across each panel
    GaussLegendre rule;

    std::size_t num_nodes() const { return node_time.size(); }
};

// Values of one series term across the grid: for every grid node u, the
// matrix of exactly-k-jump mass over [u, t2] (source-major, target-minor,
// overflow included as the last index).
class SeriesLevel {
public:
    int k() const { return k_; }
    const SeriesGrid& grid() const { return *grid_; }
    std::size_t dim() const { return n_; }

    // Mass matrix at grid node g.
    const std::vector<double>& at_node(std::size_t g) const { return node_mass_[g]; }
    // Mass matrix at t1 (the reported term values).
    const std::vector<double>& at_start() const { return start_mass_; }

    friend SeriesLevel series_level0(const GeneratorMatrix&, const StopMask&,
                                     std::shared_ptr<const SeriesGrid>);
    friend SeriesLevel series_next_level(const GeneratorMatrix&, const StopMask&,
                                         const SeriesLevel&);

private:
    std::shared_ptr<const SeriesGrid> grid_;
    int k_ = 0;
    std::size_t n_ = 0;
    std::vector<std::vector<double>> node_mass_;
    std::vector<double> start_mass_;
};

// Zero-jump term: the stay weight exp(q * integral(c)) on the start state.
SeriesTerm series_term0(const GeneratorMatrix& gen, double t1, double t2,
                        const Configuration& from);

SeriesLevel series_level0(const GeneratorMatrix& gen, const StopMask& mask,
                          std::shared_ptr<const SeriesGrid> grid);
SeriesLevel series_next_level(const GeneratorMatrix& gen, const StopMask& mask,
                              const SeriesLevel& prev);

// k-th term for one start state, given the previous level across the grid.
// prev must hold level k-1 on a grid for the same interval.
SeriesTerm series_term(const GeneratorMatrix& gen, const std::optional<StoppingSet>& stop,
                       double t1, double t2, const Configuration& from, int k,
                       const SeriesLevel& prev);

// Thrown when tail mass still exceeds tail_tol at k_max; carries the partial sum.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(std::string msg, Distribution partial)
        : std::runtime_error(std::move(msg)), partial(std::move(partial)) {}
    Distribution partial;
};

// Transition distribution over [t1, t2] from one configuration, by summing
// jump-count terms until the unassigned tail is negligible.
Distribution solve(const GeneratorMatrix& gen, double t1, double t2,
                   const Configuration& from, const SeriesControl& ctl);

// Stopped variant: jumps that land in the stopping set deposit their mass
// there permanently; the recursion continues only through avoiding states.
// The start state must lie outside the stopping set.
Distribution solve_stopped(const GeneratorMatrix& gen, const StoppingSet& stop, double t1,
                           double t2, const Configuration& from, const SeriesControl& ctl);

// All-source variant sharing one series run; row i is the distribution from
// state i. Sources inside the stopping set get a frozen point mass.
std::vector<Distribution> solve_all(const GeneratorMatrix& gen,
                                    const std::optional<StoppingSet>& stop, double t1,
                                    double t2, const SeriesControl& ctl);

}  // namespace sbranch
