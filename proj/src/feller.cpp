#include "sbranch/feller.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace sbranch {

namespace {

constexpr double kNegClamp = -1e-10;     // quadrature noise floor for masses
constexpr double kStopFactor = 0.05;     // stop once tail <= factor * tail_tol
// Interior node values integrate the interpolant of the panel integrand, so
// accuracy is of order quad_nodes (not the doubled full-panel order); keeping
// max |q| * integral(c) near one per panel holds that error near rounding.
constexpr double kPanelBudget = 1.0;
constexpr std::size_t kMaxPanels = 8192;

double clamp_mass(double v) {
    if (v >= 0.0) return v;
    if (v >= kNegClamp) return 0.0;
    throw ContractViolation("series produced a negative mass beyond rounding: " +
                            std::to_string(v));
}

double stay_eff(const GeneratorMatrix& gen, const StopMask& mask, std::size_t row) {
    return mask[row] ? 0.0 : gen.stay_rate(row);
}

bool row_active(const GeneratorMatrix& gen, const StopMask& mask, std::size_t row) {
    return !mask[row] && !gen.jump_row(row).empty();
}

}  // namespace

void SeriesControl::validate() const {
    if (k_max < 0) throw DomainError("SeriesControl: k_max must be >= 0");
    if (!(tail_tol > 0.0)) throw DomainError("SeriesControl: tail_tol must be > 0");
    if (quad_nodes < 2) throw DomainError("SeriesControl: quad_nodes must be >= 2");
}

double Distribution::total_assigned() const {
    double s = overflow;
    for (double v : values) s += v;
    return s;
}

void Distribution::check(double slack) const {
    for (double v : values)
        if (v < 0.0) throw ContractViolation("Distribution: negative entry");
    const double total = total_assigned() + tail;
    if (std::abs(total - 1.0) > slack)
        throw ContractViolation("Distribution: total mass " + std::to_string(total));
}

double Distribution::sup_distance(const Distribution& a, const Distribution& b,
                                  bool include_overflow) {
    if (a.values.size() != b.values.size())
        throw ContractViolation("Distribution: size mismatch in sup_distance");
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    if (include_overflow) d = std::max(d, std::abs(a.overflow - b.overflow));
    return d;
}

double SeriesTerm::mass() const {
    double s = overflow;
    for (double v : values) s += v;
    return s;
}

std::shared_ptr<const SeriesGrid> SeriesGrid::build(const GeneratorMatrix& gen, double t1,
                                                    double t2, const SeriesControl& ctl) {
    ctl.validate();
    if (t2 < t1) throw DomainError("SeriesGrid: t1 <= t2 required");
    auto grid = std::make_shared<SeriesGrid>();
    grid->t1 = t1;
    grid->t2 = t2;
    grid->nodes_per_panel = static_cast<std::size_t>(ctl.quad_nodes);
    grid->rule = gauss_legendre(grid->nodes_per_panel);
    if (t2 == t1) return grid;  // empty grid: only the zero-jump term exists

    const TimeModulation& mod = gen.modulation();
    grid->c_total = mod.integral(t1, t2);
    const double effort = gen.max_exit_rate() * grid->c_total;
    std::size_t panels = static_cast<std::size_t>(std::ceil(effort / kPanelBudget));
    panels = std::min(std::max<std::size_t>(panels, 2), kMaxPanels);
    grid->panels = panels;

    const std::size_t m = grid->nodes_per_panel;
    const double width = (t2 - t1) / static_cast<double>(panels);
    grid->half_width = 0.5 * width;
    grid->node_time.resize(panels * m);
    grid->crel.resize(panels * m);
    grid->cnode.resize(panels * m);
    grid->cscale.resize(panels * m);
    grid->panel_dc.resize(panels);

    double c_before = 0.0;
    for (std::size_t p = 0; p < panels; ++p) {
        const double lo = t1 + width * static_cast<double>(p);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t g = p * m + i;
            grid->node_time[g] = lo + grid->half_width * (grid->rule.nodes[i] + 1.0);
            grid->cscale[g] = mod.at(grid->node_time[g]);
        }
        if (mod.trivial()) {
            for (std::size_t i = 0; i < m; ++i)
                grid->crel[p * m + i] = grid->node_time[p * m + i] - lo;
            grid->panel_dc[p] = width;
        } else {
            // Prefix integrals of c within the panel from its node values.
            for (std::size_t j = 0; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    acc += grid->rule.prefix[i][j] * grid->cscale[p * m + i];
                grid->crel[p * m + j] = grid->half_width * acc;
            }
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                acc += grid->rule.weights[i] * grid->cscale[p * m + i];
            grid->panel_dc[p] = grid->half_width * acc;
        }
        for (std::size_t i = 0; i < m; ++i)
            grid->cnode[p * m + i] = c_before + grid->crel[p * m + i];
        c_before += grid->panel_dc[p];
    }
    return grid;
}

SeriesTerm series_term0(const GeneratorMatrix& gen, double t1, double t2,
                        const Configuration& from) {
    if (t2 < t1) throw DomainError("series_term0: t1 <= t2 required");
    auto idx = gen.space().index_of(from);
    if (!idx) throw DomainError("series_term0: start configuration outside the truncation");
    SeriesTerm term;
    term.k = 0;
    term.values.assign(gen.space().num_states(), 0.0);
    term.values[*idx] = std::exp(log_stay_weight(gen, t1, t2, *idx));
    return term;
}

SeriesLevel series_level0(const GeneratorMatrix& gen, const StopMask& mask,
                          std::shared_ptr<const SeriesGrid> grid) {
    SeriesLevel level;
    level.grid_ = std::move(grid);
    level.k_ = 0;
    const std::size_t n = gen.num_indices();
    level.n_ = n;

    const SeriesGrid& gr = *level.grid_;
    level.node_mass_.assign(gr.num_nodes(), std::vector<double>(n * n, 0.0));
    level.start_mass_.assign(n * n, 0.0);
    for (std::size_t row = 0; row < n; ++row) {
        const double q = stay_eff(gen, mask, row);
        level.start_mass_[row * n + row] = std::exp(q * gr.c_total);
        for (std::size_t g = 0; g < gr.num_nodes(); ++g)
            level.node_mass_[g][row * n + row] = std::exp(q * (gr.c_total - gr.cnode[g]));
    }
    return level;
}

namespace {

// Flux matrix at a grid node: row `row` is c(t) * sum over jump entries of
// rate * (previous-level row of the landing state).
void flux_at_node(const GeneratorMatrix& gen, const StopMask& mask,
                  const std::vector<double>& prev_node, double cscale, std::size_t n,
                  std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t row = 0; row < n; ++row) {
        if (!row_active(gen, mask, row)) continue;
        double* dst = out.data() + row * n;
        for (const auto& e : gen.jump_row(row)) {
            const double r = cscale * e.rate;
            const double* src = prev_node.data() + e.col * n;
            for (std::size_t t = 0; t < n; ++t) dst[t] += r * src[t];
        }
    }
}

}  // namespace

SeriesLevel series_next_level(const GeneratorMatrix& gen, const StopMask& mask,
                              const SeriesLevel& prev) {
    const SeriesGrid& gr = prev.grid();
    const std::size_t n = prev.dim();
    const std::size_t m = gr.nodes_per_panel;

    SeriesLevel level;
    level.grid_ = prev.grid_;
    level.k_ = prev.k() + 1;
    level.n_ = n;
    level.node_mass_.assign(gr.num_nodes(), std::vector<double>(n * n, 0.0));
    level.start_mass_.assign(n * n, 0.0);
    if (gr.panels == 0) return level;  // zero-width interval: no jumps

    // Flux at every node from the previous level.
    std::vector<std::vector<double>> flux(gr.num_nodes(), std::vector<double>(n * n));
    for (std::size_t g = 0; g < gr.num_nodes(); ++g)
        flux_at_node(gen, mask, prev.at_node(g), gr.cscale[g], n, flux[g]);

    // Right-to-left sweep. `anchored` holds, per source row, the suffix
    // integral from the current panel's right boundary to t2, discounted to
    // that boundary.
    std::vector<double> anchored(n * n, 0.0);
    std::vector<double> scaled(m);  // per-row exp(q * crel) at the panel nodes
    for (std::size_t p = gr.panels; p-- > 0;) {
        const double dc = gr.panel_dc[p];
        for (std::size_t row = 0; row < n; ++row) {
            const double q = stay_eff(gen, mask, row);
            for (std::size_t i = 0; i < m; ++i)
                scaled[i] = std::exp(q * gr.crel[p * m + i]);
            const double decay_panel = std::exp(q * dc);

            // Node values inside this panel.
            for (std::size_t j = 0; j < m; ++j) {
                const std::size_t g = p * m + j;
                double* dst = level.node_mass_[g].data() + row * n;
                const double inv_j = 1.0 / scaled[j];
                for (std::size_t i = 0; i < m; ++i) {
                    const double w = gr.half_width * gr.rule.suffix[i][j] * scaled[i] * inv_j;
                    if (w == 0.0) continue;
                    const double* src = flux[p * m + i].data() + row * n;
                    for (std::size_t t = 0; t < n; ++t) dst[t] += w * src[t];
                }
                const double carry = decay_panel * inv_j;
                const double* acc = anchored.data() + row * n;
                for (std::size_t t = 0; t < n; ++t) dst[t] += carry * acc[t];
            }

            // Move the anchor to this panel's left boundary.
            double* acc = anchored.data() + row * n;
            for (std::size_t t = 0; t < n; ++t) acc[t] *= decay_panel;
            for (std::size_t i = 0; i < m; ++i) {
                const double w = gr.half_width * gr.rule.weights[i] * scaled[i];
                const double* src = flux[p * m + i].data() + row * n;
                for (std::size_t t = 0; t < n; ++t) acc[t] += w * src[t];
            }
        }
    }

    for (std::size_t v = 0; v < n * n; ++v) level.start_mass_[v] = clamp_mass(anchored[v]);
    for (auto& nodevals : level.node_mass_)
        for (double& v : nodevals) v = clamp_mass(v);
    return level;
}

SeriesTerm series_term(const GeneratorMatrix& gen, const std::optional<StoppingSet>& stop,
                       double t1, double t2, const Configuration& from, int k,
                       const SeriesLevel& prev) {
    if (k < 1) throw DomainError("series_term: k must be >= 1 (use series_term0)");
    if (prev.k() != k - 1)
        throw ContractViolation("series_term: prev_terms holds level " +
                                std::to_string(prev.k()) + ", need " + std::to_string(k - 1));
    const SeriesGrid& gr = prev.grid();
    if (gr.t1 != t1 || gr.t2 != t2)
        throw ContractViolation("series_term: prev_terms grid covers a different interval");
    auto idx = gen.space().index_of(from);
    if (!idx) throw DomainError("series_term: start configuration outside the truncation");

    StopMask mask = stop ? StopMask::resolve(*stop, gen.space()) : StopMask::none(gen.space());
    if (stop && stop->contains(from))
        throw DomainError("series_term: start configuration lies in the stopping set");

    const std::size_t n = prev.dim();
    const std::size_t m = gr.nodes_per_panel;
    const std::size_t row = *idx;

    SeriesTerm term;
    term.k = k;
    term.values.assign(gen.space().num_states(), 0.0);
    if (gr.panels == 0) return term;

    // Same sweep as series_next_level, restricted to one source row and the
    // start-time value only.
    const double q = stay_eff(gen, mask, row);
    std::vector<double> acc(n, 0.0);
    std::vector<double> fluxrow(n);
    for (std::size_t p = gr.panels; p-- > 0;) {
        const double decay_panel = std::exp(q * gr.panel_dc[p]);
        for (double& v : acc) v *= decay_panel;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t g = p * m + i;
            std::fill(fluxrow.begin(), fluxrow.end(), 0.0);
            if (row_active(gen, mask, row)) {
                for (const auto& e : gen.jump_row(row)) {
                    const double r = gr.cscale[g] * e.rate;
                    const double* src = prev.at_node(g).data() + e.col * n;
                    for (std::size_t t = 0; t < n; ++t) fluxrow[t] += r * src[t];
                }
            }
            const double w =
                gr.half_width * gr.rule.weights[i] * std::exp(q * gr.crel[g]);
            for (std::size_t t = 0; t < n; ++t) acc[t] += w * fluxrow[t];
        }
    }
    for (std::size_t t = 0; t < gen.space().num_states(); ++t)
        term.values[t] = clamp_mass(acc[t]);
    term.overflow = clamp_mass(acc[gen.space().overflow_index()]);
    return term;
}

namespace {

Distribution run_series(const GeneratorMatrix& gen, const StopMask& mask, double t1,
                        double t2, std::size_t row, const SeriesControl& ctl) {
    const std::size_t n = gen.num_indices();
    const std::size_t n_states = gen.space().num_states();

    Distribution dist;
    dist.values.assign(n_states, 0.0);
    const double q = stay_eff(gen, mask, row);

    if (t2 == t1) {
        dist.values[row] = 1.0;
        return dist;
    }

    auto grid = SeriesGrid::build(gen, t1, t2, ctl);
    dist.values[row] = std::exp(q * grid->c_total);

    SeriesLevel level = series_level0(gen, mask, grid);
    double assigned = dist.values[row];
    double tail = std::max(0.0, 1.0 - assigned);
    for (int k = 1; k <= ctl.k_max && tail > kStopFactor * ctl.tail_tol; ++k) {
        level = series_next_level(gen, mask, level);
        const double* start_row = level.at_start().data() + row * n;
        for (std::size_t t = 0; t < n_states; ++t) dist.values[t] += start_row[t];
        dist.overflow += start_row[gen.space().overflow_index()];
        assigned = dist.total_assigned();
        tail = std::max(0.0, 1.0 - assigned);
    }
    dist.tail = tail;
    if (tail > ctl.tail_tol)
        throw NonConvergence("series tail " + std::to_string(tail) + " above tolerance " +
                                 std::to_string(ctl.tail_tol) + " at k_max " +
                                 std::to_string(ctl.k_max),
                             dist);
    return dist;
}

}  // namespace

Distribution solve(const GeneratorMatrix& gen, double t1, double t2,
                   const Configuration& from, const SeriesControl& ctl) {
    ctl.validate();
    if (t2 < t1) throw DomainError("solve: t1 <= t2 required");
    auto idx = gen.space().index_of(from);
    if (!idx) throw DomainError("solve: start configuration outside the truncation");
    return run_series(gen, StopMask::none(gen.space()), t1, t2, *idx, ctl);
}

Distribution solve_stopped(const GeneratorMatrix& gen, const StoppingSet& stop, double t1,
                           double t2, const Configuration& from, const SeriesControl& ctl) {
    ctl.validate();
    if (t2 < t1) throw DomainError("solve_stopped: t1 <= t2 required");
    if (stop.contains(from))
        throw DomainError("solve_stopped: start configuration lies in the stopping set");
    auto idx = gen.space().index_of(from);
    if (!idx) throw DomainError("solve_stopped: start configuration outside the truncation");
    return run_series(gen, StopMask::resolve(stop, gen.space()), t1, t2, *idx, ctl);
}

std::vector<Distribution> solve_all(const GeneratorMatrix& gen,
                                    const std::optional<StoppingSet>& stop, double t1,
                                    double t2, const SeriesControl& ctl) {
    ctl.validate();
    if (t2 < t1) throw DomainError("solve_all: t1 <= t2 required");
    const std::size_t n = gen.num_indices();
    const std::size_t n_states = gen.space().num_states();
    StopMask mask = stop ? StopMask::resolve(*stop, gen.space()) : StopMask::none(gen.space());

    std::vector<Distribution> out(n_states);
    for (auto& d : out) d.values.assign(n_states, 0.0);

    if (t2 == t1) {
        for (std::size_t row = 0; row < n_states; ++row) out[row].values[row] = 1.0;
        return out;
    }

    auto grid = SeriesGrid::build(gen, t1, t2, ctl);
    SeriesLevel level = series_level0(gen, mask, grid);
    std::vector<double> summed = level.at_start();
    for (int k = 1; k <= ctl.k_max; ++k) {
        // Worth iterating while any source row still misses mass.
        double worst_tail = 0.0;
        for (std::size_t row = 0; row < n_states; ++row) {
            double assigned = 0.0;
            for (std::size_t t = 0; t < n; ++t) assigned += summed[row * n + t];
            worst_tail = std::max(worst_tail, 1.0 - assigned);
        }
        if (worst_tail <= kStopFactor * ctl.tail_tol) break;
        level = series_next_level(gen, mask, level);
        const auto& add = level.at_start();
        for (std::size_t v = 0; v < n * n; ++v) summed[v] += add[v];
    }

    // Rows from fast high-population states may keep a sizable tail at
    // k_max; it is reported per row and callers weight it by the mass they
    // actually place there.
    for (std::size_t row = 0; row < n_states; ++row) {
        Distribution& d = out[row];
        for (std::size_t t = 0; t < n_states; ++t) d.values[t] = summed[row * n + t];
        d.overflow = summed[row * n + gen.space().overflow_index()];
        d.tail = std::max(0.0, 1.0 - d.total_assigned());
    }
    return out;
}

}  // namespace sbranch
