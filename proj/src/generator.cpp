#include "sbranch/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sbranch/quadrature.hpp"

namespace sbranch {

ParticleLaw::ParticleLaw(TypeSpace types, std::vector<TypeLaw> per_type,
                         std::optional<std::uint32_t> brood_cap)
    : types_(std::move(types)), per_type_(std::move(per_type)) {
    if (per_type_.size() != types_.size())
        throw DomainError("ParticleLaw: one law per type required");

    std::uint64_t max_brood = 0;
    for (std::size_t i = 0; i < per_type_.size(); ++i) {
        const TypeLaw& tl = per_type_[i];
        if (!(tl.rate >= 0.0) || !std::isfinite(tl.rate))
            throw DomainError("ParticleLaw: rate must be finite and >= 0");
        if (tl.rate == 0.0 && tl.offspring.empty()) continue;
        double psum = 0.0;
        for (const auto& o : tl.offspring) {
            if (!(o.prob >= 0.0))
                throw DomainError("ParticleLaw: offspring probabilities must be >= 0");
            psum += o.prob;
            max_brood = std::max(max_brood, o.config.total());
        }
        if (std::abs(psum - 1.0) > kProbTol)
            throw DomainError("ParticleLaw: offspring probabilities for type index " +
                              std::to_string(i) + " sum to " + std::to_string(psum));
    }
    brood_cap_ = brood_cap.value_or(static_cast<std::uint32_t>(max_brood));
    if (max_brood > brood_cap_)
        throw DomainError("ParticleLaw: offspring configuration exceeds the brood cap");
}

TimeModulation::TimeModulation(std::function<double(double)> scale, double max_scale,
                               std::function<double(double)> antiderivative)
    : scale_(std::move(scale)),
      antiderivative_(std::move(antiderivative)),
      max_scale_(max_scale) {
    if (scale_ && !(max_scale_ > 0.0))
        throw DomainError("TimeModulation: max_scale must be positive");
}

double TimeModulation::integral(double t1, double t2) const {
    if (t2 < t1) throw DomainError("TimeModulation: t1 <= t2 required");
    if (!scale_) return t2 - t1;
    if (antiderivative_) return antiderivative_(t2) - antiderivative_(t1);
    const std::size_t panels = std::max<std::size_t>(4, static_cast<std::size_t>(t2 - t1) + 1);
    return integrate_composite([this](double t) { return scale_(t); }, t1, t2, 16, panels);
}

GeneratorMatrix build_generator(const ParticleLaw& law, const TruncatedSpace& space,
                                TimeModulation modulation) {
    if (law.dim() != space.types().size())
        throw DomainError("build_generator: law and space type dimensions differ");
    for (std::size_t i = 0; i < law.dim(); ++i)
        if (law.types().label(i) != space.types().label(i))
            throw DomainError("build_generator: law references a type absent from the space");

    GeneratorMatrix gen(space);
    gen.modulation_ = std::move(modulation);
    const std::size_t n = space.num_indices();
    gen.rows_.assign(n, {});
    gen.diag_.assign(n, 0.0);

    for (std::size_t idx = 0; idx < space.num_states(); ++idx) {
        const Configuration& alpha = space.state(idx);
        if (alpha.empty()) continue;  // absorbing

        std::map<std::size_t, double> row;
        for (const auto& [type, count] : alpha.entries()) {
            const TypeLaw& tl = law.law(type);
            if (tl.rate == 0.0) continue;
            const double scale = static_cast<double>(count) * tl.rate;
            for (const auto& o : tl.offspring) {
                if (o.prob == 0.0) continue;
                const Configuration beta = alpha.replace_one(type, o.config);
                if (beta == alpha) continue;  // unobservable at configuration level
                row[gen.space_.index_or_overflow(beta)] += scale * o.prob;
            }
        }

        double exit = 0.0;
        auto& entries = gen.rows_[idx];
        entries.reserve(row.size());
        for (const auto& [col, rate] : row) {
            entries.push_back({col, rate});
            exit += rate;
        }
        gen.diag_[idx] = -exit;
        gen.max_exit_rate_ = std::max(gen.max_exit_rate_, exit);
    }
    return gen;
}

double GeneratorMatrix::row_sum(std::size_t state) const {
    double s = diag_.at(state);
    for (const auto& e : rows_.at(state)) s += e.rate;
    return s;
}

StopMask StopMask::resolve(const StoppingSet& set, const TruncatedSpace& space) {
    StopMask mask;
    mask.in_stop.assign(space.num_indices(), false);
    for (const auto& member : set.members()) {
        if (auto idx = space.index_of(member)) {
            mask.in_stop[*idx] = true;
            mask.any = true;
        }
        // Members beyond the cap are unreachable within the truncation.
    }
    return mask;
}

StopMask StopMask::none(const TruncatedSpace& space) {
    StopMask mask;
    mask.in_stop.assign(space.num_indices(), false);
    return mask;
}

std::vector<GeneratorMatrix::Entry> partition_row(const GeneratorMatrix& gen,
                                                  std::size_t state, RowPart part,
                                                  const StopMask& mask) {
    std::vector<GeneratorMatrix::Entry> out;
    const auto row = gen.jump_row(state);
    switch (part) {
        case RowPart::Stay:
            out.push_back({state, gen.stay_rate(state)});
            break;
        case RowPart::JumpAll:
            out.assign(row.begin(), row.end());
            break;
        case RowPart::JumpAvoiding:
            for (const auto& e : row)
                if (!mask[e.col]) out.push_back(e);
            break;
        case RowPart::IntoStop:
            if (mask[state]) out.push_back({state, gen.stay_rate(state)});
            for (const auto& e : row)
                if (mask[e.col]) out.push_back(e);
            std::sort(out.begin(), out.end(),
                      [](const auto& a, const auto& b) { return a.col < b.col; });
            break;
        case RowPart::ExcludingStop:
            if (!mask[state]) out.push_back({state, gen.stay_rate(state)});
            for (const auto& e : row)
                if (!mask[e.col]) out.push_back(e);
            std::sort(out.begin(), out.end(),
                      [](const auto& a, const auto& b) { return a.col < b.col; });
            break;
    }
    return out;
}

double log_stay_weight(const GeneratorMatrix& gen, double t1, double t2, std::size_t state) {
    if (t2 < t1) throw DomainError("log_stay_weight: t1 <= t2 required");
    return gen.stay_rate(state) * gen.modulation().integral(t1, t2);
}

double log_stay_weight(const GeneratorMatrix& gen, double t1, double t2,
                       const Configuration& state) {
    auto idx = gen.space().index_of(state);
    if (!idx) throw DomainError("log_stay_weight: configuration outside the truncated space");
    return log_stay_weight(gen, t1, t2, *idx);
}

}  // namespace sbranch
