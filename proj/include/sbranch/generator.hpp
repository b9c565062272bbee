#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sbranch/config_space.hpp"

namespace sbranch {

// One possible brood replacing a single transforming particle.
struct OffspringEntry {
    Configuration config;
    double prob = 0.0;
};

// Transformation behaviour of one particle type: exponential event rate and
// the distribution of the replacing brood.
struct TypeLaw {
    double rate = 0.0;
    std::vector<OffspringEntry> offspring;
};

constexpr double kProbTol = 1e-12;      // offspring normalization slack
constexpr double kRowSumTol = 1e-12;    // generator row-sum slack

// Per-type reproduction law over a TypeSpace.
class ParticleLaw {
public:
    ParticleLaw(TypeSpace types, std::vector<TypeLaw> per_type,
                std::optional<std::uint32_t> brood_cap = std::nullopt);

    const TypeSpace& types() const { return types_; }
    const TypeLaw& law(std::size_t type) const { return per_type_.at(type); }
    std::uint32_t brood_cap() const { return brood_cap_; }
    std::size_t dim() const { return per_type_.size(); }

private:
    TypeSpace types_;
    std::vector<TypeLaw> per_type_;
    std::uint32_t brood_cap_ = 0;
};

// Shared scalar modulation c(t) >= 0 applied to all rates. The trivial value
// is c == 1. Integrals of c are computed with a fixed composite rule unless
// an exact antiderivative is supplied.
class TimeModulation {
public:
    TimeModulation() = default;
    TimeModulation(std::function<double(double)> scale, double max_scale,
                   std::function<double(double)> antiderivative = nullptr);

    bool trivial() const { return !scale_; }
    double at(double t) const { return scale_ ? scale_(t) : 1.0; }
    double max_scale() const { return scale_ ? max_scale_ : 1.0; }
    double integral(double t1, double t2) const;

private:
    std::function<double(double)> scale_;
    std::function<double(double)> antiderivative_;
    double max_scale_ = 1.0;
};

// Configuration-level rate matrix on a truncated space plus the overflow
// sentinel. Off-diagonal entries are nonnegative, diagonals nonpositive,
// and every row sums to zero; rows of the empty configuration and of the
// overflow sentinel are identically zero. Immutable after construction.
class GeneratorMatrix {
public:
    struct Entry {
        std::size_t col;
        double rate;
    };

    const TruncatedSpace& space() const { return space_; }
    const TimeModulation& modulation() const { return modulation_; }

    // Diagonal rate q(state) <= 0.
    double stay_rate(std::size_t state) const { return diag_.at(state); }
    // Off-diagonal row (includes the overflow column when events leave the
    // truncated range).
    std::span<const Entry> jump_row(std::size_t state) const {
        const auto& r = rows_.at(state);
        return {r.data(), r.size()};
    }
    double max_exit_rate() const { return max_exit_rate_; }
    std::size_t num_indices() const { return space_.num_indices(); }

    // Row sum including the diagonal (should vanish up to rounding).
    double row_sum(std::size_t state) const;

    friend GeneratorMatrix build_generator(const ParticleLaw&, const TruncatedSpace&,
                                           TimeModulation);
    friend GeneratorMatrix absorb(const GeneratorMatrix&, const StoppingSet&);

private:
    explicit GeneratorMatrix(TruncatedSpace space) : space_(std::move(space)) {}

    TruncatedSpace space_;
    TimeModulation modulation_;
    std::vector<std::vector<Entry>> rows_;  // off-diagonal, sorted by column
    std::vector<double> diag_;
    double max_exit_rate_ = 0.0;
};

// Aggregate the per-particle law into configuration-level rates: each
// particle of type x fires at rate(x) and is replaced by a sampled brood;
// events that recreate the same configuration carry no off-diagonal mass,
// and events beyond the cap route to the overflow sentinel.
GeneratorMatrix build_generator(const ParticleLaw& law, const TruncatedSpace& space,
                                TimeModulation modulation = {});

// Membership mask of a stopping set against a space's state indices.
struct StopMask {
    std::vector<bool> in_stop;  // sized num_indices(); overflow never a member
    bool any = false;

    static StopMask resolve(const StoppingSet& set, const TruncatedSpace& space);
    static StopMask none(const TruncatedSpace& space);
    bool operator[](std::size_t idx) const { return in_stop[idx]; }
};

// Row partitions of the generator.
enum class RowPart {
    Stay,           // diagonal only: rate of leaving the state point-wise
    JumpAll,        // off-diagonal row
    JumpAvoiding,   // off-diagonal row excluding stop-set columns
    IntoStop,       // row restricted to stop-set columns
    ExcludingStop,  // row without stop-set columns, diagonal included
};

std::vector<GeneratorMatrix::Entry> partition_row(const GeneratorMatrix& gen,
                                                  std::size_t state, RowPart part,
                                                  const StopMask& mask);

// Integral of the diagonal rate over [t1, t2]; the log of the probability of
// remaining point-wise in place. Always <= 0.
double log_stay_weight(const GeneratorMatrix& gen, double t1, double t2, std::size_t state);
double log_stay_weight(const GeneratorMatrix& gen, double t1, double t2,
                       const Configuration& state);

}  // namespace sbranch
