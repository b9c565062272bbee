#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sbranch/errors.hpp"

namespace sbranch {

// Finite ordered set of particle types. Each type carries a real-valued
// label; everything downstream refers to types by index.
class TypeSpace {
public:
    explicit TypeSpace(std::vector<double> labels);

    std::size_t size() const { return labels_.size(); }
    double label(std::size_t i) const { return labels_.at(i); }
    const std::vector<double>& labels() const { return labels_; }
    std::optional<std::size_t> index_of(double label) const;

private:
    std::vector<double> labels_;
};

// A finite multiset of typed particles, stored sparsely as (type index,
// count) pairs sorted by type. The default-constructed value is the empty
// configuration, which every model treats as absorbing.
class Configuration {
public:
    using Entry = std::pair<std::size_t, std::uint32_t>;

    Configuration() = default;
    explicit Configuration(std::vector<Entry> entries);
    static Configuration single(std::size_t type, std::uint32_t count = 1);

    bool empty() const { return entries_.empty(); }
    std::uint64_t total() const;
    std::uint32_t count(std::size_t type) const;
    const std::vector<Entry>& entries() const { return entries_; }

    Configuration plus(const Configuration& other) const;
    // Componentwise subtraction; nullopt if any count would go negative.
    std::optional<Configuration> minus(const Configuration& other) const;
    // Replace one particle of `type` by `brood` (the one-event update).
    Configuration replace_one(std::size_t type, const Configuration& brood) const;

    bool operator==(const Configuration&) const = default;

    std::string str(const TypeSpace* types = nullptr) const;

private:
    std::vector<Entry> entries_;  // sorted by type, counts >= 1
};

struct ConfigurationHash {
    std::size_t operator()(const Configuration& c) const;
};

using ConfigSet = std::unordered_set<Configuration, ConfigurationHash>;

// Set of configurations that absorb the process on first entry.
// The empty configuration is rejected as a member.
class StoppingSet {
public:
    StoppingSet() = default;
    explicit StoppingSet(const std::vector<Configuration>& members);

    bool empty() const { return members_.empty(); }
    std::size_t size() const { return members_.size(); }
    bool contains(const Configuration& c) const { return members_.count(c) > 0; }
    const ConfigSet& members() const { return members_; }

private:
    ConfigSet members_;
};

// All configurations with total population <= cap, enumerated in a fixed
// graded order (by total, then first type's count descending), plus one
// out-of-range sentinel index for anything beyond the cap.
class TruncatedSpace {
public:
    static constexpr std::size_t kDefaultStateLimit = 2'000'000;

    static TruncatedSpace enumerate(const TypeSpace& types, std::uint32_t cap,
                                    std::size_t state_limit = kDefaultStateLimit);

    const TypeSpace& types() const { return types_; }
    std::uint32_t cap() const { return cap_; }

    std::size_t num_states() const { return states_.size(); }
    std::size_t overflow_index() const { return states_.size(); }
    std::size_t num_indices() const { return states_.size() + 1; }

    const Configuration& state(std::size_t idx) const { return states_.at(idx); }
    std::optional<std::size_t> index_of(const Configuration& c) const;
    // Index of c, or the overflow sentinel when c lies beyond the cap.
    std::size_t index_or_overflow(const Configuration& c) const;

private:
    TruncatedSpace(TypeSpace types, std::uint32_t cap);

    TypeSpace types_;
    std::uint32_t cap_ = 0;
    std::vector<Configuration> states_;
    std::unordered_map<Configuration, std::size_t, ConfigurationHash> index_;
};

// Per-type real weights used in pairings and exponents. Entries may be left
// undefined; evaluating an undefined entry is a DomainError.
class TestFunction {
public:
    static TestFunction constant(double value, std::size_t dim);
    static TestFunction from_values(std::vector<double> values);
    static TestFunction partial(std::vector<std::optional<double>> values);

    std::size_t dim() const { return values_.size(); }
    bool defined(std::size_t type) const;
    double at(std::size_t type) const;
    // True when every defined value is <= 0, so exp-pairings stay in (0, 1].
    bool laplace_admissible() const;

private:
    std::vector<std::optional<double>> values_;
};

// Sum of f over the particles of a: sum_i f(x_i) * n_i. Zero on the empty
// configuration regardless of f.
double pairing(const TestFunction& f, const Configuration& a);

// Translate every member of A by a (the shift of a set of configurations).
std::vector<Configuration> shift_set(const Configuration& a,
                                     const std::vector<Configuration>& A);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

}  // namespace sbranch
