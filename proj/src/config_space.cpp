#include "sbranch/config_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sbranch {

TypeSpace::TypeSpace(std::vector<double> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw DomainError("TypeSpace: at least one type required");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (!(labels_[i] >= 0.0) || !std::isfinite(labels_[i]))
            throw DomainError("TypeSpace: labels must be finite and nonnegative");
        if (i > 0 && !(labels_[i] > labels_[i - 1]))
            throw DomainError("TypeSpace: labels must be strictly increasing");
    }
}

std::optional<std::size_t> TypeSpace::index_of(double label) const {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it != labels_.end() && *it == label)
        return static_cast<std::size_t>(it - labels_.begin());
    return std::nullopt;
}

Configuration::Configuration(std::vector<Entry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].second == 0)
            throw DomainError("Configuration: stored counts must be >= 1");
        if (i > 0 && entries_[i].first == entries_[i - 1].first)
            throw DomainError("Configuration: duplicate type entry");
    }
}

Configuration Configuration::single(std::size_t type, std::uint32_t count) {
    if (count == 0) return {};
    return Configuration({{type, count}});
}

std::uint64_t Configuration::total() const {
    std::uint64_t t = 0;
    for (const auto& [type, n] : entries_) t += n;
    return t;
}

std::uint32_t Configuration::count(std::size_t type) const {
    for (const auto& [t, n] : entries_)
        if (t == type) return n;
    return 0;
}

Configuration Configuration::plus(const Configuration& other) const {
    std::vector<Entry> out;
    out.reserve(entries_.size() + other.entries_.size());
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() || b != other.entries_.end()) {
        if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
            out.push_back(*a++);
        } else if (a == entries_.end() || b->first < a->first) {
            out.push_back(*b++);
        } else {
            out.emplace_back(a->first, a->second + b->second);
            ++a, ++b;
        }
    }
    Configuration r;
    r.entries_ = std::move(out);
    return r;
}

std::optional<Configuration> Configuration::minus(const Configuration& other) const {
    std::vector<Entry> out;
    out.reserve(entries_.size());
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() || b != other.entries_.end()) {
        if (b == other.entries_.end() || (a != entries_.end() && a->first < b->first)) {
            out.push_back(*a++);
        } else if (a == entries_.end() || b->first < a->first) {
            return std::nullopt;  // subtracting a type we do not have
        } else {
            if (a->second < b->second) return std::nullopt;
            if (a->second > b->second) out.emplace_back(a->first, a->second - b->second);
            ++a, ++b;
        }
    }
    Configuration r;
    r.entries_ = std::move(out);
    return r;
}

Configuration Configuration::replace_one(std::size_t type, const Configuration& brood) const {
    auto removed = minus(Configuration::single(type, 1));
    if (!removed)
        throw DomainError("Configuration: no particle of the requested type to replace");
    return removed->plus(brood);
}

std::string Configuration::str(const TypeSpace* types) const {
    if (entries_.empty()) return "0";
    std::ostringstream os;
    os << "(";
    bool first = true;
    for (const auto& [type, n] : entries_) {
        if (!first) os << ",";
        first = false;
        if (types)
            os << types->label(type);
        else
            os << "t" << type;
        os << ":" << n;
    }
    os << ")";
    return os.str();
}

std::size_t ConfigurationHash::operator()(const Configuration& c) const {
    std::size_t h = 0x9e3779b97f4a7c15ULL;
    for (const auto& [type, n] : c.entries()) {
        std::size_t v = (static_cast<std::size_t>(type) << 32) ^ n;
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

StoppingSet::StoppingSet(const std::vector<Configuration>& members) {
    for (const auto& m : members) {
        if (m.empty())
            throw DomainError("StoppingSet: the empty configuration cannot be a member");
        members_.insert(m);
    }
}

TruncatedSpace::TruncatedSpace(TypeSpace types, std::uint32_t cap)
    : types_(std::move(types)), cap_(cap) {}

TruncatedSpace TruncatedSpace::enumerate(const TypeSpace& types, std::uint32_t cap,
                                         std::size_t state_limit) {
    if (cap < 1) throw DomainError("TruncatedSpace: cap must be >= 1");
    const std::size_t d = types.size();
    const std::uint64_t expected = binomial(cap + d, d);
    if (expected > state_limit)
        throw CapacityError("TruncatedSpace: " + std::to_string(expected) +
                            " states exceeds limit " + std::to_string(state_limit));

    TruncatedSpace space(types, cap);
    space.states_.reserve(expected);

    // Grade by total population; within a grade the earlier type takes the
    // largest count first, recursively.
    std::vector<std::uint32_t> counts(d, 0);
    auto emit = [&]() {
        std::vector<Configuration::Entry> entries;
        for (std::size_t i = 0; i < d; ++i)
            if (counts[i] > 0) entries.emplace_back(i, counts[i]);
        space.states_.push_back(Configuration(std::move(entries)));
    };
    auto rec = [&](auto&& self, std::size_t pos, std::uint32_t remaining) -> void {
        if (pos + 1 == d) {
            counts[pos] = remaining;
            emit();
            counts[pos] = 0;
            return;
        }
        for (std::uint32_t n = remaining;; --n) {
            counts[pos] = n;
            self(self, pos + 1, remaining - n);
            if (n == 0) break;
        }
        counts[pos] = 0;
    };
    for (std::uint32_t t = 0; t <= cap; ++t) rec(rec, 0, t);

    space.index_.reserve(space.states_.size());
    for (std::size_t i = 0; i < space.states_.size(); ++i)
        space.index_.emplace(space.states_[i], i);
    return space;
}

std::optional<std::size_t> TruncatedSpace::index_of(const Configuration& c) const {
    auto it = index_.find(c);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t TruncatedSpace::index_or_overflow(const Configuration& c) const {
    auto idx = index_of(c);
    return idx ? *idx : overflow_index();
}

TestFunction TestFunction::constant(double value, std::size_t dim) {
    TestFunction f;
    f.values_.assign(dim, value);
    return f;
}

TestFunction TestFunction::from_values(std::vector<double> values) {
    TestFunction f;
    f.values_.reserve(values.size());
    for (double v : values) f.values_.emplace_back(v);
    return f;
}

TestFunction TestFunction::partial(std::vector<std::optional<double>> values) {
    TestFunction f;
    f.values_ = std::move(values);
    return f;
}

bool TestFunction::defined(std::size_t type) const {
    return type < values_.size() && values_[type].has_value();
}

double TestFunction::at(std::size_t type) const {
    if (!defined(type))
        throw DomainError("TestFunction: value undefined for type index " + std::to_string(type));
    return *values_[type];
}

bool TestFunction::laplace_admissible() const {
    for (const auto& v : values_)
        if (v && *v > 0.0) return false;
    return true;
}

double pairing(const TestFunction& f, const Configuration& a) {
    double acc = 0.0;
    for (const auto& [type, n] : a.entries()) acc += f.at(type) * static_cast<double>(n);
    return acc;
}

std::vector<Configuration> shift_set(const Configuration& a,
                                     const std::vector<Configuration>& A) {
    ConfigSet seen;
    std::vector<Configuration> out;
    out.reserve(A.size());
    for (const auto& member : A) {
        Configuration shifted = a.plus(member);
        if (seen.insert(shifted).second) out.push_back(std::move(shifted));
    }
    return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;  // exact: product of i consecutive ints divisible by i!
    }
    return r;
}

}  // namespace sbranch
