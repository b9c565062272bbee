#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sbranch/feller.hpp"
#include "sbranch/generator.hpp"

namespace sbranch {

// Input error with the JSON path that caused it.
class ModelError : public DomainError {
public:
    ModelError(const std::string& locus, const std::string& message)
        : DomainError(locus + ": " + message), locus_(locus) {}
    const std::string& locus() const { return locus_; }

private:
    std::string locus_;
};

// A fully validated model file: types, per-type law, stopping set,
// truncation cap, solver controls, and the master seed.
struct Model {
    TypeSpace types;
    ParticleLaw law;
    StoppingSet stopping;
    std::uint32_t truncation = 1;
    SeriesControl controls;
    std::uint64_t master_seed = 1;

    TruncatedSpace space() const { return TruncatedSpace::enumerate(types, truncation); }
    GeneratorMatrix generator() const { return build_generator(law, space()); }

    // Parse a configuration given as "label:count[,label:count...]"; a bare
    // integer is the count of the single type when only one type exists.
    Configuration parse_configuration(const std::string& text) const;
};

Model parse_model(const std::string& json_text);
Model load_model(const std::string& path);

}  // namespace sbranch
