#pragma once

#include <optional>
#include <string>

#include "sbranch/model.hpp"

namespace sbranch {

inline constexpr const char* kToolName = "sbranch";
inline constexpr const char* kToolVersion = "0.1.0";

// A finished command: the machine-readable report (stable bytes for fixed
// model, flags, and seed), the human table, and the process exit code
// (0 pass, 1 check failure, 2 input error).
struct CommandResult {
    std::string machine;  // JSON document
    std::string human;
    int exit_code = 0;
};

CommandResult run_validate(const Model& model, const std::string& model_path);

CommandResult run_solve(const Model& model, const std::string& model_path,
                        const std::string& from_text, double t0, double t1, bool stopped);

CommandResult run_simulate(const Model& model, const std::string& model_path,
                           const std::string& from_text, double horizon,
                           std::uint64_t replicas, std::optional<std::uint64_t> seed,
                           bool stopped, bool log_trajectory);

// suite: chapman | branching | density | functional-eq | all
CommandResult run_verify(const Model& model, const std::string& model_path,
                         const std::string& suite);

}  // namespace sbranch
