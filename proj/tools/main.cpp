#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sbranch/report.hpp"

namespace {

int finish(const sbranch::CommandResult& result, const std::string& out_path) {
    std::cout << result.human;
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return 2;
        }
        out << result.machine;
    }
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching-process transition solver, simulator, and identity verifier"};
    app.require_subcommand(1);

    std::string model_path;
    std::string out_path;
    app.add_option("-o,--out", out_path, "write the machine-readable report to this path");

    auto* validate = app.add_subcommand("validate", "check a model file and its generator");
    validate->add_option("model", model_path, "model file")->required();

    std::string from_text = "1";
    double t0 = 0.0, t1 = 1.0;
    bool stopped = false;
    auto* solve = app.add_subcommand("solve", "transition distribution: series vs oracle");
    solve->add_option("model", model_path, "model file")->required();
    solve->add_option("--from", from_text, "start configuration (label:count,... or count)");
    solve->add_option("--t0", t0, "start time");
    solve->add_option("--t1", t1, "end time");
    solve->add_flag("--stopped", stopped, "freeze the process on entering the stopping set");

    double horizon = 1.0;
    std::uint64_t replicas = 10000;
    bool log_trajectory = false;
    std::optional<std::uint64_t> seed;
    std::uint64_t seed_value = 0;
    auto* simulate = app.add_subcommand("simulate", "event-driven Monte Carlo outcomes");
    simulate->add_option("model", model_path, "model file")->required();
    simulate->add_option("--from", from_text, "start configuration");
    simulate->add_option("--horizon", horizon, "simulation horizon");
    simulate->add_option("--replicas", replicas, "number of replicas");
    auto* seed_opt = simulate->add_option("--seed", seed_value, "master seed");
    simulate->add_flag("--stopped", stopped, "stop replicas on entering the stopping set");
    simulate->add_flag("--log-trajectory", log_trajectory, "include per-replica paths");

    std::string suite = "all";
    auto* verify = app.add_subcommand("verify", "run identity checks and report residuals");
    verify->add_option("model", model_path, "model file")->required();
    verify->add_option("--suite", suite,
                       "chapman | branching | density | functional-eq | all");

    CLI11_PARSE(app, argc, argv);

    try {
        const sbranch::Model model = sbranch::load_model(model_path);
        if (validate->parsed()) return finish(sbranch::run_validate(model, model_path), out_path);
        if (solve->parsed())
            return finish(sbranch::run_solve(model, model_path, from_text, t0, t1, stopped),
                          out_path);
        if (simulate->parsed()) {
            if (seed_opt->count() > 0) seed = seed_value;
            return finish(sbranch::run_simulate(model, model_path, from_text, horizon, replicas,
                                                seed, stopped, log_trajectory),
                          out_path);
        }
        if (verify->parsed())
            return finish(sbranch::run_verify(model, model_path, suite), out_path);
    } catch (const sbranch::ModelError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const sbranch::DomainError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const sbranch::CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
