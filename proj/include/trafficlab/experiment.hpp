#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "trafficlab/cem.hpp"
#include "trafficlab/scenario.hpp"

namespace traffic::exp {

struct SweepOptions {
    std::vector<double> densities;
    int seeds_per_point = 10;
    // "fs", "pi", "mlp:<params-file>", "gru:<params-file>"
    std::vector<std::string> controllers;
};

struct EvalOptions {
    std::vector<double> lengths{210, 220, 230, 240, 250, 260, 270, 280, 290};
    int seeds_per_length = 10;
};

struct SpacetimeOptions {
    std::string input;
    int stride = 1;
};

/// Resolved configuration of one CLI invocation. The config digest covers
/// everything that can change results (scenario, seed, command options,
/// params file); out_dir and jobs are excluded so parallelism and placement
/// never change output bytes.
struct ExperimentConfig {
    ScenarioConfig scenario;
    std::uint64_t seed = 0;
    int jobs = 0;  // 0 = hardware concurrency
    std::string out_dir = ".";
    std::string params_file;  // run/eval of learned laws
    cem::CemConfig cem;
    SweepOptions sweep;
    EvalOptions eval;
    SpacetimeOptions spacetime;
};

/// Strict parse; supports {"recipe": "...", "scenario": {overrides}, ...}.
ExperimentConfig experiment_from_json(const std::string& text);
std::string experiment_to_json(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

// Command implementations shared by the CLI and the acceptance suite.
// Exit codes: 0 ok, 2 config error (thrown as ConfigError by these),
// 3 collision termination (cmd_run), 4 training failure (cmd_train).
int cmd_run(const ExperimentConfig& cfg);
int cmd_sweep_density(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_eval(const ExperimentConfig& cfg);
int cmd_spacetime(const ExperimentConfig& cfg);
int cmd_list_recipes(std::ostream& out);

}  // namespace traffic::exp
