// trafficlab: deterministic ring-road / figure-eight traffic simulator and
// mixed-autonomy control benchmark CLI.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "trafficlab/experiment.hpp"
#include "trafficlab/util.hpp"
#include "trafficlab/version.hpp"

namespace {

using traffic::exp::ExperimentConfig;

struct CommonFlags {
    std::string scenario;
    std::string config_file;
    std::string out_dir;
    std::string params_file;
    std::int64_t seed = -1;
    int jobs = 0;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--scenario", flags.scenario, "named scenario recipe");
    cmd->add_option("--config", flags.config_file, "JSON config file");
    cmd->add_option("--seed", flags.seed, "master seed");
    cmd->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--params", flags.params_file, "policy parameter file");
}

ExperimentConfig resolve(const CommonFlags& flags) {
    ExperimentConfig cfg;
    if (!flags.config_file.empty()) {
        std::ifstream in(flags.config_file, std::ios::binary);
        if (!in)
            throw traffic::ConfigError("cannot open config file: " +
                                       flags.config_file);
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = traffic::exp::experiment_from_json(ss.str());
    }
    if (!flags.scenario.empty()) cfg.scenario = traffic::recipe(flags.scenario);
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.jobs > 0) cfg.jobs = flags.jobs;
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (!flags.params_file.empty()) cfg.params_file = flags.params_file;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic mixed-autonomy traffic benchmark"};
    app.set_version_flag("--version", std::string(traffic::kVersion));
    app.require_subcommand(1);

    CommonFlags run_flags, sweep_flags, train_flags, eval_flags, st_flags;

    CLI::App* run = app.add_subcommand("run", "run one episode, write CSV + summary");
    add_common(run, run_flags);

    CLI::App* sweep = app.add_subcommand(
        "sweep-density", "bounds and controller velocities per density");
    add_common(sweep, sweep_flags);
    std::vector<double> densities;
    std::vector<std::string> controllers;
    int seeds_per_point = -1;
    sweep->add_option("--densities", densities, "densities in veh/m");
    sweep->add_option("--controllers", controllers,
                      "fs, pi, mlp:<file>, gru:<file>");
    sweep->add_option("--seeds-per-point", seeds_per_point,
                      "episodes averaged per point");

    CLI::App* train = app.add_subcommand("train", "train a policy with CEM");
    add_common(train, train_flags);

    CLI::App* eval = app.add_subcommand("eval", "evaluate a trained policy");
    add_common(eval, eval_flags);
    std::vector<double> lengths;
    int seeds_per_length = -1;
    eval->add_option("--lengths", lengths, "track lengths to evaluate");
    eval->add_option("--seeds-per-length", seeds_per_length,
                     "episodes averaged per length");

    CLI::App* spacetime =
        app.add_subcommand("spacetime", "episode CSV -> space-time data");
    add_common(spacetime, st_flags);
    std::string st_input;
    int st_stride = 0;
    spacetime->add_option("--input", st_input, "episode CSV to convert");
    spacetime->add_option("--stride", st_stride, "keep every k-th step");

    CLI::App* list = app.add_subcommand("list-recipes", "list named scenarios");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) return traffic::exp::cmd_list_recipes(std::cout);
        if (run->parsed()) return traffic::exp::cmd_run(resolve(run_flags));
        if (sweep->parsed()) {
            ExperimentConfig cfg = resolve(sweep_flags);
            if (!densities.empty()) cfg.sweep.densities = densities;
            if (!controllers.empty()) cfg.sweep.controllers = controllers;
            if (seeds_per_point > 0) cfg.sweep.seeds_per_point = seeds_per_point;
            return traffic::exp::cmd_sweep_density(cfg);
        }
        if (train->parsed()) return traffic::exp::cmd_train(resolve(train_flags));
        if (eval->parsed()) {
            ExperimentConfig cfg = resolve(eval_flags);
            if (!lengths.empty()) cfg.eval.lengths = lengths;
            if (seeds_per_length > 0)
                cfg.eval.seeds_per_length = seeds_per_length;
            return traffic::exp::cmd_eval(cfg);
        }
        if (spacetime->parsed()) {
            ExperimentConfig cfg = resolve(st_flags);
            if (!st_input.empty()) cfg.spacetime.input = st_input;
            if (st_stride > 0) cfg.spacetime.stride = st_stride;
            return traffic::exp::cmd_spacetime(cfg);
        }
    } catch (const traffic::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
