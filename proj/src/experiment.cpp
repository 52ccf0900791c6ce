#include "trafficlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "trafficlab/engine.hpp"
#include "trafficlab/env.hpp"
#include "trafficlab/equilibrium.hpp"
#include "trafficlab/training.hpp"
#include "trafficlab/util.hpp"
#include "trafficlab/version.hpp"

namespace traffic::exp {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::string& ctx,
                  std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known =
            std::any_of(allowed.begin(), allowed.end(),
                        [&](const char* k) { return it.key() == k; });
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& ctx) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + std::string(key) + "' in " + ctx +
                          ": " + e.what());
    }
}

std::filesystem::path out_path(const ExperimentConfig& cfg,
                               const std::string& file) {
    std::filesystem::create_directories(cfg.out_dir);
    return std::filesystem::path(cfg.out_dir) / file;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + p.string());
    out << text;
}

std::string meta_header(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "# trafficlab " << kVersion << "\n";
    os << "# config_digest=" << config_digest(cfg) << " seed=" << cfg.seed
       << "\n";
    return os.str();
}

std::vector<std::uint64_t> seed_block(std::uint64_t base, int count) {
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) seeds[static_cast<std::size_t>(i)] = base + i;
    return seeds;
}

Eigen::VectorXd load_params_checked(const std::string& path,
                                    const ScenarioConfig& sc) {
    if (path.empty())
        throw ConfigError("a learned AV law needs --params <policy-file>");
    const policy::PolicyFile f = policy::load_policy(path);
    train::check_policy_matches(f, sc);
    return f.params;
}

}  // namespace

ExperimentConfig experiment_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config JSON: ") + e.what());
    }
    require_keys(j, "config",
                 {"recipe", "scenario", "seed", "jobs", "out_dir",
                  "params_file", "cem", "sweep", "eval", "spacetime"});

    ExperimentConfig cfg;
    if (j.contains("recipe"))
        cfg.scenario = recipe(j.at("recipe").get<std::string>());
    if (j.contains("scenario"))
        cfg.scenario =
            scenario_from_json(j.at("scenario").dump(), cfg.scenario);
    get_to(j, "seed", cfg.seed, "config");
    get_to(j, "jobs", cfg.jobs, "config");
    get_to(j, "out_dir", cfg.out_dir, "config");
    get_to(j, "params_file", cfg.params_file, "config");

    if (j.contains("cem")) {
        const json& n = j.at("cem");
        require_keys(n, "config.cem",
                     {"population", "elite_frac", "iterations", "init_std",
                      "std_floor", "episodes_per_candidate", "gamma"});
        get_to(n, "population", cfg.cem.population, "config.cem");
        get_to(n, "elite_frac", cfg.cem.elite_frac, "config.cem");
        get_to(n, "iterations", cfg.cem.iterations, "config.cem");
        get_to(n, "init_std", cfg.cem.init_std, "config.cem");
        get_to(n, "std_floor", cfg.cem.std_floor, "config.cem");
        get_to(n, "episodes_per_candidate", cfg.cem.episodes_per_candidate,
               "config.cem");
        get_to(n, "gamma", cfg.cem.gamma, "config.cem");
    }
    if (j.contains("sweep")) {
        const json& n = j.at("sweep");
        require_keys(n, "config.sweep",
                     {"densities", "seeds_per_point", "controllers"});
        get_to(n, "densities", cfg.sweep.densities, "config.sweep");
        get_to(n, "seeds_per_point", cfg.sweep.seeds_per_point, "config.sweep");
        get_to(n, "controllers", cfg.sweep.controllers, "config.sweep");
    }
    if (j.contains("eval")) {
        const json& n = j.at("eval");
        require_keys(n, "config.eval", {"lengths", "seeds_per_length"});
        get_to(n, "lengths", cfg.eval.lengths, "config.eval");
        get_to(n, "seeds_per_length", cfg.eval.seeds_per_length, "config.eval");
    }
    if (j.contains("spacetime")) {
        const json& n = j.at("spacetime");
        require_keys(n, "config.spacetime", {"input", "stride"});
        get_to(n, "input", cfg.spacetime.input, "config.spacetime");
        get_to(n, "stride", cfg.spacetime.stride, "config.spacetime");
    }
    return cfg;
}

std::string experiment_to_json(const ExperimentConfig& cfg) {
    json j;
    j["scenario"] = json::parse(scenario_to_json(cfg.scenario));
    j["seed"] = cfg.seed;
    j["params_file"] = cfg.params_file;
    j["cem"] = {{"population", cfg.cem.population},
                {"elite_frac", cfg.cem.elite_frac},
                {"iterations", cfg.cem.iterations},
                {"init_std", cfg.cem.init_std},
                {"std_floor", cfg.cem.std_floor},
                {"episodes_per_candidate", cfg.cem.episodes_per_candidate},
                {"gamma", cfg.cem.gamma}};
    j["sweep"] = {{"densities", cfg.sweep.densities},
                  {"seeds_per_point", cfg.sweep.seeds_per_point},
                  {"controllers", cfg.sweep.controllers}};
    j["eval"] = {{"lengths", cfg.eval.lengths},
                 {"seeds_per_length", cfg.eval.seeds_per_length}};
    j["spacetime"] = {{"input", cfg.spacetime.input},
                      {"stride", cfg.spacetime.stride}};
    return j.dump(2);
}

std::string config_digest(const ExperimentConfig& cfg) {
    return to_hex(fnv1a64(experiment_to_json(cfg)));
}

int cmd_run(const ExperimentConfig& cfg) {
    ScenarioConfig sc = cfg.scenario;
    sc.sample_train_length = false;
    sc.validate();

    std::unique_ptr<train::NeuralDriver> neural;
    sim::AvDriver* driver = nullptr;
    if (sc.num_avs > 0 &&
        (sc.av_law == ControlTag::Mlp || sc.av_law == ControlTag::Gru)) {
        const Eigen::VectorXd params = load_params_checked(cfg.params_file, sc);
        neural = std::make_unique<train::NeuralDriver>(sc, params);
        driver = neural.get();
    }

    sim::EpisodeLog log = sim::run_episode(sc, cfg.seed, driver, sim::LogMode::Full);
    log.config_digest = config_digest(cfg);
    sim::write_episode_csv(log, out_path(cfg, "episode.csv").string(), kVersion);

    json summary;
    summary["tool_version"] = std::string(kVersion);
    summary["config_digest"] = log.config_digest;
    summary["seed"] = cfg.seed;
    summary["scenario"] = sc.name;
    summary["track_length"] = log.track_length;
    summary["steps"] = log.executed_steps;
    summary["collision"] = log.collision;
    summary["collision_step"] = log.collision_step;
    summary["mean_velocity_final_100s"] = log.mean_velocity_final(100.0);
    summary["min_velocity_final_100s"] = log.min_velocity_final(100.0);
    summary["velocity_std_final_100s"] = log.velocity_std_final(100.0);
    summary["episode_return"] = env::episode_return(log, 1.0);
    write_text(out_path(cfg, "summary.json"), summary.dump(2) + "\n");

    return log.collision ? 3 : 0;
}

namespace {

struct SweepRow {
    double density = 0.0;
    double h_star = 0.0;
    double v_upper = 0.0;
    double v_lower_mean = 0.0;
    double v_lower_std = 0.0;
    bool waves = true;
    std::vector<double> ctrl_mean;
    std::vector<double> ctrl_std;
};

struct ControllerSpec {
    std::string label;
    ControlTag law;
    std::string params_file;
};

ControllerSpec parse_controller(const std::string& token) {
    if (token == "fs") return {"fs", ControlTag::FollowerStopper, ""};
    if (token == "pi") return {"pi", ControlTag::PiSaturation, ""};
    if (token.rfind("mlp:", 0) == 0)
        return {"mlp", ControlTag::Mlp, token.substr(4)};
    if (token.rfind("gru:", 0) == 0)
        return {"gru", ControlTag::Gru, token.substr(4)};
    throw ConfigError("unknown controller token '" + token +
                      "' (expected fs, pi, mlp:<file> or gru:<file>)");
}

}  // namespace

int cmd_sweep_density(const ExperimentConfig& cfg) {
    if (cfg.sweep.densities.empty())
        throw ConfigError("sweep-density needs a density list");
    const ScenarioConfig& base = cfg.scenario;
    const int n = base.num_vehicles;

    std::vector<ControllerSpec> controllers;
    for (const auto& token : cfg.sweep.controllers)
        controllers.push_back(parse_controller(token));
    // Architecture checks happen against the per-point scenario below; load
    // raw parameter vectors once.
    std::vector<Eigen::VectorXd> ctrl_params(controllers.size());

    std::vector<SweepRow> rows(cfg.sweep.densities.size());
    const auto seeds = seed_block(cfg.seed, cfg.sweep.seeds_per_point);

    for (std::size_t pi = 0; pi < cfg.sweep.densities.size(); ++pi) {
        const double density = cfg.sweep.densities[pi];
        SweepRow& row = rows[pi];
        row.density = density;
        const eq::EquilibriumPoint up =
            eq::equilibrium_at_density(density, base.vehicle_length, base.idm);
        row.h_star = up.h_star;
        row.v_upper = up.v_star;

        const double L = static_cast<double>(n) / density;
        const auto lower = eq::stop_and_go_average_velocity(L, n, seeds, base);
        row.v_lower_mean = lower.mean;
        row.v_lower_std = lower.stddev;
        row.waves = lower.waves_formed;

        for (std::size_t ci = 0; ci < controllers.size(); ++ci) {
            ScenarioConfig sc = base;
            sc.name = base.name + "+" + controllers[ci].label;
            sc.length = L;
            sc.num_avs = std::max(base.num_avs, 1);
            sc.av_law = controllers[ci].law;
            sc.sample_train_length = false;
            if (controllers[ci].law == ControlTag::Mlp ||
                controllers[ci].law == ControlTag::Gru) {
                if (ctrl_params[ci].size() == 0)
                    ctrl_params[ci] = load_params_checked(
                        controllers[ci].params_file, sc);
                const train::EvalStats st = train::evaluate_policy(
                    sc, &ctrl_params[ci], seeds);
                row.ctrl_mean.push_back(st.mean_final_velocity);
                row.ctrl_std.push_back(st.std_final_velocity);
            } else {
                const train::EvalStats st =
                    train::evaluate_policy(sc, nullptr, seeds);
                row.ctrl_mean.push_back(st.mean_final_velocity);
                row.ctrl_std.push_back(st.std_final_velocity);
            }
        }
    }

    std::ostringstream os;
    os << meta_header(cfg);
    os << "density,h_star,v_star_upper,v_lower_mean,v_lower_std";
    for (const auto& c : controllers)
        os << ',' << c.label << "_mean," << c.label << "_std";
    os << "\n";
    for (const auto& row : rows) {
        os << format_g9(row.density) << ',' << format_g9(row.h_star) << ','
           << format_g9(row.v_upper) << ','
           << (row.waves ? format_g9(row.v_lower_mean) : "nan") << ','
           << (row.waves ? format_g9(row.v_lower_std) : "nan");
        for (std::size_t ci = 0; ci < row.ctrl_mean.size(); ++ci)
            os << ',' << format_g9(row.ctrl_mean[ci]) << ','
               << format_g9(row.ctrl_std[ci]);
        os << "\n";
    }
    write_text(out_path(cfg, "density_sweep.csv"), os.str());
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    ScenarioConfig sc = cfg.scenario;
    sc.validate();
    if (sc.num_avs <= 0 ||
        (sc.av_law != ControlTag::Mlp && sc.av_law != ControlTag::Gru))
        throw ConfigError("train needs a scenario with a learnable AV law");

    cem::CemConfig cem_cfg = cfg.cem;
    cem_cfg.seed = cfg.seed;
    cem_cfg.jobs = effective_jobs(cfg.jobs);

    const train::TrainResult result = train::train_policy(sc, cem_cfg);

    const std::string digest = config_digest(cfg);
    policy::PolicyFile pf = train::policy_file_for(sc, result.params);
    pf.tool_version = std::string(kVersion);
    pf.config_digest = digest;
    pf.seed = cfg.seed;
    policy::save_policy(pf, out_path(cfg, "policy.json").string());
    train::write_training_curve_csv(result.cem,
                                    out_path(cfg, "training_curve.csv").string(),
                                    kVersion, digest, cfg.seed);

    // Evaluation block at the ends and middle of the train range, plus the
    // run length, against the no-AV baseline.
    const auto eval_seeds = seed_block(cfg.seed, 10);
    std::vector<double> lengths{sc.train.length_range[0],
                                0.5 * (sc.train.length_range[0] +
                                       sc.train.length_range[1]),
                                sc.train.length_range[1]};
    if (!sc.train.sample_length) lengths = {sc.length};
    json eval_block = json::array();
    for (double L : lengths) {
        ScenarioConfig esc = sc;
        esc.length = L;
        esc.sample_train_length = false;
        const train::EvalStats st =
            train::evaluate_policy(esc, &result.params, eval_seeds);
        const eq::EquilibriumPoint up = eq::uniform_flow_velocity(
            L, esc.num_vehicles, esc.vehicle_length, esc.idm);
        eval_block.push_back({{"length", L},
                              {"mean_velocity_final_100s", st.mean_final_velocity},
                              {"std_velocity", st.std_final_velocity},
                              {"v_star", up.v_star},
                              {"collisions", st.collisions}});
    }

    // Baseline comparison at the run length: a trained policy that loses to
    // no automation is a failed run.
    ScenarioConfig run_sc = sc;
    run_sc.sample_train_length = false;
    const train::EvalStats policy_stats =
        train::evaluate_policy(run_sc, &result.params, eval_seeds);
    const auto baseline = eq::stop_and_go_average_velocity(
        run_sc.length, run_sc.num_vehicles, eval_seeds, run_sc);

    json out;
    out["tool_version"] = std::string(kVersion);
    out["config_digest"] = digest;
    out["seed"] = cfg.seed;
    out["scenario"] = sc.name;
    out["best_fitness"] = result.cem.best_fitness;
    out["discarded_candidates"] = result.cem.discarded;
    out["eval"] = eval_block;
    out["run_length_mean_velocity"] = policy_stats.mean_final_velocity;
    out["no_av_baseline_mean_velocity"] = baseline.mean;
    write_text(out_path(cfg, "train_eval.json"), out.dump(2) + "\n");

    return policy_stats.mean_final_velocity < baseline.mean ? 4 : 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
    ScenarioConfig sc = cfg.scenario;
    sc.sample_train_length = false;
    sc.validate();
    if (sc.num_avs <= 0 ||
        (sc.av_law != ControlTag::Mlp && sc.av_law != ControlTag::Gru))
        throw ConfigError("eval needs a scenario with a learnable AV law");
    const Eigen::VectorXd params = load_params_checked(cfg.params_file, sc);

    const auto seeds = seed_block(cfg.seed, cfg.eval.seeds_per_length);
    struct Row {
        double length, density, v_star, mean_v, std_v, ratio;
        int collisions;
    };
    std::vector<Row> rows(cfg.eval.lengths.size());

    parallel_for(cfg.eval.lengths.size(), cfg.jobs, [&](std::size_t i) {
        const double L = cfg.eval.lengths[i];
        ScenarioConfig esc = sc;
        esc.length = L;
        const train::EvalStats st = train::evaluate_policy(esc, &params, seeds);
        const eq::EquilibriumPoint up = eq::uniform_flow_velocity(
            L, esc.num_vehicles, esc.vehicle_length, esc.idm);
        rows[i] = {L,
                   static_cast<double>(esc.num_vehicles) / L,
                   up.v_star,
                   st.mean_final_velocity,
                   st.std_final_velocity,
                   up.v_star > 0 ? st.mean_final_velocity / up.v_star : 0.0,
                   st.collisions};
    });

    std::ostringstream os;
    os << meta_header(cfg);
    os << "length,density,v_star,mean_velocity,std_velocity,ratio,collisions\n";
    for (const auto& r : rows) {
        os << format_g9(r.length) << ',' << format_g9(r.density) << ','
           << format_g9(r.v_star) << ',' << format_g9(r.mean_v) << ','
           << format_g9(r.std_v) << ',' << format_g9(r.ratio) << ','
           << r.collisions << "\n";
    }
    write_text(out_path(cfg, "eval.csv"), os.str());
    return 0;
}

int cmd_spacetime(const ExperimentConfig& cfg) {
    if (cfg.spacetime.input.empty())
        throw ConfigError("spacetime needs an input episode CSV");
    if (cfg.spacetime.stride < 1)
        throw ConfigError("spacetime stride must be >= 1");
    std::ifstream in(cfg.spacetime.input, std::ios::binary);
    if (!in)
        throw ConfigError("cannot open episode CSV: " + cfg.spacetime.input);

    std::ostringstream os;
    os << meta_header(cfg);
    os << "time,vehicle_id,position,velocity\n";

    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line.rfind("step,", 0) != 0)
                throw ConfigError("input is not an episode CSV (bad header)");
            header_seen = true;
            continue;
        }
        // step,time,vehicle_id,lane,position,velocity,acceleration,tag
        std::array<std::string, 8> f;
        std::size_t start = 0;
        for (int k = 0; k < 8; ++k) {
            const std::size_t pos = line.find(',', start);
            f[static_cast<std::size_t>(k)] =
                line.substr(start, pos == std::string::npos
                                       ? std::string::npos
                                       : pos - start);
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
        const long step = std::stol(f[0]);
        if (step % cfg.spacetime.stride != 0) continue;
        os << f[1] << ',' << f[2] << ',' << f[4] << ',' << f[5] << "\n";
    }
    if (!header_seen)
        throw ConfigError("input is not an episode CSV (no header found)");
    write_text(out_path(cfg, "spacetime.csv"), os.str());
    return 0;
}

int cmd_list_recipes(std::ostream& out) {
    for (const std::string& name : recipe_names()) {
        const ScenarioConfig sc = recipe(name);
        out << name << ": " << to_string(sc.network) << " L=" << sc.length
            << "m vehicles=" << sc.num_vehicles << " avs=" << sc.num_avs;
        if (sc.num_avs > 0) out << " law=" << control_tag_name(sc.av_law);
        out << "\n";
    }
    return 0;
}

}  // namespace traffic::exp
