#include "trafficlab/training.hpp"

#include <cmath>
#include <fstream>

#include "trafficlab/util.hpp"

namespace traffic::train {

NeuralDriver::NeuralDriver(const ScenarioConfig& sc,
                           const Eigen::VectorXd& params)
    : centralized_(sc.observation == ObservationMode::Full),
      gru_(sc.av_law == ControlTag::Gru) {
    if (gru_) {
        const policy::GruSpec spec = gru_spec_for(sc);
        if (centralized_) {
            gru_policy_ = std::make_unique<policy::GruPolicy>(spec, params);
        } else {
            gru_per_av_.reserve(static_cast<std::size_t>(sc.num_avs));
            for (int k = 0; k < sc.num_avs; ++k)
                gru_per_av_.emplace_back(spec, params);
        }
    } else {
        mlp_ = std::make_unique<policy::MlpPolicy>(mlp_spec_for(sc), params);
    }
}

void NeuralDriver::reset(const ScenarioConfig&) {
    if (gru_policy_) gru_policy_->reset_state();
    for (auto& g : gru_per_av_) g.reset_state();
}

void NeuralDriver::actions(const sim::WorldState& w, const ScenarioConfig& sc,
                           std::span<double> out) {
    if (centralized_) {
        const Eigen::VectorXd obs = env::observe(w, sc);
        const Eigen::VectorXd act =
            gru_ ? gru_policy_->step(obs) : mlp_->forward(obs);
        for (std::size_t k = 0; k < out.size(); ++k)
            out[k] = act[static_cast<Eigen::Index>(k)];
        return;
    }
    std::size_t slot = 0;
    for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
        if (!w.vehicles[i].is_av()) continue;
        const Eigen::VectorXd obs =
            env::observe_av(w, sc, static_cast<int>(i));
        out[slot] = gru_ ? gru_per_av_[slot].step(obs)[0] : mlp_->forward(obs)[0];
        ++slot;
    }
}

policy::MlpSpec mlp_spec_for(const ScenarioConfig& sc) {
    policy::MlpSpec spec;
    spec.hidden = sc.policy_hidden;
    if (sc.observation == ObservationMode::Partial) {
        spec.input = 3;
        spec.output = 1;
    } else {
        spec.input = env::observation_size(sc);
        spec.output = std::max(sc.num_avs, 1);
    }
    return spec;
}

policy::GruSpec gru_spec_for(const ScenarioConfig& sc) {
    policy::GruSpec spec;
    spec.hidden = sc.policy_hidden.empty() ? 5 : sc.policy_hidden[0];
    if (sc.observation == ObservationMode::Partial) {
        spec.input = 3;
        spec.output = 1;
    } else {
        spec.input = env::observation_size(sc);
        spec.output = std::max(sc.num_avs, 1);
    }
    return spec;
}

int policy_param_count(const ScenarioConfig& sc) {
    return sc.av_law == ControlTag::Gru ? param_count(gru_spec_for(sc))
                                        : param_count(mlp_spec_for(sc));
}

policy::PolicyFile policy_file_for(const ScenarioConfig& sc,
                                   const Eigen::VectorXd& params) {
    policy::PolicyFile f;
    f.arch = sc.av_law == ControlTag::Gru ? "gru" : "mlp";
    if (sc.av_law == ControlTag::Gru) {
        const auto spec = gru_spec_for(sc);
        f.input = spec.input;
        f.hidden = {spec.hidden};
        f.output = spec.output;
    } else {
        const auto spec = mlp_spec_for(sc);
        f.input = spec.input;
        f.hidden = spec.hidden;
        f.output = spec.output;
    }
    f.observation_mode =
        sc.observation == ObservationMode::Partial ? "partial" : "full";
    f.normalize_observations = sc.normalize_observations;
    f.params = params;
    return f;
}

void check_policy_matches(const policy::PolicyFile& f,
                          const ScenarioConfig& sc) {
    const policy::PolicyFile want = policy_file_for(
        sc, Eigen::VectorXd::Zero(policy_param_count(sc)));
    if (f.arch != want.arch)
        throw ConfigError("policy file arch '" + f.arch +
                          "' does not match scenario law '" + want.arch + "'");
    if (f.input != want.input || f.output != want.output ||
        f.hidden != want.hidden)
        throw ConfigError("policy file layer shapes do not match the scenario");
    if (f.params.size() != want.params.size())
        throw ConfigError("policy file parameter count mismatch");
    if (f.observation_mode != want.observation_mode)
        throw ConfigError("policy file observation mode mismatch");
    if (f.normalize_observations != sc.normalize_observations)
        throw ConfigError("policy file normalization flag mismatch");
}

EvalStats evaluate_policy(const ScenarioConfig& sc,
                          const Eigen::VectorXd* params,
                          std::span<const std::uint64_t> seeds,
                          double window_s) {
    if (seeds.empty()) throw ConfigError("need at least one seed");
    EvalStats stats;
    stats.per_seed_velocity.reserve(seeds.size());
    stats.per_seed_return.reserve(seeds.size());

    for (std::uint64_t seed : seeds) {
        std::unique_ptr<NeuralDriver> driver;
        sim::AvDriver* d = nullptr;
        if (params != nullptr && sc.num_avs > 0) {
            driver = std::make_unique<NeuralDriver>(sc, *params);
            d = driver.get();
        }
        const sim::EpisodeLog log =
            sim::run_episode(sc, seed, d, sim::LogMode::Metrics);
        const double ret = env::episode_return(log, 1.0);
        const double vel = log.mean_velocity_final(window_s);
        stats.per_seed_return.push_back(ret);
        stats.per_seed_velocity.push_back(vel);
        if (log.collision) ++stats.collisions;
    }

    const double n = static_cast<double>(seeds.size());
    for (double r : stats.per_seed_return) stats.mean_return += r;
    stats.mean_return /= n;
    for (double v : stats.per_seed_velocity) stats.mean_final_velocity += v;
    stats.mean_final_velocity /= n;
    double ss = 0.0;
    for (double v : stats.per_seed_velocity) {
        const double d = v - stats.mean_final_velocity;
        ss += d * d;
    }
    stats.std_final_velocity = seeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return stats;
}

TrainResult train_policy(const ScenarioConfig& sc, const cem::CemConfig& cfg) {
    if (sc.num_avs <= 0)
        throw ConfigError("training requires a scenario with AVs");
    if (sc.av_law != ControlTag::Mlp && sc.av_law != ControlTag::Gru)
        throw ConfigError("training requires a learnable AV law (mlp or gru)");

    const ScenarioConfig train_sc = training_scenario(sc);
    const int dim = policy_param_count(train_sc);

    // Odd episode slots run with a long no-automation lead-in so candidates
    // are also scored on recovering from fully developed waves, not only on
    // keeping a young system smooth. Track lengths still vary per episode.
    const double gamma = cfg.gamma;
    const double base_warmup = train_sc.sim.warmup_duration;
    const double long_warmup = std::max(base_warmup, 300.0);
    auto fitness = [&train_sc, gamma, base_warmup, long_warmup](
                       const Eigen::VectorXd& params,
                       std::span<const std::uint64_t> seeds) {
        NeuralDriver driver(train_sc, params);
        double total = 0.0;
        for (std::size_t slot = 0; slot < seeds.size(); ++slot) {
            ScenarioConfig episode_sc = train_sc;
            episode_sc.sim.warmup_duration =
                slot % 2 == 0 ? base_warmup : long_warmup;
            const sim::EpisodeLog log = sim::run_episode(
                episode_sc, seeds[slot], &driver, sim::LogMode::Metrics);
            total += env::episode_return(log, gamma);
        }
        return total / static_cast<double>(seeds.size());
    };

    TrainResult res;
    res.cem = cem::train_cem(fitness, dim, cfg);

    // Candidate fitness is a 2-episode estimate, so the argmax candidate can
    // win on luck. Re-score the finalists (final distribution mean and best
    // candidate) on a held-out validation block and keep the winner.
    RandomStream val_rng(mix64(cfg.seed ^ 0x76616c6964ULL));
    std::vector<std::uint64_t> val_seeds(8);
    for (auto& s : val_seeds) s = val_rng.next_u64();
    const double f_mean = fitness(res.cem.mean, val_seeds);
    const double f_best = fitness(res.cem.best_params, val_seeds);
    res.params = f_mean >= f_best ? res.cem.mean : res.cem.best_params;
    return res;
}

void write_training_curve_csv(const cem::CemResult& res,
                              const std::string& path,
                              std::string_view tool_version,
                              std::string_view config_digest,
                              std::uint64_t seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "# trafficlab " << tool_version << "\n";
    out << "# config_digest=" << (config_digest.empty() ? "-" : config_digest)
        << " seed=" << seed << "\n";
    out << "iteration,fitness_mean,fitness_best,param_std_mean\n";
    for (const auto& row : res.curve) {
        out << row.iteration << ',' << format_g9(row.fitness_mean) << ','
            << format_g9(row.fitness_best) << ','
            << format_g9(row.param_std_mean) << '\n';
    }
}

}  // namespace traffic::train
