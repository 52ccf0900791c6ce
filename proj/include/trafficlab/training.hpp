#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "trafficlab/cem.hpp"
#include "trafficlab/engine.hpp"
#include "trafficlab/env.hpp"
#include "trafficlab/policy.hpp"

namespace traffic::train {

/// Drives the scenario's AVs with a neural policy in deterministic mode.
/// Partial observation: one shared policy applied per AV with per-AV
/// observations (and per-AV hidden state for the GRU). Full observation: one
/// centralized policy emitting all AV accelerations.
class NeuralDriver : public sim::AvDriver {
public:
    NeuralDriver(const ScenarioConfig& sc, const Eigen::VectorXd& params);

    void reset(const ScenarioConfig& sc) override;
    void actions(const sim::WorldState& w, const ScenarioConfig& sc,
                 std::span<double> out) override;

private:
    bool centralized_;
    bool gru_;
    std::unique_ptr<policy::MlpPolicy> mlp_;
    std::unique_ptr<policy::GruPolicy> gru_policy_;        // centralized
    std::vector<policy::GruPolicy> gru_per_av_;            // partial mode
};

/// Architecture implied by the scenario (observation mode, AV count,
/// configured hidden sizes).
policy::MlpSpec mlp_spec_for(const ScenarioConfig& sc);
policy::GruSpec gru_spec_for(const ScenarioConfig& sc);
int policy_param_count(const ScenarioConfig& sc);

policy::PolicyFile policy_file_for(const ScenarioConfig& sc,
                                   const Eigen::VectorXd& params);

/// Checks a loaded policy file against the scenario's declared architecture.
void check_policy_matches(const policy::PolicyFile& f, const ScenarioConfig& sc);

struct EvalStats {
    double mean_return = 0.0;             // undiscounted post-warmup return
    double mean_final_velocity = 0.0;     // fleet mean over the final 100 s
    double std_final_velocity = 0.0;      // across seeds
    int collisions = 0;
    std::vector<double> per_seed_velocity;
    std::vector<double> per_seed_return;
};

/// Deterministic rollouts of a policy (or of the scenario's model-based law
/// when params is null) over the given seeds.
EvalStats evaluate_policy(const ScenarioConfig& sc,
                          const Eigen::VectorXd* params,
                          std::span<const std::uint64_t> seeds,
                          double window_s = 100.0);

struct TrainResult {
    Eigen::VectorXd params;  // best-seen candidate
    cem::CemResult cem;
};

/// CEM over the policy parameters. Fitness is the mean undiscounted
/// post-warmup return over episodes-per-candidate training episodes; track
/// lengths are sampled per episode from the train range when the scenario
/// says so.
TrainResult train_policy(const ScenarioConfig& sc, const cem::CemConfig& cfg);

void write_training_curve_csv(const cem::CemResult& res,
                              const std::string& path,
                              std::string_view tool_version,
                              std::string_view config_digest,
                              std::uint64_t seed);

}  // namespace traffic::train
