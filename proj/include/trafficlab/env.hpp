#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>

#include "trafficlab/engine.hpp"
#include "trafficlab/scenario.hpp"

namespace traffic::env {

/// Observation vector sizes for the scenario's observation mode. Partial:
/// exactly (v_av, v_lead - v_av, gap) per AV; full: (position, velocity
/// [, lane]) for every vehicle in fixed id order.
int observation_size(const ScenarioConfig& sc);
int action_size(const ScenarioConfig& sc);

/// Per-AV partial observation (raw SI, optionally normalized by v0, v0 and
/// the track length).
Eigen::VectorXd observe_av(const sim::WorldState& w, const ScenarioConfig& sc,
                           int av_index);

/// Scenario-level observation: partial mode returns the AV-0 observation,
/// full mode the concatenated fleet state.
Eigen::VectorXd observe(const sim::WorldState& w, const ScenarioConfig& sc);

/// Step reward: mean fleet velocity minus w_accel times the mean squared AV
/// acceleration, plus the collision penalty when flagged.
double reward(const sim::WorldState& w, std::span<const double> av_applied,
              const RewardConfig& cfg, bool collision);

/// Discounted return over the post-warmup steps; gamma = 1 gives the plain
/// sum used as training fitness.
double episode_return(const sim::EpisodeLog& log, double gamma);

/// In-process POMDP interface around the engine: reset/step/size queries.
/// Actions are accelerations, one per AV, ignored during warmup.
class Environment {
public:
    explicit Environment(ScenarioConfig sc);

    struct StepResult {
        Eigen::VectorXd obs;
        double reward = 0.0;
        bool done = false;
        bool collision = false;
    };

    Eigen::VectorXd reset(std::uint64_t seed);
    StepResult step(std::span<const double> av_accels);

    int observation_size() const { return env::observation_size(sc_); }
    int action_size() const { return env::action_size(sc_); }
    bool in_warmup() const { return world_.step < sim::warmup_steps(sc_); }
    const sim::WorldState& world() const { return world_; }
    const ScenarioConfig& scenario() const { return sc_; }

private:
    ScenarioConfig sc_;
    sim::WorldState world_;
    sim::StepOutcome out_;
    std::vector<double> av_applied_;
    long planned_steps_ = 0;
    bool done_ = true;
};

}  // namespace traffic::env
