#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "trafficlab/controllers.hpp"
#include "trafficlab/idm.hpp"
#include "trafficlab/network.hpp"
#include "trafficlab/vehicle.hpp"

namespace traffic {

enum class NetworkType { Ring, TwoLaneRing, FigureEight };
enum class ObservationMode { Partial, Full };

struct SimConfig {
    double dt = 0.1;                 // s/step
    double warmup_duration = 75.0;   // s, AV overridden by IDM
    double horizon = 300.0;          // s of controlled time
    double accel_min = -1.0;         // bounds for learned/external AV actions
    double accel_max = 1.0;
    double max_decel_failsafe = 4.5;  // m/s^2
    double max_speed = 30.0;          // hard cap on integrated velocity
};

struct RewardConfig {
    double w_accel = 1.0;              // weight on the control cost
    double collision_penalty = -100.0;
};

struct LaneChangeParams {
    double delta_a_incentive = 0.1;  // m/s^2 advantage required to change
    double b_safe = 2.0;             // max deceleration forced on new follower
    double cooldown = 3.0;           // s between changes of one vehicle
};

struct TrainConfig {
    std::array<double, 2> length_range{220.0, 270.0};
    bool sample_length = true;       // draw a fresh track length per episode
    double warmup_duration = 75.0;   // training-episode warmup
};

/// Full description of one traffic scenario: network, fleet, control laws,
/// stepping, observation and reward. Round-trips losslessly through JSON.
struct ScenarioConfig {
    std::string name = "custom";
    NetworkType network = NetworkType::Ring;
    double length = 230.0;  // route length in m (figure-eight: total length)
    double conflict_zone_length = 10.0;  // figure-eight, per crossing arm
    double loop_radius = 30.0;           // figure-eight, informational
    int num_vehicles = 22;
    int num_avs = 0;
    ControlTag av_law = ControlTag::Idm;
    double vehicle_length = 5.0;
    idm::IdmParams idm;
    ctrl::FollowerStopperParams follower_stopper;
    ctrl::PiSaturationParams pi_saturation;
    SimConfig sim;
    LaneChangeParams lane_change;
    RewardConfig reward;
    ObservationMode observation = ObservationMode::Partial;
    bool normalize_observations = false;
    TrainConfig train;
    std::array<double, 2> test_length_range{210.0, 290.0};
    std::vector<int> policy_hidden{3, 3};  // MLP hidden sizes; GRU width = [0]

    // Effective switch: when true, init draws the track length uniformly
    // from train.length_range instead of using `length`.
    bool sample_train_length = false;

    int num_lanes() const { return network == NetworkType::TwoLaneRing ? 2 : 1; }

    net::FigureEightSpec fig8() const {
        return {loop_radius, length, conflict_zone_length};
    }

    /// Throws ConfigError when any invariant is violated.
    void validate() const;
};

/// Scenario with training-time episode settings applied (warmup and track
/// length sampling from TrainConfig).
ScenarioConfig training_scenario(const ScenarioConfig& sc);

/// Named scenario recipes, one per benchmark experiment.
std::vector<std::string> recipe_names();
ScenarioConfig recipe(const std::string& name);

std::string to_string(NetworkType t);
std::string to_string(ObservationMode m);
std::string control_tag_name(ControlTag t);
ControlTag control_tag_from(const std::string& s);

/// Strict JSON round-trip: unknown keys are hard errors. The second form
/// applies a partial scenario object on top of `base` (recipe overrides).
std::string scenario_to_json(const ScenarioConfig& sc);
ScenarioConfig scenario_from_json(const std::string& json_text);
ScenarioConfig scenario_from_json(const std::string& json_text,
                                  ScenarioConfig base);

}  // namespace traffic
