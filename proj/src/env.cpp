#include "trafficlab/env.hpp"

#include <cmath>

#include "trafficlab/util.hpp"

namespace traffic::env {

int observation_size(const ScenarioConfig& sc) {
    if (sc.observation == ObservationMode::Partial) return 3;
    const int per_vehicle = sc.network == NetworkType::TwoLaneRing ? 3 : 2;
    return per_vehicle * sc.num_vehicles;
}

int action_size(const ScenarioConfig& sc) { return std::max(sc.num_avs, 1); }

Eigen::VectorXd observe_av(const sim::WorldState& w, const ScenarioConfig& sc,
                           int av_index) {
    const std::size_t i = static_cast<std::size_t>(av_index);
    const std::size_t ld = net::leader_of(i, w.vehicles, w.track_length);
    const VehicleState& veh = w.vehicles[i];
    const double gap =
        net::gap_to_leader(veh, w.vehicles[ld], w.track_length);
    Eigen::VectorXd obs(3);
    obs << veh.v, w.vehicles[ld].v - veh.v, gap;
    if (sc.normalize_observations) {
        obs[0] /= sc.idm.v0;
        obs[1] /= sc.idm.v0;
        obs[2] /= w.track_length;
    }
    return obs;
}

Eigen::VectorXd observe(const sim::WorldState& w, const ScenarioConfig& sc) {
    if (sc.observation == ObservationMode::Partial) return observe_av(w, sc, 0);
    const int per_vehicle = sc.network == NetworkType::TwoLaneRing ? 3 : 2;
    Eigen::VectorXd obs(per_vehicle * sc.num_vehicles);
    const double ps = sc.normalize_observations ? 1.0 / w.track_length : 1.0;
    const double vs = sc.normalize_observations ? 1.0 / sc.idm.v0 : 1.0;
    for (int i = 0; i < sc.num_vehicles; ++i) {
        const VehicleState& veh = w.vehicles[static_cast<std::size_t>(i)];
        obs[per_vehicle * i] = veh.s * ps;
        obs[per_vehicle * i + 1] = veh.v * vs;
        if (per_vehicle == 3) obs[per_vehicle * i + 2] = veh.lane;
    }
    return obs;
}

double reward(const sim::WorldState& w, std::span<const double> av_applied,
              const RewardConfig& cfg, bool collision) {
    double mean_v = 0.0;
    for (const VehicleState& veh : w.vehicles) mean_v += veh.v;
    mean_v /= static_cast<double>(w.vehicles.size());

    double cost = 0.0;
    if (!av_applied.empty()) {
        for (double a : av_applied) cost += a * a;
        cost /= static_cast<double>(av_applied.size());
    }
    double r = mean_v - cfg.w_accel * cost;
    if (collision) r += cfg.collision_penalty;
    return r;
}

double episode_return(const sim::EpisodeLog& log, double gamma) {
    double total = 0.0;
    double g = 1.0;
    for (long k = log.warmup; k < log.executed_steps; ++k) {
        total += g * log.reward[static_cast<std::size_t>(k)];
        g *= gamma;
    }
    return total;
}

Environment::Environment(ScenarioConfig sc) : sc_(std::move(sc)) {
    sc_.validate();
    planned_steps_ = sim::total_steps(sc_);
}

Eigen::VectorXd Environment::reset(std::uint64_t seed) {
    world_ = sim::init_world(sc_, seed);
    av_applied_.assign(static_cast<std::size_t>(sc_.num_avs), 0.0);
    done_ = false;
    return observe(world_, sc_);
}

Environment::StepResult Environment::step(std::span<const double> av_accels) {
    if (done_) throw std::logic_error("step() after episode end; call reset()");
    const bool warm = in_warmup();
    sim::step(world_, sc_, warm ? std::span<const double>{} : av_accels, out_);

    std::size_t slot = 0;
    for (std::size_t i = 0; i < world_.vehicles.size(); ++i)
        if (world_.vehicles[i].is_av()) av_applied_[slot++] = out_.applied_accel[i];

    StepResult res;
    res.collision = out_.collision;
    res.reward = reward(world_, av_applied_, sc_.reward, out_.collision);
    res.done = out_.collision || world_.step >= planned_steps_;
    res.obs = observe(world_, sc_);
    done_ = res.done;
    return res;
}

}  // namespace traffic::env
