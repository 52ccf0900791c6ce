#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trafficlab/rng.hpp"
#include "trafficlab/scenario.hpp"
#include "trafficlab/vehicle.hpp"

namespace traffic::sim {

/// Figure-eight right-of-way bookkeeping. A claim is taken either when a
/// vehicle passes its point of no return before a conflict interval or when
/// it physically enters one; claim order is the FCFS priority.
struct ZoneClaim {
    int vehicle;
    int arm;
    long step;
    bool entered;
};

struct WorldState {
    double time = 0.0;
    long step = 0;
    double track_length = 0.0;
    std::vector<VehicleState> vehicles;
    RandomStream noise_rng{0};  // acceleration-noise stream
    std::vector<ZoneClaim> zone_claims;
    std::vector<double> last_lane_change;  // per vehicle, for the cooldown
    bool collided = false;

    /// Vehicle id currently holding the conflict zone, if any.
    std::optional<int> conflict_lock() const {
        if (zone_claims.empty()) return std::nullopt;
        return zone_claims.front().vehicle;
    }
};

/// Same-lane leader, gap and leader velocity per vehicle, computed from one
/// synchronous snapshot.
struct Neighbors {
    std::vector<int> leader;
    std::vector<double> gap;
    std::vector<double> v_lead;
    std::vector<int> order;  // scratch: vehicles sorted by (lane, s)
};

void compute_neighbors(const WorldState& w, Neighbors& out);

/// Supplies accelerations for the AVs (vehicle-id order) from the time-t
/// world. Stateful control laws keep their memory in the driver.
class AvDriver {
public:
    virtual ~AvDriver() = default;
    virtual void reset(const ScenarioConfig&) {}
    virtual void actions(const WorldState& w, const ScenarioConfig& sc,
                         std::span<double> out) = 0;
};

struct StepOutcome {
    std::vector<double> applied_accel;  // per vehicle, (v_new - v_old)/dt
    bool collision = false;
};

long warmup_steps(const ScenarioConfig& sc);
long total_steps(const ScenarioConfig& sc);

/// One synchronous step. All accelerations are computed from the state at
/// time t before anything moves: humans (and warmup-overridden AVs) follow
/// IDM plus noise; post-warmup AV actions are clipped to the action bounds
/// (learned/external laws) and capped so the post-step velocity stays below
/// the failsafe. Right-of-way overrides, then semi-implicit Euler
/// integration, lane changes and the collision check.
void step(WorldState& w, const ScenarioConfig& sc,
          std::span<const double> av_actions, StepOutcome& out);

/// Evenly spaced fleet at velocity 0; AVs are vehicles 0..num_avs-1. Draws
/// the track length from the train range when sample_train_length is set.
WorldState init_world(const ScenarioConfig& sc, std::uint64_t seed);

enum class LogMode { Metrics, Full };

/// Per-step trajectory record. Rows hold the post-step state together with
/// the acceleration applied during that step; row k has time (k+1)*dt.
struct EpisodeLog {
    struct Row {
        long step;
        double time;
        int vehicle_id;
        int lane;
        double position;
        double velocity;
        double acceleration;
        ControlTag tag;
    };

    std::string scenario_name;
    std::string config_digest;
    std::uint64_t seed = 0;
    double dt = 0.1;
    int num_vehicles = 0;
    long warmup = 0;         // steps
    long planned_steps = 0;  // warmup + horizon
    long executed_steps = 0;
    double track_length = 0.0;

    std::vector<double> reward;        // per executed step
    std::vector<double> fleet_sum_v;   // per step: sum of velocities
    std::vector<double> fleet_sumsq_v;
    std::vector<double> fleet_min_v;
    std::vector<Row> rows;  // LogMode::Full only; step-major, id ascending

    bool collision = false;
    long collision_step = -1;

    double mean_velocity_final(double window_s) const;
    double velocity_std_final(double window_s) const;
    double min_velocity_final(double window_s) const;
};

/// Runs warmup + horizon from an evenly spaced standstill. During warmup the
/// AVs are overridden by IDM so waves form; afterwards `driver` supplies
/// their accelerations. A null driver is allowed for scenarios without AVs
/// or with a model-based AV law (one is constructed internally). Collisions
/// terminate the episode with a partial log.
EpisodeLog run_episode(const ScenarioConfig& sc, std::uint64_t seed,
                       AvDriver* driver, LogMode mode);

std::unique_ptr<AvDriver> make_model_based_driver(const ScenarioConfig& sc);

/// CSV schema: `step,time,vehicle_id,lane,position,velocity,acceleration,tag`
/// with 9-significant-digit floats; commented metadata lines first.
void write_episode_csv(const EpisodeLog& log, const std::string& path,
                       std::string_view tool_version);

}  // namespace traffic::sim
