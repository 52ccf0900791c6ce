#include "trafficlab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "trafficlab/env.hpp"
#include "trafficlab/util.hpp"

namespace traffic::sim {

namespace {

// Right-of-way tuning. A vehicle commits to crossing once it can no longer
// stop kCommitMargin short of the interval; it is forced to brake against a
// locked zone with the larger margin so simultaneous commits on opposing
// arms stay rare.
constexpr double kApproachHorizon = 120.0;  // m
constexpr double kCommitMargin = 0.25;      // m
constexpr double kBrakeMargin = 2.0;        // m
constexpr double kStopMargin = 0.3;         // m

// The failsafe is evaluated against a slightly reduced gap so a follower
// closing on a stopped leader settles at a small positive separation
// instead of exact bumper contact (which the collision check rejects).
constexpr double kFailsafeStandoff = 0.5;  // m

// Distance covered until standstill under semi-implicit Euler braking at b:
// velocities v - k*b*dt for k = 1.. while positive, each held for dt.
double stopping_distance(double v, double b, double dt) {
    const double step_dv = b * dt;
    if (v <= step_dv) return 0.0;
    const double m = std::floor(v / step_dv);
    return m * v * dt - step_dv * dt * m * (m + 1.0) / 2.0;
}

bool has_claim(const WorldState& w, int vehicle_id) {
    for (const auto& c : w.zone_claims)
        if (c.vehicle == vehicle_id) return true;
    return false;
}

void right_of_way_apply(WorldState& w, const ScenarioConfig& sc,
                        std::vector<double>& accel) {
    const auto spec = sc.fig8();
    const double dt = sc.sim.dt;
    const double b = sc.sim.max_decel_failsafe;
    for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
        const VehicleState& veh = w.vehicles[i];
        if (has_claim(w, veh.id)) continue;
        const auto [arm, dist] = net::next_arm_ahead(veh.s, spec);
        if (dist > kApproachHorizon) continue;
        const double v1 =
            std::clamp(veh.v + accel[i] * dt, 0.0, sc.sim.max_speed);
        const double d1 = dist - v1 * dt;
        const int lock_arm = w.zone_claims.empty() ? -1 : w.zone_claims.front().arm;
        if (lock_arm != -1 && lock_arm != arm) {
            const bool must_brake =
                stopping_distance(v1, b, dt) > d1 - kBrakeMargin ||
                d1 <= kStopMargin;
            if (must_brake) accel[i] = -b;
        } else if (stopping_distance(v1, b, dt) > d1 - kCommitMargin) {
            w.zone_claims.push_back({veh.id, arm, w.step, false});
        }
    }
}

void right_of_way_update(WorldState& w, const ScenarioConfig& sc) {
    const auto spec = sc.fig8();
    const double dt = sc.sim.dt;
    const double b = sc.sim.max_decel_failsafe;
    auto veh_by_id = [&](int id) -> const VehicleState& {
        return w.vehicles[static_cast<std::size_t>(id)];  // ids are indices
    };
    for (auto it = w.zone_claims.begin(); it != w.zone_claims.end();) {
        const VehicleState& veh = veh_by_id(it->vehicle);
        const bool inside = net::body_overlaps(veh.s, veh.length,
                                               spec.arm(it->arm),
                                               spec.total_length);
        if (inside) {
            it->entered = true;
            ++it;
            continue;
        }
        if (it->entered) {
            it = w.zone_claims.erase(it);  // passed through
            continue;
        }
        // Committed but not yet inside: drop the claim if the vehicle can
        // stop short of the line again (it braked or never sped up).
        const auto [arm, dist] = net::next_arm_ahead(veh.s, spec);
        const bool still_committed =
            arm == it->arm &&
            stopping_distance(veh.v, b, dt) > dist - kCommitMargin;
        if (still_committed)
            ++it;
        else
            it = w.zone_claims.erase(it);
    }
    // Slow entries that never tripped the commit predicate.
    for (const VehicleState& veh : w.vehicles) {
        const int arm = net::in_conflict_zone(veh, spec);
        if (arm >= 0 && !has_claim(w, veh.id))
            w.zone_claims.push_back({veh.id, arm, w.step, true});
    }
}

void lane_change_step(WorldState& w, const ScenarioConfig& sc) {
    const double L = w.track_length;
    const auto& lc = sc.lane_change;
    std::vector<std::size_t> order(w.vehicles.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (w.vehicles[a].s != w.vehicles[b].s)
            return w.vehicles[a].s < w.vehicles[b].s;
        return w.vehicles[a].id < w.vehicles[b].id;
    });

    for (std::size_t idx : order) {
        VehicleState& veh = w.vehicles[idx];
        if (w.time - w.last_lane_change[idx] < lc.cooldown) continue;
        const int tgt = 1 - veh.lane;

        // Projected acceleration behind the current leader.
        const std::size_t cur_ld = net::leader_of(idx, w.vehicles, L);
        const double gap_cur = net::gap_to_leader(veh, w.vehicles[cur_ld], L);
        if (gap_cur <= 0.0) continue;
        const double a_cur = idm::idm_acceleration(
            {gap_cur, veh.v - w.vehicles[cur_ld].v, veh.v}, sc.idm);

        // Would-be neighbors in the target lane.
        int lead_t = -1, fol_t = -1;
        double lead_arc = L + 1.0, fol_arc = L + 1.0;
        for (std::size_t j = 0; j < w.vehicles.size(); ++j) {
            if (j == idx || w.vehicles[j].lane != tgt) continue;
            const double da = net::arc_ahead(veh.s, w.vehicles[j].s, L);
            if (da < lead_arc) {
                lead_arc = da;
                lead_t = static_cast<int>(j);
            }
            const double db = net::arc_ahead(w.vehicles[j].s, veh.s, L);
            if (db < fol_arc) {
                fol_arc = db;
                fol_t = static_cast<int>(j);
            }
        }

        double a_tgt;
        if (lead_t < 0) {
            a_tgt = idm::idm_acceleration({L - veh.length, 0.0, veh.v}, sc.idm);
        } else {
            const double gap_lead = lead_arc - w.vehicles[lead_t].length;
            if (gap_lead <= 0.0) continue;
            a_tgt = idm::idm_acceleration(
                {gap_lead, veh.v - w.vehicles[lead_t].v, veh.v}, sc.idm);
        }
        if (a_tgt - a_cur <= lc.delta_a_incentive) continue;

        if (fol_t >= 0) {
            const double gap_behind = fol_arc - veh.length;
            if (gap_behind <= 0.0) continue;
            const VehicleState& fol = w.vehicles[fol_t];
            const double a_fol = idm::idm_acceleration(
                {gap_behind, fol.v - veh.v, fol.v}, sc.idm);
            if (a_fol < -lc.b_safe) continue;
        }

        veh.lane = tgt;
        w.last_lane_change[idx] = w.time;
    }
}

bool detect_collision(const WorldState& w, Neighbors& scratch) {
    compute_neighbors(w, scratch);
    for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
        if (scratch.leader[i] == static_cast<int>(i)) continue;
        if (scratch.gap[i] <= 0.0) return true;
    }
    return false;
}

}  // namespace

void compute_neighbors(const WorldState& w, Neighbors& out) {
    // Sorted by (lane, s): within a lane the next entry is the vehicle with
    // the smallest positive arc ahead, i.e. the leader; the lane's last
    // entry wraps to its first. Identical to a pairwise smallest-arc scan
    // (positions are distinct per lane by invariant) at O(n log n).
    const std::size_t n = w.vehicles.size();
    out.leader.resize(n);
    out.gap.resize(n);
    out.v_lead.resize(n);
    out.order.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.order[i] = static_cast<int>(i);
    std::sort(out.order.begin(), out.order.end(), [&](int a, int b) {
        const VehicleState& va = w.vehicles[static_cast<std::size_t>(a)];
        const VehicleState& vb = w.vehicles[static_cast<std::size_t>(b)];
        if (va.lane != vb.lane) return va.lane < vb.lane;
        if (va.s != vb.s) return va.s < vb.s;
        return va.id < vb.id;
    });

    std::size_t lane_begin = 0;
    while (lane_begin < n) {
        const int lane =
            w.vehicles[static_cast<std::size_t>(out.order[lane_begin])].lane;
        std::size_t lane_end = lane_begin;
        while (lane_end < n &&
               w.vehicles[static_cast<std::size_t>(out.order[lane_end])].lane ==
                   lane)
            ++lane_end;
        for (std::size_t k = lane_begin; k < lane_end; ++k) {
            const std::size_t i =
                static_cast<std::size_t>(out.order[k]);
            const std::size_t next = k + 1 < lane_end ? k + 1 : lane_begin;
            const std::size_t ld = static_cast<std::size_t>(out.order[next]);
            out.leader[i] = static_cast<int>(ld);
            out.gap[i] = net::gap_to_leader(w.vehicles[i], w.vehicles[ld],
                                            w.track_length);
            out.v_lead[i] = w.vehicles[ld].v;
        }
        lane_begin = lane_end;
    }
}

long warmup_steps(const ScenarioConfig& sc) {
    return std::llround(sc.sim.warmup_duration / sc.sim.dt);
}

long total_steps(const ScenarioConfig& sc) {
    return std::llround((sc.sim.warmup_duration + sc.sim.horizon) / sc.sim.dt);
}

void step(WorldState& w, const ScenarioConfig& sc,
          std::span<const double> av_actions, StepOutcome& out) {
    const std::size_t n = w.vehicles.size();
    const double dt = sc.sim.dt;
    const bool warmup = w.step < warmup_steps(sc);

    static thread_local Neighbors nb;
    compute_neighbors(w, nb);

    static thread_local std::vector<double> accel;
    accel.resize(n);

    std::size_t av_slot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const VehicleState& veh = w.vehicles[i];
        const bool av_active = veh.is_av() && !warmup;
        if (!av_active) {
            double a = idm::idm_acceleration(
                {nb.gap[i], veh.v - nb.v_lead[i], veh.v}, sc.idm);
            a = idm::apply_acceleration_noise(a, w.noise_rng,
                                              sc.idm.noise_std);
            accel[i] = a;
            if (veh.is_av()) ++av_slot;  // keep action slots aligned
            continue;
        }
        double a = av_slot < av_actions.size() ? av_actions[av_slot] : 0.0;
        ++av_slot;
        // Learned/external actions respect the configured action bounds;
        // model-based laws arrive pre-bounded by their command adapter.
        if (veh.tag == ControlTag::Mlp || veh.tag == ControlTag::Gru ||
            veh.tag == ControlTag::External) {
            a = std::clamp(a, sc.sim.accel_min, sc.sim.accel_max);
        }
        const double v_safe = idm::safe_velocity_cap(
            std::max(nb.gap[i] - kFailsafeStandoff, 0.0), nb.v_lead[i],
            sc.sim.max_decel_failsafe, dt);
        const double v_allow = std::min(v_safe, sc.sim.max_speed);
        accel[i] = std::min(a, (v_allow - veh.v) / dt);
    }

    if (sc.network == NetworkType::FigureEight)
        right_of_way_apply(w, sc, accel);

    out.applied_accel.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        VehicleState& veh = w.vehicles[i];
        const double v_new =
            std::clamp(veh.v + accel[i] * dt, 0.0, sc.sim.max_speed);
        out.applied_accel[i] = (v_new - veh.v) / dt;
        veh.v = v_new;
        veh.s = net::wrap_position(veh.s + v_new * dt, w.track_length);
    }

    if (sc.network == NetworkType::FigureEight) right_of_way_update(w, sc);
    if (sc.network == NetworkType::TwoLaneRing) lane_change_step(w, sc);

    static thread_local Neighbors nb_post;
    out.collision = detect_collision(w, nb_post);
    if (out.collision) w.collided = true;

    ++w.step;
    w.time = static_cast<double>(w.step) * dt;
}

WorldState init_world(const ScenarioConfig& sc, std::uint64_t seed) {
    sc.validate();
    RngStreams streams(seed);

    WorldState w;
    double L = sc.length;
    if (sc.sample_train_length) {
        auto init_rng = streams.stream("init");
        L = init_rng.uniform(sc.train.length_range[0], sc.train.length_range[1]);
    }
    w.track_length = L;
    w.noise_rng = streams.stream("accel_noise");

    const int lanes = sc.num_lanes();
    const int per_lane = sc.num_vehicles / lanes;
    if (per_lane * lanes != sc.num_vehicles)
        throw ConfigError("num_vehicles must divide evenly across lanes");
    const double spacing = L / static_cast<double>(per_lane);
    if (spacing - sc.vehicle_length <= 0.0)
        throw ConfigError("infeasible spacing: track too short for the fleet");

    w.vehicles.resize(static_cast<std::size_t>(sc.num_vehicles));
    for (int lane = 0, id = 0; lane < lanes; ++lane) {
        for (int k = 0; k < per_lane; ++k, ++id) {
            VehicleState& veh = w.vehicles[static_cast<std::size_t>(id)];
            veh.id = id;
            veh.lane = lane;
            veh.s = net::wrap_position(static_cast<double>(k) * spacing, L);
            veh.v = 0.0;
            veh.length = sc.vehicle_length;
            veh.tag = id < sc.num_avs ? sc.av_law : ControlTag::Idm;
        }
    }
    w.last_lane_change.assign(w.vehicles.size(), -1e9);

    if (sc.network == NetworkType::FigureEight) {
        const auto spec = sc.fig8();
        for (const VehicleState& veh : w.vehicles) {
            const int arm = net::in_conflict_zone(veh, spec);
            if (arm >= 0) w.zone_claims.push_back({veh.id, arm, 0, true});
        }
    }
    return w;
}

namespace {

class ModelBasedDriver : public AvDriver {
public:
    void reset(const ScenarioConfig& sc) override {
        pi_states_.clear();
        pi_states_.reserve(static_cast<std::size_t>(sc.num_avs));
        for (int k = 0; k < sc.num_avs; ++k)
            pi_states_.emplace_back(sc.pi_saturation.window);
    }

    void actions(const WorldState& w, const ScenarioConfig& sc,
                 std::span<double> out) override {
        compute_neighbors(w, nb_);
        std::size_t slot = 0;
        for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
            const VehicleState& veh = w.vehicles[i];
            if (!veh.is_av()) continue;
            double v_cmd = 0.0;
            double lo = -4.5, hi = 1.0;
            if (veh.tag == ControlTag::FollowerStopper) {
                const auto& p = sc.follower_stopper;
                v_cmd = ctrl::follower_stopper_cmd(veh.v, nb_.v_lead[i],
                                                   nb_.gap[i], p);
                lo = p.cmd_accel_min;
                hi = p.cmd_accel_max;
            } else if (veh.tag == ControlTag::PiSaturation) {
                const auto& p = sc.pi_saturation;
                v_cmd = ctrl::pi_saturation_cmd(pi_states_[slot], veh.v,
                                                nb_.v_lead[i], nb_.gap[i], p);
                lo = p.cmd_accel_min;
                hi = p.cmd_accel_max;
            }
            out[slot] =
                ctrl::cmd_velocity_to_accel(v_cmd, veh.v, sc.sim.dt, lo, hi);
            ++slot;
        }
    }

private:
    Neighbors nb_;
    std::vector<ctrl::PiSaturationState> pi_states_;
};

}  // namespace

std::unique_ptr<AvDriver> make_model_based_driver(const ScenarioConfig&) {
    return std::make_unique<ModelBasedDriver>();
}

EpisodeLog run_episode(const ScenarioConfig& sc, std::uint64_t seed,
                       AvDriver* driver, LogMode mode) {
    WorldState w = init_world(sc, seed);

    std::unique_ptr<AvDriver> owned;
    if (driver == nullptr && sc.num_avs > 0) {
        if (sc.av_law == ControlTag::FollowerStopper ||
            sc.av_law == ControlTag::PiSaturation) {
            owned = make_model_based_driver(sc);
            driver = owned.get();
        } else {
            throw ConfigError(
                "scenario AV law needs an externally supplied driver");
        }
    }
    if (driver != nullptr) driver->reset(sc);

    const long n_warm = warmup_steps(sc);
    const long n_total = total_steps(sc);
    const std::size_t n = w.vehicles.size();

    EpisodeLog log;
    log.scenario_name = sc.name;
    log.seed = seed;
    log.dt = sc.sim.dt;
    log.num_vehicles = sc.num_vehicles;
    log.warmup = n_warm;
    log.planned_steps = n_total;
    log.track_length = w.track_length;
    log.reward.reserve(static_cast<std::size_t>(n_total));
    log.fleet_sum_v.reserve(static_cast<std::size_t>(n_total));
    log.fleet_sumsq_v.reserve(static_cast<std::size_t>(n_total));
    log.fleet_min_v.reserve(static_cast<std::size_t>(n_total));
    if (mode == LogMode::Full)
        log.rows.reserve(static_cast<std::size_t>(n_total) * n);

    std::vector<double> actions(static_cast<std::size_t>(sc.num_avs), 0.0);
    std::vector<double> av_applied(static_cast<std::size_t>(sc.num_avs), 0.0);
    StepOutcome out;

    for (long k = 0; k < n_total; ++k) {
        const bool warm = k < n_warm;
        if (!warm && driver != nullptr && sc.num_avs > 0)
            driver->actions(w, sc, actions);
        step(w, sc, warm ? std::span<const double>{} : actions, out);

        std::size_t slot = 0;
        double sum = 0.0, sumsq = 0.0, vmin = 1e300;
        for (std::size_t i = 0; i < n; ++i) {
            const VehicleState& veh = w.vehicles[i];
            sum += veh.v;
            sumsq += veh.v * veh.v;
            vmin = std::min(vmin, veh.v);
            if (veh.is_av()) av_applied[slot++] = out.applied_accel[i];
        }
        log.fleet_sum_v.push_back(sum);
        log.fleet_sumsq_v.push_back(sumsq);
        log.fleet_min_v.push_back(vmin);
        log.reward.push_back(
            env::reward(w, av_applied, sc.reward, out.collision));

        if (mode == LogMode::Full) {
            for (std::size_t i = 0; i < n; ++i) {
                const VehicleState& veh = w.vehicles[i];
                log.rows.push_back({k, w.time, veh.id, veh.lane, veh.s, veh.v,
                                    out.applied_accel[i], veh.tag});
            }
        }
        ++log.executed_steps;
        if (out.collision) {
            log.collision = true;
            log.collision_step = k;
            break;
        }
    }
    return log;
}

namespace {

long final_window_steps(const EpisodeLog& log, double window_s) {
    const long w = std::llround(window_s / log.dt);
    return std::min<long>(w, log.executed_steps);
}

}  // namespace

double EpisodeLog::mean_velocity_final(double window_s) const {
    const long w = final_window_steps(*this, window_s);
    if (w <= 0) return 0.0;
    double sum = 0.0;
    for (long k = executed_steps - w; k < executed_steps; ++k)
        sum += fleet_sum_v[static_cast<std::size_t>(k)];
    return sum / (static_cast<double>(w) * num_vehicles);
}

double EpisodeLog::velocity_std_final(double window_s) const {
    // Spread of instantaneous vehicle velocities across the fleet (the
    // stop-and-go signature), time-averaged over the window. A uniformly
    // accelerating fleet reports ~0 here even though velocities change.
    const long w = final_window_steps(*this, window_s);
    if (w <= 0) return 0.0;
    const double n = num_vehicles;
    double var_sum = 0.0;
    for (long k = executed_steps - w; k < executed_steps; ++k) {
        const double mean = fleet_sum_v[static_cast<std::size_t>(k)] / n;
        const double var =
            fleet_sumsq_v[static_cast<std::size_t>(k)] / n - mean * mean;
        var_sum += std::max(0.0, var);
    }
    return std::sqrt(var_sum / static_cast<double>(w));
}

double EpisodeLog::min_velocity_final(double window_s) const {
    const long w = final_window_steps(*this, window_s);
    if (w <= 0) return 0.0;
    double vmin = 1e300;
    for (long k = executed_steps - w; k < executed_steps; ++k)
        vmin = std::min(vmin, fleet_min_v[static_cast<std::size_t>(k)]);
    return vmin;
}

void write_episode_csv(const EpisodeLog& log, const std::string& path,
                       std::string_view tool_version) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "# trafficlab " << tool_version << "\n";
    out << "# scenario=" << log.scenario_name
        << " config_digest=" << (log.config_digest.empty() ? "-" : log.config_digest)
        << " seed=" << log.seed << "\n";
    out << "step,time,vehicle_id,lane,position,velocity,acceleration,tag\n";
    for (const auto& r : log.rows) {
        out << r.step << ',' << format_g9(r.time) << ',' << r.vehicle_id << ','
            << r.lane << ',' << format_g9(r.position) << ','
            << format_g9(r.velocity) << ',' << format_g9(r.acceleration) << ','
            << to_string(r.tag) << '\n';
    }
}

}  // namespace traffic::sim
