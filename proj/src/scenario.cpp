#include "trafficlab/scenario.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "trafficlab/util.hpp"

namespace traffic {

using nlohmann::json;

std::string_view to_string(ControlTag tag) {
    switch (tag) {
        case ControlTag::Idm: return "idm";
        case ControlTag::FollowerStopper: return "follower_stopper";
        case ControlTag::PiSaturation: return "pi_saturation";
        case ControlTag::Mlp: return "mlp";
        case ControlTag::Gru: return "gru";
        case ControlTag::External: return "external";
    }
    return "idm";
}

std::string control_tag_name(ControlTag t) { return std::string(to_string(t)); }

ControlTag control_tag_from(const std::string& s) {
    if (s == "idm") return ControlTag::Idm;
    if (s == "follower_stopper") return ControlTag::FollowerStopper;
    if (s == "pi_saturation") return ControlTag::PiSaturation;
    if (s == "mlp") return ControlTag::Mlp;
    if (s == "gru") return ControlTag::Gru;
    if (s == "external") return ControlTag::External;
    throw ConfigError("unknown control law: " + s);
}

std::string to_string(NetworkType t) {
    switch (t) {
        case NetworkType::Ring: return "ring";
        case NetworkType::TwoLaneRing: return "two_lane_ring";
        case NetworkType::FigureEight: return "figure_eight";
    }
    return "ring";
}

std::string to_string(ObservationMode m) {
    return m == ObservationMode::Partial ? "partial" : "full";
}

namespace {

NetworkType network_from(const std::string& s) {
    if (s == "ring") return NetworkType::Ring;
    if (s == "two_lane_ring") return NetworkType::TwoLaneRing;
    if (s == "figure_eight") return NetworkType::FigureEight;
    throw ConfigError("unknown network type: " + s);
}

ObservationMode observation_from(const std::string& s) {
    if (s == "partial") return ObservationMode::Partial;
    if (s == "full") return ObservationMode::Full;
    throw ConfigError("unknown observation mode: " + s);
}

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

void get_pair(const json& j, const char* key, std::array<double, 2>& out,
              const std::string& ctx) {
    if (!j.contains(key)) return;
    std::vector<double> v;
    get_to(j, key, v, ctx);
    if (v.size() != 2)
        throw ConfigError("'" + std::string(key) + "' in " + ctx +
                          " must have exactly 2 entries");
    out = {v[0], v[1]};
}

void get_triple(const json& j, const char* key, std::array<double, 3>& out,
                const std::string& ctx) {
    if (!j.contains(key)) return;
    std::vector<double> v;
    get_to(j, key, v, ctx);
    if (v.size() != 3)
        throw ConfigError("'" + std::string(key) + "' in " + ctx +
                          " must have exactly 3 entries");
    out = {v[0], v[1], v[2]};
}

void apply_scenario(const json& j, ScenarioConfig& sc) {
    require_keys(j, "scenario",
                 {"name", "network", "num_vehicles", "num_avs", "av_law",
                  "vehicle_length", "idm", "follower_stopper", "pi_saturation",
                  "sim", "lane_change", "reward", "observation", "train",
                  "test_length_range", "policy_hidden"});

    get_to(j, "name", sc.name, "scenario");
    if (j.contains("network")) {
        const json& n = j.at("network");
        require_keys(n, "scenario.network",
                     {"type", "length", "conflict_zone_length", "loop_radius"});
        if (n.contains("type"))
            sc.network = network_from(n.at("type").get<std::string>());
        get_to(n, "length", sc.length, "scenario.network");
        get_to(n, "conflict_zone_length", sc.conflict_zone_length,
               "scenario.network");
        get_to(n, "loop_radius", sc.loop_radius, "scenario.network");
    }
    get_to(j, "num_vehicles", sc.num_vehicles, "scenario");
    get_to(j, "num_avs", sc.num_avs, "scenario");
    if (j.contains("av_law"))
        sc.av_law = control_tag_from(j.at("av_law").get<std::string>());
    get_to(j, "vehicle_length", sc.vehicle_length, "scenario");

    if (j.contains("idm")) {
        const json& n = j.at("idm");
        require_keys(n, "scenario.idm",
                     {"v0", "T", "a_max", "b_comf", "delta", "s0", "noise_std"});
        get_to(n, "v0", sc.idm.v0, "scenario.idm");
        get_to(n, "T", sc.idm.T, "scenario.idm");
        get_to(n, "a_max", sc.idm.a_max, "scenario.idm");
        get_to(n, "b_comf", sc.idm.b_comf, "scenario.idm");
        get_to(n, "delta", sc.idm.delta, "scenario.idm");
        get_to(n, "s0", sc.idm.s0, "scenario.idm");
        get_to(n, "noise_std", sc.idm.noise_std, "scenario.idm");
    }
    if (j.contains("follower_stopper")) {
        const json& n = j.at("follower_stopper");
        require_keys(n, "scenario.follower_stopper",
                     {"dx0", "decel", "u_des", "cmd_accel_min", "cmd_accel_max"});
        get_triple(n, "dx0", sc.follower_stopper.dx0, "scenario.follower_stopper");
        get_triple(n, "decel", sc.follower_stopper.decel,
                   "scenario.follower_stopper");
        get_to(n, "u_des", sc.follower_stopper.u_des, "scenario.follower_stopper");
        get_to(n, "cmd_accel_min", sc.follower_stopper.cmd_accel_min,
               "scenario.follower_stopper");
        get_to(n, "cmd_accel_max", sc.follower_stopper.cmd_accel_max,
               "scenario.follower_stopper");
    }
    if (j.contains("pi_saturation")) {
        const json& n = j.at("pi_saturation");
        require_keys(n, "scenario.pi_saturation",
                     {"delta_s", "g_l", "g_u", "v_catch", "window", "alpha_ramp",
                      "cmd_accel_min", "cmd_accel_max"});
        get_to(n, "delta_s", sc.pi_saturation.delta_s, "scenario.pi_saturation");
        get_to(n, "g_l", sc.pi_saturation.g_l, "scenario.pi_saturation");
        get_to(n, "g_u", sc.pi_saturation.g_u, "scenario.pi_saturation");
        get_to(n, "v_catch", sc.pi_saturation.v_catch, "scenario.pi_saturation");
        get_to(n, "window", sc.pi_saturation.window, "scenario.pi_saturation");
        get_to(n, "alpha_ramp", sc.pi_saturation.alpha_ramp,
               "scenario.pi_saturation");
        get_to(n, "cmd_accel_min", sc.pi_saturation.cmd_accel_min,
               "scenario.pi_saturation");
        get_to(n, "cmd_accel_max", sc.pi_saturation.cmd_accel_max,
               "scenario.pi_saturation");
    }
    if (j.contains("sim")) {
        const json& n = j.at("sim");
        require_keys(n, "scenario.sim",
                     {"dt", "warmup_duration", "horizon", "accel_min",
                      "accel_max", "max_decel_failsafe", "max_speed"});
        get_to(n, "dt", sc.sim.dt, "scenario.sim");
        get_to(n, "warmup_duration", sc.sim.warmup_duration, "scenario.sim");
        get_to(n, "horizon", sc.sim.horizon, "scenario.sim");
        get_to(n, "accel_min", sc.sim.accel_min, "scenario.sim");
        get_to(n, "accel_max", sc.sim.accel_max, "scenario.sim");
        get_to(n, "max_decel_failsafe", sc.sim.max_decel_failsafe,
               "scenario.sim");
        get_to(n, "max_speed", sc.sim.max_speed, "scenario.sim");
    }
    if (j.contains("lane_change")) {
        const json& n = j.at("lane_change");
        require_keys(n, "scenario.lane_change",
                     {"delta_a_incentive", "b_safe", "cooldown"});
        get_to(n, "delta_a_incentive", sc.lane_change.delta_a_incentive,
               "scenario.lane_change");
        get_to(n, "b_safe", sc.lane_change.b_safe, "scenario.lane_change");
        get_to(n, "cooldown", sc.lane_change.cooldown, "scenario.lane_change");
    }
    if (j.contains("reward")) {
        const json& n = j.at("reward");
        require_keys(n, "scenario.reward", {"w_accel", "collision_penalty"});
        get_to(n, "w_accel", sc.reward.w_accel, "scenario.reward");
        get_to(n, "collision_penalty", sc.reward.collision_penalty,
               "scenario.reward");
    }
    if (j.contains("observation")) {
        const json& n = j.at("observation");
        require_keys(n, "scenario.observation", {"mode", "normalize"});
        if (n.contains("mode"))
            sc.observation = observation_from(n.at("mode").get<std::string>());
        get_to(n, "normalize", sc.normalize_observations,
               "scenario.observation");
    }
    if (j.contains("train")) {
        const json& n = j.at("train");
        require_keys(n, "scenario.train",
                     {"length_range", "sample_length", "warmup_duration"});
        get_pair(n, "length_range", sc.train.length_range, "scenario.train");
        get_to(n, "sample_length", sc.train.sample_length, "scenario.train");
        get_to(n, "warmup_duration", sc.train.warmup_duration, "scenario.train");
    }
    get_pair(j, "test_length_range", sc.test_length_range, "scenario");
    get_to(j, "policy_hidden", sc.policy_hidden, "scenario");
}

json scenario_to_json_obj(const ScenarioConfig& sc) {
    json j;
    j["name"] = sc.name;
    j["network"] = {{"type", to_string(sc.network)},
                    {"length", sc.length},
                    {"conflict_zone_length", sc.conflict_zone_length},
                    {"loop_radius", sc.loop_radius}};
    j["num_vehicles"] = sc.num_vehicles;
    j["num_avs"] = sc.num_avs;
    j["av_law"] = control_tag_name(sc.av_law);
    j["vehicle_length"] = sc.vehicle_length;
    j["idm"] = {{"v0", sc.idm.v0},         {"T", sc.idm.T},
                {"a_max", sc.idm.a_max},   {"b_comf", sc.idm.b_comf},
                {"delta", sc.idm.delta},   {"s0", sc.idm.s0},
                {"noise_std", sc.idm.noise_std}};
    j["follower_stopper"] = {
        {"dx0", sc.follower_stopper.dx0},
        {"decel", sc.follower_stopper.decel},
        {"u_des", sc.follower_stopper.u_des},
        {"cmd_accel_min", sc.follower_stopper.cmd_accel_min},
        {"cmd_accel_max", sc.follower_stopper.cmd_accel_max}};
    j["pi_saturation"] = {{"delta_s", sc.pi_saturation.delta_s},
                          {"g_l", sc.pi_saturation.g_l},
                          {"g_u", sc.pi_saturation.g_u},
                          {"v_catch", sc.pi_saturation.v_catch},
                          {"window", sc.pi_saturation.window},
                          {"alpha_ramp", sc.pi_saturation.alpha_ramp},
                          {"cmd_accel_min", sc.pi_saturation.cmd_accel_min},
                          {"cmd_accel_max", sc.pi_saturation.cmd_accel_max}};
    j["sim"] = {{"dt", sc.sim.dt},
                {"warmup_duration", sc.sim.warmup_duration},
                {"horizon", sc.sim.horizon},
                {"accel_min", sc.sim.accel_min},
                {"accel_max", sc.sim.accel_max},
                {"max_decel_failsafe", sc.sim.max_decel_failsafe},
                {"max_speed", sc.sim.max_speed}};
    j["lane_change"] = {{"delta_a_incentive", sc.lane_change.delta_a_incentive},
                        {"b_safe", sc.lane_change.b_safe},
                        {"cooldown", sc.lane_change.cooldown}};
    j["reward"] = {{"w_accel", sc.reward.w_accel},
                   {"collision_penalty", sc.reward.collision_penalty}};
    j["observation"] = {{"mode", to_string(sc.observation)},
                        {"normalize", sc.normalize_observations}};
    j["train"] = {{"length_range", sc.train.length_range},
                  {"sample_length", sc.train.sample_length},
                  {"warmup_duration", sc.train.warmup_duration}};
    j["test_length_range"] = sc.test_length_range;
    j["policy_hidden"] = sc.policy_hidden;
    return j;
}

}  // namespace

void ScenarioConfig::validate() const {
    if (sim.dt <= 0) throw ConfigError("sim.dt must be positive");
    if (sim.warmup_duration < 0) throw ConfigError("warmup must be >= 0");
    if (sim.horizon <= 0) throw ConfigError("horizon must be positive");
    if (sim.accel_min >= sim.accel_max)
        throw ConfigError("accel bounds must satisfy min < max");
    if (sim.max_decel_failsafe <= 0)
        throw ConfigError("max_decel_failsafe must be positive");
    if (sim.max_speed <= 0) throw ConfigError("max_speed must be positive");
    if (length <= 0) throw ConfigError("network length must be positive");
    if (num_vehicles < 1) throw ConfigError("need at least one vehicle");
    if (num_avs < 0 || num_avs > num_vehicles)
        throw ConfigError("num_avs must be in [0, num_vehicles]");
    if (vehicle_length <= 0) throw ConfigError("vehicle_length must be positive");
    if (!idm.valid()) throw ConfigError("invalid IDM parameters");
    if (num_avs > 0 && av_law == ControlTag::FollowerStopper &&
        !follower_stopper.valid())
        throw ConfigError("invalid FollowerStopper parameters");
    if (num_avs > 0 && av_law == ControlTag::PiSaturation &&
        !pi_saturation.valid())
        throw ConfigError("invalid PI-with-saturation parameters");
    if (network == NetworkType::TwoLaneRing && num_vehicles % 2 != 0)
        throw ConfigError("two-lane ring needs an even vehicle count");
    if (network == NetworkType::FigureEight) {
        if (conflict_zone_length <= 0 || conflict_zone_length >= length / 4.0)
            throw ConfigError("conflict_zone_length must be in (0, length/4)");
    }
    if (train.length_range[0] > train.length_range[1] ||
        train.length_range[0] <= 0)
        throw ConfigError("train.length_range must be positive and ordered");
    if (policy_hidden.empty())
        throw ConfigError("policy_hidden must not be empty");
    for (int h : policy_hidden)
        if (h < 1) throw ConfigError("policy_hidden sizes must be >= 1");
}

ScenarioConfig training_scenario(const ScenarioConfig& sc) {
    ScenarioConfig t = sc;
    t.sample_train_length = t.train.sample_length;
    t.sim.warmup_duration = t.train.warmup_duration;
    return t;
}

std::string scenario_to_json(const ScenarioConfig& sc) {
    return scenario_to_json_obj(sc).dump(2);
}

ScenarioConfig scenario_from_json(const std::string& text) {
    return scenario_from_json(text, ScenarioConfig{});
}

ScenarioConfig scenario_from_json(const std::string& text, ScenarioConfig base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad scenario JSON: ") + e.what());
    }
    apply_scenario(j, base);
    base.validate();
    return base;
}

namespace {

ScenarioConfig make_recipe(const std::string& name) {
    ScenarioConfig sc;
    sc.name = name;

    if (name == "sugiyama-230") {
        sc.length = 230.0;
        sc.num_avs = 0;
        return sc;
    }
    if (name == "ring-260-fs" || name == "ring-260-pi") {
        sc.length = 260.0;
        sc.num_avs = 1;
        sc.av_law = name == "ring-260-fs" ? ControlTag::FollowerStopper
                                          : ControlTag::PiSaturation;
        sc.sim.warmup_duration = 300.0;  // figure-style: long no-automation lead-in
        return sc;
    }
    if (name == "ring-260-mlp" || name == "ring-260-gru") {
        sc.length = 260.0;
        sc.num_avs = 1;
        sc.av_law = name == "ring-260-mlp" ? ControlTag::Mlp : ControlTag::Gru;
        sc.policy_hidden = name == "ring-260-mlp" ? std::vector<int>{3, 3}
                                                  : std::vector<int>{5};
        sc.sim.warmup_duration = 300.0;
        sc.train.sample_length = true;
        sc.train.warmup_duration = 75.0;
        return sc;
    }
    if (name == "ring-multiAV-3" || name == "ring-multiAV-11") {
        sc.length = 230.0;
        sc.num_avs = name == "ring-multiAV-3" ? 3 : 11;
        sc.av_law = ControlTag::Mlp;
        sc.observation = ObservationMode::Full;
        sc.normalize_observations = true;
        sc.policy_hidden = {8, 8};
        sc.train.sample_length = false;
        return sc;
    }
    if (name == "twolane-230-6av") {
        sc.network = NetworkType::TwoLaneRing;
        sc.length = 230.0;
        sc.num_vehicles = 44;
        sc.num_avs = 6;
        sc.av_law = ControlTag::Mlp;
        sc.observation = ObservationMode::Full;
        sc.normalize_observations = true;
        sc.policy_hidden = {8, 8};
        sc.train.sample_length = false;
        return sc;
    }
    if (name == "fig8-0av" || name == "fig8-1av" || name == "fig8-14av") {
        sc.network = NetworkType::FigureEight;
        sc.length = 402.0;
        sc.num_vehicles = 14;
        sc.num_avs = name == "fig8-0av" ? 0 : (name == "fig8-1av" ? 1 : 14);
        if (sc.num_avs > 0) {
            sc.av_law = ControlTag::Mlp;
            sc.observation = ObservationMode::Full;
            sc.normalize_observations = true;
            sc.policy_hidden = {8, 8};
        }
        sc.train.sample_length = false;
        return sc;
    }
    throw ConfigError("unknown recipe: " + name);
}

}  // namespace

std::vector<std::string> recipe_names() {
    return {"sugiyama-230",   "ring-260-fs",     "ring-260-pi",
            "ring-260-mlp",   "ring-260-gru",    "ring-multiAV-3",
            "ring-multiAV-11", "twolane-230-6av", "fig8-0av",
            "fig8-1av",       "fig8-14av"};
}

ScenarioConfig recipe(const std::string& name) {
    const auto names = recipe_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        std::string msg = "unknown recipe '" + name + "'; available:";
        for (const auto& n : names) msg += " " + n;
        throw ConfigError(msg);
    }
    ScenarioConfig sc = make_recipe(name);
    sc.validate();
    return sc;
}

}  // namespace traffic
