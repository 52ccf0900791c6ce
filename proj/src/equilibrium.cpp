#include "trafficlab/equilibrium.hpp"

#include <cmath>

#include "trafficlab/engine.hpp"
#include "trafficlab/util.hpp"

namespace traffic::eq {

namespace {

double residual(double h, double v, const idm::IdmParams& p) {
    return idm::idm_acceleration({h, 0.0, v}, p);
}

EquilibriumPoint solve(double h_star, double density,
                       const idm::IdmParams& p) {
    if (h_star <= 0.0)
        throw ConfigError("infeasible configuration: nonpositive headway");
    if (h_star <= p.s0) return {density, h_star, 0.0};

    // residual(h*, v) is strictly decreasing in v: positive at v -> 0+
    // (since h* > s0), negative at v0. Bisect to near machine precision so
    // the equilibrium is an exact fixed point of the discrete dynamics.
    double lo = 0.0, hi = p.v0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double r = residual(h_star, mid, p);
        if (r > 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-15 * p.v0) break;
    }
    double v = 0.5 * (lo + hi);
    // Pick the bracket endpoint with the smaller residual magnitude.
    if (std::abs(residual(h_star, lo, p)) < std::abs(residual(h_star, v, p)))
        v = lo;
    if (std::abs(residual(h_star, hi, p)) < std::abs(residual(h_star, v, p)))
        v = hi;
    return {density, h_star, v};
}

}  // namespace

EquilibriumPoint uniform_flow_velocity(double track_length, int n_vehicles,
                                       double vehicle_length,
                                       const idm::IdmParams& p) {
    if (n_vehicles < 1) throw ConfigError("need at least one vehicle");
    const double h_star =
        track_length / static_cast<double>(n_vehicles) - vehicle_length;
    const double density = static_cast<double>(n_vehicles) / track_length;
    return solve(h_star, density, p);
}

EquilibriumPoint equilibrium_at_density(double density, double vehicle_length,
                                        const idm::IdmParams& p) {
    if (density <= 0.0) throw ConfigError("density must be positive");
    const double h_star = 1.0 / density - vehicle_length;
    return solve(h_star, density, p);
}

std::vector<EquilibriumPoint> density_velocity_curve(
    std::span<const double> densities, double vehicle_length,
    const idm::IdmParams& p) {
    std::vector<EquilibriumPoint> curve;
    curve.reserve(densities.size());
    for (double d : densities)
        curve.push_back(equilibrium_at_density(d, vehicle_length, p));
    return curve;
}

StopAndGoStats stop_and_go_average_velocity(double track_length,
                                            int n_vehicles,
                                            std::span<const std::uint64_t> seeds,
                                            const ScenarioConfig& base,
                                            double window_s,
                                            double wave_std_min) {
    if (seeds.empty()) throw ConfigError("need at least one seed");
    ScenarioConfig sc = base;
    sc.length = track_length;
    sc.num_vehicles = n_vehicles;
    sc.num_avs = 0;
    sc.av_law = ControlTag::Idm;
    sc.sample_train_length = false;

    StopAndGoStats stats;
    stats.per_seed_mean.reserve(seeds.size());
    bool any_waves = false;
    double sum = 0.0;
    for (std::uint64_t seed : seeds) {
        const sim::EpisodeLog log =
            sim::run_episode(sc, seed, nullptr, sim::LogMode::Metrics);
        const double m = log.mean_velocity_final(window_s);
        stats.per_seed_mean.push_back(m);
        sum += m;
        if (log.velocity_std_final(window_s) >= wave_std_min) any_waves = true;
    }
    const double n = static_cast<double>(seeds.size());
    stats.mean = sum / n;
    double ss = 0.0;
    for (double m : stats.per_seed_mean) ss += (m - stats.mean) * (m - stats.mean);
    stats.stddev = seeds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    stats.waves_formed = any_waves;
    return stats;
}

StopAndGoStats stop_and_go_average_velocity(double track_length,
                                            int n_vehicles,
                                            std::span<const std::uint64_t> seeds) {
    ScenarioConfig base;
    base.name = "stop-and-go-bound";
    return stop_and_go_average_velocity(track_length, n_vehicles, seeds, base);
}

}  // namespace traffic::eq
