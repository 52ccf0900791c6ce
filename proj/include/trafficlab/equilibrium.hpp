#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "trafficlab/idm.hpp"
#include "trafficlab/scenario.hpp"

namespace traffic::eq {

/// One point of the density-velocity relation: uniform flow with headway
/// h_star and velocity v_star satisfying idm_acceleration(h*, 0, v*) = 0.
struct EquilibriumPoint {
    double density;  // veh/m
    double h_star;   // m
    double v_star;   // m/s
};

/// Uniform-flow equilibrium for n identical vehicles on a ring of the given
/// length. h* = L/n - vehicle_length; v* is the unique root of the IDM
/// residual on (0, v0), found by bisection (the residual is strictly
/// decreasing in v). h* <= s0 gives the standstill jam v* = 0; h* <= 0 is an
/// infeasible configuration.
EquilibriumPoint uniform_flow_velocity(double track_length, int n_vehicles,
                                       double vehicle_length,
                                       const idm::IdmParams& p);

/// Equilibrium by density: h* = 1/density - vehicle_length.
EquilibriumPoint equilibrium_at_density(double density, double vehicle_length,
                                        const idm::IdmParams& p);

/// Upper-bound curve sampled at the requested densities; v* is strictly
/// decreasing in density.
std::vector<EquilibriumPoint> density_velocity_curve(
    std::span<const double> densities, double vehicle_length,
    const idm::IdmParams& p);

/// Performance lower bound at one configuration: no-AV episodes with noise
/// on, fleet velocity averaged over the final `window_s` seconds, mean and
/// sample std across seeds. waves_formed is false when the velocity spread
/// stays below wave_std_min in every seed (a dynamics regression signal).
struct StopAndGoStats {
    double mean = 0.0;
    double stddev = 0.0;
    bool waves_formed = false;
    std::vector<double> per_seed_mean;
};

StopAndGoStats stop_and_go_average_velocity(double track_length,
                                            int n_vehicles,
                                            std::span<const std::uint64_t> seeds,
                                            const ScenarioConfig& base,
                                            double window_s = 100.0,
                                            double wave_std_min = 0.5);

/// Same, from a default single-lane scenario with Table-style parameters.
StopAndGoStats stop_and_go_average_velocity(double track_length,
                                            int n_vehicles,
                                            std::span<const std::uint64_t> seeds);

}  // namespace traffic::eq
