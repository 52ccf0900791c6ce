#pragma once

#include <algorithm>
#include <cmath>

#include "trafficlab/rng.hpp"

namespace traffic::idm {

/// Intelligent Driver Model constants plus the per-step acceleration noise
/// level used for the human-driven vehicles.
struct IdmParams {
    double v0 = 30.0;        // desired speed (m/s)
    double T = 1.0;          // time headway (s)
    double a_max = 1.0;      // maximum acceleration (m/s^2)
    double b_comf = 1.5;     // comfortable deceleration (m/s^2)
    double delta = 4.0;      // acceleration exponent
    double s0 = 2.0;         // minimum gap (m)
    double noise_std = 0.2;  // acceleration noise std (m/s^2)

    bool valid() const {
        return v0 > 0 && T > 0 && a_max > 0 && b_comf > 0 && s0 > 0 &&
               delta >= 1.0 && noise_std >= 0.0;
    }
};

/// Inputs to the car-following law, all measured at the same instant.
struct KinematicInput {
    double h;           // bumper-to-bumper headway (m), > 0
    double dv_closing;  // v - v_lead (m/s), positive when approaching
    double v;           // own velocity (m/s), >= 0
};

/// Desired (dynamic) headway: s0 + max(0, v*T + v*dv / (2*sqrt(a*b))).
/// dv_closing = v - v_lead, so an approaching follower wants a larger gap.
inline double desired_headway(double v, double dv_closing, const IdmParams& p) {
    const double dynamic =
        v * p.T + v * dv_closing / (2.0 * std::sqrt(p.a_max * p.b_comf));
    return p.s0 + std::max(0.0, dynamic);
}

/// IDM acceleration a*(1 - (v/v0)^delta - (H/h)^2). Total for h > 0; a
/// non-finite result signals invalid parameters and is left to the caller.
inline double idm_acceleration(const KinematicInput& k, const IdmParams& p) {
    const double H = desired_headway(k.v, k.dv_closing, p);
    const double ratio = H / k.h;
    const double x = k.v / p.v0;
    double speed_term;
    if (p.delta == 4.0) {  // the common exponent, hot in the stepping loop
        const double x2 = x * x;
        speed_term = x2 * x2;
    } else {
        speed_term = std::pow(x, p.delta);
    }
    return p.a_max * (1.0 - speed_term - ratio * ratio);
}

/// Additive per-step Gaussian acceleration noise. Exact identity when
/// noise_std is zero (no draw is consumed).
inline double apply_acceleration_noise(double accel, RandomStream& rng,
                                       double noise_std) {
    if (noise_std <= 0.0) return accel;
    return accel + noise_std * rng.normal();
}

/// Largest speed that still lets the follower stop behind its leader if the
/// leader brakes to rest at max_decel starting now and the follower reacts
/// after one dt. Monotone nondecreasing in h; 0 when no positive speed is
/// safe.
inline double safe_velocity_cap(double h, double v_lead, double max_decel,
                                double dt) {
    // v*dt + v^2/(2b) <= h + v_lead^2/(2b)
    const double b = max_decel;
    const double arg = b * b * dt * dt + 2.0 * b * h + v_lead * v_lead;
    const double v = -b * dt + std::sqrt(arg);
    return std::max(0.0, v);
}

}  // namespace traffic::idm
