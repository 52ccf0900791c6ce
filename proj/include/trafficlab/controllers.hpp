#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <vector>

namespace traffic::ctrl {

/// FollowerStopper: holds a desired velocity U while commanding gap-based
/// slowdowns through three quadratic boundaries.
struct FollowerStopperParams {
    std::array<double, 3> dx0{4.5, 5.25, 6.0};   // boundary intercepts (m)
    std::array<double, 3> decel{1.5, 1.0, 0.5};  // boundary decelerations (m/s^2)
    double u_des = 4.15;                         // desired velocity U (m/s)
    // command-velocity-to-acceleration adapter bounds for model-based laws
    double cmd_accel_min = -4.5;
    double cmd_accel_max = 1.0;

    bool valid() const {
        return dx0[0] < dx0[1] && dx0[1] < dx0[2] && decel[0] > decel[1] &&
               decel[1] > decel[2] && decel[2] > 0.0 && u_des > 0.0;
    }
};

/// Boundaries dx_k = dx0_k + dv_neg^2 / (2 d_k) for dv_neg <= 0 (the
/// negative part of the leader-relative velocity). Strictly increasing.
std::array<double, 3> follower_stopper_boundaries(double dv_closing_neg,
                                                  const FollowerStopperParams& p);

/// Command velocity: 0 below dx1, linear ramps between boundaries, U above
/// dx3. Continuous in gap and always in [0, U].
double follower_stopper_cmd(double v_av, double v_lead, double gap,
                            const FollowerStopperParams& p);

/// PI with Saturation: tracks the temporal average of the AV's own velocity
/// history with gap-based catch-up and crash-avoidance blending.
struct PiSaturationParams {
    double delta_s = 2.0;   // safe-gap offset (m)
    double g_l = 7.0;       // lower gap threshold (m)
    double g_u = 30.0;      // upper gap threshold (m)
    double v_catch = 1.0;   // catch-up speed (m/s)
    int window = 200;       // averaging horizon (steps)
    double alpha_ramp = 5.0;  // gap span over which alpha rises 0 -> 1 (m)
    double cmd_accel_min = -4.5;
    double cmd_accel_max = 1.0;

    bool valid() const {
        return g_u > g_l && window >= 1 && alpha_ramp > 0.0 && v_catch >= 0.0;
    }
};

/// Per-vehicle controller memory: a ring buffer of the AV's own past
/// velocities plus the previous command velocity. One instance per vehicle.
class PiSaturationState {
public:
    explicit PiSaturationState(int window)
        : buf_(static_cast<std::size_t>(std::max(window, 1)), 0.0) {}

    bool empty() const { return count_ == 0; }

    /// Mean of the buffer; `fallback` (the current own velocity) on cold start.
    double mean_velocity(double fallback) const {
        return count_ == 0 ? fallback : sum_ / static_cast<double>(count_);
    }

    void push(double v) {
        if (count_ == buf_.size()) {
            sum_ -= buf_[head_];
        } else {
            ++count_;
        }
        buf_[head_] = v;
        sum_ += v;
        head_ = (head_ + 1) % buf_.size();
    }

    double cmd_prev = 0.0;
    bool cmd_initialized = false;

private:
    std::vector<double> buf_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    double sum_ = 0.0;
};

/// One controller update. Appends the current own velocity to the history
/// and returns the new command velocity (>= 0).
double pi_saturation_cmd(PiSaturationState& state, double v_av, double v_lead,
                         double gap, const PiSaturationParams& p);

/// Adapter from a command velocity to the acceleration actually integrated:
/// clip((v_cmd - v) / dt, [lo, hi]).
inline double cmd_velocity_to_accel(double v_cmd, double v, double dt,
                                    double lo, double hi) {
    return std::clamp((v_cmd - v) / dt, lo, hi);
}

}  // namespace traffic::ctrl
