#include "trafficlab/controllers.hpp"

#include <algorithm>
#include <cmath>

namespace traffic::ctrl {

std::array<double, 3> follower_stopper_boundaries(double dv_closing_neg,
                                                  const FollowerStopperParams& p) {
    const double dv2 = dv_closing_neg * dv_closing_neg;
    return {p.dx0[0] + dv2 / (2.0 * p.decel[0]),
            p.dx0[1] + dv2 / (2.0 * p.decel[1]),
            p.dx0[2] + dv2 / (2.0 * p.decel[2])};
}

double follower_stopper_cmd(double v_av, double v_lead, double gap,
                            const FollowerStopperParams& p) {
    const double dv_neg = std::min(v_lead - v_av, 0.0);
    const auto dx = follower_stopper_boundaries(dv_neg, p);
    const double v = std::min(std::max(v_lead, 0.0), p.u_des);

    if (gap <= dx[0]) return 0.0;
    if (gap <= dx[1]) return v * (gap - dx[0]) / (dx[1] - dx[0]);
    if (gap <= dx[2]) return v + (p.u_des - v) * (gap - dx[1]) / (dx[2] - dx[1]);
    return p.u_des;
}

double pi_saturation_cmd(PiSaturationState& state, double v_av, double v_lead,
                         double gap, const PiSaturationParams& p) {
    const double u_avg = state.mean_velocity(v_av);
    const double catch_frac =
        std::clamp((gap - p.g_l) / (p.g_u - p.g_l), 0.0, 1.0);
    const double v_target = u_avg + p.v_catch * catch_frac;

    // Crash avoidance: at small gaps the command tracks the leader velocity
    // and reacts immediately (alpha -> 0, beta -> 1).
    const double alpha = std::clamp((gap - p.delta_s) / p.alpha_ramp, 0.0, 1.0);
    const double beta = 1.0 - 0.5 * alpha;
    if (!state.cmd_initialized) {
        state.cmd_prev = v_av;
        state.cmd_initialized = true;
    }
    const double cmd = beta * (alpha * v_target + (1.0 - alpha) * v_lead) +
                       (1.0 - beta) * state.cmd_prev;

    state.push(v_av);
    state.cmd_prev = std::max(cmd, 0.0);
    return state.cmd_prev;
}

}  // namespace traffic::ctrl
