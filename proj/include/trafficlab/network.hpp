#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>

#include "trafficlab/vehicle.hpp"

namespace traffic::net {

/// Closed circular track. All position arithmetic is modulo length.
struct RingSpec {
    double length = 230.0;
    int num_lanes = 1;  // 1 or 2
};

/// Figure-eight modeled as one closed route whose two crossing segments
/// share a mutually exclusive conflict zone. The crossing arms are the
/// intervals [L/4, L/4 + zone) and [3L/4, 3L/4 + zone).
struct FigureEightSpec {
    double loop_radius = 30.0;
    double total_length = 402.0;
    double zone_length = 10.0;

    struct Interval {
        double begin;
        double end;  // half-open [begin, end)
    };

    Interval arm(int which) const {
        const double start =
            (which == 0) ? total_length * 0.25 : total_length * 0.75;
        return {start, start + zone_length};
    }
};

struct RoutePosition {
    double s = 0.0;  // in [0, length)
    int lane = 0;
};

/// Maps any real coordinate onto [0, length).
inline double wrap_position(double s, double length) {
    double r = std::fmod(s, length);
    if (r < 0.0) r += length;
    if (r >= length) r -= length;  // fmod can return length after rounding
    return r;
}

/// Arc distance travelled going forward from `from_s` to `to_s`, in (0, L].
/// Equal positions map to L (a vehicle following itself sees the whole ring).
inline double arc_ahead(double from_s, double to_s, double length) {
    double d = wrap_position(to_s - from_s, length);
    if (d == 0.0) d = length;
    return d;
}

/// Bumper-to-bumper gap from follower's front bumper to leader's rear
/// bumper. Nonpositive only in collision states.
inline double gap_to_leader(const VehicleState& follower,
                            const VehicleState& leader, double length) {
    if (follower.id == leader.id)
        return length - leader.length;  // self-following convention
    return arc_ahead(follower.s, leader.s, length) - leader.length;
}

/// Index of the vehicle with the smallest positive arc distance ahead of
/// `self` within the same lane. With a single vehicle in the lane this is
/// `self` itself.
inline std::size_t leader_of(std::size_t self,
                             std::span<const VehicleState> vehicles,
                             double length) {
    const VehicleState& me = vehicles[self];
    std::size_t best = self;
    double best_arc = length + 1.0;
    for (std::size_t j = 0; j < vehicles.size(); ++j) {
        if (j == self || vehicles[j].lane != me.lane) continue;
        const double d = arc_ahead(me.s, vehicles[j].s, length);
        if (d < best_arc) {
            best_arc = d;
            best = j;
        }
    }
    return best;
}

/// True iff any point of the body [front - body_length, front] lies inside
/// the half-open interval, modulo the route length.
inline bool body_overlaps(double front_s, double body_length,
                          FigureEightSpec::Interval iv, double route_length) {
    // Distance from interval begin forward to the front bumper; the body
    // overlaps iff that distance is in (0, zone + body).
    const double d = wrap_position(front_s - iv.begin, route_length);
    const double zone = iv.end - iv.begin;
    return d > 0.0 && d < zone + body_length;
}

/// Arm index (0 or 1) whose conflict interval the vehicle body currently
/// overlaps, or -1.
inline int in_conflict_zone(const VehicleState& v, const FigureEightSpec& spec) {
    for (int arm = 0; arm < 2; ++arm) {
        if (body_overlaps(v.s, v.length, spec.arm(arm), spec.total_length))
            return arm;
    }
    return -1;
}

/// Next conflict interval ahead of the front bumper: returns the arm index
/// and the arc distance from the bumper to the interval begin.
inline std::pair<int, double> next_arm_ahead(double front_s,
                                             const FigureEightSpec& spec) {
    int best_arm = 0;
    double best_d = spec.total_length + 1.0;
    for (int arm = 0; arm < 2; ++arm) {
        const double d =
            wrap_position(spec.arm(arm).begin - front_s, spec.total_length);
        if (d < best_d) {
            best_d = d;
            best_arm = arm;
        }
    }
    return {best_arm, best_d};
}

}  // namespace traffic::net
