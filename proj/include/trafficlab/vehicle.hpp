#pragma once

#include <string_view>

namespace traffic {

/// Which control law drives a vehicle. Idm marks human-modeled vehicles;
/// everything else is an AV law.
enum class ControlTag {
    Idm,
    FollowerStopper,
    PiSaturation,
    Mlp,
    Gru,
    External,
};

std::string_view to_string(ControlTag tag);

struct VehicleState {
    int id = 0;
    double s = 0.0;       // front-bumper arc position along the route, in [0, L)
    int lane = 0;
    double v = 0.0;       // m/s, never negative
    double length = 5.0;  // m
    ControlTag tag = ControlTag::Idm;

    bool is_av() const { return tag != ControlTag::Idm; }
};

}  // namespace traffic
