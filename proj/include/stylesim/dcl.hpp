#pragma once

#include "stylesim/decision.hpp"
#include "stylesim/lane_frame.hpp"
#include "stylesim/scene.hpp"

#include <optional>

namespace stylesim {

struct ControllerParams {
    double desired_speed = 12.0;  // v0, m/s
    double time_headway = 1.5;    // T, s
    double min_gap = 2.0;         // s0, m
    double max_accel = 2.0;       // a, m/s^2
    double comfort_decel = 3.0;   // b, m/s^2
    double gap_accept_front = 8.0;
    double gap_accept_rear = 6.0;
    double signal_stop_margin = 2.0;
    double lane_change_incentive = 0.3;  // m/s^2 of accel gain
    double stanley_gain = 1.0;
    double wheelbase = 2.7;
    double max_steer = 0.6;

    bool operator==(const ControllerParams&) const = default;

    /// Throws ValidationError listing non-positive fields.
    void validate() const;
    json to_json() const;
    /// Applies the keys present in `j` on top of `base`.
    static ControllerParams from_json(const json& j, ControllerParams base);
    static ControllerParams from_json(const json& j);
};

/// v^2 / (2b) + margin.
double braking_distance(double v, double b, double margin = 2.0);

/// Car-following acceleration; no lead when `gap` is empty. `dv` is own speed minus lead speed.
double idm_accel(double v, std::optional<double> gap, double dv, const ControllerParams& p);

/// Rule-based driver. Pure: the output depends only on the arguments.
DrivingDecision decide(const BevView& view, const Route& route, const ControllerParams& params);

}  // namespace stylesim
