#pragma once

namespace stylesim {

inline constexpr double kMinAccel = -8.0;  // m/s^2
inline constexpr double kMaxAccel = 4.0;   // m/s^2

enum class LaneChange { keep, left, right };

struct SteerTarget {
    double lateral_offset = 0.0;      // target offset from the perceived lane center, meters (left positive)
    double heading_correction = 0.0;  // front-wheel steering command, radians (left positive)

    bool operator==(const SteerTarget&) const = default;
};

/// Controller output for one step.
struct DrivingDecision {
    double accel = 0.0;
    SteerTarget steer;
    LaneChange lane_change = LaneChange::keep;
    bool stop_for_signal = false;

    bool operator==(const DrivingDecision&) const = default;
};

}  // namespace stylesim
