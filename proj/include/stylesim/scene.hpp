#pragma once

#include "stylesim/decision.hpp"
#include "stylesim/geometry.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stylesim {

using json = nlohmann::json;

enum class ObjectKind { vehicle, pedestrian, static_obstacle };
enum class LaneMarking { solid, dashed };
enum class SignalColor { red, yellow, green };

std::string_view to_string(ObjectKind k);
std::string_view to_string(LaneMarking m);
std::string_view to_string(SignalColor c);
std::optional<ObjectKind> parse_object_kind(std::string_view s);
std::optional<SignalColor> parse_signal_color(std::string_view s);

struct Extent {
    double length = 4.5;
    double width = 2.0;
    bool operator==(const Extent&) const = default;
};

struct ObjectState {
    std::string id;
    ObjectKind kind = ObjectKind::vehicle;
    Pose pose;
    double speed = 0.0;
    Extent extent;
    std::optional<std::string> lane_id;

    bool operator==(const ObjectState&) const = default;
};

struct LaneGeometry {
    std::string id;
    std::vector<Vec2> centerline;
    double width = 3.5;
    LaneMarking marking = LaneMarking::dashed;
    std::vector<std::string> successors;
    /// Arc length on the source lane where `centerline` begins (non-zero for clipped views).
    double s_start = 0.0;

    bool operator==(const LaneGeometry&) const = default;
};

struct SignalPhase {
    SignalColor state = SignalColor::red;
    double duration = 1.0;  // seconds
    bool operator==(const SignalPhase&) const = default;
};

/// Signal with a cyclic phase schedule; the schedule must cycle red -> green -> yellow -> red.
struct SignalState {
    std::string id;
    SignalColor state = SignalColor::red;
    Pose stop_point;
    std::vector<std::string> controlled_lanes;
    double time_in_state = 0.0;
    std::vector<SignalPhase> schedule;
    std::size_t phase_index = 0;

    /// State the schedule shows `offset` seconds from now (negative looks back).
    SignalColor state_at(double offset) const;
    /// Advances the phase clock by dt seconds.
    void advance(double dt);

    bool operator==(const SignalState&) const = default;
};

/// Validates the red -> green -> yellow -> red cycle; returns a problem description or empty.
std::string check_signal_schedule(const std::vector<SignalPhase>& schedule);

/// Immutable road network shared by every scene snapshot of a run.
class RoadMap {
public:
    struct Lane {
        LaneGeometry geometry;
        std::vector<double> cum;
        Box2 bounds;
        double length = 0.0;
    };

    struct Location {
        std::string lane_id;
        double s = 0.0;
        double lateral = 0.0;
        double heading_error = 0.0;
    };

    RoadMap() = default;
    /// Builds and validates; throws ValidationError listing every problem.
    RoadMap(std::vector<LaneGeometry> lanes, std::vector<SignalState> signals);

    static RoadMap from_json(const json& doc);

    const Lane* find(std::string_view id) const;
    const std::map<std::string, Lane, std::less<>>& lanes() const { return lanes_; }
    const std::vector<SignalState>& initial_signals() const { return signals_; }

    /// Nearest heading-aligned lane for a pose. Checks `hint` and its successors first.
    std::optional<Location> locate(const Pose& pose, const std::optional<std::string>& hint = std::nullopt) const;

    json to_json() const;

private:
    std::optional<Location> locate_in(const Lane& lane, const Pose& pose) const;

    std::map<std::string, Lane, std::less<>> lanes_;
    std::vector<SignalState> signals_;
};

/// Piecewise-linear speed profile along a fixed path for objects the simulation does not control.
struct ScriptedMotion {
    std::vector<Vec2> path;
    std::vector<double> cum;
    std::vector<std::pair<double, std::string>> lane_spans;  // (end arc length, lane id)
    double start_s = 0.0;
    std::vector<std::pair<double, double>> keyframes;  // (time s, speed m/s), time ascending
    double period = 0.0;                               // > 0 repeats the keyframes
    double time_shift = 0.0;

    double speed_at(double t) const;
    double distance_at(double t) const;
    Pose pose_at(double t) const;
    std::optional<std::string> lane_at(double t) const;
};

struct SceneGraph {
    std::int64_t step_index = 0;
    double dt = 0.05;
    std::vector<ObjectState> objects;  // sorted by id
    std::vector<SignalState> signals;
    std::shared_ptr<const RoadMap> map;
    std::shared_ptr<const std::map<std::string, ScriptedMotion, std::less<>>> scripted;

    double sim_time() const { return static_cast<double>(step_index) * dt; }
    const ObjectState* find(std::string_view id) const;
    /// Stable serialization of the dynamic state (objects + signals + step).
    std::string serialize() const;
};

enum class Provenance { objective, modulated };

/// Ego-centric structured perception: ego at the origin heading along +x.
struct BevView {
    std::string ego_id;
    std::int64_t step_index = 0;
    double dt = 0.05;
    double radius = 50.0;
    Pose ego_pose;  // world pose of the frame origin
    double ego_speed = 0.0;
    Extent ego_extent;
    std::vector<ObjectState> objects;
    std::vector<LaneGeometry> lanes;
    std::vector<SignalState> signals;
    Provenance provenance = Provenance::objective;

    const ObjectState* find_object(std::string_view id) const;
    json to_json() const;
    std::string digest() const;

    bool operator==(const BevView&) const = default;
};

inline constexpr double kDefaultBevRadius = 50.0;
inline constexpr double kDefaultDt = 0.05;

/// Objective ego-centric view. Throws MissingAgentError for an unknown ego.
BevView extract_bev(const SceneGraph& scene, std::string_view ego_id, double radius = kDefaultBevRadius);

enum class EntityKind { vehicle, pedestrian, static_obstacle, lane, signal };
std::string_view to_string(EntityKind k);
std::optional<EntityKind> parse_entity_kind(std::string_view s);
EntityKind entity_kind(ObjectKind k);

struct PerceivedEntity {
    EntityKind kind = EntityKind::vehicle;
    std::string id;
    double longitudinal = 0.0;  // |x| in the ego frame
    bool operator==(const PerceivedEntity&) const = default;
};

/// Traffic objects sorted by (|x|, id). Deterministic in the view.
std::vector<PerceivedEntity> identify_objects(const BevView& view);
/// Traffic objects, signals and lanes, each sorted by (|x|, id), in that order.
std::vector<PerceivedEntity> identify_entities(const BevView& view);

struct VehicleDynamics {
    double wheelbase = 2.7;
    double max_steer = 0.6;
};

/// One integration step: controlled vehicles use a kinematic bicycle (semi-implicit Euler, speed clamped
/// at zero); scripted objects follow their motion; signals advance. Object count is conserved.
SceneGraph advance_kinematics(const SceneGraph& scene, const std::map<std::string, DrivingDecision, std::less<>>& decisions,
                              double dt, const VehicleDynamics& dynamics = {});

struct Route {
    std::vector<std::string> lanes;
    Pose destination;
    double total_length = 0.0;
    std::vector<Vec2> polyline;
    std::vector<double> cum;

    /// Throws ValidationError when lanes are missing or not connected through successors.
    static Route build(const RoadMap& map, std::vector<std::string> lane_ids);
};

/// Tracks monotone progress along a route for a stream of poses.
class RouteTracker {
public:
    explicit RouteTracker(const Route& route) : route_(&route) {}
    /// Returns the signed lateral offset from the route polyline at the new projection.
    double update(const Pose& pose);
    double progress() const { return best_s_; }
    double current_s() const { return s_; }

private:
    const Route* route_;
    bool started_ = false;
    double s_ = 0.0;
    double best_s_ = 0.0;
    Vec2 last_{};
};

/// Percentage of route arc length covered by the trajectory's projection, in [0, 100].
double route_completion(const Route& route, std::span<const Pose> trajectory);

}  // namespace stylesim
