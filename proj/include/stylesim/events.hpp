#pragma once

#include "stylesim/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stylesim {

enum class InfractionKind { collision_vehicle, collision_pedestrian, collision_static, red_light, route_deviation };
std::string_view to_string(InfractionKind k);
std::optional<InfractionKind> parse_infraction_kind(std::string_view s);

struct InfractionEvent {
    std::int64_t step = 0;
    std::vector<std::string> agents;  // collisions: the overlapping pair, sorted
    InfractionKind kind = InfractionKind::collision_vehicle;
    std::vector<ObjectState> snapshot;

    json to_json() const;
    static InfractionEvent from_json(const json& j);
};

/// Separating-axis test for two oriented rectangles. Touching edges do not count as overlap.
bool rectangles_overlap(const Pose& a, const Extent& ea, const Pose& b, const Extent& eb);

/// Every overlapping object pair in the scene. Pedestrian pairs are ignored; static pairs too.
std::vector<InfractionEvent> detect_collisions(const SceneGraph& scene);

/// True when the point moving from `before` to `after` crosses the stop line of `signal`.
bool crosses_stop_line(const SignalState& signal, const Vec2& before, const Vec2& after, double half_width);

/// Red-light events for controlled vehicles whose front axle crossed a controlled stop line on red
/// between two consecutive snapshots.
std::vector<InfractionEvent> detect_red_light(const SceneGraph& before, const SceneGraph& after,
                                              const std::vector<std::string>& controlled, double wheelbase = 2.7);

}  // namespace stylesim
