#pragma once

#include "stylesim/scene.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stylesim {

/// A chain of perceived lanes (predecessor, believed lane, successors) flattened into one polyline,
/// all in the ego frame of a view.
struct LanePath {
    std::vector<std::string> lane_ids;
    std::vector<Vec2> points;
    std::vector<double> cum;
    double width = 3.5;
    LaneMarking marking = LaneMarking::dashed;
    double ego_s = 0.0;
    double ego_lateral = 0.0;  // ego offset from the centerline, left positive
    double heading = 0.0;      // path tangent at the ego projection (ego frame)

    double length() const { return cum.empty() ? 0.0 : cum.back(); }
    PolylineProjection project(const Vec2& p) const { return project_onto(points, cum, p); }
    bool contains_lane(std::string_view id) const;
};

struct LaneContext {
    LanePath current;
    std::optional<LanePath> left;
    std::optional<LanePath> right;
};

/// Lanes whose tangent at the ego is within this angle of the ego heading count as drivable.
inline constexpr double kAlignedHeading = 1.0472;  // ~60 degrees

/// Believed lane = aligned lane with the smallest |lateral| within one lane width, ties broken towards
/// route lanes then id. Nullopt when no lane qualifies.
std::optional<LaneContext> perceive_lanes(const BevView& view, std::span<const std::string> route_lanes);

/// Where an object sits relative to a path.
struct PathPosition {
    double s = 0.0;
    double lateral = 0.0;
    double heading = 0.0;  // object heading relative to the path tangent
    bool in_lane = false;  // footprint overlaps the lane corridor
};

std::optional<PathPosition> locate_on_path(const LanePath& path, const ObjectState& obj);

/// Nearest in-lane object ahead of the ego on a path.
struct LeadObject {
    const ObjectState* object = nullptr;
    double gap = 0.0;    // bumper to bumper along the path
    double speed = 0.0;  // along the path
    double s = 0.0;
};

std::optional<LeadObject> find_lead(const BevView& view, const LanePath& path);

/// Ahead and roughly opposite in heading.
bool is_oncoming(const ObjectState& obj);

}  // namespace stylesim
