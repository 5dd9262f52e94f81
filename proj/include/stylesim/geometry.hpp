#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace stylesim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr bool operator==(const Vec2&) const = default;

    double norm() const { return std::hypot(x, y); }
    constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
};

inline Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

/// Wraps an angle into [-pi, pi).
inline double normalize_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    r -= std::numbers::pi;
    // fmod rounding can land exactly on +pi
    if (r >= std::numbers::pi) r -= two_pi;
    return r;
}

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // radians, [-pi, pi)

    Vec2 position() const { return {x, y}; }
    bool operator==(const Pose&) const = default;
};

/// World -> frame of `origin` (origin at 0, origin heading along +x).
inline Vec2 to_frame(const Pose& origin, const Vec2& world) {
    return rotate(world - origin.position(), -origin.heading);
}

inline Vec2 from_frame(const Pose& origin, const Vec2& local) {
    return rotate(local, origin.heading) + origin.position();
}

inline Pose to_frame(const Pose& origin, const Pose& world) {
    const Vec2 p = to_frame(origin, world.position());
    return {p.x, p.y, normalize_angle(world.heading - origin.heading)};
}

inline Pose from_frame(const Pose& origin, const Pose& local) {
    const Vec2 p = from_frame(origin, local.position());
    return {p.x, p.y, normalize_angle(local.heading + origin.heading)};
}

struct Box2 {
    Vec2 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    Vec2 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};

    void expand(const Vec2& p) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
    }
    /// Squared distance from p to the box (0 inside).
    double distance_sq(const Vec2& p) const {
        const double dx = std::max({lo.x - p.x, 0.0, p.x - hi.x});
        const double dy = std::max({lo.y - p.y, 0.0, p.y - hi.y});
        return dx * dx + dy * dy;
    }
};

/// Result of projecting a point onto a polyline.
struct PolylineProjection {
    double s = 0.0;        // arc length of the foot point
    double lateral = 0.0;  // signed offset, positive to the left of travel direction
    double heading = 0.0;  // tangent heading at the foot point
    std::size_t segment = 0;
    bool clamped_before = false;  // foot point clamped to the first vertex
    bool clamped_after = false;   // foot point clamped to the last vertex
};

/// Cumulative arc length; result[0] == 0.
std::vector<double> cumulative_lengths(std::span<const Vec2> pts);

double polyline_length(std::span<const Vec2> pts);

/// Nearest-point projection. `pts` must contain at least two points.
PolylineProjection project_onto(std::span<const Vec2> pts, std::span<const double> cum, const Vec2& p);

/// Projection restricted to segments whose arc span intersects [s_lo, s_hi].
PolylineProjection project_onto_window(std::span<const Vec2> pts, std::span<const double> cum, const Vec2& p,
                                       double s_lo, double s_hi);

/// Point and tangent heading at arc length s (clamped to the polyline; extrapolated past the ends).
Vec2 point_at(std::span<const Vec2> pts, std::span<const double> cum, double s);
double heading_at(std::span<const Vec2> pts, std::span<const double> cum, double s);

/// A contiguous piece of a polyline, with the arc length where it starts on the source.
struct ClippedPolyline {
    std::vector<Vec2> points;
    double s_start = 0.0;
};

/// Portion of `pts` inside the disc (center, radius). Returns the contiguous run that passes closest
/// to `center`; nullopt when the polyline never enters the disc.
std::optional<ClippedPolyline> clip_to_disc(std::span<const Vec2> pts, std::span<const double> cum,
                                            const Vec2& center, double radius);

/// Resamples so that consecutive points are at most `max_spacing` apart. Keeps original vertices.
std::vector<Vec2> densify(std::span<const Vec2> pts, double max_spacing);

}  // namespace stylesim
