#include "stylesim/geometry.hpp"

#include <stdexcept>

namespace stylesim {

std::vector<double> cumulative_lengths(std::span<const Vec2> pts) {
    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
    return cum;
}

double polyline_length(std::span<const Vec2> pts) {
    double total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) total += (pts[i] - pts[i - 1]).norm();
    return total;
}

namespace {

PolylineProjection project_range(std::span<const Vec2> pts, std::span<const double> cum, const Vec2& p,
                                 std::size_t first, std::size_t last) {
    if (pts.size() < 2) throw std::invalid_argument("polyline needs at least two points");
    double best_d2 = std::numeric_limits<double>::infinity();
    PolylineProjection best;
    for (std::size_t i = first; i < last; ++i) {
        const Vec2 a = pts[i];
        const Vec2 d = pts[i + 1] - a;
        const double len2 = d.dot(d);
        if (len2 <= 0.0) continue;
        const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
        const Vec2 foot = a + d * t;
        const Vec2 r = p - foot;
        const double d2 = r.dot(r);
        if (d2 < best_d2) {
            best_d2 = d2;
            const double len = std::sqrt(len2);
            best.segment = i;
            best.s = cum[i] + t * len;
            best.heading = std::atan2(d.y, d.x);
            best.lateral = d.cross(p - a) / len;
            best.clamped_before = false;
            best.clamped_after = false;
        }
    }
    const std::size_t nseg = pts.size() - 1;
    const Vec2 a = pts[best.segment];
    const Vec2 d = pts[best.segment + 1] - a;
    const double len = d.norm();
    if (len <= 0.0) return best;
    const Vec2 u = d * (1.0 / len);
    const double along = (p - a).dot(u);
    if (best.segment == 0 && along < 0.0) {
        best.clamped_before = true;
        best.s = along;
    } else if (best.segment + 1 == nseg && along > len) {
        best.clamped_after = true;
        best.s = cum[best.segment] + along;
    }
    return best;
}

}  // namespace

PolylineProjection project_onto(std::span<const Vec2> pts, std::span<const double> cum, const Vec2& p) {
    return project_range(pts, cum, p, 0, pts.size() - 1);
}

PolylineProjection project_onto_window(std::span<const Vec2> pts, std::span<const double> cum, const Vec2& p,
                                       double s_lo, double s_hi) {
    if (pts.size() < 2) throw std::invalid_argument("polyline needs at least two points");
    const auto lo_it = std::upper_bound(cum.begin(), cum.end(), s_lo);
    std::size_t first = lo_it == cum.begin() ? 0 : static_cast<std::size_t>(lo_it - cum.begin()) - 1;
    const auto hi_it = std::lower_bound(cum.begin(), cum.end(), s_hi);
    std::size_t last = static_cast<std::size_t>(hi_it - cum.begin());
    last = std::min(last, pts.size() - 1);
    first = std::min(first, pts.size() - 2);
    if (last <= first) last = first + 1;
    return project_range(pts, cum, p, first, last);
}

Vec2 point_at(std::span<const Vec2> pts, std::span<const double> cum, double s) {
    const std::size_t n = pts.size();
    if (s <= 0.0) {
        const Vec2 d = pts[1] - pts[0];
        const double len = d.norm();
        return len > 0.0 ? pts[0] + d * (s / len) : pts[0];
    }
    if (s >= cum[n - 1]) {
        const Vec2 d = pts[n - 1] - pts[n - 2];
        const double len = d.norm();
        return len > 0.0 ? pts[n - 1] + d * ((s - cum[n - 1]) / len) : pts[n - 1];
    }
    const auto it = std::upper_bound(cum.begin(), cum.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - cum.begin()) - 1;
    const double seg = cum[i + 1] - cum[i];
    const double t = seg > 0.0 ? (s - cum[i]) / seg : 0.0;
    return pts[i] + (pts[i + 1] - pts[i]) * t;
}

double heading_at(std::span<const Vec2> pts, std::span<const double> cum, double s) {
    const std::size_t n = pts.size();
    std::size_t i = 0;
    if (s >= cum[n - 1]) {
        i = n - 2;
    } else if (s > 0.0) {
        const auto it = std::upper_bound(cum.begin(), cum.end(), s);
        i = static_cast<std::size_t>(it - cum.begin()) - 1;
    }
    const Vec2 d = pts[i + 1] - pts[i];
    return std::atan2(d.y, d.x);
}

std::optional<ClippedPolyline> clip_to_disc(std::span<const Vec2> pts, std::span<const double> cum,
                                            const Vec2& center, double radius) {
    const double r2 = radius * radius;
    struct Run {
        ClippedPolyline poly;
        double closest_d2 = std::numeric_limits<double>::infinity();
    };
    std::optional<Run> best;
    std::optional<Run> current;

    auto close_run = [&]() {
        if (current && current->poly.points.size() >= 2 &&
            (!best || current->closest_d2 < best->closest_d2)) {
            best = std::move(current);
        }
        current.reset();
    };

    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 a = pts[i];
        const Vec2 d = pts[i + 1] - a;
        const double len2 = d.dot(d);
        if (len2 <= 0.0) continue;
        // |a + t d - c|^2 = r^2
        const Vec2 f = a - center;
        const double B = 2.0 * f.dot(d);
        const double C = f.dot(f) - r2;
        const double disc = B * B - 4.0 * len2 * C;
        if (disc < 0.0) {
            close_run();
            continue;
        }
        const double sq = std::sqrt(disc);
        const double t0 = std::max(0.0, (-B - sq) / (2.0 * len2));
        const double t1 = std::min(1.0, (-B + sq) / (2.0 * len2));
        if (t0 > t1) {
            close_run();
            continue;
        }
        const double len = std::sqrt(len2);
        const Vec2 p0 = a + d * t0;
        const Vec2 p1 = a + d * t1;
        if (!current) {
            current.emplace();
            current->poly.s_start = cum[i] + t0 * len;
            current->poly.points.push_back(p0);
        } else if (t0 > 0.0) {
            // re-entry within the same segment after leaving: start a fresh run
            close_run();
            current.emplace();
            current->poly.s_start = cum[i] + t0 * len;
            current->poly.points.push_back(p0);
        }
        if (!(p1 == current->poly.points.back())) current->poly.points.push_back(p1);
        const double tc = std::clamp(-f.dot(d) / len2, t0, t1);
        const Vec2 fc = a + d * tc - center;
        current->closest_d2 = std::min(current->closest_d2, fc.dot(fc));
        if (t1 < 1.0) close_run();
    }
    close_run();
    if (!best) return std::nullopt;
    return std::move(best->poly);
}

std::vector<Vec2> densify(std::span<const Vec2> pts, double max_spacing) {
    std::vector<Vec2> out;
    if (pts.empty()) return out;
    out.reserve(pts.size());
    out.push_back(pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const Vec2 a = pts[i - 1];
        const Vec2 d = pts[i] - a;
        const int pieces = std::max(1, static_cast<int>(std::ceil(d.norm() / max_spacing)));
        for (int k = 1; k < pieces; ++k) out.push_back(a + d * (static_cast<double>(k) / pieces));
        out.push_back(pts[i]);
    }
    return out;
}

}  // namespace stylesim
