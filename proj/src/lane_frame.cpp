#include "stylesim/lane_frame.hpp"

#include <algorithm>
#include <cmath>

namespace stylesim {

bool LanePath::contains_lane(std::string_view id) const {
    return std::find(lane_ids.begin(), lane_ids.end(), id) != lane_ids.end();
}

namespace {

constexpr double kPathAhead = 80.0;
constexpr int kMaxChain = 12;

struct Candidate {
    const LaneGeometry* lane;
    PolylineProjection proj;
};

bool on_route(std::span<const std::string> route, std::string_view id) {
    return std::find(route.begin(), route.end(), id) != route.end();
}

const LaneGeometry* lane_by_id(const BevView& view, std::string_view id) {
    for (const auto& l : view.lanes) {
        if (l.id == id) return &l;
    }
    return nullptr;
}

std::optional<Candidate> project_lane(const LaneGeometry& lane) {
    if (lane.centerline.size() < 2) return std::nullopt;
    const auto cum = cumulative_lengths(lane.centerline);
    auto proj = project_onto(lane.centerline, cum, Vec2{0.0, 0.0});
    if (proj.clamped_before || proj.clamped_after) return std::nullopt;
    if (std::abs(normalize_angle(proj.heading)) > kAlignedHeading) return std::nullopt;
    return Candidate{&lane, proj};
}

void append_points(std::vector<Vec2>& out, const std::vector<Vec2>& pts) {
    for (const auto& p : pts) {
        if (!out.empty() && (p - out.back()).norm() < 1e-3) continue;
        out.push_back(p);
    }
}

// Picks a lane among `ids` present in the view, route lanes first, then by id.
const LaneGeometry* pick(const BevView& view, std::vector<std::string> ids, std::span<const std::string> route,
                         const std::vector<std::string>& used) {
    std::sort(ids.begin(), ids.end(), [&](const std::string& a, const std::string& b) {
        const bool ra = on_route(route, a), rb = on_route(route, b);
        if (ra != rb) return ra;
        return a < b;
    });
    for (const auto& id : ids) {
        if (std::find(used.begin(), used.end(), id) != used.end()) continue;
        if (const auto* l = lane_by_id(view, id)) return l;
    }
    return nullptr;
}

std::optional<LanePath> build_path(const BevView& view, const LaneGeometry& start, std::span<const std::string> route) {
    LanePath path;
    path.width = start.width;
    path.marking = start.marking;

    std::vector<std::string> preds;
    for (const auto& l : view.lanes) {
        if (l.id != start.id && std::find(l.successors.begin(), l.successors.end(), start.id) != l.successors.end()) {
            preds.push_back(l.id);
        }
    }
    std::vector<const LaneGeometry*> chain;
    if (const auto* p = pick(view, preds, route, {start.id})) {
        chain.push_back(p);
        path.lane_ids.push_back(p->id);
    }
    chain.push_back(&start);
    path.lane_ids.push_back(start.id);
    const auto* cur = &start;
    double ahead = 0.0;
    for (int i = 0; i < kMaxChain; ++i) {
        ahead += polyline_length(cur->centerline);
        if (ahead > kPathAhead) break;
        const auto* next = pick(view, cur->successors, route, path.lane_ids);
        if (!next) break;
        chain.push_back(next);
        path.lane_ids.push_back(next->id);
        cur = next;
    }
    for (const auto* l : chain) append_points(path.points, l->centerline);
    if (path.points.size() < 2) return std::nullopt;
    path.cum = cumulative_lengths(path.points);
    const auto proj = path.project({0.0, 0.0});
    path.ego_s = proj.s;
    path.ego_lateral = proj.lateral;
    path.heading = proj.heading;
    return path;
}

}  // namespace

std::optional<LaneContext> perceive_lanes(const BevView& view, std::span<const std::string> route_lanes) {
    std::vector<Candidate> cands;
    for (const auto& lane : view.lanes) {
        if (auto c = project_lane(lane)) cands.push_back(*c);
    }
    const Candidate* best = nullptr;
    for (const auto& c : cands) {
        if (std::abs(c.proj.lateral) > c.lane->width) continue;
        if (!best) {
            best = &c;
            continue;
        }
        const double da = std::abs(c.proj.lateral), db = std::abs(best->proj.lateral);
        const bool ra = on_route(route_lanes, c.lane->id), rb = on_route(route_lanes, best->lane->id);
        if (std::abs(da - db) < 0.5 && ra != rb) {
            if (ra) best = &c;
            continue;
        }
        if (da < db - 1e-12 || (std::abs(da - db) <= 1e-12 && c.lane->id < best->lane->id)) best = &c;
    }
    if (!best) return std::nullopt;
    auto current = build_path(view, *best->lane, route_lanes);
    if (!current) return std::nullopt;

    LaneContext ctx;
    ctx.current = std::move(*current);
    const double w = ctx.current.width;
    // A lane's centre sits at -proj.lateral from the ego across the heading.
    const double own = best->proj.lateral;
    const Candidate* left = nullptr;
    const Candidate* right = nullptr;
    double left_err = 1e18, right_err = 1e18;
    for (const auto& c : cands) {
        if (ctx.current.contains_lane(c.lane->id)) continue;
        const double off = own - c.proj.lateral;  // candidate centre relative to current centre, left positive
        const double err = std::abs(std::abs(off) - 0.5 * (w + c.lane->width));
        if (std::abs(off) < 0.5 * w || std::abs(off) > 1.5 * w) continue;
        if (off > 0 && err < left_err) {
            left = &c;
            left_err = err;
        } else if (off < 0 && err < right_err) {
            right = &c;
            right_err = err;
        }
    }
    if (left) ctx.left = build_path(view, *left->lane, route_lanes);
    if (right) ctx.right = build_path(view, *right->lane, route_lanes);
    return ctx;
}

std::optional<PathPosition> locate_on_path(const LanePath& path, const ObjectState& obj) {
    if (path.points.size() < 2) return std::nullopt;
    const auto proj = path.project(obj.pose.position());
    if (proj.clamped_before || proj.clamped_after) return std::nullopt;
    PathPosition out;
    out.s = proj.s;
    out.lateral = proj.lateral;
    out.heading = normalize_angle(obj.pose.heading - proj.heading);
    // footprint half-width across the lane, from the rotated extent
    const double across = 0.5 * (std::abs(std::sin(out.heading)) * obj.extent.length + std::abs(std::cos(out.heading)) * obj.extent.width);
    out.in_lane = std::abs(out.lateral) < 0.5 * path.width + across - 0.3;
    return out;
}

std::optional<LeadObject> find_lead(const BevView& view, const LanePath& path) {
    std::optional<LeadObject> best;
    for (const auto& o : view.objects) {
        auto pos = locate_on_path(path, o);
        if (!pos || !pos->in_lane) continue;
        if (pos->s <= path.ego_s) continue;
        const double gap = pos->s - path.ego_s - 0.5 * view.ego_extent.length - 0.5 * o.extent.length;
        if (!best || gap < best->gap || (gap == best->gap && o.id < best->object->id)) {
            best = LeadObject{&o, gap, o.speed * std::cos(pos->heading), pos->s};
        }
    }
    return best;
}

bool is_oncoming(const ObjectState& obj) { return obj.pose.x > 0.0 && std::abs(obj.pose.heading) > 2.0; }

}  // namespace stylesim
