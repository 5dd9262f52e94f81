#include "stylesim/events.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace stylesim {

std::string_view to_string(InfractionKind k) {
    switch (k) {
        case InfractionKind::collision_vehicle: return "collision_vehicle";
        case InfractionKind::collision_pedestrian: return "collision_pedestrian";
        case InfractionKind::collision_static: return "collision_static";
        case InfractionKind::red_light: return "red_light";
        case InfractionKind::route_deviation: return "route_deviation";
    }
    return "collision_vehicle";
}

std::optional<InfractionKind> parse_infraction_kind(std::string_view s) {
    for (auto k : {InfractionKind::collision_vehicle, InfractionKind::collision_pedestrian,
                   InfractionKind::collision_static, InfractionKind::red_light, InfractionKind::route_deviation}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

json InfractionEvent::to_json() const {
    json snap = json::array();
    for (const auto& o : snapshot) {
        snap.push_back({{"id", o.id}, {"pose", {o.pose.x, o.pose.y, o.pose.heading}}, {"speed", o.speed},
                        {"extent", {o.extent.length, o.extent.width}}});
    }
    return {{"step", step}, {"agents", agents}, {"kind", to_string(kind)}, {"snapshot", snap}};
}

InfractionEvent InfractionEvent::from_json(const json& j) {
    InfractionEvent e;
    e.step = j.at("step").get<std::int64_t>();
    e.agents = j.at("agents").get<std::vector<std::string>>();
    e.kind = parse_infraction_kind(j.at("kind").get<std::string>()).value_or(InfractionKind::collision_vehicle);
    for (const auto& s : j.value("snapshot", json::array())) {
        ObjectState o;
        o.id = s.at("id").get<std::string>();
        o.pose = {s["pose"][0].get<double>(), s["pose"][1].get<double>(), s["pose"][2].get<double>()};
        o.speed = s.value("speed", 0.0);
        o.extent = {s["extent"][0].get<double>(), s["extent"][1].get<double>()};
        e.snapshot.push_back(o);
    }
    return e;
}

namespace {

std::array<Vec2, 4> corners(const Pose& p, const Extent& e) {
    const Vec2 c = p.position();
    const Vec2 u = rotate(Vec2{0.5 * e.length, 0.0}, p.heading);
    const Vec2 v = rotate(Vec2{0.0, 0.5 * e.width}, p.heading);
    return {c + u + v, c + u - v, c - u - v, c - u + v};
}

bool separated_on(const Vec2& axis, const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
    double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY;
    for (const auto& p : a) {
        amin = std::min(amin, axis.dot(p));
        amax = std::max(amax, axis.dot(p));
    }
    for (const auto& p : b) {
        bmin = std::min(bmin, axis.dot(p));
        bmax = std::max(bmax, axis.dot(p));
    }
    return amax <= bmin || bmax <= amin;
}

}  // namespace

bool rectangles_overlap(const Pose& a, const Extent& ea, const Pose& b, const Extent& eb) {
    const double ra = 0.5 * std::hypot(ea.length, ea.width);
    const double rb = 0.5 * std::hypot(eb.length, eb.width);
    if ((a.position() - b.position()).norm() > ra + rb) return false;
    const auto ca = corners(a, ea);
    const auto cb = corners(b, eb);
    for (double h : {a.heading, a.heading + 0.5 * M_PI, b.heading, b.heading + 0.5 * M_PI}) {
        if (separated_on(Vec2{std::cos(h), std::sin(h)}, ca, cb)) return false;
    }
    return true;
}

std::vector<InfractionEvent> detect_collisions(const SceneGraph& scene) {
    std::vector<InfractionEvent> out;
    const auto& objs = scene.objects;
    for (std::size_t i = 0; i < objs.size(); ++i) {
        for (std::size_t j = i + 1; j < objs.size(); ++j) {
            const auto& a = objs[i];
            const auto& b = objs[j];
            const bool a_veh = a.kind == ObjectKind::vehicle;
            const bool b_veh = b.kind == ObjectKind::vehicle;
            if (!a_veh && !b_veh) continue;
            if (!rectangles_overlap(a.pose, a.extent, b.pose, b.extent)) continue;
            InfractionEvent e;
            e.step = scene.step_index;
            e.agents = {a.id, b.id};
            const ObjectKind other = a_veh ? b.kind : a.kind;
            e.kind = other == ObjectKind::pedestrian        ? InfractionKind::collision_pedestrian
                     : other == ObjectKind::static_obstacle ? InfractionKind::collision_static
                                                            : InfractionKind::collision_vehicle;
            e.snapshot = {a, b};
            out.push_back(std::move(e));
        }
    }
    return out;
}

bool crosses_stop_line(const SignalState& signal, const Vec2& before, const Vec2& after, double half_width) {
    const Pose& sp = signal.stop_point;
    const Vec2 b = to_frame(sp, before);
    const Vec2 a = to_frame(sp, after);
    if (!(b.x < 0.0 && a.x >= 0.0)) return false;
    const double f = -b.x / (a.x - b.x);
    const double lat = b.y + f * (a.y - b.y);
    return std::abs(lat) <= half_width;
}

std::vector<InfractionEvent> detect_red_light(const SceneGraph& before, const SceneGraph& after,
                                              const std::vector<std::string>& controlled, double wheelbase) {
    std::vector<InfractionEvent> out;
    for (const auto& id : controlled) {
        const ObjectState* b = before.find(id);
        const ObjectState* a = after.find(id);
        if (!b || !a) continue;
        const Vec2 fb = b->pose.position() + rotate(Vec2{0.5 * wheelbase, 0.0}, b->pose.heading);
        const Vec2 fa = a->pose.position() + rotate(Vec2{0.5 * wheelbase, 0.0}, a->pose.heading);
        for (const auto& s : before.signals) {
            if (s.state != SignalColor::red) continue;
            if (!b->lane_id || std::find(s.controlled_lanes.begin(), s.controlled_lanes.end(), *b->lane_id) ==
                                   s.controlled_lanes.end()) {
                continue;
            }
            double half = 1.75;
            if (before.map) {
                if (const auto* lane = before.map->find(*b->lane_id)) half = 0.5 * lane->geometry.width;
            }
            if (!crosses_stop_line(s, fb, fa, half)) continue;
            InfractionEvent e;
            e.step = after.step_index;
            e.agents = {id};
            e.kind = InfractionKind::red_light;
            e.snapshot = {*a};
            out.push_back(std::move(e));
        }
    }
    return out;
}

}  // namespace stylesim
