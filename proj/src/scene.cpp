#include "stylesim/scene.hpp"

#include "stylesim/digest.hpp"
#include "stylesim/errors.hpp"

#include <algorithm>
#include <set>

namespace stylesim {

std::string_view to_string(ObjectKind k) {
    switch (k) {
        case ObjectKind::vehicle: return "vehicle";
        case ObjectKind::pedestrian: return "pedestrian";
        case ObjectKind::static_obstacle: return "static_obstacle";
    }
    return "vehicle";
}

std::string_view to_string(LaneMarking m) { return m == LaneMarking::solid ? "solid" : "dashed"; }

std::string_view to_string(SignalColor c) {
    switch (c) {
        case SignalColor::red: return "red";
        case SignalColor::yellow: return "yellow";
        case SignalColor::green: return "green";
    }
    return "red";
}

std::optional<ObjectKind> parse_object_kind(std::string_view s) {
    if (s == "vehicle") return ObjectKind::vehicle;
    if (s == "pedestrian") return ObjectKind::pedestrian;
    if (s == "static_obstacle") return ObjectKind::static_obstacle;
    return std::nullopt;
}

std::optional<SignalColor> parse_signal_color(std::string_view s) {
    if (s == "red") return SignalColor::red;
    if (s == "yellow") return SignalColor::yellow;
    if (s == "green") return SignalColor::green;
    return std::nullopt;
}

std::string_view to_string(EntityKind k) {
    switch (k) {
        case EntityKind::vehicle: return "vehicle";
        case EntityKind::pedestrian: return "pedestrian";
        case EntityKind::static_obstacle: return "static_obstacle";
        case EntityKind::lane: return "lane";
        case EntityKind::signal: return "signal";
    }
    return "vehicle";
}

std::optional<EntityKind> parse_entity_kind(std::string_view s) {
    if (auto k = parse_object_kind(s)) return entity_kind(*k);
    if (s == "lane") return EntityKind::lane;
    if (s == "signal") return EntityKind::signal;
    return std::nullopt;
}

EntityKind entity_kind(ObjectKind k) {
    switch (k) {
        case ObjectKind::vehicle: return EntityKind::vehicle;
        case ObjectKind::pedestrian: return EntityKind::pedestrian;
        case ObjectKind::static_obstacle: return EntityKind::static_obstacle;
    }
    return EntityKind::vehicle;
}

// ---------------------------------------------------------------------------
// Signals

namespace {

SignalColor next_color(SignalColor c) {
    switch (c) {
        case SignalColor::red: return SignalColor::green;
        case SignalColor::green: return SignalColor::yellow;
        case SignalColor::yellow: return SignalColor::red;
    }
    return SignalColor::red;
}

constexpr double kPhaseEps = 1e-9;

}  // namespace

std::string check_signal_schedule(const std::vector<SignalPhase>& schedule) {
    if (schedule.empty()) return "empty phase schedule";
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (!(schedule[i].duration > 0.0)) return "phase " + std::to_string(i) + " has non-positive duration";
        const auto& next = schedule[(i + 1) % schedule.size()];
        if (schedule.size() > 1 && next.state != next_color(schedule[i].state)) {
            return "phase " + std::to_string(i) + " (" + std::string(to_string(schedule[i].state)) + ") is followed by " +
                   std::string(to_string(next.state)) + "; expected red -> green -> yellow -> red";
        }
    }
    if (schedule.size() % 3 != 0 && schedule.size() > 1) return "phase schedule does not close the red -> green -> yellow cycle";
    return {};
}

SignalColor SignalState::state_at(double offset) const {
    if (schedule.empty()) return state;
    double total = 0.0;
    for (const auto& p : schedule) total += p.duration;
    double tau = std::fmod(time_in_state + offset, total);
    if (tau < 0.0) tau += total;
    std::size_t idx = phase_index;
    for (std::size_t guard = 0; guard <= schedule.size() && tau >= schedule[idx].duration - kPhaseEps; ++guard) {
        tau -= schedule[idx].duration;
        idx = (idx + 1) % schedule.size();
    }
    return schedule[idx].state;
}

void SignalState::advance(double dt) {
    if (schedule.empty()) return;
    time_in_state += dt;
    while (time_in_state >= schedule[phase_index].duration - kPhaseEps) {
        time_in_state = std::max(0.0, time_in_state - schedule[phase_index].duration);
        phase_index = (phase_index + 1) % schedule.size();
        state = schedule[phase_index].state;
    }
}

// ---------------------------------------------------------------------------
// RoadMap

RoadMap::RoadMap(std::vector<LaneGeometry> lanes, std::vector<SignalState> signals) {
    std::vector<std::string> problems;
    for (auto& lane : lanes) {
        const std::string where = "lane '" + lane.id + "'";
        if (lane.id.empty()) problems.push_back("lane with empty id");
        if (lanes_.count(lane.id)) problems.push_back("duplicate " + where);
        if (lane.centerline.size() < 2) problems.push_back(where + " centerline needs at least 2 points");
        for (std::size_t i = 1; i < lane.centerline.size(); ++i) {
            if (lane.centerline[i] == lane.centerline[i - 1]) {
                problems.push_back(where + " has repeated centerline point " + std::to_string(i));
                break;
            }
        }
        for (const auto& p : lane.centerline) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
                problems.push_back(where + " has a non-finite point");
                break;
            }
        }
        if (!(lane.width > 0.0)) problems.push_back(where + " width must be > 0");
        Lane entry;
        entry.cum = cumulative_lengths(lane.centerline);
        entry.length = entry.cum.empty() ? 0.0 : entry.cum.back();
        for (const auto& p : lane.centerline) entry.bounds.expand(p);
        entry.geometry = std::move(lane);
        lanes_.emplace(entry.geometry.id, std::move(entry));
    }
    for (const auto& [id, lane] : lanes_) {
        for (const auto& succ : lane.geometry.successors) {
            if (!lanes_.count(succ)) problems.push_back("lane '" + id + "' successor '" + succ + "' does not exist");
        }
    }
    std::set<std::string> signal_ids;
    for (auto& sig : signals) {
        const std::string where = "signal '" + sig.id + "'";
        if (!signal_ids.insert(sig.id).second) problems.push_back("duplicate " + where);
        if (sig.controlled_lanes.empty()) problems.push_back(where + " controls no lanes");
        for (const auto& l : sig.controlled_lanes) {
            if (!lanes_.count(l)) problems.push_back(where + " controls unknown lane '" + l + "'");
        }
        if (!sig.schedule.empty()) {
            if (auto msg = check_signal_schedule(sig.schedule); !msg.empty()) problems.push_back(where + ": " + msg);
            if (sig.phase_index >= sig.schedule.size()) problems.push_back(where + " initial phase out of range");
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
    signals_ = std::move(signals);
}

const RoadMap::Lane* RoadMap::find(std::string_view id) const {
    auto it = lanes_.find(id);
    return it == lanes_.end() ? nullptr : &it->second;
}

std::optional<RoadMap::Location> RoadMap::locate_in(const Lane& lane, const Pose& pose) const {
    const auto proj = project_onto(lane.geometry.centerline, lane.cum, pose.position());
    if (proj.clamped_before || proj.clamped_after) return std::nullopt;
    const double herr = normalize_angle(pose.heading - proj.heading);
    if (std::abs(herr) > std::numbers::pi / 3.0) return std::nullopt;
    return Location{lane.geometry.id, proj.s, proj.lateral, herr};
}

std::optional<RoadMap::Location> RoadMap::locate(const Pose& pose, const std::optional<std::string>& hint) const {
    if (hint) {
        if (const Lane* h = find(*hint)) {
            std::optional<Location> best;
            auto consider = [&](const Lane& lane) {
                auto loc = locate_in(lane, pose);
                if (loc && std::abs(loc->lateral) <= 0.5 * lane.geometry.width &&
                    (!best || std::abs(loc->lateral) < std::abs(best->lateral)))
                    best = loc;
            };
            consider(*h);
            for (const auto& s : h->geometry.successors) {
                if (const Lane* sl = find(s)) consider(*sl);
            }
            if (best) return best;
        }
    }
    std::optional<Location> best;
    const Vec2 p = pose.position();
    for (const auto& [id, lane] : lanes_) {
        const double reach = 2.0 * lane.geometry.width;
        if (lane.bounds.distance_sq(p) > reach * reach) continue;
        auto loc = locate_in(lane, pose);
        if (!loc || std::abs(loc->lateral) > reach) continue;
        if (!best || std::abs(loc->lateral) < std::abs(best->lateral)) best = loc;
    }
    return best;
}

namespace {

json pose_json(const Pose& p) { return json::array({p.x, p.y, p.heading}); }

Pose parse_pose(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ValidationError({"pose must be [x, y, heading]"});
    return Pose{j[0].get<double>(), j[1].get<double>(), normalize_angle(j[2].get<double>())};
}

}  // namespace

RoadMap RoadMap::from_json(const json& doc) {
    std::vector<std::string> problems;
    std::vector<LaneGeometry> lanes;
    std::vector<SignalState> signals;
    if (!doc.is_object() || !doc.contains("lanes") || !doc["lanes"].is_array()) {
        throw ValidationError({"map: missing 'lanes' array"});
    }
    for (const auto& jl : doc["lanes"]) {
        try {
            LaneGeometry lane;
            lane.id = jl.at("id").get<std::string>();
            for (const auto& p : jl.at("centerline")) lane.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            lane.width = jl.value("width", 3.5);
            const std::string marking = jl.value("marking", "dashed");
            if (marking == "solid") {
                lane.marking = LaneMarking::solid;
            } else if (marking == "dashed") {
                lane.marking = LaneMarking::dashed;
            } else {
                problems.push_back("lane '" + lane.id + "' has unknown marking '" + marking + "'");
            }
            lane.successors = jl.value("successors", std::vector<std::string>{});
            lanes.push_back(std::move(lane));
        } catch (const json::exception& e) {
            problems.push_back(std::string("malformed lane entry: ") + e.what());
        }
    }
    if (doc.contains("signals")) {
        for (const auto& js : doc["signals"]) {
            try {
                SignalState sig;
                sig.id = js.at("id").get<std::string>();
                sig.stop_point = parse_pose(js.at("stop_point"));
                sig.controlled_lanes = js.at("controlled_lanes").get<std::vector<std::string>>();
                for (const auto& ph : js.at("phases")) {
                    auto color = parse_signal_color(ph.at(0).get<std::string>());
                    if (!color) {
                        problems.push_back("signal '" + sig.id + "' has unknown state '" + ph.at(0).get<std::string>() + "'");
                        continue;
                    }
                    sig.schedule.push_back({*color, ph.at(1).get<double>()});
                }
                sig.phase_index = js.value("initial_phase", std::size_t{0});
                if (!sig.schedule.empty() && sig.phase_index < sig.schedule.size()) {
                    sig.state = sig.schedule[sig.phase_index].state;
                    const double offset = js.value("offset_s", 0.0);
                    if (offset > 0.0) sig.advance(offset);
                }
                signals.push_back(std::move(sig));
            } catch (const json::exception& e) {
                problems.push_back(std::string("malformed signal entry: ") + e.what());
            } catch (const ValidationError& e) {
                problems.push_back(std::string("signal: ") + e.what());
            }
        }
    }
    try {
        RoadMap map(std::move(lanes), std::move(signals));
        if (!problems.empty()) throw ValidationError(problems);
        return map;
    } catch (const ValidationError& e) {
        problems.insert(problems.end(), e.problems().begin(), e.problems().end());
        std::sort(problems.begin(), problems.end());
        problems.erase(std::unique(problems.begin(), problems.end()), problems.end());
        throw ValidationError(problems);
    }
}

json RoadMap::to_json() const {
    json lanes = json::array();
    for (const auto& [id, lane] : lanes_) {
        json pts = json::array();
        for (const auto& p : lane.geometry.centerline) pts.push_back({p.x, p.y});
        lanes.push_back({{"id", id},
                         {"centerline", pts},
                         {"width", lane.geometry.width},
                         {"marking", to_string(lane.geometry.marking)},
                         {"successors", lane.geometry.successors}});
    }
    json signals = json::array();
    for (const auto& s : signals_) {
        json phases = json::array();
        for (const auto& p : s.schedule) phases.push_back({to_string(p.state), p.duration});
        signals.push_back({{"id", s.id},
                           {"stop_point", pose_json(s.stop_point)},
                           {"controlled_lanes", s.controlled_lanes},
                           {"phases", phases},
                           {"initial_phase", s.phase_index},
                           {"offset_s", s.time_in_state}});
    }
    return {{"schema_version", 1}, {"lanes", lanes}, {"signals", signals}};
}

// ---------------------------------------------------------------------------
// Scripted motion

namespace {

double interp_profile(const std::vector<std::pair<double, double>>& kf, double tau) {
    if (tau <= kf.front().first) return kf.front().second;
    if (tau >= kf.back().first) return kf.back().second;
    auto it = std::upper_bound(kf.begin(), kf.end(), tau, [](double v, const auto& k) { return v < k.first; });
    const auto& [t1, v1] = *it;
    const auto& [t0, v0] = *(it - 1);
    return v0 + (v1 - v0) * (tau - t0) / (t1 - t0);
}

/// Integral of the (non-periodic) profile over [0, tau]; exact since the profile is linear between knots.
double profile_integral(const std::vector<std::pair<double, double>>& kf, double tau) {
    if (tau <= 0.0) return 0.0;
    double acc = 0.0;
    double a = 0.0;
    for (const auto& [tk, vk] : kf) {
        if (tk <= a) continue;
        if (tk >= tau) break;
        acc += 0.5 * (interp_profile(kf, a) + vk) * (tk - a);
        a = tk;
    }
    acc += 0.5 * (interp_profile(kf, a) + interp_profile(kf, tau)) * (tau - a);
    return acc;
}

}  // namespace

double ScriptedMotion::speed_at(double t) const {
    if (keyframes.empty()) return 0.0;
    double tau = t + time_shift;
    if (period > 0.0) {
        tau = std::fmod(tau, period);
        if (tau < 0.0) tau += period;
    }
    return interp_profile(keyframes, tau);
}

double ScriptedMotion::distance_at(double t) const {
    if (keyframes.empty()) return 0.0;
    auto absolute = [&](double u) {
        if (period <= 0.0) return profile_integral(keyframes, u);
        const double cycles = std::floor(u / period);
        const double rem = u - cycles * period;
        return cycles * profile_integral(keyframes, period) + profile_integral(keyframes, rem);
    };
    return absolute(t + time_shift) - absolute(time_shift);
}

Pose ScriptedMotion::pose_at(double t) const {
    const double s = start_s + distance_at(t);
    const Vec2 p = point_at(path, cum, s);
    return {p.x, p.y, normalize_angle(heading_at(path, cum, s))};
}

std::optional<std::string> ScriptedMotion::lane_at(double t) const {
    if (lane_spans.empty()) return std::nullopt;
    const double s = start_s + distance_at(t);
    for (const auto& [end, id] : lane_spans) {
        if (s < end) return id;
    }
    return lane_spans.back().second;
}

// ---------------------------------------------------------------------------
// Scene

const ObjectState* SceneGraph::find(std::string_view id) const {
    auto it = std::lower_bound(objects.begin(), objects.end(), id,
                               [](const ObjectState& o, std::string_view v) { return o.id < v; });
    if (it == objects.end() || it->id != id) return nullptr;
    return &*it;
}

namespace {

json object_json(const ObjectState& o) {
    json j = {{"id", o.id},
              {"kind", to_string(o.kind)},
              {"pose", pose_json(o.pose)},
              {"speed", o.speed},
              {"extent", {o.extent.length, o.extent.width}}};
    if (o.lane_id) j["lane"] = *o.lane_id;
    return j;
}

json signal_json(const SignalState& s) {
    return {{"id", s.id},
            {"state", to_string(s.state)},
            {"stop_point", pose_json(s.stop_point)},
            {"time_in_state", s.time_in_state},
            {"phase", s.phase_index}};
}

}  // namespace

std::string SceneGraph::serialize() const {
    json objs = json::array();
    for (const auto& o : objects) objs.push_back(object_json(o));
    json sigs = json::array();
    for (const auto& s : signals) sigs.push_back(signal_json(s));
    return json{{"step", step_index}, {"objects", objs}, {"signals", sigs}}.dump();
}

const ObjectState* BevView::find_object(std::string_view id) const {
    for (const auto& o : objects) {
        if (o.id == id) return &o;
    }
    return nullptr;
}

json BevView::to_json() const {
    json objs = json::array();
    for (const auto& o : objects) objs.push_back(object_json(o));
    json lns = json::array();
    for (const auto& l : lanes) {
        json pts = json::array();
        for (const auto& p : l.centerline) pts.push_back({p.x, p.y});
        lns.push_back({{"id", l.id},
                       {"centerline", pts},
                       {"width", l.width},
                       {"marking", to_string(l.marking)},
                       {"s_start", l.s_start}});
    }
    json sigs = json::array();
    for (const auto& s : signals) sigs.push_back(signal_json(s));
    return {{"ego", ego_id},
            {"step", step_index},
            {"radius", radius},
            {"ego_pose", pose_json(ego_pose)},
            {"ego_speed", ego_speed},
            {"ego_extent", {ego_extent.length, ego_extent.width}},
            {"provenance", provenance == Provenance::objective ? "objective" : "modulated"},
            {"objects", objs},
            {"lanes", lns},
            {"signals", sigs}};
}

std::string BevView::digest() const { return sha256_hex(to_json().dump()); }

BevView extract_bev(const SceneGraph& scene, std::string_view ego_id, double radius) {
    if (!(radius > 0.0)) throw ContractViolation("extract_bev: radius must be > 0");
    const ObjectState* ego = scene.find(ego_id);
    if (!ego) throw MissingAgentError(std::string(ego_id));

    BevView view;
    view.ego_id = ego->id;
    view.step_index = scene.step_index;
    view.dt = scene.dt;
    view.radius = radius;
    view.ego_pose = ego->pose;
    view.ego_speed = ego->speed;
    view.ego_extent = ego->extent;
    view.provenance = Provenance::objective;

    const Vec2 center = ego->pose.position();
    const double r2 = radius * radius;
    for (const auto& o : scene.objects) {
        if (o.id == ego->id) continue;
        const Vec2 d = o.pose.position() - center;
        if (d.dot(d) > r2) continue;
        ObjectState local = o;
        local.pose = to_frame(ego->pose, o.pose);
        view.objects.push_back(std::move(local));
    }
    if (scene.map) {
        for (const auto& [id, lane] : scene.map->lanes()) {
            if (lane.bounds.distance_sq(center) > r2) continue;
            auto clipped = clip_to_disc(lane.geometry.centerline, lane.cum, center, radius);
            if (!clipped) continue;
            LaneGeometry local;
            local.id = id;
            local.width = lane.geometry.width;
            local.marking = lane.geometry.marking;
            local.successors = lane.geometry.successors;
            local.s_start = clipped->s_start;
            local.centerline.reserve(clipped->points.size());
            for (const auto& p : clipped->points) local.centerline.push_back(to_frame(ego->pose, p));
            view.lanes.push_back(std::move(local));
        }
    }
    for (const auto& s : scene.signals) {
        const Vec2 d = s.stop_point.position() - center;
        if (d.dot(d) > r2) continue;
        SignalState local = s;
        local.stop_point = to_frame(ego->pose, s.stop_point);
        view.signals.push_back(std::move(local));
    }
    return view;
}

namespace {

void sort_entities(std::vector<PerceivedEntity>& v) {
    std::sort(v.begin(), v.end(), [](const PerceivedEntity& a, const PerceivedEntity& b) {
        if (a.longitudinal != b.longitudinal) return a.longitudinal < b.longitudinal;
        return a.id < b.id;
    });
}

}  // namespace

std::vector<PerceivedEntity> identify_objects(const BevView& view) {
    std::vector<PerceivedEntity> out;
    out.reserve(view.objects.size());
    for (const auto& o : view.objects) out.push_back({entity_kind(o.kind), o.id, std::abs(o.pose.x)});
    sort_entities(out);
    return out;
}

std::vector<PerceivedEntity> identify_entities(const BevView& view) {
    auto out = identify_objects(view);
    std::vector<PerceivedEntity> sigs;
    for (const auto& s : view.signals) sigs.push_back({EntityKind::signal, s.id, std::abs(s.stop_point.x)});
    sort_entities(sigs);
    std::vector<PerceivedEntity> lanes;
    for (const auto& l : view.lanes) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& p : l.centerline) best = std::min(best, std::abs(p.x));
        lanes.push_back({EntityKind::lane, l.id, best});
    }
    sort_entities(lanes);
    out.insert(out.end(), sigs.begin(), sigs.end());
    out.insert(out.end(), lanes.begin(), lanes.end());
    return out;
}

SceneGraph advance_kinematics(const SceneGraph& scene, const std::map<std::string, DrivingDecision, std::less<>>& decisions,
                              double dt, const VehicleDynamics& dynamics) {
    if (!(dt > 0.0)) throw ContractViolation("advance_kinematics: dt must be > 0");
    SceneGraph next = scene;
    next.step_index = scene.step_index + 1;
    const double t_next = static_cast<double>(next.step_index) * scene.dt;
    for (auto& o : next.objects) {
        auto it = decisions.find(o.id);
        if (it != decisions.end()) {
            const auto& d = it->second;
            const double accel = std::clamp(d.accel, kMinAccel, kMaxAccel);
            const double v = std::max(0.0, o.speed + accel * dt);
            const double steer = std::clamp(d.steer.heading_correction, -dynamics.max_steer, dynamics.max_steer);
            const double yaw = v / dynamics.wheelbase * std::tan(steer) * dt;
            const double heading = yaw == 0.0 ? o.pose.heading : normalize_angle(o.pose.heading + yaw);
            o.pose.x += v * std::cos(heading) * dt;
            o.pose.y += v * std::sin(heading) * dt;
            o.pose.heading = heading;
            o.speed = v;
        } else if (scene.scripted) {
            auto sit = scene.scripted->find(o.id);
            if (sit != scene.scripted->end()) {
                o.pose = sit->second.pose_at(t_next);
                o.speed = sit->second.speed_at(t_next);
                o.lane_id = sit->second.lane_at(t_next);
                continue;
            }
            o.pose.x += o.speed * std::cos(o.pose.heading) * dt;
            o.pose.y += o.speed * std::sin(o.pose.heading) * dt;
        } else {
            o.pose.x += o.speed * std::cos(o.pose.heading) * dt;
            o.pose.y += o.speed * std::sin(o.pose.heading) * dt;
        }
        if (next.map && o.kind == ObjectKind::vehicle) {
            auto loc = next.map->locate(o.pose, o.lane_id);
            o.lane_id = loc ? std::optional<std::string>(loc->lane_id) : std::nullopt;
        }
    }
    for (auto& s : next.signals) s.advance(dt);
    return next;
}

// ---------------------------------------------------------------------------
// Routes

Route Route::build(const RoadMap& map, std::vector<std::string> lane_ids) {
    std::vector<std::string> problems;
    if (lane_ids.empty()) problems.push_back("route has no lanes");
    for (std::size_t i = 0; i < lane_ids.size(); ++i) {
        const auto* lane = map.find(lane_ids[i]);
        if (!lane) {
            problems.push_back("route references missing lane '" + lane_ids[i] + "'");
            continue;
        }
        if (i + 1 < lane_ids.size()) {
            const auto& succ = lane->geometry.successors;
            if (std::find(succ.begin(), succ.end(), lane_ids[i + 1]) == succ.end()) {
                problems.push_back("route lane '" + lane_ids[i] + "' is not connected to '" + lane_ids[i + 1] + "'");
            }
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    Route r;
    for (const auto& id : lane_ids) {
        const auto& pts = map.find(id)->geometry.centerline;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (!r.polyline.empty() && k == 0 && (pts[0] - r.polyline.back()).norm() < 1e-9) continue;
            r.polyline.push_back(pts[k]);
        }
    }
    r.cum = cumulative_lengths(r.polyline);
    r.total_length = r.cum.back();
    const auto& last = r.polyline.back();
    const auto& prev = r.polyline[r.polyline.size() - 2];
    r.destination = {last.x, last.y, std::atan2(last.y - prev.y, last.x - prev.x)};
    r.lanes = std::move(lane_ids);
    return r;
}

double RouteTracker::update(const Pose& pose) {
    const Vec2 p = pose.position();
    PolylineProjection proj;
    if (!started_) {
        proj = project_onto(route_->polyline, route_->cum, p);
        started_ = true;
    } else {
        const double jump = (p - last_).norm();
        proj = project_onto_window(route_->polyline, route_->cum, p, s_ - 10.0, s_ + jump + 10.0);
    }
    last_ = p;
    s_ = std::clamp(proj.s, 0.0, route_->total_length);
    best_s_ = std::max(best_s_, s_);
    return proj.lateral;
}

double route_completion(const Route& route, std::span<const Pose> trajectory) {
    if (trajectory.empty()) throw ContractViolation("route_completion: empty trajectory");
    if (!(route.total_length > 0.0)) return 0.0;
    RouteTracker tracker(route);
    for (const auto& p : trajectory) tracker.update(p);
    return std::clamp(100.0 * tracker.progress() / route.total_length, 0.0, 100.0);
}

}  // namespace stylesim
