#include "stylesim/dcl.hpp"

#include "stylesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stylesim {

void ControllerParams::validate() const {
    std::vector<std::string> problems;
    auto need = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) problems.push_back(std::string("controller.") + name + " must be > 0");
    };
    need(desired_speed, "desired_speed");
    need(time_headway, "time_headway");
    need(min_gap, "min_gap");
    need(max_accel, "max_accel");
    need(comfort_decel, "comfort_decel");
    need(gap_accept_front, "gap_accept_front");
    need(gap_accept_rear, "gap_accept_rear");
    need(signal_stop_margin, "signal_stop_margin");
    need(lane_change_incentive, "lane_change_incentive");
    need(stanley_gain, "stanley_gain");
    need(wheelbase, "wheelbase");
    need(max_steer, "max_steer");
    if (!problems.empty()) throw ValidationError(problems);
}

json ControllerParams::to_json() const {
    return {{"desired_speed", desired_speed},       {"time_headway", time_headway},
            {"min_gap", min_gap},                   {"max_accel", max_accel},
            {"comfort_decel", comfort_decel},       {"gap_accept_front", gap_accept_front},
            {"gap_accept_rear", gap_accept_rear},   {"signal_stop_margin", signal_stop_margin},
            {"lane_change_incentive", lane_change_incentive}, {"stanley_gain", stanley_gain},
            {"wheelbase", wheelbase},               {"max_steer", max_steer}};
}

ControllerParams ControllerParams::from_json(const json& j, ControllerParams p) {
    if (!j.is_object()) throw ValidationError({"controller: expected an object"});
    std::vector<std::string> problems;
    auto take = [&](const char* key, double& field) {
        if (!j.contains(key)) return;
        if (!j[key].is_number()) {
            problems.push_back(std::string("controller.") + key + " is not a number");
            return;
        }
        field = j[key].get<double>();
    };
    take("desired_speed", p.desired_speed);
    take("time_headway", p.time_headway);
    take("min_gap", p.min_gap);
    take("max_accel", p.max_accel);
    take("comfort_decel", p.comfort_decel);
    take("gap_accept_front", p.gap_accept_front);
    take("gap_accept_rear", p.gap_accept_rear);
    take("signal_stop_margin", p.signal_stop_margin);
    take("lane_change_incentive", p.lane_change_incentive);
    take("stanley_gain", p.stanley_gain);
    take("wheelbase", p.wheelbase);
    take("max_steer", p.max_steer);
    for (const auto& [k, v] : j.items()) {
        if (!p.to_json().contains(k)) problems.push_back("controller: unknown field " + k);
    }
    if (!problems.empty()) throw ValidationError(problems);
    return p;
}

ControllerParams ControllerParams::from_json(const json& j) { return from_json(j, ControllerParams{}); }

double braking_distance(double v, double b, double margin) {
    if (v < 0.0 || !(b > 0.0)) throw ContractViolation("braking_distance: need v >= 0 and b > 0");
    return v * v / (2.0 * b) + margin;
}

double idm_accel(double v, std::optional<double> gap, double dv, const ControllerParams& p) {
    const double free = 1.0 - std::pow(v / p.desired_speed, 4);
    if (!gap) return p.max_accel * free;
    if (*gap <= 0.1) return kMinAccel;
    const double s_star = p.min_gap + std::max(0.0, v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel)));
    const double r = s_star / *gap;
    return p.max_accel * (free - r * r);
}

namespace {

struct Follow {
    std::optional<double> gap;
    double dv = 0.0;
};

Follow lead_on(const BevView& view, const LanePath& path, double v) {
    auto lead = find_lead(view, path);
    if (!lead) return {};
    return {lead->gap, v - std::max(0.0, lead->speed)};
}

// Nearest in-lane object behind the ego on a path; bumper gap.
std::optional<double> rear_gap(const BevView& view, const LanePath& path) {
    std::optional<double> best;
    for (const auto& o : view.objects) {
        auto pos = locate_on_path(path, o);
        if (!pos || !pos->in_lane || pos->s > path.ego_s) continue;
        const double gap = path.ego_s - pos->s - 0.5 * view.ego_extent.length - 0.5 * o.extent.length;
        if (!best || gap < *best) best = gap;
    }
    return best;
}

bool on_route(const Route& route, const LanePath& path) {
    // Lanes at or ahead of the ego: skip a leading predecessor if the ego is already past it.
    for (const auto& id : path.lane_ids) {
        if (std::find(route.lanes.begin(), route.lanes.end(), id) != route.lanes.end()) return true;
    }
    return route.lanes.empty();
}

// Acceleration demanded by perceived signals on the path; nullopt when no signal applies.
std::optional<double> signal_accel(const BevView& view, const LanePath& path, double v, const ControllerParams& p) {
    std::optional<double> out;
    for (const auto& s : view.signals) {
        if (s.state == SignalColor::green) continue;
        const bool controls = std::any_of(s.controlled_lanes.begin(), s.controlled_lanes.end(),
                                          [&](const std::string& id) { return path.contains_lane(id); });
        if (!controls) continue;
        const auto proj = path.project(s.stop_point.position());
        if (proj.clamped_before || proj.clamped_after) continue;
        if (std::abs(proj.lateral) > path.width) continue;
        const double d = proj.s - path.ego_s - 0.5 * view.ego_extent.length;  // front bumper to stop line
        if (d < 0.0) continue;  // already across
        if (d > braking_distance(v, p.comfort_decel, p.signal_stop_margin)) continue;
        const double room = d - p.signal_stop_margin;
        if (s.state == SignalColor::yellow) {
            // go through unless a firm but ordinary stop is possible
            if (room <= 0.0 || v * v / (2.0 * room) > 1.5 * p.comfort_decel) continue;
        }
        double a = -p.comfort_decel;
        if (v > 1e-9) a = room > 0.05 ? -v * v / (2.0 * room) : kMinAccel;
        out = out ? std::min(*out, a) : a;
    }
    return out;
}

double stanley(const LanePath& path, double v, double target_offset, const ControllerParams& p) {
    const Vec2 front{0.5 * p.wheelbase, 0.0};
    const auto proj = path.project(front);
    const double err = proj.lateral - target_offset;  // left of the target line is positive
    const double delta = normalize_angle(proj.heading) + std::atan2(-p.stanley_gain * err, v + 1.0);
    return std::clamp(delta, -p.max_steer, p.max_steer);
}

}  // namespace

DrivingDecision decide(const BevView& view, const Route& route, const ControllerParams& params) {
    DrivingDecision d;
    const double v = std::max(0.0, view.ego_speed);
    auto lanes = perceive_lanes(view, route.lanes);
    if (!lanes) {
        // lane perception lost: brake comfortably and hold the wheel straight
        d.accel = -params.comfort_decel;
        return d;
    }
    const auto& cur = lanes->current;
    const auto f_cur = lead_on(view, cur, v);
    double accel = idm_accel(v, f_cur.gap, f_cur.dv, params);
    const LanePath* steer_path = &cur;

    if (cur.marking == LaneMarking::dashed) {
        const bool cur_on_route = on_route(route, cur);
        double best_gain = params.lane_change_incentive;
        for (auto [side, opt] : {std::pair{LaneChange::left, &lanes->left}, std::pair{LaneChange::right, &lanes->right}}) {
            if (!opt->has_value()) continue;
            const LanePath& target = **opt;
            const auto f_t = lead_on(view, target, v);
            const auto rear = rear_gap(view, target);
            if (f_t.gap && *f_t.gap < params.gap_accept_front) continue;
            if (rear && *rear < params.gap_accept_rear) continue;
            double gain = idm_accel(v, f_t.gap, f_t.dv, params) - accel;
            const bool t_on_route = on_route(route, target);
            if (!cur_on_route && t_on_route) gain += 10.0;
            if (cur_on_route && !t_on_route) continue;
            // already drifting towards this lane: finish the manoeuvre
            const double toward = side == LaneChange::left ? cur.ego_lateral : -cur.ego_lateral;
            if (toward > 0.5) gain += 10.0;
            if (gain > best_gain) {
                best_gain = gain;
                d.lane_change = side;
                steer_path = &target;
            }
        }
        if (d.lane_change != LaneChange::keep) {
            const auto f_t = lead_on(view, *steer_path, v);
            accel = std::min(accel, idm_accel(v, f_t.gap, f_t.dv, params));
        }
    }

    if (auto sa = signal_accel(view, cur, v, params)) {
        d.stop_for_signal = true;
        accel = std::min(accel, *sa);
    }
    if (v <= 0.0) accel = std::max(accel, -params.comfort_decel);
    d.accel = std::clamp(accel, kMinAccel, kMaxAccel);
    if (d.lane_change == LaneChange::left) d.steer.lateral_offset = cur.width;
    if (d.lane_change == LaneChange::right) d.steer.lateral_offset = -cur.width;
    d.steer.heading_correction = stanley(*steer_path, v, 0.0, params);
    return d;
}

}  // namespace stylesim
