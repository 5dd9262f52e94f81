#include "stylesim/pmbi.hpp"

#include "stylesim/errors.hpp"
#include "stylesim/lane_frame.hpp"
#include "stylesim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace stylesim {

std::string_view to_string(Dimension d) {
    switch (d) {
        case Dimension::motion: return "motion";
        case Dimension::spatial: return "spatial";
        case Dimension::temporal: return "temporal";
        case Dimension::structural: return "structural";
    }
    return "motion";
}

const ParamSpec* ModulationApiDescriptor::param(std::string_view n) const {
    for (const auto& p : params) {
        if (p.name == n) return &p;
    }
    return nullptr;
}

bool ModulationApiDescriptor::applies_to(EntityKind k) const {
    return std::find(targets.begin(), targets.end(), k) != targets.end();
}

namespace {

using EK = EntityKind;
const std::vector<EK> kMovers{EK::vehicle, EK::pedestrian};
const std::vector<EK> kObjects{EK::vehicle, EK::pedestrian, EK::static_obstacle};
const std::vector<EK> kSignals{EK::signal};
const std::vector<EK> kLanes{EK::lane};

ParamSpec factor(double lo, double hi, std::string doc) { return {"factor", lo, hi, 1.0, true, true, std::move(doc)}; }
ParamSpec probability(std::string doc) { return {"probability", 0.0, 1.0, 0.0, false, true, std::move(doc)}; }

std::vector<ModulationApiDescriptor> build_catalog() {
    std::vector<ModulationApiDescriptor> c;
    // motion
    c.push_back({"scale_perceived_speed", Dimension::motion, {factor(0.5, 2.0, "multiplier on perceived speed")}, kMovers,
                 true, true, "Perceived speed of a moving object, or of the ego itself with relation self, is multiplied by factor."});
    c.push_back({"bias_perceived_heading", Dimension::motion,
                 {{"bias_rad", -0.5, 0.5, 0.0, false, true, "added to the perceived heading, radians"}}, kMovers, false, false,
                 "Perceived heading of a moving object is rotated by bias_rad."});
    c.push_back({"freeze_motion_update", Dimension::motion,
                 {{"lag_s", 0.0, 5.0, 0.0, false, true, "age of the perceived state, seconds"},
                  {"anchored", 0.0, 1.0, 0.0, false, false, "1 = keep the state captured when the call first fired"}},
                 kMovers, false, false,
                 "Object motion is perceived from an old observation, dead-reckoned at the old speed. With anchored=1 the "
                 "observation is the one taken when the call first applied to that object."});
    c.push_back({"drop_object_velocity", Dimension::motion, {probability("per-step chance the object is seen as standing still")},
                 kMovers, false, false, "The object is sometimes perceived as stationary."});
    // spatial
    c.push_back({"scale_perceived_distance", Dimension::spatial, {factor(0.5, 2.0, "multiplier on distance from the ego")}, kObjects,
                 false, true, "Object position is scaled radially from the ego; factor > 1 makes it seem further away."});
    c.push_back({"offset_object_position", Dimension::spatial,
                 {{"dx", -5.0, 5.0, 0.0, false, true, "forward shift in the ego frame, meters"},
                  {"dy", -5.0, 5.0, 0.0, false, true, "leftward shift in the ego frame, meters"}},
                 kObjects, false, false, "Object position is shifted by (dx, dy) in the ego frame."});
    c.push_back({"scale_object_size", Dimension::spatial, {factor(0.5, 2.0, "multiplier on length and width")}, kObjects, false, true,
                 "Object footprint is scaled about its center."});
    c.push_back({"occlude_object", Dimension::spatial, {probability("chance the object is not perceived at all")}, kObjects, false,
                 false, "The object is removed from perception; the draw is fixed per call seed."});
    // temporal
    c.push_back({"shift_signal_phase", Dimension::temporal,
                 {{"shift_s", -10.0, 10.0, 0.0, false, true, "seconds added to the signal clock"}}, kSignals, false, false,
                 "The signal is perceived as it will be (or was) shift_s seconds from now."});
    c.push_back({"delay_signal_perception", Dimension::temporal,
                 {{"delay_s", 0.0, 5.0, 0.0, false, true, "perception delay, seconds"}}, kSignals, false, false,
                 "The signal is perceived as it was delay_s seconds ago."});
    c.push_back({"stretch_perceived_yellow", Dimension::temporal, {factor(1.0, 3.0, "yellow seems this many times shorter")}, kSignals,
                 false, true, "The first part of each yellow phase is perceived as green, so only 1/factor of it reads as yellow."});
    c.push_back({"misread_signal_state", Dimension::temporal, {probability("chance per second the state is misread")}, kSignals,
                 false, false, "The signal is sometimes read as the next state in its cycle."});
    // structural
    c.push_back({"curve_lane_marks", Dimension::structural,
                 {{"amplitude_m", 0.0, 2.0, 0.0, false, true, "sideways amplitude, meters"},
                  {"wavelength_m", 5.0, 200.0, 40.0, true, false, "wavelength along the lane, meters"}},
                 kLanes, false, false, "A straight centerline is perceived as a sinusoid along the lane."});
    c.push_back({"widen_perceived_lane", Dimension::structural, {factor(0.5, 2.0, "multiplier on lane width")}, kLanes, false, true,
                 "Lane width is scaled."});
    c.push_back({"shift_lane_center", Dimension::structural,
                 {{"offset_m", -2.0, 2.0, 0.0, false, true, "leftward shift of the centerline, meters"}}, kLanes, false, false,
                 "The whole centerline is shifted sideways."});
    c.push_back({"erase_lane_marking", Dimension::structural, {probability("chance the lane is not perceived")}, kLanes, false,
                 false, "The lane disappears from perception; the draw is fixed per call seed."});
    return c;
}

}  // namespace

const std::vector<ModulationApiDescriptor>& catalog() {
    static const std::vector<ModulationApiDescriptor> c = build_catalog();
    return c;
}

std::size_t catalog_index(std::string_view name) {
    const auto& c = catalog();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (c[i].name == name) return i;
    }
    return std::string_view::npos;
}

const ModulationApiDescriptor* find_api(std::string_view name) {
    const auto i = catalog_index(name);
    return i == std::string_view::npos ? nullptr : &catalog()[i];
}

std::string describe_catalog() {
    std::ostringstream out;
    for (const auto& api : catalog()) {
        out << "- " << api.name << " [" << to_string(api.dimension) << "]: " << api.doc << "\n  targets:";
        for (auto k : api.targets) out << ' ' << to_string(k);
        if (api.allows_self) out << " self";
        out << "\n";
        for (const auto& p : api.params) {
            out << "  " << p.name << " in [" << p.lo << ", " << p.hi << "], neutral " << p.neutral << ": " << p.doc << "\n";
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// scope and mapping

SceneScope summarize_scope(const BevView& view, std::span<const std::string> route_lanes) {
    SceneScope scope;
    scope.ego_id = view.ego_id;
    scope.step = view.step_index;
    for (const auto& o : view.objects) {
        scope.entities.emplace(o.id, entity_kind(o.kind));
        if (is_oncoming(o)) scope.oncoming.insert(o.id);
    }
    for (const auto& l : view.lanes) scope.entities.emplace(l.id, EntityKind::lane);
    for (const auto& s : view.signals) scope.entities.emplace(s.id, EntityKind::signal);

    if (auto lanes = perceive_lanes(view, route_lanes)) {
        const auto& path = lanes->current;
        for (const auto& id : path.lane_ids) scope.same_lane.insert(id);
        for (const auto& o : view.objects) {
            auto pos = locate_on_path(path, o);
            if (pos && pos->in_lane) scope.same_lane.insert(o.id);
        }
        if (auto lead = find_lead(view, path)) scope.lead = lead->object->id;
        for (const auto& s : view.signals) {
            for (const auto& l : s.controlled_lanes) {
                if (path.contains_lane(l)) scope.path_signals.insert(s.id);
            }
        }
    }
    return scope;
}

PerceivedEntity self_entity(const BevView& view) { return {EntityKind::vehicle, view.ego_id, 0.0}; }

bool selector_matches(const Selector& sel, const PerceivedEntity& entity, const SceneScope& scope) {
    const bool is_self = entity.id == scope.ego_id;
    if (is_self) return sel.relation == Relation::self;
    if (sel.relation == Relation::self) return false;
    if (sel.target_id && *sel.target_id != entity.id) return false;
    if (sel.kind && *sel.kind != entity.kind) return false;
    switch (sel.relation.value_or(Relation::any)) {
        case Relation::any: return true;
        case Relation::lead: return scope.lead && *scope.lead == entity.id;
        case Relation::same_lane:
            return entity.kind == EntityKind::signal ? scope.path_signals.count(entity.id) > 0 : scope.same_lane.count(entity.id) > 0;
        case Relation::oncoming: return scope.oncoming.count(entity.id) > 0;
        case Relation::self: return false;
    }
    return false;
}

MappingResult map_policy_to_calls(const PerceivedEntity& entity, const PolicySet& policies, const SceneScope& scope,
                                  const std::array<double, 3>& effective) {
    MappingResult out;
    const bool is_self = entity.id == scope.ego_id;
    for (Layer layer : {Layer::L1, Layer::L2, Layer::L3}) {
        const auto& policy = policies.at(layer);
        if (!policy) continue;
        const double eff = effective[static_cast<int>(layer)];
        for (const auto& tmpl : policy->fragment) {
            const auto* api = find_api(tmpl.api);
            if (!api) {
                out.errors.push_back("unknown api \"" + tmpl.api + "\" in " + std::string(to_string(layer)) + " policy");
                continue;
            }
            if (is_self ? !api->allows_self : !api->applies_to(entity.kind)) continue;
            if (!selector_matches(tmpl.selector, entity, scope)) continue;

            ApiCall call;
            call.api = api->name;
            call.layer = layer;
            call.selector.relation = tmpl.selector.relation;
            if (!is_self) {
                call.selector.kind = entity.kind;
                call.selector.target_id = entity.id;
            }
            for (const auto& p : api->params) {
                auto it = tmpl.params.find(p.name);
                double v = it == tmpl.params.end() ? p.neutral : it->second;
                if (p.scales_with_intensity && policy->intensity > 0.0) {
                    v = p.neutral + (v - p.neutral) * (eff / policy->intensity);
                }
                call.params[p.name] = std::clamp(v, p.lo, p.hi);
            }
            call.call_seed = derive_seed(derive_seed(policy->seed, api->name), entity.id);
            out.calls.push_back(std::move(call));
        }
    }
    return out;
}

MappingResult map_policy_to_calls(const PerceivedEntity& entity, const PolicySet& policies, const SceneScope& scope) {
    std::array<double, 3> eff{};
    for (Layer l : {Layer::L1, Layer::L2, Layer::L3}) {
        if (policies.at(l)) eff[static_cast<int>(l)] = policies.at(l)->intensity;
    }
    return map_policy_to_calls(entity, policies, scope, eff);
}

void order_script(Script& script) {
    std::stable_sort(script.calls.begin(), script.calls.end(), [](const ApiCall& a, const ApiCall& b) {
        if (a.layer != b.layer) return a.layer < b.layer;
        return catalog_index(a.api) < catalog_index(b.api);
    });
    std::vector<ApiCall> kept;
    kept.reserve(script.calls.size());
    for (auto& c : script.calls) {
        const bool dup = std::any_of(kept.begin(), kept.end(), [&](const ApiCall& k) {
            return k.layer == c.layer && k.api == c.api && k.selector == c.selector;
        });
        if (!dup) kept.push_back(std::move(c));
    }
    script.calls = std::move(kept);
}

// ---------------------------------------------------------------------------
// consistency guard

std::string ConsistencyState::key(Layer layer, std::string_view api, std::string_view param) {
    return std::string(to_string(layer)) + "/" + std::string(api) + "/" + std::string(param);
}

std::map<std::string, double> enforce_consistency(ConsistencyState& state, const ApiCall& proposed) {
    std::map<std::string, double> out = proposed.params;
    const auto* api = find_api(proposed.api);
    if (!api) return out;
    // A hair inside the bound so the logged ratio never rounds past delta.
    const double bound = state.delta * (1.0 - 1e-9);
    for (auto& [name, value] : out) {
        const auto* spec = api->param(name);
        if (!spec || !spec->guarded || !(value > 0.0)) continue;
        const auto k = ConsistencyState::key(proposed.layer, proposed.api, name);
        auto it = state.last.find(k);
        if (it != state.last.end()) {
            const double prev = it->second;
            value = std::clamp(value, prev * std::exp(-bound), prev * std::exp(bound));
            value = std::clamp(value, spec->lo, spec->hi);
        }
        state.last[k] = value;
    }
    return out;
}

// ---------------------------------------------------------------------------
// perception memory

void PerceptionMemory::observe(const BevView& objective) {
    const std::int64_t t = objective.step_index;
    for (const auto& o : objective.objects) {
        if (o.kind == ObjectKind::static_obstacle) continue;
        auto& h = history[o.id];
        if (!h.empty() && h.back().step >= t) continue;
        h.push_back({t, from_frame(objective.ego_pose, o.pose), o.speed});
    }
    for (auto it = history.begin(); it != history.end();) {
        auto& h = it->second;
        while (!h.empty() && h.front().step < t - horizon_steps) h.pop_front();
        it = h.empty() ? history.erase(it) : std::next(it);
    }
    for (auto it = anchors.begin(); it != anchors.end();) {
        it = it->second < t - 2 * horizon_steps ? anchors.erase(it) : std::next(it);
    }
}

const PerceptionMemory::Sample* PerceptionMemory::at_or_before(std::string_view id, std::int64_t step) const {
    auto it = history.find(id);
    if (it == history.end() || it->second.empty()) return nullptr;
    const auto& h = it->second;
    const Sample* best = &h.front();
    for (const auto& s : h) {
        if (s.step > step) break;
        best = &s;
    }
    return best;
}

// ---------------------------------------------------------------------------
// interpreter

namespace {

double param_or(const ApiCall& c, std::string_view name) {
    if (auto it = c.params.find(std::string(name)); it != c.params.end()) return it->second;
    if (const auto* api = find_api(c.api)) {
        if (const auto* p = api->param(name)) return p->neutral;
    }
    return 0.0;
}

double draw(std::uint64_t seed, std::uint64_t counter) { return unit_interval(derive_seed(seed, counter)); }

/// The signal as it appears `offset` seconds from now, clock fields included.
SignalState signal_shifted(const SignalState& s, double offset) {
    if (s.schedule.empty() || offset == 0.0) return s;
    double total = 0.0;
    for (const auto& p : s.schedule) total += p.duration;
    double fwd = std::fmod(offset, total);
    if (fwd < 0.0) fwd += total;
    SignalState out = s;
    out.advance(fwd);
    return out;
}

double phase_duration(const SignalState& s) {
    return s.schedule.empty() ? 0.0 : s.schedule[s.phase_index % s.schedule.size()].duration;
}

Vec2 left_normal(const std::vector<Vec2>& pts, std::size_t i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = std::min(i + 1, pts.size() - 1);
    Vec2 d = pts[b] - pts[a];
    const double n = d.norm();
    if (n <= 0.0) return {0.0, 1.0};
    return {-d.y / n, d.x / n};
}

void curve_lane(LaneGeometry& lane, double amplitude, double wavelength) {
    auto pts = densify(lane.centerline, 1.0);
    const auto cum = cumulative_lengths(pts);
    std::vector<Vec2> out(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double s = lane.s_start + cum[i];
        out[i] = pts[i] + left_normal(pts, i) * (amplitude * std::sin(2.0 * std::numbers::pi * s / wavelength));
    }
    lane.centerline = std::move(out);
}

void shift_lane(LaneGeometry& lane, double offset) {
    std::vector<Vec2> out(lane.centerline.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = lane.centerline[i] + left_normal(lane.centerline, i) * offset;
    lane.centerline = std::move(out);
}

struct Interpreter {
    BevView& view;
    PerceptionMemory& memory;

    void freeze(ObjectState& o, const ApiCall& c) {
        const std::int64_t t = view.step_index;
        std::int64_t lag = 0;
        if (param_or(c, "anchored") >= 0.5) {
            auto [it, inserted] = memory.anchors.emplace(c.call_seed, t);
            lag = t - it->second;
        } else {
            lag = std::llround(param_or(c, "lag_s") / view.dt);
        }
        if (lag <= 0) return;
        const auto* now = memory.at_or_before(o.id, t);
        const auto* old = memory.at_or_before(o.id, t - lag);
        if (!now || !old || now->step != t) return;
        const double age = static_cast<double>(t - old->step) * view.dt;
        const Pose stale_world{old->pose.x + old->speed * age * std::cos(old->pose.heading),
                               old->pose.y + old->speed * age * std::sin(old->pose.heading), old->pose.heading};
        const Pose stale = to_frame(view.ego_pose, stale_world);
        const Pose cur = to_frame(view.ego_pose, now->pose);
        // applied as a delta so earlier distortions of the same object survive
        o.pose.x += stale.x - cur.x;
        o.pose.y += stale.y - cur.y;
        o.pose.heading = normalize_angle(o.pose.heading + normalize_angle(stale.heading - cur.heading));
        o.speed = std::max(0.0, o.speed + old->speed - now->speed);
    }

    void on_object(ObjectState& o, const ApiCall& c, bool& remove) {
        const auto& api = c.api;
        if (api == "scale_perceived_speed") {
            o.speed *= param_or(c, "factor");
        } else if (api == "bias_perceived_heading") {
            o.pose.heading = normalize_angle(o.pose.heading + param_or(c, "bias_rad"));
        } else if (api == "freeze_motion_update") {
            freeze(o, c);
        } else if (api == "drop_object_velocity") {
            if (draw(c.call_seed, static_cast<std::uint64_t>(view.step_index)) < param_or(c, "probability")) o.speed = 0.0;
        } else if (api == "scale_perceived_distance") {
            const double f = param_or(c, "factor");
            o.pose.x *= f;
            o.pose.y *= f;
        } else if (api == "offset_object_position") {
            o.pose.x += param_or(c, "dx");
            o.pose.y += param_or(c, "dy");
        } else if (api == "scale_object_size") {
            const double f = param_or(c, "factor");
            o.extent.length *= f;
            o.extent.width *= f;
        } else if (api == "occlude_object") {
            if (draw(c.call_seed, 0) < param_or(c, "probability")) remove = true;
        }
    }

    void on_signal(SignalState& s, const ApiCall& c) {
        const auto& api = c.api;
        if (api == "shift_signal_phase") {
            s = signal_shifted(s, param_or(c, "shift_s"));
        } else if (api == "delay_signal_perception") {
            s = signal_shifted(s, -param_or(c, "delay_s"));
        } else if (api == "stretch_perceived_yellow") {
            const double f = std::max(1.0, param_or(c, "factor"));
            if (s.state == SignalColor::yellow && s.time_in_state < (1.0 - 1.0 / f) * phase_duration(s)) {
                s.state = SignalColor::green;
            }
        } else if (api == "misread_signal_state") {
            const auto block = static_cast<std::uint64_t>(view.step_index / std::max<std::int64_t>(1, std::llround(1.0 / view.dt)));
            if (draw(c.call_seed, block) < param_or(c, "probability")) {
                switch (s.state) {
                    case SignalColor::red: s.state = SignalColor::green; break;
                    case SignalColor::green: s.state = SignalColor::yellow; break;
                    case SignalColor::yellow: s.state = SignalColor::red; break;
                }
            }
        }
    }

    void on_lane(LaneGeometry& l, const ApiCall& c, bool& remove) {
        const auto& api = c.api;
        if (api == "curve_lane_marks") {
            const double a = param_or(c, "amplitude_m");
            if (a != 0.0) curve_lane(l, a, std::max(1e-3, param_or(c, "wavelength_m")));
        } else if (api == "widen_perceived_lane") {
            l.width *= param_or(c, "factor");
        } else if (api == "shift_lane_center") {
            const double off = param_or(c, "offset_m");
            if (off != 0.0) shift_lane(l, off);
        } else if (api == "erase_lane_marking") {
            if (draw(c.call_seed, 0) < param_or(c, "probability")) remove = true;
        }
    }

    // Returns false when nothing in the view matched.
    bool apply(const ApiCall& c, const ModulationApiDescriptor& api) {
        const auto& sel = c.selector;
        if (sel.relation == Relation::self) {
            if (!api.allows_self) return false;
            if (c.api == "scale_perceived_speed") view.ego_speed *= param_or(c, "factor");
            return true;
        }
        auto wanted = [&](EntityKind k, const std::string& id) {
            if (!api.applies_to(k)) return false;
            if (sel.kind && *sel.kind != k) return false;
            return !sel.target_id || *sel.target_id == id;
        };
        bool hit = false;
        for (auto it = view.objects.begin(); it != view.objects.end();) {
            if (!wanted(entity_kind(it->kind), it->id)) {
                ++it;
                continue;
            }
            hit = true;
            bool remove = false;
            on_object(*it, c, remove);
            it = remove ? view.objects.erase(it) : std::next(it);
        }
        for (auto& s : view.signals) {
            if (!wanted(EntityKind::signal, s.id)) continue;
            hit = true;
            on_signal(s, c);
        }
        for (auto it = view.lanes.begin(); it != view.lanes.end();) {
            if (!wanted(EntityKind::lane, it->id)) {
                ++it;
                continue;
            }
            hit = true;
            bool remove = false;
            on_lane(*it, c, remove);
            it = remove ? view.lanes.erase(it) : std::next(it);
        }
        return hit;
    }
};

}  // namespace

ApplyResult apply_script_ex(const BevView& view, const Script& script, ModulationState& state) {
    if (view.provenance != Provenance::objective) throw ContractViolation("apply_script expects an objective view");
    ApplyResult out{view, {}};
    out.view.provenance = Provenance::modulated;
    if (script.calls.empty()) return out;
    state.memory.observe(view);
    Interpreter interp{out.view, state.memory};
    for (std::size_t i = 0; i < script.calls.size(); ++i) {
        const auto& c = script.calls[i];
        const auto* api = find_api(c.api);
        if (!api) {
            out.skipped.push_back({i, "unknown api " + c.api});
            continue;
        }
        if (!interp.apply(c, *api)) {
            out.skipped.push_back({i, "target not in view"});
        }
    }
    return out;
}

BevView apply_script(const BevView& view, const Script& script, ModulationState& state) {
    return apply_script_ex(view, script, state).view;
}

// ---------------------------------------------------------------------------
// divergence

bool DivergenceReport::all_zero() const {
    return mean_displacement == 0.0 && mean_speed_deviation == 0.0 && ego_speed_deviation == 0.0 &&
           mean_size_deviation == 0.0 && signal_disagreements == 0 && lane_deviation_rms == 0.0 && occluded == 0 &&
           lanes_missing == 0;
}

json DivergenceReport::to_json() const {
    return {{"mean_displacement", mean_displacement}, {"mean_speed_deviation", mean_speed_deviation},
            {"ego_speed_deviation", ego_speed_deviation}, {"mean_size_deviation", mean_size_deviation},
            {"signal_disagreements", signal_disagreements}, {"lane_deviation_rms", lane_deviation_rms},
            {"occluded", occluded}, {"lanes_missing", lanes_missing}};
}

DivergenceReport perception_divergence(const BevView& objective, const BevView& modulated) {
    if (objective.ego_id != modulated.ego_id) throw ContractViolation("perception_divergence: views belong to different agents");
    if (objective.step_index != modulated.step_index) throw ContractViolation("perception_divergence: views are from different steps");
    DivergenceReport r;
    r.ego_speed_deviation = std::abs(modulated.ego_speed - objective.ego_speed);

    int matched = 0;
    double disp = 0.0, dv = 0.0, dsize = 0.0;
    for (const auto& o : objective.objects) {
        const auto* m = modulated.find_object(o.id);
        if (!m) {
            ++r.occluded;
            continue;
        }
        ++matched;
        disp += (m->pose.position() - o.pose.position()).norm() + std::abs(normalize_angle(m->pose.heading - o.pose.heading));
        dv += std::abs(m->speed - o.speed);
        dsize += std::abs(m->extent.length - o.extent.length) + std::abs(m->extent.width - o.extent.width);
    }
    if (matched > 0) {
        r.mean_displacement = disp / matched;
        r.mean_speed_deviation = dv / matched;
        r.mean_size_deviation = dsize / matched;
    }

    for (const auto& s : objective.signals) {
        auto it = std::find_if(modulated.signals.begin(), modulated.signals.end(), [&](const SignalState& m) { return m.id == s.id; });
        if (it == modulated.signals.end() || it->state != s.state) ++r.signal_disagreements;
    }

    double sq = 0.0;
    std::size_t n = 0;
    for (const auto& l : objective.lanes) {
        auto it = std::find_if(modulated.lanes.begin(), modulated.lanes.end(), [&](const LaneGeometry& m) { return m.id == l.id; });
        if (it == modulated.lanes.end()) {
            ++r.lanes_missing;
            continue;
        }
        if (*it == l) {
            n += l.centerline.size();
            continue;
        }
        const auto cum = cumulative_lengths(l.centerline);
        for (const auto& p : it->centerline) {
            const double d = project_onto(l.centerline, cum, p).lateral;
            sq += d * d;
            ++n;
        }
        const double dw = it->width - l.width;
        sq += dw * dw;
        ++n;
    }
    if (n > 0) r.lane_deviation_rms = std::sqrt(sq / static_cast<double>(n));
    return r;
}

}  // namespace stylesim
