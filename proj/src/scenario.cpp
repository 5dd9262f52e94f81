#include "stylesim/scenario.hpp"

#include "stylesim/digest.hpp"
#include "stylesim/errors.hpp"
#include "stylesim/rng.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <fstream>
#include <set>
#include <sstream>

namespace stylesim {

std::string_view to_string(AgentRole r) {
    return r == AgentRole::ego_under_test ? "ego_under_test" : "background_driver";
}

json PenaltyTable::to_json() const {
    return {{"collision_pedestrian", collision_pedestrian},
            {"collision_vehicle", collision_vehicle},
            {"collision_static", collision_static},
            {"red_light", red_light},
            {"route_deviation", route_deviation}};
}

PenaltyTable PenaltyTable::from_json(const json& j) {
    PenaltyTable p;
    std::vector<std::string> problems;
    for (const auto& [k, v] : j.items()) {
        double* field = nullptr;
        if (k == "collision_pedestrian") field = &p.collision_pedestrian;
        if (k == "collision_vehicle") field = &p.collision_vehicle;
        if (k == "collision_static") field = &p.collision_static;
        if (k == "red_light") field = &p.red_light;
        if (k == "route_deviation") field = &p.route_deviation;
        if (!field) {
            problems.push_back("penalties: unknown kind " + k);
            continue;
        }
        if (!v.is_number() || !(v.get<double>() > 0.0 && v.get<double>() <= 1.0)) {
            problems.push_back("penalties." + k + " must be in (0, 1]");
            continue;
        }
        *field = v.get<double>();
    }
    if (!problems.empty()) throw ValidationError(problems);
    return p;
}

std::string SimulationConfig::digest() const { return sha256_hex(source.dump()); }

const AgentConfig* SimulationConfig::agent(std::string_view id) const {
    for (const auto& a : agents) {
        if (a.id == id) return &a;
    }
    return nullptr;
}

std::uint64_t agent_seed(std::uint64_t run_seed, std::string_view agent_id) {
    return derive_seed(derive_seed(run_seed, "agent"), agent_id);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw IoError(path + ": not valid JSON (" + e.what() + ")");
    }
}

namespace {

const std::set<std::string> kTopKeys = {"schema_version", "name",     "map",          "dt",        "max_steps",
                                        "run_seed",       "schedule", "provider",     "controller", "bev_radius",
                                        "agents",         "objects",  "stop_when_complete", "penalties",
                                        "spawn_jitter_m"};
const std::set<std::string> kScheduleKeys = {"l2_period", "l3_rate", "ramp_steps", "pulse_amplitude", "pulse_steps",
                                             "guard_delta"};

std::optional<Pose> pose_from(const json& j) {
    if (!j.is_array() || j.size() != 3) return std::nullopt;
    for (const auto& v : j) {
        if (!v.is_number()) return std::nullopt;
    }
    return Pose{j[0].get<double>(), j[1].get<double>(), normalize_angle(j[2].get<double>())};
}

std::optional<Extent> extent_from(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) return std::nullopt;
    Extent e{j[0].get<double>(), j[1].get<double>()};
    if (!(e.length > 0.0 && e.width > 0.0)) return std::nullopt;
    return e;
}

std::optional<StyleTriplet> style_from(const json& j) {
    if (j.is_string()) return StyleTriplet::parse_label(j.get<std::string>());
    if (j.is_array() && j.size() == 3 && j[0].is_string() && j[1].is_string() && j[2].is_string()) {
        return StyleTriplet{j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
    }
    return std::nullopt;
}

// Lane path for scripted objects and spawns: concatenated centerlines plus lane end offsets.
struct LaneChain {
    std::vector<Vec2> pts;
    std::vector<double> cum;
    std::vector<std::pair<double, std::string>> spans;
};

LaneChain chain(const RoadMap& map, const std::vector<std::string>& ids) {
    Route r = Route::build(map, ids);
    LaneChain c{r.polyline, r.cum, {}};
    double end = 0.0;
    for (const auto& id : ids) {
        end += map.find(id)->length;
        c.spans.emplace_back(end, id);
    }
    return c;
}

double number_or(const json& j, const char* key, double fallback, std::vector<std::string>& problems,
                 const std::string& where) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) {
        problems.push_back(where + "." + key + " is not a number");
        return fallback;
    }
    return j[key].get<double>();
}

}  // namespace

SimulationConfig parse_config(const json& doc_in, const std::string& base_dir, const TraitRegistry& registry) {
    std::vector<std::string> problems;
    if (!doc_in.is_object()) throw ValidationError({"scenario: expected a JSON object"});
    json doc = doc_in;
    SimulationConfig cfg;

    const int version = doc.value("schema_version", kSchemaVersion);
    if (version != kSchemaVersion) problems.push_back("schema_version " + std::to_string(version) + " is not supported");
    for (const auto& [k, v] : doc.items()) {
        if (!kTopKeys.count(k)) problems.push_back("unknown field " + k);
    }
    cfg.name = doc.value("name", std::string{"scenario"});

    cfg.dt = number_or(doc, "dt", kDefaultDt, problems, "scenario");
    if (!(cfg.dt > 0.0)) problems.push_back("dt must be > 0");
    if (doc.contains("max_steps") && !doc["max_steps"].is_number_integer()) {
        problems.push_back("max_steps must be an integer");
    } else {
        cfg.max_steps = doc.value("max_steps", std::int64_t{1000});
    }
    if (cfg.max_steps < 1) problems.push_back("max_steps must be >= 1");
    if (doc.contains("run_seed") && !doc["run_seed"].is_number_unsigned() && !doc["run_seed"].is_number_integer()) {
        problems.push_back("run_seed must be a non-negative integer");
    } else {
        cfg.run_seed = doc.value("run_seed", std::uint64_t{0});
    }
    cfg.bev_radius = number_or(doc, "bev_radius", kDefaultBevRadius, problems, "scenario");
    if (!(cfg.bev_radius > 0.0)) problems.push_back("bev_radius must be > 0");
    cfg.stop_when_complete = doc.value("stop_when_complete", true);

    // schedule
    cfg.schedule.dt = cfg.dt;
    if (doc.contains("schedule")) {
        const auto& s = doc["schedule"];
        if (!s.is_object()) {
            problems.push_back("schedule must be an object");
        } else {
            for (const auto& [k, v] : s.items()) {
                if (!kScheduleKeys.count(k)) problems.push_back("schedule: unknown field " + k);
            }
            cfg.schedule.l2_period = static_cast<std::int64_t>(number_or(s, "l2_period", 2000, problems, "schedule"));
            cfg.schedule.l3_rate = number_or(s, "l3_rate", 0.064, problems, "schedule");
            cfg.schedule.ramp_steps = static_cast<std::int64_t>(number_or(s, "ramp_steps", 4000, problems, "schedule"));
            cfg.schedule.pulse_amplitude = number_or(s, "pulse_amplitude", 0.2, problems, "schedule");
            cfg.schedule.pulse_steps = static_cast<std::int64_t>(number_or(s, "pulse_steps", 40, problems, "schedule"));
            cfg.guard_delta = number_or(s, "guard_delta", 0.1, problems, "schedule");
        }
    }
    if (cfg.schedule.l2_period < 1) problems.push_back("schedule.l2_period must be >= 1");
    if (!(cfg.schedule.l3_rate >= 0.0)) problems.push_back("schedule.l3_rate must be >= 0");
    if (!(cfg.guard_delta > 0.0)) problems.push_back("schedule.guard_delta must be > 0");

    if (doc.contains("provider")) {
        const auto& p = doc["provider"];
        if (!p.is_object()) {
            problems.push_back("provider must be an object");
        } else {
            cfg.provider.enabled = p.value("enabled", false);
            cfg.provider.endpoint = p.value("endpoint", std::string{});
            cfg.provider.path = p.value("path", std::string{"/v1/completions"});
            cfg.provider.model = p.value("model", std::string{});
            cfg.provider.async = p.value("async", false);
        }
    }

    if (doc.contains("controller")) {
        try {
            cfg.controller = ControllerParams::from_json(doc["controller"]);
            cfg.controller.validate();
        } catch (const ValidationError& e) {
            problems.insert(problems.end(), e.problems().begin(), e.problems().end());
        }
    }
    if (doc.contains("penalties")) {
        try {
            cfg.penalties = PenaltyTable::from_json(doc["penalties"]);
        } catch (const ValidationError& e) {
            problems.insert(problems.end(), e.problems().begin(), e.problems().end());
        }
    }

    // map: a path is inlined so the resolved document stands alone
    if (!doc.contains("map")) {
        problems.push_back("missing map");
    } else {
        json map_doc = doc["map"];
        if (map_doc.is_string()) {
            std::filesystem::path p(map_doc.get<std::string>());
            if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
            map_doc = read_json_file(p.string());
        }
        try {
            cfg.map = std::make_shared<const RoadMap>(RoadMap::from_json(map_doc));
            doc["map"] = cfg.map->to_json();
        } catch (const ValidationError& e) {
            for (const auto& m : e.problems()) problems.push_back("map: " + m);
        }
    }

    const double jitter = number_or(doc, "spawn_jitter_m", 0.0, problems, "scenario");
    std::set<std::string> ids;
    std::set<std::uint64_t> seeds;

    if (!doc.contains("agents") || !doc["agents"].is_array() || doc["agents"].empty()) {
        problems.push_back("agents must be a non-empty array");
    } else {
        for (std::size_t i = 0; i < doc["agents"].size(); ++i) {
            const auto& ja = doc["agents"][i];
            std::string where = "agents[" + std::to_string(i) + "]";
            if (!ja.is_object() || !ja.contains("id") || !ja["id"].is_string()) {
                problems.push_back(where + ": missing id");
                continue;
            }
            AgentConfig a;
            a.id = ja["id"].get<std::string>();
            where = "agent " + a.id;
            if (!ids.insert(a.id).second) problems.push_back(where + ": duplicate id");
            for (const auto& [k, v] : ja.items()) {
                static const std::set<std::string> keys = {"id", "style", "route", "spawn", "seed", "role", "extent"};
                if (!keys.count(k)) problems.push_back(where + ": unknown field " + k);
            }

            auto style = ja.contains("style") ? style_from(ja["style"]) : StyleTriplet{};
            if (!style) {
                problems.push_back(where + ": style must be [l1, l2, l3]");
            } else {
                for (const auto& p : check_triplet(registry, *style)) problems.push_back(where + ": " + p);
                a.style = *style;
            }

            if (ja.contains("role")) {
                const std::string role = ja["role"].is_string() ? ja["role"].get<std::string>() : "";
                if (role == "ego_under_test") a.role = AgentRole::ego_under_test;
                else if (role != "background_driver") problems.push_back(where + ": unknown role '" + role + "'");
            }
            if (ja.contains("extent")) {
                auto e = extent_from(ja["extent"]);
                if (!e) problems.push_back(where + ": extent must be [length, width] > 0");
                else a.extent = *e;
            }
            if (ja.contains("seed")) {
                if (!ja["seed"].is_number_integer()) problems.push_back(where + ": seed must be an integer");
                else a.seed = ja["seed"].get<std::uint64_t>();
            } else {
                a.seed = agent_seed(cfg.run_seed, a.id);
            }
            if (!seeds.insert(a.seed).second) problems.push_back(where + ": seed collides with another agent");

            std::vector<std::string> lanes;
            if (!ja.contains("route") || !ja["route"].is_array() || ja["route"].empty()) {
                problems.push_back(where + ": route must be a non-empty lane list");
            } else {
                for (const auto& l : ja["route"]) {
                    if (l.is_string()) lanes.push_back(l.get<std::string>());
                    else problems.push_back(where + ": route entries must be lane ids");
                }
            }
            if (!cfg.map || lanes.empty()) continue;
            try {
                a.route = Route::build(*cfg.map, lanes);
            } catch (const ValidationError& e) {
                for (const auto& m : e.problems()) problems.push_back(where + ": " + m);
                continue;
            }

            // spawn: a world pose, or an arc length along the route
            const json spawn = ja.value("spawn", json::object());
            if (auto pose = pose_from(spawn)) {
                a.spawn = *pose;
            } else if (spawn.is_object()) {
                if (auto pose2 = spawn.contains("pose") ? pose_from(spawn["pose"]) : std::nullopt) {
                    a.spawn = *pose2;
                } else {
                    double s = number_or(spawn, "s", 0.0, problems, where + ".spawn");
                    if (jitter > 0.0) {
                        RandomStream rs(derive_seed(a.seed, "spawn"));
                        s += rs.uniform(-jitter, jitter);
                    }
                    s = std::clamp(s, 0.0, a.route.total_length);
                    const double lat = number_or(spawn, "lateral", 0.0, problems, where + ".spawn");
                    const Vec2 p = point_at(a.route.polyline, a.route.cum, s);
                    const double h = heading_at(a.route.polyline, a.route.cum, s);
                    const Vec2 q = p + rotate(Vec2{0.0, lat}, h);
                    a.spawn = {q.x, q.y, normalize_angle(h)};
                }
                a.spawn_speed = number_or(spawn, "speed", 0.0, problems, where + ".spawn");
                if (a.spawn_speed < 0.0) problems.push_back(where + ": spawn speed must be >= 0");
            } else {
                problems.push_back(where + ": spawn must be [x, y, heading] or {s, speed}");
            }
            cfg.agents.push_back(std::move(a));
        }
    }

    if (doc.contains("objects")) {
        if (!doc["objects"].is_array()) problems.push_back("objects must be an array");
        for (std::size_t i = 0; doc["objects"].is_array() && i < doc["objects"].size(); ++i) {
            const auto& jo = doc["objects"][i];
            std::string where = "objects[" + std::to_string(i) + "]";
            if (!jo.is_object() || !jo.contains("id") || !jo["id"].is_string()) {
                problems.push_back(where + ": missing id");
                continue;
            }
            ObjectState o;
            o.id = jo["id"].get<std::string>();
            where = "object " + o.id;
            if (!ids.insert(o.id).second) problems.push_back(where + ": duplicate id");
            auto kind = parse_object_kind(jo.value("kind", std::string{"vehicle"}));
            if (!kind) {
                problems.push_back(where + ": unknown kind");
                continue;
            }
            o.kind = *kind;
            if (o.kind == ObjectKind::pedestrian) o.extent = {0.6, 0.6};
            if (jo.contains("extent")) {
                auto e = extent_from(jo["extent"]);
                if (!e) problems.push_back(where + ": extent must be [length, width] > 0");
                else o.extent = *e;
            }
            if (jo.contains("pose")) {
                auto pose = pose_from(jo["pose"]);
                if (!pose) {
                    problems.push_back(where + ": pose must be [x, y, heading]");
                    continue;
                }
                o.pose = *pose;
                o.speed = number_or(jo, "speed", 0.0, problems, where);
                if (cfg.map && o.kind == ObjectKind::vehicle) {
                    if (auto loc = cfg.map->locate(o.pose)) o.lane_id = loc->lane_id;
                }
                cfg.objects.push_back(o);
                continue;
            }
            if (!jo.contains("path") || !jo.contains("keyframes")) {
                problems.push_back(where + ": needs a pose, or a path with keyframes");
                continue;
            }
            if (!cfg.map) continue;
            ScriptedMotion m;
            try {
                auto c = chain(*cfg.map, jo["path"].get<std::vector<std::string>>());
                m.path = std::move(c.pts);
                m.cum = std::move(c.cum);
                m.lane_spans = std::move(c.spans);
            } catch (const ValidationError& e) {
                for (const auto& msg : e.problems()) problems.push_back(where + ": " + msg);
                continue;
            } catch (const json::exception&) {
                problems.push_back(where + ": path must be a lane list");
                continue;
            }
            m.start_s = number_or(jo, "start_s", 0.0, problems, where);
            m.period = number_or(jo, "period", 0.0, problems, where);
            m.time_shift = number_or(jo, "time_shift", 0.0, problems, where);
            bool ok = jo["keyframes"].is_array() && !jo["keyframes"].empty();
            double last_t = -1.0;
            for (const auto& kf : jo["keyframes"]) {
                if (!kf.is_array() || kf.size() != 2 || !kf[0].is_number() || !kf[1].is_number()) {
                    ok = false;
                    break;
                }
                const double t = kf[0].get<double>();
                const double v = kf[1].get<double>();
                if (t <= last_t || v < 0.0) ok = false;
                last_t = t;
                m.keyframes.emplace_back(t, v);
            }
            if (!ok) {
                problems.push_back(where + ": keyframes must be [[t, v], ...] with increasing t and v >= 0");
                continue;
            }
            o.pose = m.pose_at(0.0);
            o.speed = m.speed_at(0.0);
            o.lane_id = m.lane_at(0.0);
            cfg.objects.push_back(o);
            cfg.motions.emplace(o.id, std::move(m));
        }
    }

    if (!problems.empty()) throw ValidationError(problems);
    cfg.source = std::move(doc);
    return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError({"override '" + assignment + "' is not key=value"});
    std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    if (key.find('.') == std::string::npos && (kScheduleKeys.count(key) > 0)) key = "schedule." + key;

    std::vector<std::string> parts;
    std::stringstream ss(key);
    for (std::string seg; std::getline(ss, seg, '.');) parts.push_back(seg);

    std::function<void(json&, std::size_t)> assign = [&](json& node, std::size_t i) {
        const std::string& seg = parts[i];
        const bool last = i + 1 == parts.size();
        if (node.is_array()) {
            if (seg == "*") {
                for (auto& el : node) last ? void(el = value) : assign(el, i + 1);
                return;
            }
            std::size_t idx = 0;
            try {
                idx = std::stoul(seg);
            } catch (...) {
                throw ValidationError({"override '" + key + "': '" + seg + "' is not an index"});
            }
            if (idx >= node.size()) throw ValidationError({"override '" + key + "': index " + seg + " out of range"});
            last ? void(node[idx] = value) : assign(node[idx], i + 1);
            return;
        }
        if (node.is_null()) node = json::object();
        if (!node.is_object()) throw ValidationError({"override '" + key + "': cannot descend into a scalar"});
        last ? void(node[seg] = value) : assign(node[seg], i + 1);
    };
    assign(doc, 0);
}

SimulationConfig load_config(const std::string& path, const std::vector<std::string>& overrides,
                             const TraitRegistry& registry) {
    json doc = read_json_file(path);
    for (const auto& o : overrides) apply_override(doc, o);
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config(doc, dir.empty() ? "." : dir, registry);
}

}  // namespace stylesim
