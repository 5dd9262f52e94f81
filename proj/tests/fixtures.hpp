#pragma once

#include "stylesim/scenario.hpp"
#include "stylesim/scene.hpp"

#include <memory>
#include <string>

namespace fx {

using namespace stylesim;

inline std::string data(const std::string& rel) { return std::string(STYLESIM_DATA_DIR) + "/" + rel; }

inline LaneGeometry straight(const std::string& id, Vec2 a, Vec2 b, std::vector<std::string> succ = {}) {
    LaneGeometry g;
    g.id = id;
    g.centerline = {a, b};
    g.successors = std::move(succ);
    return g;
}

inline ObjectState vehicle(const std::string& id, double x, double y, double h = 0.0, double v = 0.0) {
    ObjectState o;
    o.id = id;
    o.pose = {x, y, h};
    o.speed = v;
    return o;
}

inline SceneGraph scene_of(std::vector<ObjectState> objs, std::shared_ptr<const RoadMap> map = nullptr) {
    SceneGraph s;
    std::sort(objs.begin(), objs.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    s.objects = std::move(objs);
    s.map = std::move(map);
    if (s.map) s.signals = s.map->initial_signals();
    return s;
}

// one straight lane, a single agent, free road
inline json straight_scenario(double length, const std::string& style = "normal", int steps = 600) {
    return {{"schema_version", 1},
            {"name", "straight"},
            {"map", {{"lanes", json::array({{{"id", "a"}, {"centerline", {{0, 0}, {length, 0}}}}})}}},
            {"dt", 0.05},
            {"max_steps", steps},
            {"run_seed", 3},
            {"agents", json::array({{{"id", "car"},
                                     {"style", {style, "normal", "normal"}},
                                     {"route", {"a"}},
                                     {"spawn", {{"s", 0}, {"speed", 0}}}}})}};
}

}  // namespace fx
