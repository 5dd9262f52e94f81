#pragma once

#include "stylesim/dcl.hpp"
#include "stylesim/scene.hpp"
#include "stylesim/style.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace stylesim {

inline constexpr int kSchemaVersion = 1;

enum class AgentRole { background_driver, ego_under_test };
std::string_view to_string(AgentRole r);

struct AgentConfig {
    std::string id;
    StyleTriplet style;
    Route route;
    Pose spawn;
    double spawn_speed = 0.0;
    Extent extent;
    std::uint64_t seed = 0;
    AgentRole role = AgentRole::background_driver;
};

struct ProviderSettings {
    bool enabled = false;
    std::string endpoint;
    std::string path = "/v1/completions";
    std::string model;
    bool async = false;
};

struct PenaltyTable {
    double collision_pedestrian = 0.50;
    double collision_vehicle = 0.60;
    double collision_static = 0.65;
    double red_light = 0.70;
    double route_deviation = 1.0;

    json to_json() const;
    static PenaltyTable from_json(const json& j);
};

struct SimulationConfig {
    std::string name;
    double dt = kDefaultDt;
    std::int64_t max_steps = 1000;
    std::uint64_t run_seed = 0;
    std::shared_ptr<const RoadMap> map;
    ScheduleParams schedule;
    double guard_delta = 0.1;
    ProviderSettings provider;
    ControllerParams controller;
    double bev_radius = kDefaultBevRadius;
    bool stop_when_complete = true;
    PenaltyTable penalties;
    std::vector<AgentConfig> agents;
    std::vector<ObjectState> objects;                          // non-agent objects at t = 0
    std::map<std::string, ScriptedMotion, std::less<>> motions;  // subset of `objects` that move on a script

    /// The resolved document (map inlined); parse_config(to_json()) reproduces the config.
    json source;
    std::string digest() const;
    const AgentConfig* agent(std::string_view id) const;
};

/// Builds a config from a scenario document. A string "map" is resolved against `base_dir`.
/// Throws ValidationError listing every problem found; IoError when a referenced file is unreadable.
SimulationConfig parse_config(const json& doc, const std::string& base_dir = ".",
                              const TraitRegistry& registry = TraitRegistry::builtin());

/// Reads the scenario file; IoError when unreadable or not JSON.
json read_json_file(const std::string& path);
SimulationConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                             const TraitRegistry& registry = TraitRegistry::builtin());

/// Applies `key.path=value` to a document. The value is parsed as JSON when possible, otherwise kept as a
/// string. A `*` segment fans out over array elements. Bare schedule keys (l3_rate, l2_period, ...) address
/// the schedule block.
void apply_override(json& doc, const std::string& assignment);

/// Per-agent seed derived from the run seed; stable when other agents are added.
std::uint64_t agent_seed(std::uint64_t run_seed, std::string_view agent_id);

}  // namespace stylesim
