#pragma once

#include "stylesim/script.hpp"
#include "stylesim/style.hpp"

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stylesim {

enum class Dimension { motion, spatial, temporal, structural };
std::string_view to_string(Dimension d);

struct ParamSpec {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    double neutral = 0.0;
    bool guarded = false;               // multiplicative; subject to the log-ratio guard
    bool scales_with_intensity = true;  // false for shape/mode parameters
    std::string doc;
};

struct ModulationApiDescriptor {
    std::string name;
    Dimension dimension = Dimension::motion;
    std::vector<ParamSpec> params;
    std::vector<EntityKind> targets;
    bool allows_self = false;  // may address the ego's own state
    bool monotone = false;
    std::string doc;

    const ParamSpec* param(std::string_view name) const;
    bool applies_to(EntityKind k) const;
};

/// The 16 APIs in a fixed order: four per dimension.
const std::vector<ModulationApiDescriptor>& catalog();
const ModulationApiDescriptor* find_api(std::string_view name);
/// Position in catalog(); npos when unknown.
std::size_t catalog_index(std::string_view name);
/// Human-readable listing, used in provider prompts.
std::string describe_catalog();

/// Relations of the current objective scene as seen from one ego.
struct SceneScope {
    std::string ego_id;
    std::int64_t step = 0;
    std::map<std::string, EntityKind, std::less<>> entities;  // objects, lanes and signals in view
    std::optional<std::string> lead;
    std::set<std::string, std::less<>> same_lane;  // objects in the believed lane, and the lanes of the path
    std::set<std::string, std::less<>> oncoming;
    std::set<std::string, std::less<>> path_signals;

    bool has(std::string_view id) const { return entities.count(id) > 0; }
};

SceneScope summarize_scope(const BevView& view, std::span<const std::string> route_lanes = {});

/// The pseudo-entity used to map self-directed calls.
PerceivedEntity self_entity(const BevView& view);

bool selector_matches(const Selector& sel, const PerceivedEntity& entity, const SceneScope& scope);

struct MappingResult {
    std::vector<ApiCall> calls;
    std::vector<std::string> errors;  // unregistered APIs in a policy fragment
};

/// Calls from every active layer that apply to `entity`. `effective` holds each layer's current
/// intensity; scaled parameters move from neutral in proportion to effective / policy intensity.
MappingResult map_policy_to_calls(const PerceivedEntity& entity, const PolicySet& policies, const SceneScope& scope,
                                  const std::array<double, 3>& effective);
/// Convenience overload using each policy's own intensity.
MappingResult map_policy_to_calls(const PerceivedEntity& entity, const PolicySet& policies, const SceneScope& scope);

/// Sorts by (layer, catalog index), stable otherwise, and drops later duplicates of (layer, api, selector).
void order_script(Script& script);

/// Last applied value of each guarded parameter, per (layer, api, param).
struct ConsistencyState {
    double delta = 0.1;
    std::map<std::string, double> last;

    static std::string key(Layer layer, std::string_view api, std::string_view param);
};

/// Clamps guarded parameters to within exp(+-delta) of the previous value for the same key and records
/// the applied values. Unguarded parameters pass through.
std::map<std::string, double> enforce_consistency(ConsistencyState& state, const ApiCall& proposed);

/// Objective history used by the stale-perception API. Only agents with a non-empty script observe.
struct PerceptionMemory {
    struct Sample {
        std::int64_t step = 0;
        Pose pose;  // world frame
        double speed = 0.0;
    };
    std::map<std::string, std::deque<Sample>, std::less<>> history;
    std::map<std::uint64_t, std::int64_t> anchors;  // call seed -> capture step
    std::int64_t horizon_steps = 240;

    void observe(const BevView& objective);
    const Sample* at_or_before(std::string_view id, std::int64_t step) const;
};

struct ModulationState {
    ConsistencyState consistency;
    PerceptionMemory memory;
};

struct SkippedCall {
    std::size_t index = 0;
    std::string reason;
};

struct ApplyResult {
    BevView view;
    std::vector<SkippedCall> skipped;
};

/// Applies calls in order to a copy of `view`; the result has modulated provenance. Calls whose
/// target is not in the view are skipped. Only the stale-perception memory in `state` is touched.
ApplyResult apply_script_ex(const BevView& view, const Script& script, ModulationState& state);
BevView apply_script(const BevView& view, const Script& script, ModulationState& state);

struct DivergenceReport {
    double mean_displacement = 0.0;   // over objects present in both views
    double mean_speed_deviation = 0.0;
    double ego_speed_deviation = 0.0;
    double mean_size_deviation = 0.0;
    int signal_disagreements = 0;
    double lane_deviation_rms = 0.0;
    int occluded = 0;       // objects missing from the modulated view
    int lanes_missing = 0;  // lanes missing from the modulated view

    bool all_zero() const;
    json to_json() const;
};

/// Throws ContractViolation unless both views share ego and step.
DivergenceReport perception_divergence(const BevView& objective, const BevView& modulated);

}  // namespace stylesim
