#pragma once

#include "stylesim/dcl.hpp"
#include "stylesim/events.hpp"
#include "stylesim/metrics.hpp"
#include "stylesim/pmbi.hpp"
#include "stylesim/scenario.hpp"
#include "stylesim/translator.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace stylesim {

struct RunOptions {
    bool bypass_pmbi = false;     // baseline: decide on the objective view, no translation
    bool shuffle_order = false;   // test flag: permute per-agent evaluation order every step
    std::uint64_t shuffle_seed = 0;
    bool keep_log = true;         // collect JSONL lines in RunResult::log
    std::ostream* log_stream = nullptr;
    bool record_samples = true;
    int threads = 1;
    CompletionProvider* provider = nullptr;  // nullptr: catalog translation only
    Transcript* transcript = nullptr;
    const TraitRegistry* registry = nullptr;  // defaults to the builtin registry
    const ScriptCatalog* catalog = nullptr;
    std::optional<std::int64_t> max_steps;   // overrides the config
};

struct AgentSummary {
    std::string id;
    StyleTriplet style;
    AgentRole role = AgentRole::background_driver;
    int init_count = 0;
    int update_count = 0;
    int reinterpret_count = 0;
    int l3_triggers = 0;
    std::array<int, 3> versions{0, 0, 0};
    std::map<std::string, int> translation_kinds;  // translated / repaired / fallback
    std::map<std::string, int> translation_sources;
    bool completed = false;
    bool deviated = false;
    std::optional<std::int64_t> finished_step;
    double rc = 0.0;
    DrivingScoreReport score;

    json to_json() const;
};

struct RunResult {
    std::vector<std::string> log;  // JSONL lines, header first
    std::string log_digest;        // sha256 over every line plus newline
    std::vector<InfractionEvent> events;
    std::vector<TranslationEvent> translations;
    std::map<std::string, AgentSummary> agents;
    std::map<std::string, std::vector<TrajectorySample>> samples;
    std::vector<std::string> world_digests;  // sha256 of SceneGraph::serialize per executed step
    std::string final_world_digest;
    std::int64_t steps = 0;
    double wall_seconds = 0.0;

    double mean_step_seconds() const { return steps > 0 ? wall_seconds / static_cast<double>(steps) : 0.0; }
    json metrics_json() const;
};

/// Initial world: agents at their spawn poses plus configured objects.
SceneGraph initial_world(const SimulationConfig& config);

/// Runs the configured scenario. Deterministic for a config when no provider is attached.
RunResult run(const SimulationConfig& config, const RunOptions& options = {});

// ---------------------------------------------------------------------------
// replay

struct ReplayFrame {
    std::int64_t step = 0;
    BevView objective;
    BevView subjective;
    Script script;
};

struct ReplayResult {
    std::int64_t steps = 0;
    std::int64_t views_checked = 0;
    std::string final_world_digest;
    std::vector<ReplayFrame> frames;  // only for the requested agent and range
};

struct ReplayRequest {
    std::string agent;  // empty: verify only
    std::int64_t first_step = 0;
    std::int64_t last_step = -1;  // inclusive; -1 = to the end
};

/// Rebuilds the world from the logged config and decisions, recomputing every objective and subjective
/// view and comparing digests. Throws IntegrityError at the first record that fails to verify.
ReplayResult replay(const std::vector<std::string>& log, const ReplayRequest& request = {});
/// Reads a JSONL file; IoError when unreadable.
std::vector<std::string> read_log(const std::string& path);

}  // namespace stylesim
