#pragma once

#include "stylesim/scene.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stylesim {

enum class Layer { L1 = 0, L2 = 1, L3 = 2 };
std::string_view to_string(Layer l);
std::optional<Layer> parse_layer(std::string_view s);

/// How a selector relates its target to the ego's perceived lane. `self` addresses the ego's own state.
enum class Relation { any, lead, same_lane, oncoming, self };
std::string_view to_string(Relation r);
std::optional<Relation> parse_relation(std::string_view s);

struct Selector {
    std::optional<EntityKind> kind;
    std::optional<Relation> relation;
    std::optional<std::string> target_id;

    bool operator==(const Selector&) const = default;
};

/// One modulation API invocation.
struct ApiCall {
    std::string api;
    Selector selector;
    std::map<std::string, double> params;
    Layer layer = Layer::L1;
    std::uint64_t call_seed = 0;

    bool operator==(const ApiCall&) const = default;
};

/// Ordered per-step call list for one agent.
struct Script {
    std::string agent_id;
    std::vector<ApiCall> calls;

    bool empty() const { return calls.empty(); }
    bool operator==(const Script&) const = default;
};

json to_json(const Selector& s);
json to_json(const ApiCall& c);
/// Wire format: JSON array of calls.
json to_json(const Script& s);
std::string script_digest(const Script& s);

/// Lenient parse of the wire format. Structurally broken entries are reported in `errors` and skipped;
/// semantic checks (api names, ranges) are left to validation.
struct ParsedScript {
    Script script;
    std::vector<std::string> errors;
};
ParsedScript parse_script(const json& doc, std::string agent_id = {});
ParsedScript parse_script_text(std::string_view text, std::string agent_id = {});

}  // namespace stylesim
