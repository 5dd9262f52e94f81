#include "stylesim/script.hpp"

#include "stylesim/digest.hpp"

namespace stylesim {

std::string_view to_string(Layer l) {
    switch (l) {
        case Layer::L1: return "L1";
        case Layer::L2: return "L2";
        case Layer::L3: return "L3";
    }
    return "L1";
}

std::optional<Layer> parse_layer(std::string_view s) {
    if (s == "L1") return Layer::L1;
    if (s == "L2") return Layer::L2;
    if (s == "L3") return Layer::L3;
    return std::nullopt;
}

std::string_view to_string(Relation r) {
    switch (r) {
        case Relation::any: return "any";
        case Relation::lead: return "lead";
        case Relation::same_lane: return "same_lane";
        case Relation::oncoming: return "oncoming";
        case Relation::self: return "self";
    }
    return "any";
}

std::optional<Relation> parse_relation(std::string_view s) {
    if (s == "any") return Relation::any;
    if (s == "lead") return Relation::lead;
    if (s == "same_lane") return Relation::same_lane;
    if (s == "oncoming") return Relation::oncoming;
    if (s == "self") return Relation::self;
    return std::nullopt;
}

json to_json(const Selector& s) {
    json j = json::object();
    if (s.kind) j["kind"] = to_string(*s.kind);
    if (s.relation) j["relation"] = to_string(*s.relation);
    if (s.target_id) j["target_id"] = *s.target_id;
    return j;
}

json to_json(const ApiCall& c) {
    json params = json::object();
    for (const auto& [k, v] : c.params) params[k] = v;
    return {{"api", c.api}, {"selector", to_json(c.selector)}, {"params", params}, {"layer", to_string(c.layer)},
            {"call_seed", c.call_seed}};
}

json to_json(const Script& s) {
    json arr = json::array();
    for (const auto& c : s.calls) arr.push_back(to_json(c));
    return arr;
}

std::string script_digest(const Script& s) { return sha256_hex(to_json(s).dump()); }

namespace {

std::optional<ApiCall> parse_call(const json& j, std::size_t index, std::vector<std::string>& errors) {
    const std::string where = "call " + std::to_string(index);
    if (!j.is_object()) {
        errors.push_back(where + ": not an object");
        return std::nullopt;
    }
    ApiCall call;
    if (!j.contains("api") || !j["api"].is_string()) {
        errors.push_back(where + ": missing api name");
        return std::nullopt;
    }
    call.api = j["api"].get<std::string>();
    if (j.contains("selector")) {
        const auto& sel = j["selector"];
        if (!sel.is_object()) {
            errors.push_back(where + ": selector is not an object");
            return std::nullopt;
        }
        if (sel.contains("kind")) {
            auto k = sel["kind"].is_string() ? parse_entity_kind(sel["kind"].get<std::string>()) : std::nullopt;
            if (!k) {
                errors.push_back(where + ": unknown selector kind");
                return std::nullopt;
            }
            call.selector.kind = k;
        }
        if (sel.contains("relation")) {
            auto r = sel["relation"].is_string() ? parse_relation(sel["relation"].get<std::string>()) : std::nullopt;
            if (!r) {
                errors.push_back(where + ": unknown selector relation");
                return std::nullopt;
            }
            call.selector.relation = r;
        }
        if (sel.contains("target_id")) {
            if (!sel["target_id"].is_string()) {
                errors.push_back(where + ": target_id is not a string");
                return std::nullopt;
            }
            call.selector.target_id = sel["target_id"].get<std::string>();
        }
    }
    if (j.contains("params")) {
        if (!j["params"].is_object()) {
            errors.push_back(where + ": params is not an object");
            return std::nullopt;
        }
        for (const auto& [k, v] : j["params"].items()) {
            if (!v.is_number()) {
                errors.push_back(where + ": param " + k + " is not a number");
                return std::nullopt;
            }
            call.params[k] = v.get<double>();
        }
    }
    if (j.contains("layer")) {
        auto l = j["layer"].is_string() ? parse_layer(j["layer"].get<std::string>()) : std::nullopt;
        if (!l) {
            errors.push_back(where + ": unknown layer");
            return std::nullopt;
        }
        call.layer = *l;
    }
    if (j.contains("call_seed")) {
        if (!j["call_seed"].is_number_unsigned()) {
            errors.push_back(where + ": call_seed is not an unsigned integer");
            return std::nullopt;
        }
        call.call_seed = j["call_seed"].get<std::uint64_t>();
    }
    return call;
}

}  // namespace

ParsedScript parse_script(const json& doc, std::string agent_id) {
    ParsedScript out;
    out.script.agent_id = std::move(agent_id);
    const json* arr = &doc;
    if (doc.is_object() && doc.contains("calls")) arr = &doc["calls"];
    if (!arr->is_array()) {
        out.errors.push_back("script is not a JSON array of calls");
        return out;
    }
    for (std::size_t i = 0; i < arr->size(); ++i) {
        if (auto c = parse_call((*arr)[i], i, out.errors)) out.script.calls.push_back(std::move(*c));
    }
    return out;
}

ParsedScript parse_script_text(std::string_view text, std::string agent_id) {
    json doc = json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded()) {
        ParsedScript out;
        out.script.agent_id = std::move(agent_id);
        out.errors.push_back("not valid JSON");
        return out;
    }
    return parse_script(doc, std::move(agent_id));
}

}  // namespace stylesim
