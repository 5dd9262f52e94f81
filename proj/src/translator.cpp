#include "stylesim/translator.hpp"

#include "stylesim/builtin_data.hpp"
#include "stylesim/digest.hpp"
#include "stylesim/errors.hpp"
#include "stylesim/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stylesim {

std::string_view to_string(TranslationMode m) {
    switch (m) {
        case TranslationMode::init: return "init";
        case TranslationMode::update: return "update";
        case TranslationMode::reinterpret: return "reinterpret";
    }
    return "init";
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::accept: return "accept";
        case Verdict::repairable: return "repairable";
        case Verdict::reject: return "reject";
    }
    return "reject";
}

std::vector<Layer> TranslationRequest::layers() const {
    switch (mode) {
        case TranslationMode::update: return {Layer::L2};
        case TranslationMode::reinterpret: return {Layer::L3};
        case TranslationMode::init: break;
    }
    std::vector<Layer> out;
    for (const auto& [layer, trait] : description.trait_tags) {
        if (std::find(out.begin(), out.end(), layer) == out.end()) out.push_back(layer);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t policy_seed(std::uint64_t agent_seed, Layer layer, TranslationMode mode, std::int64_t step) {
    std::uint64_t s = derive_seed(agent_seed, "policy");
    s = derive_seed(s, static_cast<std::uint64_t>(layer));
    s = derive_seed(s, static_cast<std::uint64_t>(mode));
    return derive_seed(s, static_cast<std::uint64_t>(step));
}

namespace {

std::vector<std::string> tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Selector parse_selector(const json& j) {
    Selector sel;
    if (!j.is_object()) return sel;
    if (j.contains("kind") && j["kind"].is_string()) sel.kind = parse_entity_kind(j["kind"].get<std::string>());
    if (j.contains("relation") && j["relation"].is_string()) sel.relation = parse_relation(j["relation"].get<std::string>());
    if (j.contains("target_id") && j["target_id"].is_string()) sel.target_id = j["target_id"].get<std::string>();
    return sel;
}

std::map<std::string, double> number_map(const json& j) {
    std::map<std::string, double> out;
    if (!j.is_object()) return out;
    for (const auto& [k, v] : j.items()) {
        if (v.is_number()) out[k] = v.get<double>();
    }
    return out;
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
    for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
        text.replace(pos, key.size(), value);
    }
    return text;
}

std::string fmt(double v) {
    std::ostringstream out;
    out << v;
    return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// catalog

ScriptCatalog ScriptCatalog::builtin() { return from_json(json::parse(builtin_catalog_json())); }

ScriptCatalog ScriptCatalog::from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
        throw ValidationError({"script catalog: expected an object with an \"entries\" array"});
    }
    ScriptCatalog cat;
    std::vector<std::string> problems;
    std::set<std::string> ids;
    for (const auto& e : doc["entries"]) {
        CatalogEntry entry;
        entry.id = e.value("id", std::string{});
        const std::string where = "catalog entry " + (entry.id.empty() ? std::string("<unnamed>") : entry.id);
        if (entry.id.empty() || !ids.insert(entry.id).second) problems.push_back(where + ": missing or duplicate id");
        entry.trait = e.value("trait", std::string{});
        auto layer = parse_layer(e.value("layer", std::string{}));
        if (!layer) problems.push_back(where + ": unknown layer");
        entry.layer = layer.value_or(Layer::L1);
        if (e.contains("keywords") && e["keywords"].is_array()) {
            for (const auto& k : e["keywords"]) {
                if (k.is_string()) entry.keywords.push_back(k.get<std::string>());
            }
        }
        entry.policy = e.value("policy", std::string{});
        if (entry.policy.empty()) problems.push_back(where + ": empty policy text");
        if (e.contains("calls") && e["calls"].is_array()) {
            for (const auto& c : e["calls"]) {
                CallTemplate t;
                t.api = c.value("api", std::string{});
                t.selector = parse_selector(c.value("selector", json::object()));
                t.sensitivity = number_map(c.value("sensitivity", json::object()));
                t.fixed = number_map(c.value("fixed", json::object()));
                entry.calls.push_back(std::move(t));
            }
        }
        if (entry.calls.empty()) problems.push_back(where + ": no calls");
        // every fragment must validate at the extremes of intensity
        for (double i : {0.0, 1.0}) {
            Script s{"catalog", instantiate(entry, i, entry.layer)};
            auto report = validate_script(s);
            for (const auto& err : report.semantic_errors) problems.push_back(where + ": " + err);
        }
        cat.entries_.push_back(std::move(entry));
    }
    if (!problems.empty()) {
        std::sort(problems.begin(), problems.end());
        problems.erase(std::unique(problems.begin(), problems.end()), problems.end());
        throw ValidationError(problems);
    }
    return cat;
}

const CatalogEntry* ScriptCatalog::find(std::string_view id) const {
    for (const auto& e : entries_) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

std::vector<const CatalogEntry*> ScriptCatalog::retrieve(std::string_view text, std::optional<Layer> layer,
                                                         std::size_t limit) const {
    const auto toks = tokens(text);
    const std::set<std::string> words(toks.begin(), toks.end());
    std::vector<std::pair<int, const CatalogEntry*>> scored;
    for (const auto& e : entries_) {
        if (layer && e.layer != *layer) continue;
        int score = words.count(e.trait) ? 2 : 0;
        for (const auto& k : e.keywords) score += static_cast<int>(words.count(k));
        if (score > 0) scored.emplace_back(score, &e);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<const CatalogEntry*> out;
    for (const auto& [s, e] : scored) {
        if (out.size() >= limit) break;
        out.push_back(e);
    }
    return out;
}

std::vector<ApiCall> instantiate(const CatalogEntry& entry, double intensity, Layer layer) {
    std::vector<ApiCall> out;
    for (const auto& t : entry.calls) {
        ApiCall call;
        call.api = t.api;
        call.selector = t.selector;
        call.layer = layer;
        const auto* api = find_api(t.api);
        if (!api) {
            out.push_back(std::move(call));
            continue;
        }
        for (const auto& p : api->params) {
            double v = p.neutral;
            if (auto it = t.fixed.find(p.name); it != t.fixed.end()) v = it->second;
            if (auto it = t.sensitivity.find(p.name); it != t.sensitivity.end()) v = p.neutral + intensity * it->second;
            call.params[p.name] = v;
        }
        out.push_back(std::move(call));
    }
    return out;
}

// ---------------------------------------------------------------------------
// validation and repair

json ValidationReport::to_json() const {
    return {{"schema_errors", schema_errors}, {"semantic_errors", semantic_errors}, {"verdict", to_string(verdict)}};
}

ValidationReport validate_script(const Script& script, const SceneScope* scope, std::span<const std::string> parse_errors) {
    ValidationReport r;
    r.schema_errors.assign(parse_errors.begin(), parse_errors.end());
    std::vector<const ApiCall*> seen;
    for (std::size_t i = 0; i < script.calls.size(); ++i) {
        const auto& c = script.calls[i];
        const std::string where = "call " + std::to_string(i) + " (" + c.api + ")";
        const auto* api = find_api(c.api);
        if (!api) {
            r.semantic_errors.push_back(where + ": unknown api");
            continue;
        }
        for (const auto& [name, value] : c.params) {
            const auto* p = api->param(name);
            if (!p) {
                r.semantic_errors.push_back(where + ": unknown param " + name);
            } else if (!std::isfinite(value) || value < p->lo || value > p->hi) {
                r.semantic_errors.push_back(where + ": param " + name + "=" + fmt(value) + " out of range [" + fmt(p->lo) + ", " +
                                            fmt(p->hi) + "]");
            }
        }
        const auto& sel = c.selector;
        if (sel.relation == Relation::self) {
            if (!api->allows_self) r.semantic_errors.push_back(where + ": inapplicable selector (self)");
        } else if (sel.kind && !api->applies_to(*sel.kind)) {
            r.semantic_errors.push_back(where + ": inapplicable selector (kind " + std::string(to_string(*sel.kind)) + ")");
        }
        if (scope && sel.target_id && !scope->has(*sel.target_id)) {
            r.semantic_errors.push_back(where + ": scope violation, " + *sel.target_id + " is not in view");
        }
        const bool dup = std::any_of(seen.begin(), seen.end(), [&](const ApiCall* o) {
            return o->layer == c.layer && o->api == c.api && o->selector == c.selector;
        });
        if (dup) r.semantic_errors.push_back(where + ": duplicate call for the same selector and layer");
        seen.push_back(&c);
    }
    if (r.schema_errors.empty() && r.semantic_errors.empty()) {
        r.verdict = Verdict::accept;
    } else if (!r.schema_errors.empty() && script.calls.empty()) {
        r.verdict = Verdict::reject;
    } else {
        r.verdict = Verdict::repairable;
    }
    return r;
}

namespace {

const CatalogEntry* keyword_match(const ScriptCatalog& catalog, std::string_view api_name) {
    const auto toks = tokens(api_name);
    const std::set<std::string> words(toks.begin(), toks.end());
    // only trait names count as a trait keyword here; generic words like "lane" would over-match
    for (const auto& e : catalog.entries()) {
        if (words.count(e.trait)) return &e;
    }
    return nullptr;
}

}  // namespace

RepairOutcome repair_or_fallback(const Script& script, const ValidationReport& report, const ScriptCatalog& catalog,
                                 const SceneScope* scope, double intensity) {
    RepairOutcome out;
    out.script.agent_id = script.agent_id;
    if (report.verdict == Verdict::accept) {
        out.script = script;
        return out;
    }
    for (std::size_t i = 0; i < script.calls.size(); ++i) {
        ApiCall c = script.calls[i];
        const std::string where = "call " + std::to_string(i) + " (" + c.api + ")";
        const auto* api = find_api(c.api);
        if (!api) {
            if (const auto* e = keyword_match(catalog, c.api)) {
                for (auto& r : instantiate(*e, intensity, c.layer)) out.script.calls.push_back(std::move(r));
                out.actions.push_back(where + ": replaced by catalog entry " + e->id);
            } else {
                out.actions.push_back(where + ": dropped unknown api");
            }
            continue;
        }
        if (c.selector.relation == Relation::self && !api->allows_self) {
            out.actions.push_back(where + ": dropped, api cannot target self");
            continue;
        }
        if (scope && c.selector.target_id && !scope->has(*c.selector.target_id)) {
            out.actions.push_back(where + ": dropped, target not in view");
            continue;
        }
        if (c.selector.kind && !api->applies_to(*c.selector.kind)) {
            c.selector.kind.reset();
            out.actions.push_back(where + ": removed inapplicable kind");
        }
        std::map<std::string, double> params;
        for (const auto& [name, value] : c.params) {
            const auto* p = api->param(name);
            if (!p) {
                out.actions.push_back(where + ": dropped unknown param " + name);
                continue;
            }
            double v = std::isfinite(value) ? std::clamp(value, p->lo, p->hi) : p->neutral;
            if (v != value) out.actions.push_back(where + ": " + name + " clamped to " + fmt(v));
            params[name] = v;
        }
        c.params = std::move(params);
        out.script.calls.push_back(std::move(c));
    }
    order_script(out.script);
    if (validate_script(out.script, scope).verdict != Verdict::accept) {
        out.actions.push_back("repair did not converge; script emptied");
        out.script.calls.clear();
    }
    out.emptied = out.script.calls.empty();
    return out;
}

// ---------------------------------------------------------------------------
// prompts and transcripts

PromptSet PromptSet::builtin() {
    return {std::string(builtin_prompt("primer")), std::string(builtin_prompt("init")), std::string(builtin_prompt("update")),
            std::string(builtin_prompt("reinterpret"))};
}

PromptSet PromptSet::from_dir(const std::string& dir) {
    PromptSet p = builtin();
    auto load = [&](const char* name, std::string& into) {
        std::ifstream in(dir + "/" + name + ".txt", std::ios::binary);
        if (!in) return;
        std::ostringstream ss;
        ss << in.rdbuf();
        into = ss.str();
    };
    load("primer", p.primer);
    load("init", p.init);
    load("update", p.update);
    load("reinterpret", p.reinterpret);
    return p;
}

std::string PromptSet::version() const {
    return sha256_hex(primer + '\0' + init + '\0' + update + '\0' + reinterpret).substr(0, 12);
}

void Transcript::record(json entry) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(entry));
}

std::vector<json> Transcript::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

json TranslationEvent::to_json() const {
    return {{"step", step},   {"agent", agent_id}, {"mode", stylesim::to_string(mode)}, {"layer", stylesim::to_string(layer)},
            {"kind", kind}, {"source", source},  {"detail", detail}};
}

// ---------------------------------------------------------------------------
// translator

Translator::Translator(const TraitRegistry& registry, const ScriptCatalog& catalog, CompletionProvider* provider,
                       PromptSet prompts, Transcript* transcript)
    : registry_(&registry), catalog_(&catalog), provider_(provider), prompts_(std::move(prompts)), transcript_(transcript) {}

double Translator::intensity_for(const TranslationRequest& request, Layer layer, const TraitSpec& spec) const {
    if (request.mode == TranslationMode::update && request.prior && request.prior->layer == layer) {
        RandomStream rng(derive_seed(derive_seed(request.agent_seed, "update"), static_cast<std::uint64_t>(request.step)));
        return std::clamp(request.prior->intensity * std::exp(rng.uniform(-0.1, 0.1)), 0.0, 1.0);
    }
    return spec.default_intensity;
}

std::optional<Policy> Translator::catalog_policy(const TranslationRequest& request, Layer layer, const std::string& trait,
                                                 double intensity) const {
    const TraitSpec* spec = registry_->find(layer, trait);
    if (!spec) return std::nullopt;
    Policy p;
    p.layer = layer;
    p.trait = trait;
    p.intensity = intensity;
    p.seed = policy_seed(request.agent_seed, layer, request.mode, request.step);
    p.source = "catalog";
    p.activated_step = request.step;
    if (request.mode == TranslationMode::update && request.prior) p.activated_step = request.prior->activated_step;
    if (layer == Layer::L3) {
        // Init only prepares the attentional policy; it becomes active when an episode is triggered.
        const auto len = std::llround(spec->episode_s / request.dt);
        p.expires_step = request.mode == TranslationMode::reinterpret ? request.step + len : request.step;
    }
    for (const auto& id : spec->policy_template) {
        const auto* e = catalog_->find(id);
        if (!e) continue;
        if (!p.statement.empty()) p.statement += "; ";
        p.statement += e->policy;
        for (auto& c : instantiate(*e, intensity, layer)) {
            for (const auto& [k, v] : c.params) p.parameter_hints[c.api + "." + k] = v;
            p.fragment.push_back(std::move(c));
        }
    }
    if (p.fragment.empty()) return std::nullopt;
    return p;
}

namespace {

std::string trait_for(const TranslationRequest& request, Layer layer) {
    if (request.mode == TranslationMode::update && request.prior) return request.prior->trait;
    for (const auto& [l, t] : request.description.trait_tags) {
        if (l == layer) return t;
    }
    return {};
}

}  // namespace

PolicyDelta Translator::translate_catalog(const TranslationRequest& request) const {
    PolicyDelta out;
    for (Layer layer : request.layers()) {
        const std::string trait = trait_for(request, layer);
        const TraitSpec* spec = registry_->find(layer, trait);
        if (!spec) continue;
        if (auto p = catalog_policy(request, layer, trait, intensity_for(request, layer, *spec))) {
            out.events.push_back({request.step, request.agent_id, request.mode, layer, "translated", "catalog", p->statement});
            out.policies.push_back(std::move(*p));
        }
    }
    return out;
}

std::string Translator::build_prompt(const TranslationRequest& request, Layer layer, double intensity) const {
    std::string examples;
    for (const auto* e : catalog_->retrieve(request.description.text, layer)) {
        Script s{"example", instantiate(*e, intensity, layer)};
        examples += "policy: " + e->policy + "\ncalls: " + to_json(s).dump() + "\n";
    }
    std::string primer = replace_all(prompts_.primer, "{{API_DOC}}", describe_catalog());
    primer = replace_all(primer, "{{EXAMPLES}}", examples);
    const std::string* body = &prompts_.init;
    if (request.mode == TranslationMode::update) body = &prompts_.update;
    if (request.mode == TranslationMode::reinterpret) body = &prompts_.reinterpret;
    std::string prior = "[]";
    if (request.prior) prior = to_json(Script{"prior", request.prior->fragment}).dump();
    std::string text = replace_all(*body, "{{DESCRIPTION}}", request.description.text);
    text = replace_all(text, "{{LAYER}}", to_string(layer));
    text = replace_all(text, "{{INTENSITY}}", fmt(intensity));
    text = replace_all(text, "{{PRIOR}}", prior);
    return primer + "\n" + text;
}

PolicyDelta Translator::translate(const TranslationRequest& request) const {
    if (!provider_) return translate_catalog(request);
    PolicyDelta out;
    for (Layer layer : request.layers()) {
        const std::string trait = trait_for(request, layer);
        const TraitSpec* spec = registry_->find(layer, trait);
        if (!spec) continue;
        const double intensity = intensity_for(request, layer, *spec);
        auto fallback = [&](const std::string& why) {
            if (auto p = catalog_policy(request, layer, trait, intensity)) {
                out.events.push_back({request.step, request.agent_id, request.mode, layer, "fallback", "catalog", why});
                out.policies.push_back(std::move(*p));
            }
        };

        const std::string prompt = build_prompt(request, layer, intensity);
        std::optional<std::string> response;
        std::string failure;
        try {
            response = provider_->complete(prompt);
            if (!response) failure = "provider returned no text";
        } catch (const std::exception& e) {
            failure = std::string("provider error: ") + e.what();
        } catch (...) {
            failure = "provider error";
        }
        if (transcript_) {
            transcript_->record({{"agent", request.agent_id}, {"step", request.step}, {"mode", to_string(request.mode)},
                                 {"layer", to_string(layer)}, {"provider", provider_->name()}, {"prompt", prompt},
                                 {"response", response ? json(*response) : json(nullptr)}});
        }
        if (!response) {
            fallback(failure);
            continue;
        }

        auto parsed = parse_script_text(*response, request.agent_id);
        for (auto& c : parsed.script.calls) c.layer = layer;
        auto report = validate_script(parsed.script, nullptr, parsed.errors);
        if (report.verdict == Verdict::reject || parsed.script.calls.empty()) {
            fallback("provider output rejected: " + (report.schema_errors.empty() ? std::string("no calls") : report.schema_errors.front()));
            continue;
        }
        Script script = parsed.script;
        std::string kind = "translated";
        std::string detail;
        if (report.verdict == Verdict::repairable) {
            auto repaired = repair_or_fallback(parsed.script, report, *catalog_, nullptr, intensity);
            if (repaired.emptied) {
                fallback("provider output irreparable");
                continue;
            }
            script = std::move(repaired.script);
            kind = "repaired";
            for (const auto& a : repaired.actions) detail += (detail.empty() ? "" : "; ") + a;
        }
        auto base = catalog_policy(request, layer, trait, intensity);
        if (!base) continue;
        base->source = "provider";
        base->fragment = script.calls;
        base->parameter_hints.clear();
        for (const auto& c : base->fragment) {
            for (const auto& [k, v] : c.params) base->parameter_hints[c.api + "." + k] = v;
        }
        out.events.push_back({request.step, request.agent_id, request.mode, layer, kind, "provider", detail});
        out.policies.push_back(std::move(*base));
    }
    return out;
}

}  // namespace stylesim
