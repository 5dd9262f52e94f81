#pragma once

#include "stylesim/pmbi.hpp"
#include "stylesim/style.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stylesim {

enum class TranslationMode { init, update, reinterpret };
std::string_view to_string(TranslationMode m);

struct TranslationRequest {
    TranslationMode mode = TranslationMode::init;
    std::string agent_id;
    BehaviorDescription description;
    std::optional<Policy> prior;  // Update: the policy being refreshed
    std::int64_t step = 0;
    std::uint64_t agent_seed = 0;
    double dt = kDefaultDt;

    /// Layers the request may produce. Init: every tagged layer; Update: L2; ReInterpret: L3.
    std::vector<Layer> layers() const;
};

/// A library call with per-parameter sensitivity: value = neutral + intensity * sensitivity.
struct CallTemplate {
    std::string api;
    Selector selector;
    std::map<std::string, double> sensitivity;
    std::map<std::string, double> fixed;
};

struct CatalogEntry {
    std::string id;
    std::string trait;
    Layer layer = Layer::L1;
    std::vector<std::string> keywords;
    std::string policy;
    std::vector<CallTemplate> calls;
};

class ScriptCatalog {
public:
    static ScriptCatalog builtin();
    /// Throws ValidationError if any entry fails to validate against the API catalog.
    static ScriptCatalog from_json(const json& doc);

    const std::vector<CatalogEntry>& entries() const { return entries_; }
    const CatalogEntry* find(std::string_view id) const;
    /// Entries ranked by keyword overlap with `text` (ties keep file order); only entries with a hit.
    std::vector<const CatalogEntry*> retrieve(std::string_view text, std::optional<Layer> layer = std::nullopt,
                                              std::size_t limit = 3) const;

private:
    std::vector<CatalogEntry> entries_;
};

/// Concrete calls for an entry at an intensity; selectors stay generic.
std::vector<ApiCall> instantiate(const CatalogEntry& entry, double intensity, Layer layer);

enum class Verdict { accept, repairable, reject };
std::string_view to_string(Verdict v);

struct ValidationReport {
    std::vector<std::string> schema_errors;
    std::vector<std::string> semantic_errors;
    Verdict verdict = Verdict::accept;

    json to_json() const;
};

/// Schema check against the API catalog plus, with a scope, a check that targeted ids are in view.
ValidationReport validate_script(const Script& script, const SceneScope* scope = nullptr,
                                 std::span<const std::string> parse_errors = {});

struct RepairOutcome {
    Script script;
    std::vector<std::string> actions;
    bool emptied = false;  // every call was dropped
};

/// Clamps ranges, drops unknown parameters, swaps unknown APIs for the best catalog entry of a trait
/// named in the API string, and drops what cannot be fixed. The result always validates.
RepairOutcome repair_or_fallback(const Script& script, const ValidationReport& report, const ScriptCatalog& catalog,
                                 const SceneScope* scope = nullptr, double intensity = 0.5);

/// Text-in/text-out completion. Implementations report failure by returning nullopt or throwing.
class CompletionProvider {
public:
    virtual ~CompletionProvider() = default;
    virtual std::optional<std::string> complete(const std::string& prompt) = 0;
    virtual std::string name() const = 0;
};

struct HttpProviderConfig {
    std::string base_url;  // e.g. http://localhost:8080
    std::string path = "/v1/completions";
    std::string model;
    std::string api_key;
    std::chrono::milliseconds timeout{10000};
    int max_retries = 2;

    /// STYLESIM_PROVIDER_URL, STYLESIM_PROVIDER_MODEL, STYLESIM_PROVIDER_KEY.
    static HttpProviderConfig from_env();
};

/// Posts {model, prompt} and reads choices[0].text or choices[0].message.content.
class HttpProvider : public CompletionProvider {
public:
    explicit HttpProvider(HttpProviderConfig config) : config_(std::move(config)) {}
    std::optional<std::string> complete(const std::string& prompt) override;
    std::string name() const override { return "http:" + config_.model; }

private:
    HttpProviderConfig config_;
};

struct TranslationEvent {
    std::int64_t step = 0;
    std::string agent_id;
    TranslationMode mode = TranslationMode::init;
    Layer layer = Layer::L1;
    std::string kind;  // translated, repaired, fallback
    std::string source;
    std::string detail;

    json to_json() const;
};

struct PolicyDelta {
    std::vector<Policy> policies;
    std::vector<TranslationEvent> events;
};

struct PromptSet {
    std::string primer, init, update, reinterpret;
    static PromptSet builtin();
    /// Reads primer.txt, init.txt, update.txt and reinterpret.txt; missing files keep the builtin text.
    static PromptSet from_dir(const std::string& dir);
    std::string version() const;
};

/// Request/response pairs for audit.
class Transcript {
public:
    void record(json entry);
    std::vector<json> snapshot() const;

private:
    mutable std::mutex mu_;
    std::vector<json> entries_;
};

class Translator {
public:
    Translator(const TraitRegistry& registry, const ScriptCatalog& catalog, CompletionProvider* provider = nullptr,
               PromptSet prompts = PromptSet::builtin(), Transcript* transcript = nullptr);

    /// Pure catalog translation: a function of (request, agent seed).
    PolicyDelta translate_catalog(const TranslationRequest& request) const;
    /// Provider first when configured; any provider failure or irreparable output falls back to the catalog.
    PolicyDelta translate(const TranslationRequest& request) const;

    std::string build_prompt(const TranslationRequest& request, Layer layer, double intensity) const;
    bool has_provider() const { return provider_ != nullptr; }

private:
    std::optional<Policy> catalog_policy(const TranslationRequest& request, Layer layer, const std::string& trait,
                                         double intensity) const;
    double intensity_for(const TranslationRequest& request, Layer layer, const TraitSpec& spec) const;

    const TraitRegistry* registry_;
    const ScriptCatalog* catalog_;
    CompletionProvider* provider_;
    PromptSet prompts_;
    Transcript* transcript_;
};

/// Policy seed: distinct per agent, layer, mode and step.
std::uint64_t policy_seed(std::uint64_t agent_seed, Layer layer, TranslationMode mode, std::int64_t step);

}  // namespace stylesim
