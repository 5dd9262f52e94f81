#include "stylesim/style.hpp"

#include "stylesim/builtin_data.hpp"
#include "stylesim/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace stylesim {

std::string_view to_string(L2Pattern p) {
    switch (p) {
        case L2Pattern::none: return "none";
        case L2Pattern::incremental: return "incremental";
        case L2Pattern::episodic: return "episodic";
    }
    return "none";
}

namespace {

std::optional<L2Pattern> parse_pattern(std::string_view s) {
    if (s == "none") return L2Pattern::none;
    if (s == "incremental") return L2Pattern::incremental;
    if (s == "episodic") return L2Pattern::episodic;
    return std::nullopt;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool contains_word(const std::string& haystack, const std::string& word) {
    if (word.empty()) return false;
    for (std::size_t pos = haystack.find(word); pos != std::string::npos; pos = haystack.find(word, pos + 1)) {
        const bool left_ok = pos == 0 || !word_char(haystack[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right_ok = end >= haystack.size() || !word_char(haystack[end]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// registry

TraitRegistry TraitRegistry::builtin() { return from_json(json::parse(builtin_traits_json())); }

TraitRegistry TraitRegistry::from_json(const json& doc) {
    std::vector<std::string> problems;
    TraitRegistry reg;
    if (!doc.is_object() || !doc.contains("traits") || !doc["traits"].is_object()) {
        throw ValidationError({"trait registry: expected an object with a \"traits\" map"});
    }
    for (const auto& [name, t] : doc["traits"].items()) {
        const std::string where = "trait " + name;
        if (!t.is_object()) {
            problems.push_back(where + ": not an object");
            continue;
        }
        TraitSpec spec;
        spec.name = name;
        auto layer = t.contains("layer") && t["layer"].is_string() ? parse_layer(t["layer"].get<std::string>()) : std::nullopt;
        if (!layer) {
            problems.push_back(where + ": missing or unknown layer");
            continue;
        }
        spec.layer = *layer;
        if (name == kNormalTrait) {
            problems.push_back(where + ": \"normal\" is implicit and cannot be registered");
            continue;
        }
        spec.description_template = t.value("description_template", std::string{});
        if (spec.description_template.empty()) problems.push_back(where + ": empty description_template");
        if (t.contains("policy_template") && t["policy_template"].is_array()) {
            for (const auto& id : t["policy_template"]) {
                if (id.is_string()) spec.policy_template.push_back(id.get<std::string>());
            }
        }
        if (spec.policy_template.empty()) problems.push_back(where + ": empty policy_template");
        spec.default_intensity = t.value("default_intensity", 0.5);
        if (!(spec.default_intensity >= 0.0 && spec.default_intensity <= 1.0)) {
            problems.push_back(where + ": default_intensity outside [0, 1]");
        }
        if (spec.layer == Layer::L2) {
            auto p = parse_pattern(t.value("pattern", std::string{"incremental"}));
            if (!p || *p == L2Pattern::none) problems.push_back(where + ": L2 traits need pattern incremental|episodic");
            else spec.pattern = *p;
        }
        if (spec.layer == Layer::L3) {
            spec.episode_s = t.value("episode_s", 5.0);
            if (!(spec.episode_s > 0.0)) problems.push_back(where + ": episode_s must be > 0");
        }
        if (!contains_word(lower(spec.description_template), lower(name))) {
            problems.push_back(where + ": description_template must mention the trait name");
        }
        if (problems.empty()) reg.add(std::move(spec));
    }
    if (!problems.empty()) throw ValidationError(problems);
    return reg;
}

void TraitRegistry::add(TraitSpec spec) {
    if (closed_) throw ContractViolation("trait registry is closed");
    auto key = std::make_pair(spec.layer, spec.name);
    if (traits_.count(key)) throw ContractViolation("duplicate trait " + spec.name);
    traits_.emplace(std::move(key), std::move(spec));
}

const TraitSpec* TraitRegistry::find(Layer layer, std::string_view name) const {
    auto it = traits_.find(std::make_pair(layer, std::string(name)));
    return it == traits_.end() ? nullptr : &it->second;
}

bool TraitRegistry::contains(Layer layer, std::string_view name) const {
    return name == kNormalTrait || find(layer, name) != nullptr;
}

std::vector<const TraitSpec*> TraitRegistry::traits() const {
    std::vector<const TraitSpec*> out;
    for (const auto& [k, v] : traits_) out.push_back(&v);
    return out;
}

json TraitRegistry::to_json() const {
    json traits = json::object();
    for (const auto& [k, t] : traits_) {
        json j = {{"layer", to_string(t.layer)},
                  {"description_template", t.description_template},
                  {"policy_template", t.policy_template},
                  {"default_intensity", t.default_intensity}};
        if (t.layer == Layer::L2) j["pattern"] = to_string(t.pattern);
        if (t.layer == Layer::L3) j["episode_s"] = t.episode_s;
        traits[t.name] = j;
    }
    return {{"traits", traits}};
}

// ---------------------------------------------------------------------------
// triplets and descriptions

const std::string& StyleTriplet::at(Layer l) const {
    switch (l) {
        case Layer::L1: return l1;
        case Layer::L2: return l2;
        case Layer::L3: return l3;
    }
    return l1;
}

bool StyleTriplet::all_normal() const { return l1 == kNormalTrait && l2 == kNormalTrait && l3 == kNormalTrait; }

std::string StyleTriplet::label() const { return l1 + "/" + l2 + "/" + l3; }

std::optional<StyleTriplet> StyleTriplet::parse_label(std::string_view s) {
    auto a = s.find('/');
    if (a == std::string_view::npos) return std::nullopt;
    auto b = s.find('/', a + 1);
    if (b == std::string_view::npos || s.find('/', b + 1) != std::string_view::npos) return std::nullopt;
    return StyleTriplet{std::string(s.substr(0, a)), std::string(s.substr(a + 1, b - a - 1)), std::string(s.substr(b + 1))};
}

std::vector<std::string> check_triplet(const TraitRegistry& registry, const StyleTriplet& style) {
    std::vector<std::string> problems;
    for (Layer l : {Layer::L1, Layer::L2, Layer::L3}) {
        if (!registry.contains(l, style.at(l))) {
            problems.push_back("unknown trait \"" + style.at(l) + "\" for layer " + std::string(to_string(l)));
        }
    }
    return problems;
}

std::set<TraitTag> expected_tags(const StyleTriplet& style) {
    std::set<TraitTag> out;
    for (Layer l : {Layer::L1, Layer::L2, Layer::L3}) {
        if (style.at(l) != kNormalTrait) out.emplace(l, style.at(l));
    }
    return out;
}

std::set<TraitTag> extract_trait_tags(std::string_view text, const TraitRegistry& registry) {
    const std::string hay = lower(text);
    std::set<TraitTag> out;
    for (const TraitSpec* t : registry.traits()) {
        if (contains_word(hay, lower(t->name))) out.emplace(t->layer, t->name);
    }
    return out;
}

std::string template_description(const StyleTriplet& style, const TraitRegistry& registry) {
    if (auto problems = check_triplet(registry, style); !problems.empty()) throw ValidationError(problems);
    std::string text;
    for (Layer l : {Layer::L1, Layer::L2, Layer::L3}) {
        const TraitSpec* t = registry.find(l, style.at(l));
        if (!t) continue;
        if (!text.empty()) text += ' ';
        text += t->description_template;
    }
    if (text.empty()) text = "A normal driver who keeps to the rules and moves with the flow of traffic.";
    return text;
}

BehaviorDescription generate_description(const StyleTriplet& style, const TraitRegistry& registry,
                                         DescriptionSource* source) {
    BehaviorDescription out;
    out.text = template_description(style, registry);
    out.trait_tags = expected_tags(style);
    if (!source) return out;
    std::optional<std::string> text;
    try {
        text = source->describe(style);
    } catch (...) {
        text.reset();
    }
    if (text && extract_trait_tags(*text, registry) == out.trait_tags) {
        out.text = *text;
        out.from_template = false;
    }
    return out;
}

// ---------------------------------------------------------------------------
// policies

void PolicySet::install(Policy p, bool retranslation) {
    const int i = static_cast<int>(p.layer);
    layers[i] = std::move(p);
    if (retranslation) ++versions[i];
}

bool PolicySet::empty() const {
    return std::none_of(layers.begin(), layers.end(), [](const auto& p) { return p.has_value(); });
}

// ---------------------------------------------------------------------------
// schedule

StyleSchedule::StyleSchedule(const ScheduleParams& params, std::uint64_t seed) : params_(params), rng_(seed) {
    if (params_.l2_period < 1) throw ContractViolation("l2_period must be >= 1");
    if (!(params_.l3_rate >= 0.0)) throw ContractViolation("l3_rate must be >= 0");
    if (!(params_.dt > 0.0)) throw ContractViolation("dt must be > 0");
    arrival_s_ = 0.0;
    draw_next(0);
}

void StyleSchedule::draw_next(std::int64_t after) {
    if (params_.l3_rate <= 0.0) {
        next_l3_ = kNever;
        return;
    }
    // Arrival times accumulate in continuous time; each maps to the first step at or after it.
    arrival_s_ += rng_.exponential(params_.l3_rate);
    const auto step = static_cast<std::int64_t>(std::ceil(arrival_s_ / params_.dt - 1e-9));
    next_l3_ = std::max(after + 1, step);
}

Triggers StyleSchedule::poll(std::int64_t t) {
    if (t <= last_t_) throw ContractViolation("poll_triggers: step " + std::to_string(t) + " is not after " + std::to_string(last_t_));
    last_t_ = t;
    Triggers out;
    out.l2_update = t > 0 && t % params_.l2_period == 0;
    while (next_l3_ < t) draw_next(next_l3_);
    if (next_l3_ == t) {
        out.l3_trigger = true;
        draw_next(t);
    }
    return out;
}

double effective_intensity_l2(const Policy& policy, std::int64_t steps, L2Pattern pattern, const ScheduleParams& params,
                              std::uint64_t pulse_seed) {
    if (steps < 0) throw ContractViolation("effective_intensity_l2: negative step count");
    const double base = std::clamp(policy.intensity, 0.0, 1.0);
    switch (pattern) {
        case L2Pattern::none: return base;
        case L2Pattern::incremental: {
            if (params.ramp_steps <= 0 || steps >= params.ramp_steps) return base;
            return base * static_cast<double>(steps) / static_cast<double>(params.ramp_steps);
        }
        case L2Pattern::episodic: {
            const auto block = static_cast<std::uint64_t>(steps / std::max<std::int64_t>(1, params.pulse_steps));
            const std::uint64_t h = derive_seed(pulse_seed, block);
            if ((h & 1U) == 0) return base;  // no pulse in this block
            const double amp = params.pulse_amplitude * (2.0 * unit_interval(mix64(h)) - 1.0);
            return std::clamp(base + amp, 0.0, 1.0);
        }
    }
    return base;
}

}  // namespace stylesim
