#pragma once

#include "stylesim/rng.hpp"
#include "stylesim/script.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stylesim {

inline constexpr std::string_view kNormalTrait = "normal";

enum class L2Pattern { none, incremental, episodic };
std::string_view to_string(L2Pattern p);

struct TraitSpec {
    std::string name;
    Layer layer = Layer::L1;
    std::string description_template;
    std::vector<std::string> policy_template;  // script-catalog entry ids
    double default_intensity = 0.5;
    L2Pattern pattern = L2Pattern::none;  // L2 traits only
    double episode_s = 0.0;               // L3 traits: how long one re-interpretation stays active
};

/// Registered traits per layer. "normal" is implicit for every layer.
class TraitRegistry {
public:
    static TraitRegistry builtin();
    static TraitRegistry from_json(const json& doc);

    /// Throws ContractViolation once closed or on a duplicate name.
    void add(TraitSpec spec);
    void close() { closed_ = true; }
    bool closed() const { return closed_; }

    const TraitSpec* find(Layer layer, std::string_view name) const;
    bool contains(Layer layer, std::string_view name) const;
    std::vector<const TraitSpec*> traits() const;

    json to_json() const;

private:
    std::map<std::pair<Layer, std::string>, TraitSpec> traits_;
    bool closed_ = false;
};

struct StyleTriplet {
    std::string l1{kNormalTrait};
    std::string l2{kNormalTrait};
    std::string l3{kNormalTrait};

    const std::string& at(Layer l) const;
    bool all_normal() const;
    /// "l1/l2/l3"
    std::string label() const;
    static std::optional<StyleTriplet> parse_label(std::string_view s);

    bool operator==(const StyleTriplet&) const = default;
    auto operator<=>(const StyleTriplet&) const = default;
};

/// Unregistered traits, one message per offending layer.
std::vector<std::string> check_triplet(const TraitRegistry& registry, const StyleTriplet& style);

using TraitTag = std::pair<Layer, std::string>;

struct BehaviorDescription {
    std::string text;
    std::set<TraitTag> trait_tags;
    bool from_template = true;
};

/// Non-normal entries of a triplet as tags.
std::set<TraitTag> expected_tags(const StyleTriplet& style);
/// Registered non-normal trait names appearing as whole words in `text` (case-insensitive).
std::set<TraitTag> extract_trait_tags(std::string_view text, const TraitRegistry& registry);

/// External text generator. Returning nullopt or throwing counts as failure.
class DescriptionSource {
public:
    virtual ~DescriptionSource() = default;
    virtual std::optional<std::string> describe(const StyleTriplet& style) = 0;
};

std::string template_description(const StyleTriplet& style, const TraitRegistry& registry);

/// Template text unless `source` produces a text whose tags match the triplet exactly.
BehaviorDescription generate_description(const StyleTriplet& style, const TraitRegistry& registry,
                                         DescriptionSource* source = nullptr);

struct Policy {
    Layer layer = Layer::L1;
    std::string trait;
    std::string statement;
    double intensity = 0.0;
    std::map<std::string, double> parameter_hints;  // "api.param" -> value at full intensity
    std::vector<ApiCall> fragment;                  // call templates; selectors may be generic
    std::uint64_t seed = 0;
    std::string source = "catalog";
    std::int64_t activated_step = 0;
    std::int64_t expires_step = -1;  // L3 episodes; -1 = never

    bool operator==(const Policy&) const = default;
};

struct PolicySet {
    std::array<std::optional<Policy>, 3> layers;
    std::array<int, 3> versions{0, 0, 0};

    std::optional<Policy>& at(Layer l) { return layers[static_cast<int>(l)]; }
    const std::optional<Policy>& at(Layer l) const { return layers[static_cast<int>(l)]; }
    int version(Layer l) const { return versions[static_cast<int>(l)]; }
    /// Installs a policy. Counters count retranslations only, so the initial install leaves them at 0.
    void install(Policy p, bool retranslation);
    bool empty() const;
};

struct ScheduleParams {
    std::int64_t l2_period = 2000;
    double l3_rate = 0.064;  // events per simulated second
    double dt = 0.05;
    std::int64_t ramp_steps = 4000;
    double pulse_amplitude = 0.2;
    std::int64_t pulse_steps = 40;
};

struct Triggers {
    bool l2_update = false;
    bool l3_trigger = false;
    bool operator==(const Triggers&) const = default;
};

/// Per-agent trigger clock. Arrivals are exponential in simulated seconds, drawn from its own stream.
class StyleSchedule {
public:
    StyleSchedule(const ScheduleParams& params, std::uint64_t seed);

    /// `t` must strictly increase across calls; throws ContractViolation otherwise.
    Triggers poll(std::int64_t t);
    std::int64_t next_l3_step() const { return next_l3_; }
    const ScheduleParams& params() const { return params_; }

    static constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

private:
    void draw_next(std::int64_t after);

    ScheduleParams params_;
    RandomStream rng_;
    double arrival_s_ = 0.0;
    std::int64_t next_l3_ = kNever;
    std::int64_t last_t_ = -1;
};

/// L2 intensity after `steps` since activation. Episodic pulses are counter-based on `pulse_seed`,
/// so the value at a step does not depend on query order.
double effective_intensity_l2(const Policy& policy, std::int64_t steps, L2Pattern pattern,
                              const ScheduleParams& params, std::uint64_t pulse_seed);

}  // namespace stylesim
