#include "stylesim/translator.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace stylesim;

namespace {

TranslationRequest init_request(const StyleTriplet& s, std::uint64_t seed = 1) {
    TranslationRequest r;
    r.mode = TranslationMode::init;
    r.agent_id = "car";
    r.description = generate_description(s, TraitRegistry::builtin());
    r.agent_seed = seed;
    return r;
}

struct Canned : CompletionProvider {
    std::function<std::optional<std::string>(const std::string&)> fn;
    std::optional<std::string> complete(const std::string& p) override { return fn(p); }
    std::string name() const override { return "canned"; }
};

std::string random_garbage(std::mt19937_64& g) {
    static const std::vector<std::string> pieces = {
        "[", "]", "{", "}", ",", ":", "\"api\"", "\"params\"", "\"selector\"", "\"scale_perceived_distance\"",
        "\"factor\"", "1e309", "-3", "null", "true", "\"layer\"", "\"L9\"", "\"drunk\"", "NaN", "\"teleport\"",
        "\"kind\"", "\"lane\"", "\"target_id\"", "0.5", "```json", "\\u0000", "\"curve_lane_marks\""};
    std::uniform_int_distribution<int> len(0, 40), pick(0, int(pieces.size()) - 1), byte(0, 255), coin(0, 5);
    std::string s;
    for (int i = len(g); i > 0; --i) {
        if (coin(g) == 0) s.push_back(char(byte(g)));
        else s += pieces[pick(g)];
    }
    return s;
}

}  // namespace

TEST_CASE("catalog covers every trait") {
    auto cat = ScriptCatalog::builtin();
    CHECK(cat.entries().size() >= 10);
    for (auto t : {"aggressive", "cautious", "drunk", "fatigued", "distracted"}) {
        bool found = false;
        for (const auto& e : cat.entries()) found |= e.trait == t;
        CHECK_MESSAGE(found, t);
    }
}

TEST_CASE("init translation") {
    auto reg = TraitRegistry::builtin();
    auto cat = ScriptCatalog::builtin();
    Translator tr(reg, cat);

    auto d = tr.translate(init_request({"aggressive", "normal", "normal"}));
    REQUIRE(d.policies.size() == 1);
    CHECK(d.policies[0].layer == Layer::L1);
    CHECK(d.policies[0].statement.find("perceived distance") != std::string::npos);
    CHECK(d.policies[0].statement.find("further") != std::string::npos);

    CHECK(tr.translate(init_request({})).policies.empty());

    // pure function of request and seed
    auto a = tr.translate_catalog(init_request({"cautious", "fatigued", "distracted"}, 5));
    auto b = tr.translate_catalog(init_request({"cautious", "fatigued", "distracted"}, 5));
    REQUIRE(a.policies.size() == b.policies.size());
    for (std::size_t i = 0; i < a.policies.size(); ++i) CHECK(a.policies[i] == b.policies[i]);
}

TEST_CASE("update stays within the guard band") {
    auto reg = TraitRegistry::builtin();
    auto cat = ScriptCatalog::builtin();
    Translator tr(reg, cat);
    StyleTriplet s{"normal", "drunk", "normal"};
    Policy prior;
    prior.layer = Layer::L2;
    prior.trait = "drunk";
    prior.intensity = 0.5;
    for (int i = 0; i < 100; ++i) {
        TranslationRequest r;
        r.mode = TranslationMode::update;
        r.agent_id = "car";
        r.description = generate_description(s, reg);
        r.prior = prior;
        r.step = 2000 * (i + 1);
        r.agent_seed = derive_seed(11, i);
        auto d = tr.translate(r);
        REQUIRE(d.policies.size() == 1);
        CHECK(d.policies[0].layer == Layer::L2);
        CHECK(d.policies[0].intensity >= 0.5 * std::exp(-0.1) - 1e-12);
        CHECK(d.policies[0].intensity <= 0.5 * std::exp(0.1) + 1e-12);
    }
}

TEST_CASE("validate_script") {
    CHECK(validate_script(Script{}).verdict == Verdict::accept);

    Script bad{"car", {{"teleport_ego", {}, {}, Layer::L1, 0}}};
    auto r = validate_script(bad);
    CHECK(r.verdict == Verdict::repairable);
    REQUIRE(r.semantic_errors.size() == 1);
    CHECK(r.semantic_errors[0].find("unknown api") != std::string::npos);

    Script far{"car", {{"scale_perceived_distance", {}, {{"factor", 10.0}}, Layer::L1, 0}}};
    auto rf = validate_script(far);
    CHECK(rf.verdict == Verdict::repairable);
    REQUIRE(rf.semantic_errors.size() == 1);
    CHECK(rf.semantic_errors[0].find("out of range") != std::string::npos);
}

TEST_CASE("repair_or_fallback") {
    auto cat = ScriptCatalog::builtin();
    Script far{"car", {{"scale_perceived_distance", {}, {{"factor", 10.0}}, Layer::L1, 0}}};
    auto fixed = repair_or_fallback(far, validate_script(far), cat);
    REQUIRE(fixed.script.calls.size() == 1);
    CHECK(fixed.script.calls[0].params.at("factor") == 2.0);

    Script wobbly{"car", {{"drunk_wobble", {}, {}, Layer::L2, 0}}};
    auto swapped = repair_or_fallback(wobbly, validate_script(wobbly), cat);
    REQUIRE(!swapped.script.calls.empty());
    CHECK(swapped.script.calls[0].api == "curve_lane_marks");

    Script junk{"car", {{"zzz", {}, {}, Layer::L1, 0}, {"qqq", {}, {}, Layer::L2, 0}}};
    auto gone = repair_or_fallback(junk, validate_script(junk), cat);
    CHECK(gone.script.calls.empty());
    CHECK(gone.emptied);
}

TEST_CASE("fuzzed provider text always repairs to an accepted script") {
    auto cat = ScriptCatalog::builtin();
    std::mt19937_64 g(2024);
    for (int i = 0; i < 3000; ++i) {
        auto text = random_garbage(g);
        auto parsed = parse_script_text(text, "car");
        auto rep = validate_script(parsed.script, nullptr, parsed.errors);
        auto fixed = repair_or_fallback(parsed.script, rep, cat);
        CHECK(validate_script(fixed.script).verdict == Verdict::accept);
    }
}

TEST_CASE("provider failure falls back to the catalog") {
    auto reg = TraitRegistry::builtin();
    auto cat = ScriptCatalog::builtin();
    Canned down;
    down.fn = [](const std::string&) -> std::optional<std::string> { throw std::runtime_error("timeout"); };
    Transcript log;
    Translator tr(reg, cat, &down, PromptSet::builtin(), &log);
    auto d = tr.translate(init_request({"aggressive", "normal", "normal"}));
    REQUIRE(d.policies.size() == 1);
    REQUIRE(!d.events.empty());
    CHECK(d.events[0].kind == "fallback");
    CHECK(!log.snapshot().empty());

    Canned good;
    good.fn = [](const std::string&) -> std::optional<std::string> {
        return R"([{"api":"scale_perceived_distance","selector":{"relation":"lead"},"params":{"factor":1.3}}])";
    };
    Translator tr2(reg, cat, &good);
    auto d2 = tr2.translate(init_request({"aggressive", "normal", "normal"}));
    REQUIRE(d2.policies.size() == 1);
    CHECK(d2.events[0].kind == "translated");
    REQUIRE(d2.policies[0].fragment.size() == 1);
    CHECK(d2.policies[0].fragment[0].params.at("factor") == doctest::Approx(1.3));
}

TEST_CASE("prompt mentions the api documentation") {
    auto reg = TraitRegistry::builtin();
    auto cat = ScriptCatalog::builtin();
    Translator tr(reg, cat);
    auto p = tr.build_prompt(init_request({"normal", "drunk", "normal"}), Layer::L2, 0.6);
    CHECK(p.find("curve_lane_marks") != std::string::npos);
    CHECK(p.find("drunk") != std::string::npos);
}
