#include "stylesim/errors.hpp"
#include "stylesim/style.hpp"

#include <doctest.h>

#include <cmath>

using namespace stylesim;

TEST_CASE("template descriptions carry the triplet's tags") {
    auto reg = TraitRegistry::builtin();
    auto d = generate_description({"aggressive", "normal", "normal"}, reg);
    CHECK(d.text.find("aggressive") != std::string::npos);
    CHECK(d.trait_tags == std::set<TraitTag>{{Layer::L1, "aggressive"}});

    auto n = generate_description({}, reg);
    CHECK(n.trait_tags.empty());
    CHECK(!n.text.empty());

    auto three = generate_description({"aggressive", "drunk", "distracted"}, reg);
    CHECK(three.trait_tags.size() == 3);
    CHECK(extract_trait_tags(three.text, reg) == expected_tags({"aggressive", "drunk", "distracted"}));
}

namespace {
struct Liar : DescriptionSource {
    std::optional<std::string> text;
    bool boom = false;
    std::optional<std::string> describe(const StyleTriplet&) override {
        if (boom) throw std::runtime_error("down");
        return text;
    }
};
}  // namespace

TEST_CASE("description source falls back to the template") {
    auto reg = TraitRegistry::builtin();
    StyleTriplet s{"cautious", "normal", "normal"};
    Liar bad;
    bad.text = "a drunk driver";  // wrong tags
    auto d = generate_description(s, reg, &bad);
    CHECK(d.from_template);
    CHECK(d.text == template_description(s, reg));

    Liar dead;
    dead.boom = true;
    CHECK(generate_description(s, reg, &dead).from_template);

    Liar good;
    good.text = "Someone cautious behind the wheel.";
    auto g = generate_description(s, reg, &good);
    CHECK(!g.from_template);
    CHECK(g.text == *good.text);
}

TEST_CASE("registry rejects unknown traits per layer") {
    auto reg = TraitRegistry::builtin();
    CHECK(check_triplet(reg, {"aggressive", "drunk", "distracted"}).empty());
    auto probs = check_triplet(reg, {"reckless", "aggressive", "normal"});
    CHECK(probs.size() == 2);
    TraitSpec dup;
    dup.name = "aggressive";
    CHECK_THROWS_AS(reg.add(dup), ContractViolation);
    TraitSpec fresh;
    fresh.name = "sleepy";
    fresh.layer = Layer::L2;
    reg.close();
    CHECK_THROWS_AS(reg.add(fresh), ContractViolation);
}

TEST_CASE("triplet label round trip") {
    StyleTriplet s{"cautious", "fatigued", "distracted"};
    CHECK(s.label() == "cautious/fatigued/distracted");
    CHECK(StyleTriplet::parse_label(s.label()) == s);
    CHECK(!StyleTriplet::parse_label("a/b"));
}

TEST_CASE("schedule: L2 update cadence") {
    ScheduleParams p;
    p.l3_rate = 0.0;
    StyleSchedule sch(p, 1);
    int updates = 0;
    for (std::int64_t t = 0; t <= 6000; ++t) {
        auto tr = sch.poll(t);
        if (tr.l2_update) {
            ++updates;
            CHECK(t % 2000 == 0);
            CHECK(t > 0);
        }
        CHECK(!tr.l3_trigger);
    }
    CHECK(updates == 3);
}

TEST_CASE("schedule: non-monotone polling") {
    StyleSchedule sch({}, 1);
    sch.poll(5);
    CHECK_THROWS_AS(sch.poll(5), ContractViolation);
    CHECK_THROWS_AS(sch.poll(3), ContractViolation);
}

TEST_CASE("schedule: L3 arrival count matches the rate") {
    ScheduleParams p;
    const std::int64_t horizon = 1'000'000;
    const double expected = p.l3_rate * horizon * p.dt;  // 3200
    double total = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        StyleSchedule sch(p, derive_seed(99, s));
        for (std::int64_t t = 0; t < horizon; ++t) total += sch.poll(t).l3_trigger;
    }
    CHECK(std::abs(total / seeds - expected) / expected < 0.05);
}

TEST_CASE("effective intensity") {
    ScheduleParams p;
    Policy pol;
    pol.layer = Layer::L2;
    pol.intensity = 0.8;
    CHECK(effective_intensity_l2(pol, 0, L2Pattern::incremental, p, 1) == 0.0);
    CHECK(effective_intensity_l2(pol, 2000, L2Pattern::incremental, p, 1) == doctest::Approx(0.4));
    CHECK(effective_intensity_l2(pol, 4000, L2Pattern::incremental, p, 1) == doctest::Approx(0.8));
    CHECK(effective_intensity_l2(pol, 9000, L2Pattern::incremental, p, 1) == doctest::Approx(0.8));

    pol.intensity = 0.6;
    double lo = 1, hi = 0;
    for (std::int64_t k = 0; k < 10000; ++k) {
        double v = effective_intensity_l2(pol, k, L2Pattern::episodic, p, 42);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        // counter-based: same answer when asked again
        CHECK(v == effective_intensity_l2(pol, k, L2Pattern::episodic, p, 42));
    }
    CHECK(lo >= 0.4 - 1e-12);
    CHECK(hi <= 0.8 + 1e-12);
    CHECK(hi > lo);
}

TEST_CASE("policy set counts retranslations only") {
    PolicySet ps;
    CHECK(ps.empty());
    Policy p;
    p.layer = Layer::L2;
    ps.install(p, false);
    CHECK(ps.version(Layer::L2) == 0);
    ps.install(p, true);
    ps.install(p, true);
    CHECK(ps.version(Layer::L2) == 2);
    CHECK(ps.version(Layer::L1) == 0);
}
