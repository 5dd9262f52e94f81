#include "fixtures.hpp"

#include "stylesim/errors.hpp"
#include "stylesim/pmbi.hpp"
#include "stylesim/translator.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace stylesim;

namespace {

BevView lane_view() {
    auto map = std::make_shared<RoadMap>(std::vector<LaneGeometry>{fx::straight("a", {-100, 0}, {200, 0})},
                                         std::vector<SignalState>{});
    auto ego = fx::vehicle("ego", 0, 0, 0, 10);
    ego.lane_id = "a";
    auto lead = fx::vehicle("lead", 10, 0, 0, 8);
    lead.lane_id = "a";
    return extract_bev(fx::scene_of({ego, lead, fx::vehicle("side", -20, 3.5)}, map), "ego");
}

Policy policy_from(const char* entry, Layer layer, double intensity) {
    auto cat = ScriptCatalog::builtin();
    Policy p;
    p.layer = layer;
    p.intensity = intensity;
    p.fragment = instantiate(*cat.find(entry), intensity, layer);
    return p;
}

}  // namespace

TEST_CASE("api catalog") {
    const auto& c = catalog();
    CHECK(c.size() == 16);
    std::map<Dimension, int> per;
    std::set<std::string> names;
    for (const auto& d : c) {
        per[d.dimension]++;
        names.insert(d.name);
    }
    CHECK(names.size() == 16);
    for (auto d : {Dimension::motion, Dimension::spatial, Dimension::temporal, Dimension::structural}) CHECK(per[d] == 4);
    REQUIRE(find_api("scale_perceived_distance"));
    CHECK(find_api("scale_perceived_distance")->monotone);
    CHECK(find_api("teleport_ego") == nullptr);
    CHECK(catalog_index("nope") == std::size_t(-1));
}

TEST_CASE("map_policy_to_calls") {
    auto view = lane_view();
    std::vector<std::string> route{"a"};
    auto scope = summarize_scope(view, route);
    REQUIRE(scope.lead == std::optional<std::string>("lead"));

    SUBCASE("empty policy set") {
        PolicySet ps;
        for (const auto& e : identify_entities(view)) CHECK(map_policy_to_calls(e, ps, scope).calls.empty());
    }
    SUBCASE("aggressive distance factor on the lead") {
        PolicySet ps;
        ps.install(policy_from("aggressive-distance", Layer::L1, 0.8), false);
        PerceivedEntity lead{EntityKind::vehicle, "lead", 10.0};
        auto r = map_policy_to_calls(lead, ps, scope);
        REQUIRE(r.calls.size() == 1);
        CHECK(r.calls[0].api == "scale_perceived_distance");
        CHECK(r.calls[0].params.at("factor") == doctest::Approx(1.0 + 0.8 * 0.5));
        // a vehicle that is not the lead is not addressed
        PerceivedEntity side{EntityKind::vehicle, "side", 20.0};
        CHECK(map_policy_to_calls(side, ps, scope).calls.empty());
    }
    SUBCASE("drunk lanes curve lane marks") {
        PolicySet ps;
        ps.install(policy_from("drunk-lanes", Layer::L2, 0.6), false);
        PerceivedEntity lane{EntityKind::lane, "a", 0.0};
        auto r = map_policy_to_calls(lane, ps, scope);
        REQUIRE(r.calls.size() == 1);
        CHECK(r.calls[0].api == "curve_lane_marks");
    }
    SUBCASE("effective intensity scales toward neutral") {
        PolicySet ps;
        ps.install(policy_from("aggressive-distance", Layer::L1, 0.8), false);
        PerceivedEntity lead{EntityKind::vehicle, "lead", 10.0};
        auto r = map_policy_to_calls(lead, ps, scope, {0.4, 0, 0});
        REQUIRE(r.calls.size() == 1);
        CHECK(r.calls[0].params.at("factor") == doctest::Approx(1.2));
    }
}

TEST_CASE("enforce_consistency") {
    ConsistencyState st;
    ApiCall c;
    c.api = "scale_perceived_distance";
    c.layer = Layer::L1;
    c.params["factor"] = 1.5;
    CHECK(enforce_consistency(st, c).at("factor") == doctest::Approx(1.5));

    ConsistencyState s2;
    s2.last[ConsistencyState::key(Layer::L1, c.api, "factor")] = 1.2;
    c.params["factor"] = 1.25;
    CHECK(enforce_consistency(s2, c).at("factor") == doctest::Approx(1.25));
    c.params["factor"] = 2.0;
    CHECK(enforce_consistency(s2, c).at("factor") == doctest::Approx(1.25 * std::exp(0.1)));

    ConsistencyState s3;
    s3.last[ConsistencyState::key(Layer::L1, c.api, "factor")] = 1.2;
    CHECK(enforce_consistency(s3, c).at("factor") == doctest::Approx(1.2 * std::exp(0.1)));  // ~1.326

    // unguarded parameters pass through
    ApiCall sh;
    sh.api = "shift_signal_phase";
    sh.params["shift_s"] = 4.0;
    ConsistencyState s4;
    enforce_consistency(s4, sh);
    sh.params["shift_s"] = -4.0;
    CHECK(enforce_consistency(s4, sh).at("shift_s") == -4.0);
}

TEST_CASE("order_script sorts and dedups") {
    Script s;
    ApiCall a{"curve_lane_marks", {}, {}, Layer::L2, 1};
    ApiCall b{"scale_perceived_distance", {}, {}, Layer::L1, 2};
    ApiCall c{"scale_perceived_speed", {}, {}, Layer::L1, 3};
    s.calls = {a, b, c, b};
    order_script(s);
    REQUIRE(s.calls.size() == 3);
    CHECK(s.calls[0].api == "scale_perceived_speed");
    CHECK(s.calls[1].api == "scale_perceived_distance");
    CHECK(s.calls[2].api == "curve_lane_marks");
}

TEST_CASE("apply_script") {
    auto view = lane_view();
    ModulationState ms;

    SUBCASE("identity") {
        auto out = apply_script(view, Script{"ego", {}}, ms);
        CHECK(out.provenance == Provenance::modulated);
        out.provenance = Provenance::objective;
        CHECK(out == view);
    }
    SUBCASE("distance scaling from the ego origin") {
        Script s{"ego", {{"scale_perceived_distance", {EntityKind::vehicle, std::nullopt, "lead"}, {{"factor", 1.2}}, Layer::L1, 1}}};
        auto out = apply_script(view, s, ms);
        const auto* o = out.find_object("lead");
        REQUIRE(o);
        CHECK(o->pose.x == doctest::Approx(12.0));
        CHECK(o->pose.y == doctest::Approx(0.0));
        CHECK(out.find_object("side")->pose.x == doctest::Approx(-20.0));
    }
    SUBCASE("curved lane marks") {
        BevView v;
        v.ego_id = "ego";
        v.lanes.push_back(fx::straight("l", {0, 0}, {100, 0}));
        Script s{"ego", {{"curve_lane_marks", {EntityKind::lane, std::nullopt, "l"}, {{"amplitude_m", 0.5}, {"wavelength_m", 20.0}}, Layer::L2, 1}}};
        auto out = apply_script(v, s, ms);
        REQUIRE(out.lanes.size() == 1);
        double max_off = 0, at5 = 99;
        for (const auto& p : out.lanes[0].centerline) {
            max_off = std::max(max_off, std::abs(p.y));
            if (std::abs(p.x - 5.0) < 1e-9) at5 = p.y;
        }
        CHECK(at5 == doctest::Approx(0.5 * std::sin(2 * std::numbers::pi * 5 / 20)));
        CHECK(max_off <= 0.5 + 1e-12);
        CHECK(max_off > 0.49);
    }
    SUBCASE("absent target is skipped") {
        Script s{"ego", {{"occlude_object", {std::nullopt, std::nullopt, "ghost"}, {{"probability", 1.0}}, Layer::L3, 1}}};
        auto r = apply_script_ex(view, s, ms);
        CHECK(r.skipped.size() == 1);
        CHECK(r.view.objects.size() == view.objects.size());
    }
}

TEST_CASE("perception_divergence") {
    BevView a;
    a.ego_id = "ego";
    for (int i = 0; i < 4; ++i) a.objects.push_back(fx::vehicle("o" + std::to_string(i), 10.0 * i, 5));
    SignalState sig;
    sig.id = "s";
    sig.state = SignalColor::red;
    a.signals.push_back(sig);
    CHECK(perception_divergence(a, a).all_zero());

    auto b = a;
    b.objects[2].pose.x += 2.0;
    b.signals[0].state = SignalColor::green;
    auto r = perception_divergence(a, b);
    CHECK(r.mean_displacement == doctest::Approx(0.5));
    CHECK(r.signal_disagreements == 1);

    auto c = a;
    c.step_index = 3;
    CHECK_THROWS_AS(perception_divergence(a, c), ContractViolation);
}
