#include "fixtures.hpp"

#include "stylesim/errors.hpp"
#include "stylesim/scene.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace stylesim;

TEST_CASE("extract_bev: identity frame and range cutoff") {
    auto s = fx::scene_of({fx::vehicle("ego", 0, 0), fx::vehicle("near", 10, 0), fx::vehicle("far", 60, 0)});
    auto v = extract_bev(s, "ego", 50.0);
    REQUIRE(v.objects.size() == 1);
    CHECK(v.objects[0].id == "near");
    CHECK(v.objects[0].pose.x == doctest::Approx(10.0));
    CHECK(v.objects[0].pose.y == doctest::Approx(0.0));
    CHECK(v.provenance == Provenance::objective);
}

TEST_CASE("extract_bev: rotated ego") {
    auto s = fx::scene_of({fx::vehicle("ego", 0, 0, std::numbers::pi / 2), fx::vehicle("o", 0, 10)});
    auto v = extract_bev(s, "ego");
    REQUIRE(v.objects.size() == 1);
    // hand rotation by -pi/2: (x, y) -> (y, -x)
    CHECK(v.objects[0].pose.x == doctest::Approx(10.0));
    CHECK(v.objects[0].pose.y == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("extract_bev: unknown ego") {
    auto s = fx::scene_of({fx::vehicle("ego", 0, 0)});
    CHECK_THROWS_AS(extract_bev(s, "ghost"), MissingAgentError);
}

TEST_CASE("frame round trip") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> u(-500, 500), h(-3.14, 3.14);
    for (int i = 0; i < 1000; ++i) {
        Pose origin{u(g), u(g), h(g)};
        Pose p{u(g), u(g), h(g)};
        Pose back = from_frame(origin, to_frame(origin, p));
        CHECK(std::hypot(back.x - p.x, back.y - p.y) < 1e-9);
        CHECK(std::abs(normalize_angle(back.heading - p.heading)) < 1e-9);
    }
}

TEST_CASE("identify_objects ordering") {
    BevView empty;
    CHECK(identify_objects(empty).empty());

    auto s = fx::scene_of({fx::vehicle("ego", 0, 0), fx::vehicle("x20", 20, 0), fx::vehicle("x5", 5, 0),
                           fx::vehicle("b", -30, 1), fx::vehicle("a", 30, -1)});
    auto ents = identify_objects(extract_bev(s, "ego"));
    REQUIRE(ents.size() == 4);
    CHECK(ents[0].id == "x5");
    CHECK(ents[1].id == "x20");
    // equal |x|: id breaks the tie
    CHECK(ents[2].id == "a");
    CHECK(ents[3].id == "b");
}

TEST_CASE("advance_kinematics") {
    SUBCASE("zero accel at rest") {
        auto s = fx::scene_of({fx::vehicle("car", 3, 4, 0.3, 0.0)});
        auto n = advance_kinematics(s, {{"car", DrivingDecision{}}}, 0.05);
        CHECK(n.step_index == 1);
        CHECK(n.objects[0].pose == s.objects[0].pose);
    }
    SUBCASE("semi-implicit Euler step") {
        auto s = fx::scene_of({fx::vehicle("car", 0, 0, 0.0, 10.0)});
        DrivingDecision d;
        d.accel = 2.0;
        auto n = advance_kinematics(s, {{"car", d}}, 0.05);
        // speed first, then position with the new speed
        const double v1 = 10.0 + 2.0 * 0.05;
        CHECK(n.objects[0].speed == doctest::Approx(v1));
        CHECK(n.objects[0].pose.x == doctest::Approx(v1 * 0.05));
        CHECK(n.objects[0].pose.y == doctest::Approx(0.0));
    }
    SUBCASE("speed clamps at zero") {
        auto s = fx::scene_of({fx::vehicle("car", 0, 0, 0.0, 0.1)});
        DrivingDecision d;
        d.accel = -5.0;
        auto n = advance_kinematics(s, {{"car", d}}, 0.05);
        CHECK(n.objects[0].speed == 0.0);
        CHECK(n.objects[0].pose.x == 0.0);
    }
    SUBCASE("object count conserved") {
        auto s = fx::scene_of({fx::vehicle("a", 0, 0, 0, 5), fx::vehicle("b", 10, 0, 0, 5)});
        auto n = advance_kinematics(s, {{"a", DrivingDecision{}}}, 0.05);
        CHECK(n.objects.size() == 2);
        CHECK(n.objects[1].pose.x == doctest::Approx(10.25));
    }
}

TEST_CASE("route_completion on a straight 200 m route") {
    auto map = std::make_shared<RoadMap>(std::vector<LaneGeometry>{fx::straight("a", {0, 0}, {200, 0})},
                                         std::vector<SignalState>{});
    auto route = Route::build(*map, {"a"});
    std::vector<Pose> full, still, half;
    for (int i = 0; i <= 200; ++i) full.push_back({double(i), 0, 0});
    for (int i = 0; i < 50; ++i) still.push_back({0, 0, 0});
    for (int i = 0; i <= 100; ++i) half.push_back({double(i), 0.3, 0});
    CHECK(route_completion(route, full) == doctest::Approx(100.0));
    CHECK(route_completion(route, still) == doctest::Approx(0.0));
    CHECK(route_completion(route, half) == doctest::Approx(50.0));
}

TEST_CASE("route build rejects disconnected lanes") {
    RoadMap map({fx::straight("a", {0, 0}, {100, 0}), fx::straight("b", {100, 0}, {200, 0})}, {});
    CHECK_THROWS_AS(Route::build(map, {"a", "b"}), ValidationError);
    CHECK_THROWS_AS(Route::build(map, {"zz"}), ValidationError);
}

TEST_CASE("signal cycle") {
    SignalState s;
    s.id = "sig";
    s.controlled_lanes = {"a"};
    s.schedule = {{SignalColor::red, 2.0}, {SignalColor::green, 3.0}, {SignalColor::yellow, 1.0}};
    s.state = SignalColor::red;
    CHECK(check_signal_schedule(s.schedule).empty());
    CHECK(!check_signal_schedule({{SignalColor::red, 1.0}, {SignalColor::yellow, 1.0}}).empty());
    std::vector<SignalColor> seen{s.state};
    for (int i = 0; i < 140; ++i) {
        s.advance(0.05);
        if (s.state != seen.back()) seen.push_back(s.state);
    }
    REQUIRE(seen.size() >= 4);
    CHECK(seen[1] == SignalColor::green);
    CHECK(seen[2] == SignalColor::yellow);
    CHECK(seen[3] == SignalColor::red);
}
