// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.
#include "fixtures.hpp"

#include "stylesim/errors.hpp"
#include "stylesim/events.hpp"
#include "stylesim/metrics.hpp"
#include "stylesim/runtime.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace stylesim;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<json> parse_lines(const std::vector<std::string>& log) {
    std::vector<json> out;
    out.reserve(log.size());
    for (const auto& l : log) out.push_back(json::parse(l));
    return out;
}

SimulationConfig scenario(const std::string& name, std::vector<std::string> overrides = {}) {
    return load_config(fx::data("scenarios/" + name + ".json"), overrides);
}

RunOptions quiet() {
    RunOptions o;
    o.keep_log = false;
    o.record_samples = false;
    return o;
}

// same layout as the shipped ring, any size, constant spacing
json ring_doc(int n, int steps, std::uint64_t seed) {
    const double spacing = 31.4;
    const double r = n * spacing / (2 * std::numbers::pi);
    auto arc = [&](double a0, double a1) {
        const int segs = static_cast<int>(std::ceil(r * (a1 - a0) / 2.0));
        json pts = json::array();
        for (int i = 0; i <= segs; ++i) {
            const double a = a0 + (a1 - a0) * i / segs;
            pts.push_back({r * std::cos(a), r * std::sin(a)});
        }
        return pts;
    };
    const double pi = std::numbers::pi;
    json lanes = json::array({{{"id", "ring_a"}, {"centerline", arc(-pi / 2, pi / 2)}, {"marking", "solid"}, {"successors", {"ring_b"}}},
                              {{"id", "ring_b"}, {"centerline", arc(pi / 2, 3 * pi / 2)}, {"marking", "solid"}, {"successors", {"ring_a"}}}});
    const std::vector<std::vector<std::string>> styles = {{"aggressive", "drunk", "distracted"},
                                                          {"cautious", "fatigued", "distracted"},
                                                          {"normal", "drunk", "normal"},
                                                          {"aggressive", "fatigued", "normal"},
                                                          {"normal", "normal", "distracted"}};
    json route = json::array();
    for (int i = 0; i < 12; ++i) {
        route.push_back("ring_a");
        route.push_back("ring_b");
    }
    json agents = json::array();
    for (int i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "a%02d", i);
        agents.push_back({{"id", id}, {"style", styles[i % styles.size()]}, {"route", route},
                          {"spawn", {{"s", i * spacing}, {"speed", 8}}}});
    }
    return {{"schema_version", 1}, {"name", "ring" + std::to_string(n)},
            {"map", {{"schema_version", 1}, {"lanes", lanes}, {"signals", json::array()}}},
            {"dt", 0.05}, {"max_steps", steps}, {"run_seed", seed}, {"agents", agents}};
}

// ---------------------------------------------------------------------------
// guard audit over a log

struct GuardAudit {
    long comparisons = 0;
    long violations = 0;
    double worst = 0.0;
};

void audit_guard(const std::vector<json>& lines, GuardAudit& g) {
    std::map<std::string, std::map<std::string, double>> last;
    for (const auto& j : lines) {
        if (j.value("type", "") != "step") continue;
        for (const auto& a : j["agents"]) {
            if (!a.contains("guard")) continue;
            auto& mine = last[a["id"].get<std::string>()];
            for (const auto& [key, v] : a["guard"].items()) {
                const double now = v.get<double>();
                auto it = mine.find(key);
                if (it != mine.end()) {
                    const double r = std::abs(std::log(now / it->second));
                    ++g.comparisons;
                    g.worst = std::max(g.worst, r);
                    if (!(r <= 0.1 + 1e-12)) ++g.violations;
                }
                mine[key] = now;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// algorithm fidelity, determinism, replay

std::vector<json> g_ring_seed1_log;

Outcome fidelity(const RunResult& seed1) {
    const double expected = 0.064 * 6000 * 0.05;
    double triggers = 0;
    long agents = 0;
    double slowest = seed1.wall_seconds;
    std::ostringstream bad;
    auto tally = [&](const RunResult& r, std::uint64_t seed) {
        for (const auto& [id, a] : r.agents) {
            ++agents;
            triggers += a.l3_triggers;
            if (a.init_count != 1 || a.update_count != 3) {
                bad << " seed " << seed << " " << id << " init=" << a.init_count << " update=" << a.update_count;
            }
        }
        slowest = std::max(slowest, r.wall_seconds);
    };
    tally(seed1, 1);
    // cross-check the counts against the log itself
    std::map<std::string, std::map<std::string, int>> from_log;
    for (const auto& j : g_ring_seed1_log) {
        if (j.value("type", "") != "step") continue;
        for (const auto& a : j["agents"]) {
            auto& m = from_log[a["id"].get<std::string>()];
            for (const auto& t : a["triggers"]) m[t.get<std::string>()]++;
            if (a.contains("translations")) {
                for (const auto& e : a["translations"]) {
                    if (e["mode"] == "init") m["init:" + e["layer"].get<std::string>()]++;
                }
            }
        }
    }
    for (const auto& [id, a] : seed1.agents) {
        auto& m = from_log[id];
        if (m["l2_update"] != 3 || m["l3_trigger"] != a.l3_triggers) bad << " log mismatch " << id;
        int init_layers = 0;
        for (const auto& [k, v] : m) {
            if (k.rfind("init:", 0) == 0) {
                init_layers++;
                if (v != 1) bad << " " << id << " " << k << "=" << v;
            }
        }
        if (init_layers == 0) bad << " " << id << " no init in log";
    }
    for (std::uint64_t seed = 2; seed <= 20; ++seed) {
        auto cfg = scenario("ring", {"run_seed=" + std::to_string(seed)});
        tally(run(cfg, quiet()), seed);
    }
    const double pooled = triggers / static_cast<double>(agents);
    const double rel = std::abs(pooled - expected) / expected;
    Outcome o;
    o.pass = bad.str().empty() && rel <= 0.05 && agents == 600 && slowest <= 300.0;
    o.detail = "600 agent-runs, init=1 update=3 everywhere" + std::string(bad.str().empty() ? "" : " except" + bad.str()) +
               "; L3 pooled mean " + fmt(pooled) + " vs " + fmt(expected) + " (" + fmt(100 * rel, 3) +
               "% off); slowest run " + fmt(slowest, 3) + " s";
    return o;
}

Outcome determinism(const SimulationConfig& cfg, const RunResult& a) {
    RunResult b = run(cfg);
    const bool same_bytes = a.log == b.log && a.log_digest == b.log_digest;

    auto rep = replay(a.log);
    std::int64_t agent_steps = 0;
    for (const auto& j : g_ring_seed1_log) {
        if (j.value("type", "") == "step") agent_steps += static_cast<std::int64_t>(j["agents"].size());
    }
    const bool replay_ok = rep.steps == a.steps && rep.final_world_digest == a.final_world_digest &&
                           rep.views_checked == agent_steps;

    auto shuffled_opt = quiet();
    shuffled_opt.shuffle_order = true;
    shuffled_opt.shuffle_seed = 99;
    auto shuffled = run(cfg, shuffled_opt);
    auto threaded_opt = quiet();
    threaded_opt.threads = 4;
    auto threaded = run(cfg, threaded_opt);
    const bool order_free = shuffled.world_digests == a.world_digests && threaded.world_digests == a.world_digests;

    Outcome o;
    o.pass = same_bytes && replay_ok && order_free;
    o.detail = std::string("logs ") + (same_bytes ? "byte-identical" : "DIFFER") + "; replay " +
               std::to_string(rep.steps) + "/" + std::to_string(a.steps) + " steps, " + std::to_string(rep.views_checked) +
               " views verified; shuffled and threaded world digests " + (order_free ? "identical" : "DIFFER");
    return o;
}

// ---------------------------------------------------------------------------
// non-intrusiveness

Script random_script(std::mt19937_64& g, const BevView& view) {
    const auto& apis = catalog();
    std::vector<std::string> ids{"ghost"};
    for (const auto& o : view.objects) ids.push_back(o.id);
    for (const auto& l : view.lanes) ids.push_back(l.id);
    for (const auto& s : view.signals) ids.push_back(s.id);
    std::uniform_int_distribution<int> n_calls(0, 8), pick_api(0, static_cast<int>(apis.size())), coin(0, 3),
        pick_id(0, static_cast<int>(ids.size()) - 1), pick_kind(0, 4), pick_rel(0, 4), pick_layer(0, 2);
    std::uniform_real_distribution<double> u(-0.5, 1.5);
    Script s;
    s.agent_id = view.ego_id;
    for (int i = n_calls(g); i > 0; --i) {
        ApiCall c;
        const int k = pick_api(g);
        c.api = k == static_cast<int>(apis.size()) ? "not_an_api" : apis[k].name;
        if (k < static_cast<int>(apis.size())) {
            for (const auto& p : apis[k].params) c.params[p.name] = p.lo + (p.hi - p.lo) * u(g);
        }
        if (coin(g) == 0) c.selector.kind = static_cast<EntityKind>(pick_kind(g));
        if (coin(g) == 0) c.selector.relation = static_cast<Relation>(pick_rel(g));
        if (coin(g) != 0) c.selector.target_id = ids[pick_id(g)];
        c.layer = static_cast<Layer>(pick_layer(g));
        c.call_seed = g();
        s.calls.push_back(std::move(c));
    }
    return s;
}

Outcome non_intrusive() {
    // all-normal: styled pipeline against the bypass baseline
    auto doc = ring_doc(30, 2001, 5);
    for (auto& a : doc["agents"]) a["style"] = {"normal", "normal", "normal"};
    auto cfg = parse_config(doc);
    auto opt = quiet();
    opt.record_samples = true;
    auto styled = run(cfg, opt);
    opt.bypass_pmbi = true;
    auto base = run(cfg, opt);
    bool trajectories_same = styled.world_digests == base.world_digests && styled.samples.size() == base.samples.size();
    for (const auto& [id, ss] : styled.samples) {
        const auto& bs = base.samples.at(id);
        trajectories_same = trajectories_same && ss.size() == bs.size();
        for (std::size_t i = 0; trajectories_same && i < ss.size(); ++i) {
            trajectories_same = ss[i].pose == bs[i].pose && ss[i].speed == bs[i].speed && ss[i].accel == bs[i].accel;
        }
    }

    // fuzzed scripts never touch the objective world or view
    auto world_cfg = scenario("ego_signals");
    SceneGraph world = initial_world(world_cfg);
    const std::string before = world.serialize();
    std::mt19937_64 g(17);
    ModulationState state;
    long mutated = 0, scripts = 0, changed_views = 0;
    std::vector<std::string> ids;
    for (const auto& o : world.objects) ids.push_back(o.id);
    for (int i = 0; i < 10000; ++i) {
        const auto& ego = ids[static_cast<std::size_t>(i) % ids.size()];
        const std::string frozen = world.serialize();
        const BevView objective = extract_bev(world, ego, 50.0);
        const BevView copy = objective;
        if (i % 3 == 0) state.memory.observe(objective);
        auto script = random_script(g, objective);
        auto out = apply_script_ex(objective, script, state);
        ++scripts;
        if (!(objective == copy) || world.serialize() != frozen) ++mutated;
        auto plain = out.view;
        plain.provenance = Provenance::objective;
        if (!(plain == objective)) ++changed_views;
        if (i % 50 == 49) world = advance_kinematics(world, {}, world.dt);
    }
    // the loop advances the world on purpose; compare to a clean advance from the same start
    SceneGraph clean = initial_world(world_cfg);
    if (clean.serialize() != before) ++mutated;
    for (int i = 0; i < 10000 / 50; ++i) clean = advance_kinematics(clean, {}, clean.dt);
    const bool world_same = clean.serialize() == world.serialize();

    Outcome o;
    o.pass = trajectories_same && mutated == 0 && world_same && changed_views > 0;
    o.detail = std::string("all-normal vs bypass over 2001 steps x 30 agents: ") +
               (trajectories_same ? "bit-identical" : "DIFFER") + "; " + std::to_string(scripts) +
               " fuzzed scripts, objective mutations " + std::to_string(mutated) + " (" + std::to_string(changed_views) +
               " subjective views differed)";
    return o;
}

// ---------------------------------------------------------------------------
// corridor statistics

struct StyleRun {
    double headway = 0, speed = 0, lateral = 0;
    std::vector<std::pair<std::int64_t, double>> latencies;  // (onset, steps), first followers only
    std::vector<FeatureVector> windows;                      // subsampled 600-step windows
    int missed_reactions = 0;
};

const std::vector<std::string> kStyles = {"normal", "aggressive", "cautious", "drunk", "fatigued", "distracted"};
std::map<std::string, std::map<int, StyleRun>> g_corridor;

StyleRun corridor_run(const std::string& style, int seed) {
    const int layer = style == "drunk" || style == "fatigued" ? 1 : style == "distracted" ? 2 : 0;
    std::vector<std::string> ov{"run_seed=" + std::to_string(seed)};
    if (style != "normal") ov.push_back("agents.*.style." + std::to_string(layer) + "=" + style);
    auto cfg = scenario("corridor", ov);
    auto opt = quiet();
    opt.record_samples = true;
    auto res = run(cfg, opt);
    StyleRun sr;
    std::vector<double> hw, sp, lat;
    int agent_index = 0;
    for (const auto& [id, ss] : res.samples) {
        auto f = extract_features(ss, cfg.dt);
        hw.push_back(f.mean_time_headway);
        sp.push_back(f.mean_speed);
        lat.push_back(f.lateral_offset_rms);
        if (id.size() > 2 && id.substr(id.size() - 2) == "_0") {
            for (std::int64_t onset = 500; onset <= 5000; onset += 900) {
                if (auto l = brake_reaction_latency(ss, onset)) sr.latencies.push_back({onset, static_cast<double>(*l)});
                else ++sr.missed_reactions;
            }
        }
        for (int w = 0; w < 10; ++w) {
            if ((agent_index * 10 + w) % 8 >= 3) continue;  // 90 of 240 windows per run
            const std::size_t lo = static_cast<std::size_t>(w) * 600;
            if (lo + 600 > ss.size()) continue;
            sr.windows.push_back(extract_features(std::span(ss).subspan(lo, 600), cfg.dt));
        }
        ++agent_index;
    }
    sr.headway = mean(hw);
    sr.speed = mean(sp);
    sr.lateral = mean(lat);
    return sr;
}

double pooled_latency(const std::string& style, std::int64_t only_onset = -1) {
    std::vector<double> v;
    for (const auto& [seed, r] : g_corridor[style]) {
        for (const auto& [onset, l] : r.latencies) {
            if (only_onset < 0 || onset == only_onset) v.push_back(l);
        }
    }
    return mean(v);
}

Outcome directional() {
    const auto& N = g_corridor["normal"];
    int agg_ok = 0, caut_ok = 0, drunk_ok = 0;
    std::vector<double> drunk_lat, normal_lat;
    for (int seed = 1; seed <= 10; ++seed) {
        agg_ok += g_corridor["aggressive"][seed].headway < N.at(seed).headway;
        caut_ok += g_corridor["cautious"][seed].speed < N.at(seed).speed;
        const double d = g_corridor["drunk"][seed].lateral, n = N.at(seed).lateral;
        drunk_ok += d > 0 && d >= 1.5 * n;
        drunk_lat.push_back(d);
        normal_lat.push_back(n);
    }
    const double lat_norm = pooled_latency("normal"), lat_dist = pooled_latency("distracted");
    const double fat_early = pooled_latency("fatigued", 500), fat_late = pooled_latency("fatigued", 5000);

    // ego under test behind homogeneous traffic
    int ds_ok = 0;
    std::ostringstream ds;
    for (int seed = 1; seed <= 10; ++seed) {
        std::vector<std::string> ov{"run_seed=" + std::to_string(seed)};
        auto normal = run(scenario("ego_signals", ov), quiet());
        for (int i = 1; i <= 4; ++i) ov.push_back("agents." + std::to_string(i) + ".style.0=aggressive");
        auto aggressive = run(scenario("ego_signals", ov), quiet());
        const double dn = normal.agents.at("ego").score.ds, da = aggressive.agents.at("ego").score.ds;
        ds_ok += da < dn;
        if (seed <= 3) ds << " " << fmt(dn, 3) << "->" << fmt(da, 3);
    }

    const bool dist_ok = lat_dist > lat_norm, fat_ok = fat_late > fat_early;
    Outcome o;
    o.pass = agg_ok == 10 && caut_ok == 10 && drunk_ok == 10 && dist_ok && fat_ok && ds_ok == 10;
    o.detail = "aggressive headway<normal " + std::to_string(agg_ok) + "/10; cautious speed<normal " +
               std::to_string(caut_ok) + "/10; drunk lateral>=1.5x " + std::to_string(drunk_ok) + "/10 (mean rms " +
               fmt(mean(drunk_lat), 3) + " vs " + fmt(mean(normal_lat), 3) + " m); latency distracted " + fmt(lat_dist, 3) + " vs normal " + fmt(lat_norm, 3) +
               " steps; fatigued @500 " + fmt(fat_early, 3) + " @5000 " + fmt(fat_late, 3) + "; ego DS lower in aggressive traffic " +
               std::to_string(ds_ok) + "/10 (first seeds" + ds.str() + ")";
    return o;
}

Outcome separability() {
    std::ostringstream d;
    bool all = true;
    std::size_t per_style = 0;
    for (const std::string style : {"aggressive", "cautious", "fatigued", "distracted"}) {
        std::vector<StyleSample> train, test;
        for (const auto& label : {std::string("normal"), style}) {
            std::size_t count = 0;
            for (const auto& [seed, r] : g_corridor[label]) {
                for (const auto& f : r.windows) {
                    (seed <= 5 ? train : test).push_back({label, f});
                    ++count;
                }
            }
            per_style = count;
        }
        auto rep = knn_style_classify(train, test, 5);
        all = all && rep.macro_f1 >= 0.80;
        d << " " << style << " " << fmt(rep.macro_f1, 3);
    }
    Outcome o;
    o.pass = all && per_style == 900;
    o.detail = std::to_string(per_style) + " windows per style, seeds 1-5 train / 6-10 test, k=5 macro F1:" + d.str();
    return o;
}

// ---------------------------------------------------------------------------
// metric oracles

double w1_oracle(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

bool inside(const Pose& p, const Extent& e, const Vec2& q) {
    const Vec2 l = to_frame(p, q);
    return std::abs(l.x) < e.length / 2 && std::abs(l.y) < e.width / 2;
}

// dense sampling: some grid point of either rectangle lies strictly inside the other
bool overlap_oracle(const Pose& a, const Extent& ea, const Pose& b, const Extent& eb) {
    const double h = 0.04;
    auto probe = [&](const Pose& p, const Extent& e, const Pose& q, const Extent& eq) {
        const int nx = static_cast<int>(std::ceil(e.length / h)), ny = static_cast<int>(std::ceil(e.width / h));
        for (int i = 0; i <= nx; ++i) {
            for (int j = 0; j <= ny; ++j) {
                const Vec2 local{-e.length / 2 + e.length * i / nx, -e.width / 2 + e.width * j / ny};
                if (inside(q, eq, from_frame(p, local))) return true;
            }
        }
        return false;
    };
    return probe(a, ea, b, eb) || probe(b, eb, a, ea);
}

Outcome metric_oracles() {
    std::mt19937_64 g(31);
    std::normal_distribution<double> n(0, 3);
    std::uniform_int_distribution<int> size(1, 200);
    double w1_err = 0;
    for (int i = 0; i < 1000; ++i) {
        const int k = size(g);
        std::vector<double> a(k), b(k);
        for (auto& x : a) x = n(g);
        for (auto& x : b) x = n(g) + 1.0;
        w1_err = std::max(w1_err, std::abs(wasserstein_1d(a, b) - w1_oracle(a, b)));
    }

    // every infraction combination with up to two of each kind
    PenaltyTable pen;
    const std::vector<std::pair<InfractionKind, double>> coef = {{InfractionKind::collision_pedestrian, 0.50},
                                                                 {InfractionKind::collision_vehicle, 0.60},
                                                                 {InfractionKind::collision_static, 0.65},
                                                                 {InfractionKind::red_light, 0.70},
                                                                 {InfractionKind::route_deviation, 1.0}};
    int ds_cases = 0, ds_bad = 0;
    for (int mask = 0; mask < 243; ++mask) {
        std::map<InfractionKind, int> counts;
        double product = 1.0;
        int m = mask;
        for (const auto& [kind, c] : coef) {
            const int cnt = m % 3;
            m /= 3;
            if (cnt) counts[kind] = cnt;
            for (int i = 0; i < cnt; ++i) product *= c;
        }
        for (double rc : {0.0, 37.5, 100.0}) {
            ++ds_cases;
            auto r = score_from_counts(rc, counts, pen);
            if (std::abs(r.ds - rc * product) > 1e-9 || r.ds > r.rc + 1e-12) ++ds_bad;
        }
    }

    std::uniform_real_distribution<double> pos(-4, 4), head(-3.14159, 3.14159), len(0.5, 6), wid(0.3, 3);
    int compared = 0, disagree = 0, slivers = 0, overlaps = 0;
    while (compared < 1000) {
        Pose a{pos(g), pos(g), head(g)}, b{pos(g), pos(g), head(g)};
        Extent ea{len(g), wid(g)}, eb{len(g), wid(g)};
        const double m = 0.04;
        Extent sa{ea.length - 2 * m, ea.width - 2 * m}, sb{eb.length - 2 * m, eb.width - 2 * m};
        Extent ga{ea.length + 2 * m, ea.width + 2 * m}, gb{eb.length + 2 * m, eb.width + 2 * m};
        // ambiguous within the sampling resolution
        if (overlap_oracle(a, sa, b, sb) != overlap_oracle(a, ga, b, gb)) {
            ++slivers;
            continue;
        }
        const bool truth = overlap_oracle(a, ea, b, eb);
        overlaps += truth;
        disagree += truth != rectangles_overlap(a, ea, b, eb);
        ++compared;
    }

    Outcome o;
    o.pass = w1_err <= 1e-12 && ds_bad == 0 && disagree == 0;
    o.detail = "W1 max error " + fmt(w1_err, 3) + " over 1000 pairs; DS " + std::to_string(ds_cases - ds_bad) + "/" +
               std::to_string(ds_cases) + " table rows; SAT vs sampling " + std::to_string(compared - disagree) + "/" +
               std::to_string(compared) + " agree (" + std::to_string(overlaps) + " overlapping, " + std::to_string(slivers) +
               " sub-resolution slivers skipped)";
    return o;
}

// ---------------------------------------------------------------------------
// robustness, scaling, provider fuzz

Outcome robustness() {
    std::ostringstream bad;
    int runs = 0;
    const std::vector<std::pair<int, std::string>> singles = {
        {0, "aggressive"}, {0, "cautious"}, {1, "drunk"}, {1, "fatigued"}, {2, "distracted"}, {0, "normal"}};
    for (const auto& [layer, trait] : singles) {
        auto cfg = scenario("freeflow", {"agents.*.style." + std::to_string(layer) + "=" + trait});
        auto res = run(cfg, quiet());
        ++runs;
        for (const auto& [id, a] : res.agents) {
            if (a.rc < 100.0 - 1e-9 || !a.completed) bad << " " << trait << ":" << id << " rc=" << fmt(a.rc);
        }
        for (const auto& e : res.events) {
            if (e.kind != InfractionKind::red_light && e.kind != InfractionKind::route_deviation) bad << " " << trait << " collision";
        }
    }
    Outcome o;
    o.pass = bad.str().empty();
    o.detail = std::to_string(runs) + " single-trait free-flow runs: " + (o.pass ? "every agent RC 100, no collisions" : bad.str());
    return o;
}

Outcome scaling() {
    auto timed = [](int n) {
        auto cfg = parse_config(ring_doc(n, 1000, 3));
        double best = 1e300;
        for (int rep = 0; rep < 2; ++rep) best = std::min(best, run(cfg, quiet()).mean_step_seconds());
        return best;
    };
    const double t30 = timed(30), t70 = timed(70);
    Outcome o;
    o.pass = t70 <= 3.0 * t30;
    o.detail = "mean step " + fmt(1e3 * t30, 3) + " ms at 30 agents, " + fmt(1e3 * t70, 3) + " ms at 70, ratio " + fmt(t70 / t30, 3);
    return o;
}

class GarbageProvider : public CompletionProvider {
public:
    explicit GarbageProvider(std::uint64_t seed) : g_(seed) {}
    std::optional<std::string> complete(const std::string&) override {
        ++calls;
        std::uniform_int_distribution<int> mode(0, 9);
        switch (mode(g_)) {
            case 0: return std::nullopt;
            case 1: throw std::runtime_error("connection reset");
            case 2: return std::string();
            default: return text();
        }
    }
    std::string name() const override { return "fuzz"; }
    long calls = 0;

private:
    std::string text() {
        static const std::vector<std::string> atoms = {
            "[", "]", "{", "}", ",", ":", "\"api\"", "\"params\"", "\"selector\"", "\"layer\"", "\"L1\"", "\"L2\"", "\"L3\"",
            "\"scale_perceived_distance\"", "\"curve_lane_marks\"", "\"freeze_motion_update\"", "\"factor\"", "\"lag_s\"",
            "\"amplitude_m\"", "\"relation\"", "\"lead\"", "\"kind\"", "\"vehicle\"", "\"target_id\"", "\"a03\"", "1e308",
            "-1e308", "0", "2.5", "-7", "NaN", "null", "true", "\"drunk wobble\"", "```", "\\", "\"\\u0000\"", "Sure! Here:"};
        std::uniform_int_distribution<int> len(0, 60), pick(0, static_cast<int>(atoms.size()) - 1), raw(0, 255), coin(0, 7);
        std::string s;
        for (int i = len(g_); i > 0; --i) {
            if (coin(g_) == 0) s.push_back(static_cast<char>(raw(g_)));
            else s += atoms[static_cast<std::size_t>(pick(g_))];
        }
        return s;
    }
    std::mt19937_64 g_;
};

GuardAudit g_fuzz_guard;

// well-formed scripts whose factors jump around the whole range; only the guard keeps them smooth
class JumpyProvider : public CompletionProvider {
public:
    explicit JumpyProvider(std::uint64_t seed) : g_(seed) {}
    std::optional<std::string> complete(const std::string&) override {
        std::uniform_real_distribution<double> f(0.5, 2.0);
        json calls = json::array({{{"api", "scale_perceived_distance"}, {"selector", {{"relation", "lead"}}}, {"params", {{"factor", f(g_)}}}},
                                  {{"api", "scale_object_size"}, {"selector", {{"kind", "vehicle"}}}, {"params", {{"factor", f(g_)}}}},
                                  {{"api", "widen_perceived_lane"}, {"selector", {{"kind", "lane"}}}, {"params", {{"factor", f(g_)}}}}});
        return calls.dump();
    }
    std::string name() const override { return "jumpy"; }

private:
    std::mt19937_64 g_;
};

GuardAudit guard_stress(long& translated) {
    GuardAudit g;
    translated = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto doc = ring_doc(30, 1200, seed);
        doc["schedule"] = {{"l2_period", 40}, {"l3_rate", 0.5}};
        auto cfg = parse_config(doc);
        JumpyProvider jumpy(seed);
        RunOptions opt;
        opt.provider = &jumpy;
        opt.record_samples = false;
        auto res = run(cfg, opt);
        for (const auto& t : res.translations) translated += t.kind == "translated" && t.source != "catalog";
        audit_guard(parse_lines(res.log), g);
    }
    return g;
}

Outcome provider_fuzz() {
    long responses = 0, fallbacks = 0, logged_fallbacks = 0, runs = 0, incomplete = 0, crashes = 0, other = 0;
    std::uint64_t seed = 1;
    while (responses < 10000) {
        auto cfg = parse_config(ring_doc(30, 400, seed));
        GarbageProvider fuzz(seed * 7919);
        RunOptions opt;
        opt.provider = &fuzz;
        opt.record_samples = false;
        auto doc = cfg.source;
        doc["schedule"] = {{"l2_period", 40}, {"l3_rate", 1.0}};
        cfg = parse_config(doc);
        try {
            auto res = run(cfg, opt);
            if (res.steps != 400) ++incomplete;
            for (const auto& t : res.translations) {
                if (t.kind == "fallback") ++fallbacks;
                else if (t.kind != "translated" && t.kind != "repaired") ++other;
            }
            auto lines = parse_lines(res.log);
            for (const auto& j : lines) {
                if (j.value("type", "") != "step") continue;
                for (const auto& a : j["agents"]) {
                    if (!a.contains("translations")) continue;
                    for (const auto& e : a["translations"]) logged_fallbacks += e["kind"] == "fallback";
                }
            }
            audit_guard(lines, g_fuzz_guard);
        } catch (const std::exception& e) {
            ++crashes;
            std::cerr << "fuzz run " << seed << " threw: " << e.what() << "\n";
        }
        responses += fuzz.calls;
        ++runs;
        ++seed;
    }
    Outcome o;
    o.pass = crashes == 0 && incomplete == 0 && fallbacks > 0 && fallbacks == logged_fallbacks && other == 0;
    o.detail = std::to_string(responses) + " fuzzed responses over " + std::to_string(runs) + " runs; crashes " +
               std::to_string(crashes) + ", incomplete " + std::to_string(incomplete) + "; " + std::to_string(fallbacks) +
               " catalog fallbacks, " + std::to_string(logged_fallbacks) + " in the logs";
    return o;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    std::vector<std::pair<std::string, Outcome>> results;
    auto attempt = [&](const std::string& name, const std::function<Outcome()>& fn) {
        const auto start = clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        std::cerr << "[" << fmt(secs, 3) << " s] " << name << "\n";
        results.emplace_back(name, o);
    };

    // one logged full-length ring run feeds fidelity, determinism and the guard audit
    auto ring = scenario("ring");
    RunResult ring1 = run(ring);
    g_ring_seed1_log = parse_lines(ring1.log);

    attempt("scheduler fidelity on the 30-agent ring", [&] { return fidelity(ring1); });
    attempt("determinism and replay", [&] { return determinism(ring, ring1); });
    attempt("non-intrusive modulation", [&] { return non_intrusive(); });

    Outcome fuzz = {false, "not run"};
    attempt("provider fuzzing falls back safely", [&] {
        fuzz = provider_fuzz();
        return fuzz;
    });
    results.pop_back();  // printed in its own slot below

    attempt("guarded parameters change by at most the log-ratio bound", [&] {
        long translated = 0;
        GuardAudit g = guard_stress(translated);
        const double stress_worst = g.worst;
        audit_guard(g_ring_seed1_log, g);
        g.comparisons += g_fuzz_guard.comparisons;
        g.violations += g_fuzz_guard.violations;
        g.worst = std::max(g.worst, g_fuzz_guard.worst);
        Outcome o;
        // the stress runs must actually push against the bound, or the audit proves nothing
        o.pass = g.violations == 0 && g.comparisons > 0 && translated > 0 && stress_worst > 0.09;
        o.detail = std::to_string(g.comparisons) + " consecutive pairs from ring, fuzzed-provider and " +
                   std::to_string(translated) + "-translation jumpy-provider logs, " + std::to_string(g.violations) +
                   " violations, worst |ln ratio| " + fmt(g.worst, 6);
        return o;
    });

    attempt("corridor batch", [&] {
        for (const auto& style : kStyles) {
            for (int seed = 1; seed <= 10; ++seed) g_corridor[style][seed] = corridor_run(style, seed);
        }
        return Outcome{true, ""};
    });
    const Outcome batch = results.back().second;
    results.pop_back();
    if (!batch.pass) {
        results.emplace_back("directional style effects", batch);
        results.emplace_back("style separability", batch);
    } else {
        attempt("directional style effects", directional);
        attempt("style separability", separability);
    }
    attempt("metric oracles", metric_oracles);
    attempt("free-flow robustness under every single trait", robustness);
    attempt("step time scaling from 30 to 70 agents", scaling);
    results.emplace_back("provider fuzzing falls back safely", fuzz);

    int failed = 0;
    for (const auto& [name, o] : results) {
        std::cout << (o.pass ? "PASS  " : "FAIL  ") << name << ": " << o.detail << "\n";
        failed += !o.pass;
    }
    const double total = std::chrono::duration<double>(clock::now() - t0).count();
    std::cout << (failed ? "FAILED " : "ALL PASSED ") << results.size() - failed << "/" << results.size() << " in "
              << fmt(total, 4) << " s\n";
    return failed ? 1 : 0;
}
