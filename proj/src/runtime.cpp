#include "stylesim/runtime.hpp"

#include "stylesim/digest.hpp"
#include "stylesim/errors.hpp"
#include "stylesim/lane_frame.hpp"
#include "stylesim/rng.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <fstream>
#include <future>
#include <numeric>
#include <set>
#include <thread>

namespace stylesim {

json AgentSummary::to_json() const {
    return {{"id", id},
            {"style", style.label()},
            {"role", stylesim::to_string(role)},
            {"init", init_count},
            {"update", update_count},
            {"reinterpret", reinterpret_count},
            {"l3_triggers", l3_triggers},
            {"versions", versions},
            {"translation_kinds", translation_kinds},
            {"translation_sources", translation_sources},
            {"completed", completed},
            {"deviated", deviated},
            {"finished_step", finished_step ? json(*finished_step) : json(nullptr)},
            {"score", score.to_json()}};
}

json RunResult::metrics_json() const {
    json agents_j = json::array();
    for (const auto& [id, a] : agents) agents_j.push_back(a.to_json());
    json ev = json::array();
    for (const auto& e : events) ev.push_back(e.to_json());
    return {{"schema_version", kSchemaVersion}, {"steps", steps},          {"log_digest", log_digest},
            {"final_world_digest", final_world_digest}, {"agents", agents_j}, {"events", ev}};
}

SceneGraph initial_world(const SimulationConfig& config) {
    SceneGraph w;
    w.step_index = 0;
    w.dt = config.dt;
    w.map = config.map;
    w.signals = config.map->initial_signals();
    w.scripted = std::make_shared<const std::map<std::string, ScriptedMotion, std::less<>>>(config.motions);
    for (const auto& a : config.agents) {
        ObjectState o;
        o.id = a.id;
        o.kind = ObjectKind::vehicle;
        o.pose = a.spawn;
        o.speed = a.spawn_speed;
        o.extent = a.extent;
        if (auto loc = config.map->locate(a.spawn, a.route.lanes.front())) o.lane_id = loc->lane_id;
        w.objects.push_back(std::move(o));
    }
    for (const auto& o : config.objects) w.objects.push_back(o);
    std::sort(w.objects.begin(), w.objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return w;
}

namespace {

json pose_j(const Pose& p) { return json::array({p.x, p.y, p.heading}); }

std::string_view to_string(LaneChange c) {
    switch (c) {
        case LaneChange::keep: return "keep";
        case LaneChange::left: return "left";
        case LaneChange::right: return "right";
    }
    return "keep";
}

std::optional<LaneChange> parse_lane_change(std::string_view s) {
    if (s == "keep") return LaneChange::keep;
    if (s == "left") return LaneChange::left;
    if (s == "right") return LaneChange::right;
    return std::nullopt;
}

json decision_j(const DrivingDecision& d) {
    return {{"accel", d.accel},
            {"steer", {d.steer.lateral_offset, d.steer.heading_correction}},
            {"lane_change", to_string(d.lane_change)},
            {"stop", d.stop_for_signal}};
}

DrivingDecision decision_from(const json& j) {
    DrivingDecision d;
    d.accel = j.at("accel").get<double>();
    d.steer.lateral_offset = j.at("steer").at(0).get<double>();
    d.steer.heading_correction = j.at("steer").at(1).get<double>();
    d.lane_change = parse_lane_change(j.at("lane_change").get<std::string>()).value_or(LaneChange::keep);
    d.stop_for_signal = j.at("stop").get<bool>();
    return d;
}

struct AgentRt {
    const AgentConfig* cfg = nullptr;
    StyleSchedule schedule;
    BehaviorDescription description;
    PolicySet policies;
    ModulationState modulation;
    RouteTracker tracker;
    const TraitSpec* l2 = nullptr;
    std::uint64_t pulse_seed = 0;
    bool active = true;
    int deviation_run = 0;
    double lateral = 0.0;
    std::string last_script;
    AgentSummary summary;
    struct Pending {
        std::future<PolicyDelta> result;
        bool retranslation = false;
    };
    std::deque<Pending> pending;

    AgentRt(const AgentConfig& c, const ScheduleParams& sp, double delta)
        : cfg(&c), schedule(sp, derive_seed(c.seed, "l3-trigger")), tracker(c.route) {
        modulation.consistency.delta = delta;
        pulse_seed = derive_seed(c.seed, "l2-pulse");
    }
};

struct StepOut {
    Triggers triggers;
    std::vector<TranslationEvent> translations;
    Script script;
    BevView objective;
    BevView view;  // what the controller saw
    DrivingDecision decision;
    std::map<std::string, double> guard;
    std::optional<DivergenceReport> divergence;
    std::optional<double> lead_gap;
    double lateral = 0.0;  // route offset of the step-t pose
};

struct Engine {
    const SimulationConfig& cfg;
    const RunOptions& opt;
    const TraitRegistry& registry;
    const ScriptCatalog& catalog;
    Translator translator;
    bool async;

    Engine(const SimulationConfig& c, const RunOptions& o, const TraitRegistry& r, const ScriptCatalog& cat)
        : cfg(c), opt(o), registry(r), catalog(cat), translator(r, cat, o.provider, PromptSet::builtin(), o.transcript),
          async(o.provider != nullptr && c.provider.async) {}

    void absorb(AgentRt& a, PolicyDelta delta, bool retranslation, StepOut& out) const {
        for (auto& p : delta.policies) a.policies.install(std::move(p), retranslation);
        for (auto& e : delta.events) out.translations.push_back(std::move(e));
    }

    void request(AgentRt& a, TranslationMode mode, std::int64_t t, StepOut& out) const {
        TranslationRequest req;
        req.mode = mode;
        req.agent_id = a.cfg->id;
        req.description = a.description;
        req.step = t;
        req.agent_seed = a.cfg->seed;
        req.dt = cfg.dt;
        if (mode == TranslationMode::update) req.prior = a.policies.at(Layer::L2);
        const bool retranslation = mode != TranslationMode::init;
        if (async) {
            const Translator* tr = &translator;
            a.pending.push_back({std::async(std::launch::async, [tr, req] { return tr->translate(req); }), retranslation});
            return;
        }
        absorb(a, translator.translate(req), retranslation, out);
    }

    StepOut evaluate(AgentRt& a, const SceneGraph& world, std::int64_t t) const {
        StepOut out;
        out.objective = extract_bev(world, a.cfg->id, cfg.bev_radius);
        out.triggers = a.schedule.poll(t);

        if (!opt.bypass_pmbi) {
            while (!a.pending.empty() &&
                   a.pending.front().result.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
                absorb(a, a.pending.front().result.get(), a.pending.front().retranslation, out);
                a.pending.pop_front();
            }
            if (t == 0) {
                request(a, TranslationMode::init, t, out);
                ++a.summary.init_count;
            }
            if (out.triggers.l2_update) {
                ++a.summary.update_count;
                if (a.policies.at(Layer::L2)) request(a, TranslationMode::update, t, out);
            }
            if (out.triggers.l3_trigger) {
                ++a.summary.l3_triggers;
                if (a.cfg->style.l3 != kNormalTrait) {
                    ++a.summary.reinterpret_count;
                    request(a, TranslationMode::reinterpret, t, out);
                }
            }
        } else if (out.triggers.l2_update) {
            ++a.summary.update_count;
        }

        // active policies and their current intensities
        PolicySet active;
        std::array<double, 3> eff{0.0, 0.0, 0.0};
        if (!opt.bypass_pmbi) {
            active = a.policies;
            if (auto& p3 = active.at(Layer::L3); p3 && !(p3->activated_step <= t && t < p3->expires_step)) p3.reset();
            for (Layer l : {Layer::L1, Layer::L2, Layer::L3}) {
                if (const auto& p = active.at(l)) eff[static_cast<int>(l)] = p->intensity;
            }
            if (const auto& p2 = active.at(Layer::L2); p2 && a.l2) {
                eff[1] = effective_intensity_l2(*p2, t - p2->activated_step, a.l2->pattern, cfg.schedule, a.pulse_seed);
            }
        }

        const SceneScope scope = summarize_scope(out.objective, a.cfg->route.lanes);
        out.script.agent_id = a.cfg->id;
        if (!active.empty()) {
            auto add = [&](const PerceivedEntity& e) {
                auto m = map_policy_to_calls(e, active, scope, eff);
                for (auto& c : m.calls) out.script.calls.push_back(std::move(c));
            };
            add(self_entity(out.objective));
            for (const auto& e : identify_entities(out.objective)) add(e);
            order_script(out.script);
            // one policy call fans out over many entities; all of them step from the same previous value
            const ConsistencyState before = a.modulation.consistency;
            for (auto& c : out.script.calls) {
                ConsistencyState scratch = before;
                c.params = enforce_consistency(scratch, c);
                for (const auto& [k, v] : scratch.last) {
                    if (auto it = before.last.find(k); it == before.last.end() || it->second != v) {
                        a.modulation.consistency.last[k] = v;
                    }
                }
                const auto* api = find_api(c.api);
                for (const auto& [k, v] : c.params) {
                    const auto* ps = api ? api->param(k) : nullptr;
                    if (ps && ps->guarded) out.guard[ConsistencyState::key(c.layer, c.api, k)] = v;
                }
            }
        }

        if (opt.bypass_pmbi) {
            out.view = out.objective;
        } else {
            out.view = apply_script(out.objective, out.script, a.modulation);
            if (!out.script.calls.empty() && opt.keep_log) out.divergence = perception_divergence(out.objective, out.view);
        }
        out.decision = decide(out.view, a.cfg->route, cfg.controller);

        if (opt.record_samples) {
            if (auto lanes = perceive_lanes(out.objective, a.cfg->route.lanes)) {
                if (auto lead = find_lead(out.objective, lanes->current)) out.lead_gap = lead->gap;
            }
        }
        return out;
    }
};

json script_calls_j(const Script& s) {
    json calls = json::array();
    for (const auto& c : s.calls) calls.push_back(to_json(c));
    return calls;
}

class LogSink {
public:
    LogSink(const RunOptions& opt, RunResult& res) : opt_(opt), res_(res) {}
    bool enabled() const { return opt_.keep_log || opt_.log_stream; }
    void write(const json& j) {
        std::string line = j.dump();
        hash_.update(line);
        hash_.update("\n");
        if (opt_.log_stream) *opt_.log_stream << line << '\n';
        if (opt_.keep_log) res_.log.push_back(std::move(line));
    }
    std::string finish() { return hash_.hex(); }

private:
    const RunOptions& opt_;
    RunResult& res_;
    Sha256 hash_;
};

}  // namespace

RunResult run(const SimulationConfig& cfg, const RunOptions& opt) {
    const auto started = std::chrono::steady_clock::now();
    static const TraitRegistry builtin_registry = TraitRegistry::builtin();
    static const ScriptCatalog builtin_catalog = ScriptCatalog::builtin();
    const TraitRegistry& registry = opt.registry ? *opt.registry : builtin_registry;
    const ScriptCatalog& catalog = opt.catalog ? *opt.catalog : builtin_catalog;
    if (!cfg.map) throw ContractViolation("run: config has no map");
    cfg.controller.validate();

    Engine engine(cfg, opt, registry, catalog);
    RunResult res;
    LogSink log(opt, res);

    std::vector<std::unique_ptr<AgentRt>> agents;
    for (const auto& ac : cfg.agents) {
        auto a = std::make_unique<AgentRt>(ac, cfg.schedule, cfg.guard_delta);
        a->description = generate_description(ac.style, registry);
        a->l2 = registry.find(Layer::L2, ac.style.l2);
        a->lateral = a->tracker.update(ac.spawn);
        a->summary.id = ac.id;
        a->summary.style = ac.style;
        a->summary.role = ac.role;
        agents.push_back(std::move(a));
    }
    std::sort(agents.begin(), agents.end(), [](const auto& x, const auto& y) { return x->cfg->id < y->cfg->id; });

    if (log.enabled()) {
        log.write({{"type", "header"},
                   {"schema_version", kSchemaVersion},
                   {"config", cfg.source},
                   {"config_digest", cfg.digest()},
                   {"bypass_pmbi", opt.bypass_pmbi},
                   {"provider", opt.provider ? opt.provider->name() : "off"},
                   {"prompts_version", PromptSet::builtin().version()}});
    }

    SceneGraph world = initial_world(cfg);
    std::set<std::pair<std::string, std::string>> touching;
    for (const auto& e : detect_collisions(world)) touching.emplace(e.agents[0], e.agents[1]);
    RandomStream shuffler(opt.shuffle_seed);
    const std::int64_t max_steps = opt.max_steps.value_or(cfg.max_steps);
    const VehicleDynamics dyn{cfg.controller.wheelbase, cfg.controller.max_steer};
    std::set<std::string, std::less<>> agent_ids;
    for (const auto& a : agents) agent_ids.insert(a->cfg->id);

    std::vector<StepOut> outs(agents.size());
    std::vector<std::size_t> order;
    for (std::int64_t t = 0; t < max_steps; ++t) {
        order.clear();
        for (std::size_t i = 0; i < agents.size(); ++i) {
            if (agents[i]->active) order.push_back(i);
        }
        if (order.empty()) break;
        if (opt.shuffle_order) {
            for (std::size_t i = order.size(); i > 1; --i) {
                std::swap(order[i - 1], order[static_cast<std::size_t>(shuffler.uniform() * static_cast<double>(i))]);
            }
        }

        // per-agent pipelines read only the frozen world and their own state
        if (opt.threads > 1 && order.size() > 1) {
            const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(opt.threads), order.size());
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errs(n);
            for (std::size_t w = 0; w < n; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::size_t k = w; k < order.size(); k += n) {
                            outs[order[k]] = engine.evaluate(*agents[order[k]], world, t);
                        }
                    } catch (...) {
                        errs[w] = std::current_exception();
                    }
                });
            }
            for (auto& th : pool) th.join();
            for (auto& e : errs) {
                if (e) std::rethrow_exception(e);
            }
        } else {
            for (std::size_t i : order) outs[i] = engine.evaluate(*agents[i], world, t);
        }
        std::sort(order.begin(), order.end());

        std::map<std::string, DrivingDecision, std::less<>> decisions;
        for (std::size_t i : order) decisions.emplace(agents[i]->cfg->id, outs[i].decision);

        // barrier: integrate and detect
        SceneGraph next = advance_kinematics(world, decisions, cfg.dt, dyn);
        std::vector<InfractionEvent> step_events;
        std::set<std::pair<std::string, std::string>> now_touching;
        for (auto& e : detect_collisions(next)) {
            if (!agent_ids.count(e.agents[0]) && !agent_ids.count(e.agents[1])) continue;
            auto key = std::make_pair(e.agents[0], e.agents[1]);
            now_touching.insert(key);
            if (!touching.count(key)) step_events.push_back(std::move(e));
        }
        touching = std::move(now_touching);
        std::vector<std::string> ids;
        for (std::size_t i : order) ids.push_back(agents[i]->cfg->id);
        for (auto& e : detect_red_light(world, next, ids, cfg.controller.wheelbase)) step_events.push_back(std::move(e));

        std::vector<std::string> despawned;
        for (std::size_t i : order) {
            AgentRt& a = *agents[i];
            const ObjectState* o = next.find(a.cfg->id);
            outs[i].lateral = a.lateral;
            a.lateral = a.tracker.update(o->pose);
            const double total = a.cfg->route.total_length;
            a.summary.rc = total > 0.0 ? std::clamp(100.0 * a.tracker.progress() / total, 0.0, 100.0) : 100.0;
            if (a.tracker.current_s() >= total - 1e-6) {
                a.summary.completed = true;
                a.summary.rc = 100.0;
                a.summary.finished_step = t + 1;
                if (cfg.stop_when_complete) despawned.push_back(a.cfg->id);
                continue;
            }
            a.deviation_run = std::abs(a.lateral) > 5.0 ? a.deviation_run + 1 : 0;
            if (a.deviation_run >= 100) {
                a.summary.deviated = true;
                a.summary.finished_step = t + 1;
                InfractionEvent e;
                e.step = t + 1;
                e.agents = {a.cfg->id};
                e.kind = InfractionKind::route_deviation;
                e.snapshot = {*o};
                step_events.push_back(std::move(e));
                despawned.push_back(a.cfg->id);
            }
        }
        for (const auto& id : despawned) {
            for (auto& a : agents) {
                if (a->cfg->id == id) a->active = false;
            }
        }
        if (!despawned.empty()) {
            std::erase_if(next.objects, [&](const ObjectState& o) {
                return std::find(despawned.begin(), despawned.end(), o.id) != despawned.end();
            });
        }

        // record step t
        const std::string world_digest = sha256_hex(world.serialize());
        res.world_digests.push_back(world_digest);
        json agents_j = json::array();
        for (std::size_t i : order) {
            AgentRt& a = *agents[i];
            StepOut& s = outs[i];
            const ObjectState* o = world.find(a.cfg->id);
            for (const auto& e : s.translations) {
                ++a.summary.translation_kinds[e.kind];
                ++a.summary.translation_sources[e.source];
            }
            a.summary.versions = a.policies.versions;
            if (opt.record_samples) {
                res.samples[a.cfg->id].push_back({t, o->pose, o->speed, s.decision.accel, s.lateral, s.lead_gap});
            }
            if (log.enabled()) {
                json r = {{"id", a.cfg->id},
                          {"pose", pose_j(o->pose)},
                          {"speed", o->speed},
                          {"accel", s.decision.accel},
                          {"decision", decision_j(s.decision)},
                          {"versions", a.policies.versions},
                          {"lateral", s.lateral},
                          {"gap", s.lead_gap ? json(*s.lead_gap) : json(nullptr)}};
                json trig = json::array();
                if (s.triggers.l2_update) trig.push_back("l2_update");
                if (s.triggers.l3_trigger) trig.push_back("l3_trigger");
                r["triggers"] = trig;
                if (!s.translations.empty()) {
                    json tj = json::array();
                    for (const auto& e : s.translations) tj.push_back(e.to_json());
                    r["translations"] = tj;
                }
                json calls = script_calls_j(s.script);
                std::string dumped = calls.dump();
                if (dumped == a.last_script) {
                    r["script_same"] = true;
                } else {
                    r["script"] = std::move(calls);
                    a.last_script = std::move(dumped);
                }
                r["script_digest"] = script_digest(s.script);
                r["objective_digest"] = s.objective.digest();
                r["view_digest"] = s.view.digest();
                if (!s.guard.empty()) r["guard"] = s.guard;
                if (s.divergence) r["divergence"] = s.divergence->to_json();
                agents_j.push_back(std::move(r));
            }
            for (auto& e : s.translations) res.translations.push_back(std::move(e));
        }
        if (log.enabled()) {
            json ev = json::array();
            for (const auto& e : step_events) ev.push_back(e.to_json());
            log.write({{"type", "step"},
                       {"t", t},
                       {"world_digest", world_digest},
                       {"agents", agents_j},
                       {"events", ev},
                       {"despawned", despawned}});
        }
        for (auto& e : step_events) res.events.push_back(std::move(e));
        world = std::move(next);
        res.steps = t + 1;
    }

    // drain outstanding async translations so no thread outlives the run
    for (auto& a : agents) {
        for (auto& p : a->pending) p.result.wait();
    }
    res.final_world_digest = sha256_hex(world.serialize());
    for (auto& a : agents) {
        a->summary.score = compute_ds_rc(a->summary.rc, res.events, a->cfg->id, cfg.penalties);
        res.agents.emplace(a->cfg->id, a->summary);
    }
    res.log_digest = log.finish();
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}

// ---------------------------------------------------------------------------
// replay

std::vector<std::string> read_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) lines.push_back(std::move(line));
    }
    return lines;
}

ReplayResult replay(const std::vector<std::string>& log, const ReplayRequest& request) {
    if (log.empty()) throw IntegrityError(-1, "empty log");
    json header;
    try {
        header = json::parse(log.front());
    } catch (const json::parse_error&) {
        throw IntegrityError(-1, "header is not valid JSON");
    }
    if (header.value("type", "") != "header") throw IntegrityError(-1, "first record is not a header");
    if (header.value("schema_version", 0) != kSchemaVersion) throw IntegrityError(-1, "unsupported schema_version");
    if (!header.contains("config") || sha256_hex(header["config"].dump()) != header.value("config_digest", "")) {
        throw IntegrityError(-1, "config digest mismatch");
    }
    SimulationConfig cfg;
    try {
        cfg = parse_config(header["config"], ".");
    } catch (const Error& e) {
        throw IntegrityError(-1, std::string("config does not validate: ") + e.what());
    }
    const bool bypass = header.value("bypass_pmbi", false);
    const VehicleDynamics dyn{cfg.controller.wheelbase, cfg.controller.max_steer};

    ReplayResult out;
    SceneGraph world = initial_world(cfg);
    std::map<std::string, ModulationState, std::less<>> mods;
    std::map<std::string, Script, std::less<>> last;

    for (std::size_t li = 1; li < log.size(); ++li) {
        const auto t = static_cast<std::int64_t>(li - 1);
        json rec;
        try {
            rec = json::parse(log[li]);
        } catch (const json::parse_error&) {
            throw IntegrityError(t, "record is not valid JSON");
        }
        try {
            if (rec.value("type", "") != "step" || rec.value("t", std::int64_t{-1}) != t) {
                throw IntegrityError(t, "unexpected record order");
            }
            if (sha256_hex(world.serialize()) != rec.at("world_digest").get<std::string>()) {
                throw IntegrityError(t, "world digest mismatch");
            }
            std::map<std::string, DrivingDecision, std::less<>> decisions;
            for (const auto& r : rec.at("agents")) {
                const std::string id = r.at("id").get<std::string>();
                const AgentConfig* ac = cfg.agent(id);
                if (!ac) throw IntegrityError(t, "unknown agent " + id);
                Script script;
                if (r.value("script_same", false)) {
                    auto it = last.find(id);
                    if (it == last.end()) throw IntegrityError(t, "agent " + id + " refers to a missing earlier script");
                    script = it->second;
                } else {
                    auto parsed = parse_script(json{{"calls", r.at("script")}}, id);
                    if (!parsed.errors.empty()) throw IntegrityError(t, "agent " + id + ": bad script: " + parsed.errors.front());
                    script = std::move(parsed.script);
                    last[id] = script;
                }
                if (script_digest(script) != r.at("script_digest").get<std::string>()) {
                    throw IntegrityError(t, "script digest mismatch for agent " + id);
                }
                BevView objective;
                try {
                    objective = extract_bev(world, id, cfg.bev_radius);
                } catch (const MissingAgentError&) {
                    throw IntegrityError(t, "agent " + id + " is not in the world");
                }
                if (objective.digest() != r.at("objective_digest").get<std::string>()) {
                    throw IntegrityError(t, "objective view digest mismatch for agent " + id);
                }
                BevView subjective = bypass ? objective : apply_script(objective, script, mods[id]);
                if (subjective.digest() != r.at("view_digest").get<std::string>()) {
                    throw IntegrityError(t, "subjective view digest mismatch for agent " + id);
                }
                const DrivingDecision d = decision_from(r.at("decision"));
                if (!(decide(subjective, ac->route, cfg.controller) == d)) {
                    throw IntegrityError(t, "decision of agent " + id + " does not follow from its view");
                }
                decisions.emplace(id, d);
                ++out.views_checked;
                const bool in_range = t >= request.first_step && (request.last_step < 0 || t <= request.last_step);
                if (!request.agent.empty() && id == request.agent && in_range) {
                    out.frames.push_back({t, std::move(objective), std::move(subjective), script});
                }
            }
            SceneGraph next = advance_kinematics(world, decisions, cfg.dt, dyn);
            const auto gone = rec.value("despawned", std::vector<std::string>{});
            std::erase_if(next.objects, [&](const ObjectState& o) {
                return std::find(gone.begin(), gone.end(), o.id) != gone.end();
            });
            world = std::move(next);
        } catch (const json::exception& e) {
            throw IntegrityError(t, std::string("malformed record: ") + e.what());
        }
        out.steps = t + 1;
    }
    out.final_world_digest = sha256_hex(world.serialize());
    return out;
}

}  // namespace stylesim
