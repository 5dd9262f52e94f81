// stylesim command-line front end: validate, run, analyze, export-replay.
#include "stylesim/digest.hpp"
#include "stylesim/errors.hpp"
#include "stylesim/metrics.hpp"
#include "stylesim/runtime.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using namespace stylesim;

namespace {

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kIo = 2;

void write_file(const fs::path& p, std::string_view bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("cannot write " + p.string());
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    return ss.str();
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const std::string& path, const std::vector<std::string>& overrides) {
    try {
        auto cfg = load_config(path, overrides);
        std::cout << "ok: " << cfg.name << ", " << cfg.agents.size() << " agents, " << cfg.max_steps << " steps\n";
        return kOk;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ValidationError& e) {
        std::cerr << "invalid scenario (" << e.problems().size() << " problems):\n";
        for (const auto& p : e.problems()) std::cerr << "  - " << p << "\n";
        return kDomain;
    }
}

// ---------------------------------------------------------------------------
// run

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    std::string provider = "";
    std::string out = "runs";
    int batch = 1;
    int threads = 1;
    std::string format = "jsonl";
    bool quiet = false;
};

json run_one(const RunArgs& args, std::uint64_t seed_offset, std::optional<std::uint64_t> base_seed) {
    std::vector<std::string> ov = args.overrides;
    if (base_seed) ov.push_back("run_seed=" + std::to_string(*base_seed + seed_offset));
    if (args.provider == "on") ov.push_back("provider.enabled=true");
    if (args.provider == "off") ov.push_back("provider.enabled=false");
    SimulationConfig cfg = load_config(args.config, ov);

    std::unique_ptr<CompletionProvider> provider;
    Transcript transcript;
    if (cfg.provider.enabled) {
        auto pc = HttpProviderConfig::from_env();
        if (!cfg.provider.endpoint.empty()) pc.base_url = cfg.provider.endpoint;
        if (!cfg.provider.model.empty()) pc.model = cfg.provider.model;
        pc.path = cfg.provider.path;
        if (pc.base_url.empty()) throw ValidationError({"provider enabled but no endpoint (set STYLESIM_PROVIDER_URL)"});
        provider = std::make_unique<HttpProvider>(pc);
    }

    const std::string config_bytes = cfg.source.dump(1);
    const std::string digest = sha256_hex(config_bytes);
    const std::string run_id = timestamp() + "-" + digest.substr(0, 12) + "-s" + std::to_string(cfg.run_seed);
    const fs::path dir = fs::path(args.out) / run_id;
    fs::create_directories(dir);
    write_file(dir / "config.json", config_bytes);

    std::ofstream log_out(dir / "log.jsonl", std::ios::binary);
    if (!log_out) throw IoError("cannot write " + (dir / "log.jsonl").string());
    RunOptions opt;
    opt.keep_log = false;
    opt.log_stream = &log_out;
    opt.provider = provider.get();
    opt.transcript = &transcript;
    opt.threads = args.threads;
    opt.record_samples = true;
    RunResult res;
    try {
        res = run(cfg, opt);
    } catch (const std::exception& e) {
        log_out.close();
        json failure = {{"run_id", run_id}, {"error", e.what()}};
        write_file(dir / "failure.json", failure.dump(1));
        throw;
    }
    log_out.close();

    json metrics = res.metrics_json();
    write_file(dir / "metrics.json", metrics.dump(1));
    json tj = json::array();
    for (auto& e : transcript.snapshot()) tj.push_back(std::move(e));
    write_file(dir / "transcript.json", tj.dump(1));

    std::map<std::string, int> sources;
    for (const auto& t : res.translations) ++sources[t.source];
    json manifest = {{"schema_version", kSchemaVersion},
                     {"run_id", run_id},
                     {"config_digest", digest},
                     {"run_seed", cfg.run_seed},
                     {"steps", res.steps},
                     {"provider", provider ? provider->name() : "off"},
                     {"translation_sources", sources},
                     {"log_digest", res.log_digest},
                     {"paths",
                      {{"config", "config.json"},
                       {"log", "log.jsonl"},
                       {"metrics", "metrics.json"},
                       {"transcript", "transcript.json"}}}};
    write_file(dir / "manifest.json", manifest.dump(1));

    if (args.format == "csv") {
        std::ostringstream csv;
        csv << "agent,step,x,y,heading,speed,accel,lateral,gap\n";
        csv << std::setprecision(17);
        for (const auto& [id, ss] : res.samples) {
            for (const auto& s : ss) {
                csv << id << ',' << s.step << ',' << s.pose.x << ',' << s.pose.y << ',' << s.pose.heading << ','
                    << s.speed << ',' << s.accel << ',' << s.lateral << ',';
                if (s.lead_gap) csv << *s.lead_gap;
                csv << '\n';
            }
        }
        write_file(dir / "trajectories.csv", csv.str());
    }

    if (!args.quiet) {
        std::ostringstream t;
        t << "run " << run_id << " (" << res.steps << " steps, " << std::fixed << std::setprecision(2)
          << res.wall_seconds << " s)\n";
        t << "  " << std::left << std::setw(12) << "agent" << std::setw(34) << "style" << std::right << std::setw(8)
          << "RC" << std::setw(8) << "DS" << "  infractions\n";
        for (const auto& [id, a] : res.agents) {
            t << "  " << std::left << std::setw(12) << id << std::setw(34) << a.style.label() << std::right
              << std::setw(8) << std::setprecision(1) << a.score.rc << std::setw(8) << a.score.ds << "  ";
            for (const auto& [k, n] : a.score.infractions) t << to_string(k) << "=" << n << " ";
            t << "\n";
        }
        t << "  manifest: " << (dir / "manifest.json").string() << "\n";
        std::cout << t.str();
    }
    return {{"manifest", (dir / "manifest.json").string()}, {"log_digest", res.log_digest}};
}

int cmd_run(const RunArgs& args) {
    try {
        if (args.batch <= 1) {
            run_one(args, 0, args.seed);
            return kOk;
        }
        // independent seeded runs, each isolated in its own directory
        std::optional<std::uint64_t> base = args.seed;
        if (!base) base = load_config(args.config, args.overrides).run_seed;
        std::vector<std::future<json>> jobs;
        for (int i = 0; i < args.batch; ++i) {
            jobs.push_back(std::async(std::launch::async, [&, i] { return run_one(args, static_cast<std::uint64_t>(i), base); }));
        }
        int rc = kOk;
        for (auto& j : jobs) {
            try {
                j.get();
            } catch (const IoError& e) {
                std::cerr << "error: " << e.what() << "\n";
                rc = std::max(rc, kIo);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                rc = std::max(rc, kDomain);
            }
        }
        return rc;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const ValidationError& e) {
        std::cerr << "invalid scenario:\n";
        for (const auto& p : e.problems()) std::cerr << "  - " << p << "\n";
        return kDomain;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return kDomain;
    }
}

// ---------------------------------------------------------------------------
// analyze

struct LoadedRun {
    fs::path dir;
    json manifest;
    json header;
    std::vector<std::string> lines;
};

LoadedRun load_run(const std::string& manifest_path) {
    LoadedRun r;
    r.manifest = read_json_file(manifest_path);
    r.dir = fs::path(manifest_path).parent_path();
    const auto log_path = r.dir / r.manifest.at("paths").at("log").get<std::string>();
    r.lines = read_log(log_path.string());
    if (r.lines.empty()) throw IntegrityError(-1, "empty log " + log_path.string());
    r.header = json::parse(r.lines.front());
    return r;
}

int cmd_analyze(const std::vector<std::string>& manifests, const std::string& grouping, int window, int k,
                const std::string& out_dir) {
    try {
        std::map<std::string, std::vector<StyleSample>> by_label;
        std::set<int> versions;
        std::ostringstream csv;
        csv << "run,agent,label,window_start";
        for (auto* n : FeatureVector::names()) csv << ',' << n;
        csv << '\n' << std::setprecision(10);
        int windows_total = 0;
        for (const auto& m : manifests) {
            auto run = load_run(m);
            versions.insert(run.manifest.value("schema_version", 0));
            versions.insert(run.header.value("schema_version", 0));
            const double dt = run.header["config"].value("dt", kDefaultDt);
            std::map<std::string, std::string> labels;
            for (const auto& a : run.header["config"]["agents"]) {
                const auto& st = a.value("style", json::array({"normal", "normal", "normal"}));
                std::string label = st.is_string() ? st.get<std::string>()
                                                   : st[0].get<std::string>() + "/" + st[1].get<std::string>() + "/" +
                                                         st[2].get<std::string>();
                labels[a["id"].get<std::string>()] = grouping == "agent" ? a["id"].get<std::string>() : label;
            }
            std::map<std::string, std::vector<TrajectorySample>> samples;
            for (std::size_t i = 1; i < run.lines.size(); ++i) {
                const json rec = json::parse(run.lines[i]);
                for (const auto& r : rec["agents"]) {
                    TrajectorySample s;
                    s.step = rec["t"].get<std::int64_t>();
                    s.pose = {r["pose"][0].get<double>(), r["pose"][1].get<double>(), r["pose"][2].get<double>()};
                    s.speed = r["speed"].get<double>();
                    s.accel = r["accel"].get<double>();
                    s.lateral = r.value("lateral", 0.0);
                    if (r.contains("gap") && r["gap"].is_number()) s.lead_gap = r["gap"].get<double>();
                    samples[r["id"].get<std::string>()].push_back(s);
                }
            }
            for (const auto& [id, ss] : samples) {
                for (std::size_t w = 0; w + static_cast<std::size_t>(window) <= ss.size(); w += static_cast<std::size_t>(window)) {
                    const auto f = extract_features(std::span(ss).subspan(w, static_cast<std::size_t>(window)), dt);
                    by_label[labels[id]].push_back({labels[id], f});
                    csv << run.manifest.value("run_id", "") << ',' << id << ',' << labels[id] << ',' << ss[w].step;
                    for (double v : f.values()) csv << ',' << v;
                    csv << '\n';
                    ++windows_total;
                }
            }
        }
        if (versions.size() > 1) {
            std::cerr << "error: manifests mix schema versions\n";
            return kDomain;
        }
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "features.csv", csv.str());

        // pairwise Wasserstein per feature
        json wj = json::object();
        std::cout << "windows: " << windows_total << " over " << by_label.size() << " labels\n";
        for (std::size_t fi = 0; fi < FeatureVector::size; ++fi) {
            const char* name = FeatureVector::names()[fi];
            json table = json::object();
            std::cout << "W1[" << name << "]\n";
            for (const auto& [la, sa] : by_label) {
                std::vector<double> a;
                for (const auto& s : sa) a.push_back(s.features.values()[fi]);
                std::cout << "  " << std::left << std::setw(34) << la;
                for (const auto& [lb, sb] : by_label) {
                    std::vector<double> b;
                    for (const auto& s : sb) b.push_back(s.features.values()[fi]);
                    const double w = wasserstein_1d(a, b);
                    table[la][lb] = w;
                    std::cout << std::right << std::setw(12) << std::setprecision(4) << w;
                }
                std::cout << "\n";
            }
            wj[name] = table;
        }
        json report = {{"wasserstein", wj}};

        if (by_label.size() < 2) {
            std::cout << "k-NN: insufficient labels (need at least 2, have " << by_label.size() << ")\n";
            report["knn"] = {{"status", "insufficient labels"}};
        } else {
            // alternate windows between train and test within each label
            std::vector<StyleSample> train, test;
            for (const auto& [l, ss] : by_label) {
                for (std::size_t i = 0; i < ss.size(); ++i) (i % 2 == 0 ? train : test).push_back(ss[i]);
            }
            auto kr = knn_style_classify(train, test, k);
            std::cout << "k-NN (k=" << k << ") macro F1 " << std::setprecision(4) << kr.macro_f1 << "\n";
            report["knn"] = {{"k", k}, {"macro_f1", kr.macro_f1}, {"f1", kr.f1}};
        }
        write_file(fs::path(out_dir) / "analysis.json", report.dump(1));
        return kOk;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomain;
    }
}

// ---------------------------------------------------------------------------
// export-replay

int cmd_export(const std::string& manifest, const std::string& agent, std::int64_t from, std::int64_t to,
               const std::string& format, double resolution, const std::string& out_dir) {
    try {
        auto run = load_run(manifest);
        const std::int64_t steps = static_cast<std::int64_t>(run.lines.size()) - 1;
        if (from < 0 || from >= steps || (to >= 0 && (to < from || to >= steps))) {
            std::cerr << "error: step range outside the log; valid steps are 0.." << steps - 1 << "\n";
            return kDomain;
        }
        ReplayRequest req{agent, from, to < 0 ? from : to};
        auto res = replay(run.lines, req);
        if (res.frames.empty()) {
            std::cerr << "error: agent " << agent << " has no records in steps " << req.first_step << ".."
                      << req.last_step << "\n";
            return kDomain;
        }
        fs::create_directories(out_dir);
        for (const auto& f : res.frames) {
            const std::string stem = agent + "_" + std::to_string(f.step);
            if (format == "pgm") {
                write_file(fs::path(out_dir) / (stem + "_obj.pgm"), rasterize_view(f.objective, resolution, true).to_pgm());
                write_file(fs::path(out_dir) / (stem + "_subj.pgm"), rasterize_view(f.subjective, resolution, true).to_pgm());
            } else {
                json j = {{"step", f.step},
                          {"objective", f.objective.to_json()},
                          {"subjective", f.subjective.to_json()},
                          {"script", to_json(f.script)}};
                write_file(fs::path(out_dir) / (stem + ".json"), j.dump(1));
            }
        }
        std::cout << "exported " << res.frames.size() << " frame pairs to " << out_dir << " (replay verified "
                  << res.views_checked << " views)\n";
        return kOk;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDomain;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stylesim: perception-modulated driving style simulator"};
    app.require_subcommand(1);

    std::string vpath;
    std::vector<std::string> voverrides;
    auto* v = app.add_subcommand("validate", "check a scenario without running it");
    v->add_option("config", vpath, "scenario file")->required();
    v->add_option("--override", voverrides, "key.path=value");

    RunArgs ra;
    std::uint64_t seed = 0;
    auto* r = app.add_subcommand("run", "run a scenario and write log, metrics and manifest");
    r->add_option("config", ra.config, "scenario file")->required();
    auto* seed_opt = r->add_option("--seed", seed, "run seed");
    r->add_option("--override", ra.overrides, "key.path=value (repeatable)");
    r->add_option("--provider", ra.provider, "on|off")->check(CLI::IsMember({"on", "off"}));
    r->add_option("--out", ra.out, "output directory");
    r->add_option("--batch", ra.batch, "independent runs with consecutive seeds")->check(CLI::PositiveNumber);
    r->add_option("--threads", ra.threads, "worker threads per step")->check(CLI::PositiveNumber);
    r->add_option("--format", ra.format, "jsonl|csv (csv also writes trajectories.csv)")
        ->check(CLI::IsMember({"jsonl", "csv"}));
    r->add_flag("--quiet", ra.quiet);

    std::vector<std::string> manifests;
    std::string grouping = "style";
    int window = 600;
    int k = 5;
    std::string aout = "analysis";
    auto* a = app.add_subcommand("analyze", "features, Wasserstein table and k-NN separability");
    a->add_option("manifests", manifests, "manifest.json files")->required();
    a->add_option("--group", grouping, "style|agent")->check(CLI::IsMember({"style", "agent"}));
    a->add_option("--window", window, "window length in steps")->check(CLI::Range(3, 1000000));
    a->add_option("--k", k, "neighbours (odd)");
    a->add_option("--out", aout, "output directory");

    std::string emanifest, agent, eformat = "json", eout = "frames";
    std::int64_t from = 0, to = -1;
    double resolution = 0.5;
    auto* e = app.add_subcommand("export-replay", "paired objective/subjective frames for one agent");
    e->add_option("manifest", emanifest)->required();
    e->add_option("--agent", agent)->required();
    e->add_option("--from", from, "first step");
    e->add_option("--to", to, "last step (inclusive)");
    e->add_option("--format", eformat, "json|pgm")->check(CLI::IsMember({"json", "pgm", "jsonl"}));
    e->add_option("--resolution", resolution, "m/px for pgm");
    e->add_option("--out", eout, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? kOk : kDomain;
    }
    if (*v) return cmd_validate(vpath, voverrides);
    if (*r) {
        if (*seed_opt) ra.seed = seed;
        return cmd_run(ra);
    }
    if (*a) return cmd_analyze(manifests, grouping, window, k, aout);
    if (*e) return cmd_export(emanifest, agent, from, to, eformat == "jsonl" ? "json" : eformat, resolution, eout);
    return kDomain;
}
