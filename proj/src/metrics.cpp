#include "stylesim/metrics.hpp"

#include "stylesim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace stylesim {

json DrivingScoreReport::to_json() const {
    json inf = json::object();
    for (const auto& [k, n] : infractions) inf[std::string(to_string(k))] = n;
    return {{"rc", rc}, {"ds", ds}, {"penalty_product", penalty_product}, {"infractions", inf}};
}

DrivingScoreReport score_from_counts(double rc, const std::map<InfractionKind, int>& counts, const PenaltyTable& p) {
    DrivingScoreReport r;
    r.rc = std::clamp(rc, 0.0, 100.0);
    r.infractions = counts;
    for (const auto& [k, n] : counts) {
        double c = 1.0;
        switch (k) {
            case InfractionKind::collision_pedestrian: c = p.collision_pedestrian; break;
            case InfractionKind::collision_vehicle: c = p.collision_vehicle; break;
            case InfractionKind::collision_static: c = p.collision_static; break;
            case InfractionKind::red_light: c = p.red_light; break;
            case InfractionKind::route_deviation: c = p.route_deviation; break;
        }
        r.penalty_product *= std::pow(c, n);
    }
    r.ds = r.rc * r.penalty_product;
    return r;
}

DrivingScoreReport compute_ds_rc(double rc, std::span<const InfractionEvent> events, std::string_view agent_id,
                                 const PenaltyTable& penalties) {
    std::map<InfractionKind, int> counts;
    for (const auto& e : events) {
        if (std::find(e.agents.begin(), e.agents.end(), agent_id) != e.agents.end()) ++counts[e.kind];
    }
    return score_from_counts(rc, counts, penalties);
}

DrivingScoreReport compute_ds_rc(const Route& route, std::span<const Pose> trajectory,
                                 std::span<const InfractionEvent> events, std::string_view agent_id,
                                 const PenaltyTable& penalties) {
    return compute_ds_rc(route_completion(route, trajectory), events, agent_id, penalties);
}

// ---------------------------------------------------------------------------
// features

std::array<double, FeatureVector::size> FeatureVector::values() const {
    return {mean_speed, std_speed, mean_abs_acc, max_abs_acc, heading_change_rate, mean_time_headway,
            lateral_offset_rms};
}

const std::array<const char*, FeatureVector::size>& FeatureVector::names() {
    static const std::array<const char*, size> n = {"mean_speed",          "std_speed",         "mean_abs_acc",
                                                    "max_abs_acc",         "heading_change_rate", "mean_time_headway",
                                                    "lateral_offset_rms"};
    return n;
}

json FeatureVector::to_json() const {
    json j = json::object();
    const auto v = values();
    for (std::size_t i = 0; i < size; ++i) j[names()[i]] = v[i];
    return j;
}

namespace {

// Central differences in the interior, one-sided at the ends.
std::vector<double> derivative(const std::vector<double>& x, double dt) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (x[i + 1] - x[i - 1]) / (2.0 * dt);
    d[0] = (x[1] - x[0]) / dt;
    d[n - 1] = (x[n - 1] - x[n - 2]) / dt;
    return d;
}

}  // namespace

FeatureVector extract_features(std::span<const TrajectorySample> s, double dt) {
    if (s.size() < 2) throw InsufficientDataError("extract_features: need at least 2 samples");
    if (!(dt > 0.0)) throw ContractViolation("extract_features: dt must be > 0");
    const std::size_t n = s.size();
    std::vector<double> xs(n), ys(n), hs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = s[i].pose.x;
        ys[i] = s[i].pose.y;
        // unwrap so differences stay small across the +-pi seam
        hs[i] = i == 0 ? s[0].pose.heading : hs[i - 1] + normalize_angle(s[i].pose.heading - s[i - 1].pose.heading);
    }
    const auto vx = derivative(xs, dt);
    const auto vy = derivative(ys, dt);
    std::vector<double> speed(n);
    for (std::size_t i = 0; i < n; ++i) speed[i] = std::hypot(vx[i], vy[i]);

    // interior points only when there are enough of them
    const std::size_t lo = n >= 3 ? 1 : 0;
    const std::size_t hi = n >= 3 ? n - 1 : n;
    FeatureVector f;
    const double m = static_cast<double>(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) f.mean_speed += speed[i] / m;
    for (std::size_t i = lo; i < hi; ++i) f.std_speed += (speed[i] - f.mean_speed) * (speed[i] - f.mean_speed) / m;
    f.std_speed = std::sqrt(f.std_speed);

    if (n >= 5) {
        // acceleration from interior speeds only, so the one-sided ends do not leak in
        std::vector<double> inner(speed.begin() + 1, speed.end() - 1);
        const auto acc = derivative(inner, dt);
        const double ma = static_cast<double>(acc.size() - 2);
        for (std::size_t i = 1; i + 1 < acc.size(); ++i) {
            f.mean_abs_acc += std::abs(acc[i]) / ma;
            f.max_abs_acc = std::max(f.max_abs_acc, std::abs(acc[i]));
        }
    }
    const auto dh = derivative(hs, dt);
    for (std::size_t i = lo; i < hi; ++i) f.heading_change_rate += std::abs(dh[i]) / m;

    double hw = 0.0;
    int hw_n = 0;
    double lat2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        lat2 += s[i].lateral * s[i].lateral;
        if (s[i].lead_gap && s[i].speed > 0.5) {
            hw += std::min(kHeadwayCap, std::max(0.0, *s[i].lead_gap) / s[i].speed);
            ++hw_n;
        }
    }
    f.mean_time_headway = hw_n > 0 ? hw / hw_n : kHeadwayCap;
    f.lateral_offset_rms = std::sqrt(lat2 / static_cast<double>(n));
    return f;
}

// ---------------------------------------------------------------------------
// distances and classification

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ContractViolation("wasserstein_1d: empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() == b.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
        return acc / static_cast<double>(a.size());
    }
    // integrate |F_a - F_b| over the merged support
    std::vector<double> pts(a);
    pts.insert(pts.end(), b.begin(), b.end());
    std::sort(pts.begin(), pts.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    double acc = 0.0;
    std::size_t ia = 0, ib = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        while (ia < a.size() && a[ia] <= pts[k]) ++ia;
        while (ib < b.size() && b[ib] <= pts[k]) ++ib;
        acc += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (pts[k + 1] - pts[k]);
    }
    return acc;
}

double macro_f1(std::span<const std::string> truth, std::span<const std::string> predicted,
                std::map<std::string, double>* per_label) {
    if (truth.size() != predicted.size()) throw ContractViolation("macro_f1: size mismatch");
    std::set<std::string> labels(truth.begin(), truth.end());
    labels.insert(predicted.begin(), predicted.end());
    if (labels.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& l : labels) {
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const bool t = truth[i] == l;
            const bool p = predicted[i] == l;
            tp += t && p;
            fp += !t && p;
            fn += t && !p;
        }
        const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        if (per_label) (*per_label)[l] = f1;
        sum += f1;
    }
    return sum / static_cast<double>(labels.size());
}

KnnReport knn_style_classify(std::span<const StyleSample> train, std::span<const StyleSample> test, int k) {
    if (k < 1 || k % 2 == 0) throw ContractViolation("knn_style_classify: k must be odd and >= 1");
    if (train.empty()) throw ContractViolation("knn_style_classify: empty training set");
    std::set<std::string> known;
    for (const auto& s : train) known.insert(s.label);
    for (const auto& s : test) {
        if (!known.count(s.label)) throw ContractViolation("knn_style_classify: test label " + s.label + " not in train");
    }

    constexpr std::size_t D = FeatureVector::size;
    std::array<double, D> mean{}, sd{};
    for (const auto& s : train) {
        const auto v = s.features.values();
        for (std::size_t d = 0; d < D; ++d) mean[d] += v[d] / static_cast<double>(train.size());
    }
    for (const auto& s : train) {
        const auto v = s.features.values();
        for (std::size_t d = 0; d < D; ++d) sd[d] += (v[d] - mean[d]) * (v[d] - mean[d]) / static_cast<double>(train.size());
    }
    for (auto& x : sd) x = x > 1e-24 ? std::sqrt(x) : 1.0;
    auto z = [&](const FeatureVector& f) {
        auto v = f.values();
        for (std::size_t d = 0; d < D; ++d) v[d] = (v[d] - mean[d]) / sd[d];
        return v;
    };
    std::vector<std::array<double, D>> zt;
    zt.reserve(train.size());
    for (const auto& s : train) zt.push_back(z(s.features));

    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), train.size());
    KnnReport out;
    std::vector<std::string> truth;
    std::vector<std::pair<double, std::size_t>> dist(train.size());
    for (const auto& s : test) {
        const auto q = z(s.features);
        for (std::size_t i = 0; i < train.size(); ++i) {
            double d2 = 0.0;
            for (std::size_t d = 0; d < D; ++d) d2 += (q[d] - zt[i][d]) * (q[d] - zt[i][d]);
            dist[i] = {d2, i};
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        std::map<std::string, std::pair<int, double>> votes;  // label -> (count, nearest distance)
        for (std::size_t j = 0; j < kk; ++j) {
            auto& v = votes.try_emplace(train[dist[j].second].label, 0, INFINITY).first->second;
            ++v.first;
            v.second = std::min(v.second, dist[j].first);
        }
        const std::string* best = nullptr;
        std::pair<int, double> best_v{-1, INFINITY};
        for (const auto& [label, v] : votes) {
            if (v.first > best_v.first || (v.first == best_v.first && v.second < best_v.second)) {
                best = &label;
                best_v = v;
            }
        }
        out.predicted.push_back(*best);
        truth.push_back(s.label);
    }
    out.macro_f1 = macro_f1(truth, out.predicted, &out.f1);
    return out;
}

std::optional<std::int64_t> brake_reaction_latency(std::span<const TrajectorySample> follower, std::int64_t onset_step,
                                                   double threshold) {
    for (const auto& s : follower) {
        if (s.step >= onset_step && s.accel < threshold) return s.step - onset_step;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// raster export

std::string RasterGrid::to_pgm() const {
    std::string out = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    return out;
}

RasterGrid rasterize_view(const BevView& view, double resolution, bool draw_ego) {
    if (!(resolution > 0.0)) throw ContractViolation("rasterize_view: resolution must be > 0");
    const double r = view.radius;
    RasterGrid g;
    g.resolution = resolution;
    g.width = g.height = static_cast<int>(std::ceil(2.0 * r / resolution - 1e-9));
    g.pixels.assign(static_cast<std::size_t>(g.width) * g.height, 0);

    auto set = [&](int col, int row, std::uint8_t v) {
        if (col < 0 || row < 0 || col >= g.width || row >= g.height) return;
        g.pixels[static_cast<std::size_t>(row) * g.width + col] = v;
    };
    auto col_of = [&](double x) { return static_cast<int>(std::floor((x + r) / resolution)); };
    auto row_of = [&](double y) { return static_cast<int>(std::floor((r - y) / resolution)); };

    for (const auto& lane : view.lanes) {
        const auto pts = densify(lane.centerline, 0.5 * resolution);
        for (const auto& p : pts) set(col_of(p.x), row_of(p.y), kRasterLane);
    }
    auto fill = [&](const Pose& pose, const Extent& e, std::uint8_t v) {
        const double reach = 0.5 * std::hypot(e.length, e.width) + resolution;
        const int c0 = std::max(0, col_of(pose.x - reach));
        const int c1 = std::min(g.width - 1, col_of(pose.x + reach));
        const int r0 = std::max(0, row_of(pose.y + reach));
        const int r1 = std::min(g.height - 1, row_of(pose.y - reach));
        for (int row = r0; row <= r1; ++row) {
            for (int col = c0; col <= c1; ++col) {
                const Vec2 c{-r + (col + 0.5) * resolution, r - (row + 0.5) * resolution};
                const Vec2 u = to_frame(pose, c);
                if (u.x >= -0.5 * e.length && u.x < 0.5 * e.length && u.y >= -0.5 * e.width && u.y < 0.5 * e.width) {
                    set(col, row, v);
                }
            }
        }
    };
    for (const auto& o : view.objects) fill(o.pose, o.extent, kRasterObject);
    if (draw_ego) fill(Pose{}, view.ego_extent, kRasterEgo);
    return g;
}

}  // namespace stylesim
