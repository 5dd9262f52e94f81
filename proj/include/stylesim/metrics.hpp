#pragma once

#include "stylesim/events.hpp"
#include "stylesim/scenario.hpp"
#include "stylesim/scene.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stylesim {

struct DrivingScoreReport {
    double rc = 0.0;
    std::map<InfractionKind, int> infractions;
    double penalty_product = 1.0;
    double ds = 0.0;

    json to_json() const;
};

DrivingScoreReport score_from_counts(double rc, const std::map<InfractionKind, int>& counts,
                                     const PenaltyTable& penalties = {});
/// Counts the events naming `agent_id`.
DrivingScoreReport compute_ds_rc(double rc, std::span<const InfractionEvent> events, std::string_view agent_id,
                                 const PenaltyTable& penalties = {});
DrivingScoreReport compute_ds_rc(const Route& route, std::span<const Pose> trajectory,
                                 std::span<const InfractionEvent> events, std::string_view agent_id,
                                 const PenaltyTable& penalties = {});

/// One logged step of one agent.
struct TrajectorySample {
    std::int64_t step = 0;
    Pose pose;
    double speed = 0.0;
    double accel = 0.0;              // commanded
    double lateral = 0.0;            // signed offset from the route polyline
    std::optional<double> lead_gap;  // objective bumper gap to the lead on the believed lane
};

inline constexpr double kHeadwayCap = 10.0;  // s; free road and near-stopped samples saturate here

struct FeatureVector {
    double mean_speed = 0.0;
    double std_speed = 0.0;
    double mean_abs_acc = 0.0;
    double max_abs_acc = 0.0;
    double heading_change_rate = 0.0;
    double mean_time_headway = 0.0;
    double lateral_offset_rms = 0.0;

    static constexpr std::size_t size = 7;
    std::array<double, size> values() const;
    static const std::array<const char*, size>& names();
    json to_json() const;
};

/// Speed and acceleration by central differences of the poses. Throws InsufficientDataError for
/// fewer than 2 samples.
FeatureVector extract_features(std::span<const TrajectorySample> slice, double dt);

/// Order-1 Wasserstein distance between empirical distributions. Throws ContractViolation on empty input.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct StyleSample {
    std::string label;
    FeatureVector features;
};

struct KnnReport {
    std::vector<std::string> predicted;
    std::map<std::string, double> f1;  // per label
    double macro_f1 = 0.0;
};

/// z-scored Euclidean k-NN; vote ties go to the tied label with the nearest single neighbour.
/// Throws ContractViolation when k is even or < 1, or a test label is absent from train.
KnnReport knn_style_classify(std::span<const StyleSample> train, std::span<const StyleSample> test, int k);

/// Macro F1 over the union of true and predicted labels.
double macro_f1(std::span<const std::string> truth, std::span<const std::string> predicted,
                std::map<std::string, double>* per_label = nullptr);

/// Steps from `onset_step` until the first sample at or after it with accel below `threshold`.
std::optional<std::int64_t> brake_reaction_latency(std::span<const TrajectorySample> follower, std::int64_t onset_step,
                                                   double threshold = -0.5);

struct RasterGrid {
    int width = 0;
    int height = 0;
    double resolution = 0.5;
    std::vector<std::uint8_t> pixels;  // row-major, row 0 is the +y edge

    std::uint8_t at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
    std::string to_pgm() const;
};

inline constexpr std::uint8_t kRasterLane = 64;
inline constexpr std::uint8_t kRasterEgo = 192;
inline constexpr std::uint8_t kRasterObject = 255;

/// Top-down render of a view over [-radius, radius]^2. A pixel belongs to a footprint when its centre
/// lies in the half-open box [-l/2, l/2) x [-w/2, w/2) of the object's frame.
RasterGrid rasterize_view(const BevView& view, double resolution, bool draw_ego = false);

}  // namespace stylesim
