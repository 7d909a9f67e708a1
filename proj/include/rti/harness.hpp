#pragma once

#include "rti/calibration.hpp"
#include "rti/reconstruction.hpp"
#include "rti/scenario.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rti {

enum class Variant { Standard, ServoRandom, ServoDefault, ServoCalibrated };

std::string_view to_string(Variant v);
/// Accepts standard | servo-random | servo-default | servo-calibrated.
Variant parse_variant(std::string_view name);

/// Frames recorded for one physical configuration: empty-room training, then a dwell at
/// every ground-truth point with the person standing there.
struct Recording {
    std::vector<NodeState> nodes;
    std::vector<MeasurementFrame> training;
    std::vector<std::vector<MeasurementFrame>> point_frames;

    /// FNV-1a over every sample of every frame; equal hashes mean identical data.
    std::uint64_t hash() const;
};

Recording record_session(const Scenario& scenario, TdmaNetwork& network);

/// Stream seeds for the two physical test series of a scenario.
std::uint64_t servo_stream_seed(const Scenario& scenario);
std::uint64_t standard_stream_seed(const Scenario& scenario);

struct PointResult {
    Point2D truth;
    Point2D estimate; ///< coordinate-wise median of the per-frame localizations
    double error = 0.0;
    std::size_t degenerate_frames = 0;
    std::vector<Localization> frames;
};

struct FrameImage {
    std::size_t point = 0;
    std::int64_t cycle = 0;
    Eigen::VectorXd values;
};

struct ExperimentReport {
    std::string scenario;
    Variant variant = Variant::ServoDefault;
    std::vector<int> node_ids;
    std::vector<int> positions;
    std::vector<PointResult> points;
    double rmse = 0.0;
    std::optional<CalibrationState> calibration;
    bool flagged = false; ///< calibration hit max_iterations without converging
    double anti_fade_fraction = 0.0; ///< share of measured entries with F >= 0
    std::uint64_t frames_hash = 0;
    std::vector<FrameImage> images;

    std::size_t node_count() const { return node_ids.size(); }
};

struct EvaluationOptions {
    bool keep_images = false;
};

/// Trains on the recording's empty-room frames restricted to `node_ids`, then localizes
/// every person frame and scores each point by the median estimate.
ExperimentReport evaluate_recording(const Scenario& scenario, const Recording& recording,
                                    const std::vector<int>& node_ids, Variant label,
                                    const EvaluationOptions& options = {});

/// Servo-nodes held at `positions` (one per site, scenario order).
ExperimentReport run_servo_experiment(const Scenario& scenario, const std::vector<int>& positions,
                                      Variant label, const EvaluationOptions& options = {});

/// One stop per site drawn uniformly from 1..8.
std::vector<int> random_positions(const Scenario& scenario, std::uint64_t seed);

/// One standard sensor per servo site, picked by a coin flip.
std::vector<int> coin_flip_subset(const Scenario& scenario, std::mt19937_64& rng);

/// Runs one test of `variant`. Standard uses a single coin-flip subset; servo-calibrated
/// runs network calibration (empty room) first. Throws InvalidArgument without
/// ground-truth points.
ExperimentReport run_experiment(const Scenario& scenario, Variant variant, const EvaluationOptions& options = {});

Recording record_standard(const Scenario& scenario);

/// `count` coin-flip subsets of standard sensors evaluated on one recording. The first
/// report equals run_experiment(scenario, Variant::Standard).
std::vector<ExperimentReport> standard_reports(const Scenario& scenario, const Recording& recording,
                                               std::size_t count, const EvaluationOptions& options = {});

struct SweepResult {
    std::vector<std::vector<int>> subsets;
    std::vector<double> rmse;
    double median = 0.0;
    double mean = 0.0;
    std::uint64_t frames_hash = 0;
};

/// RMSE distribution over subsets of standard sensors evaluated on one recording. With
/// nodes_per_subset equal to the servo-site count each subset takes one flanking sensor
/// per site; otherwise subsets are drawn uniformly from all standard sensors.
SweepResult standard_subset_sweep(const Scenario& scenario, const Recording& recording,
                                  std::size_t subset_count, std::size_t nodes_per_subset, std::uint64_t seed);
SweepResult standard_subset_sweep(const Scenario& scenario, std::size_t subset_count,
                                  std::size_t nodes_per_subset, std::uint64_t seed);

/// √(Σe²/n). Throws InvalidArgument when empty.
double rmse(std::span<const double> errors);

double median(std::vector<double> values);

struct MultinomialTestResult {
    double probability = 0.0;          ///< P(max count >= threshold) under equal probabilities
    std::size_t samples = 0;
    std::optional<std::size_t> observed_max;
    std::optional<bool> observed_meets_threshold;
};

/// Seeded Monte Carlo estimate of the chance that the largest of `categories` equally
/// likely counts reaches `threshold` after `trials` draws. `counts` (optional, may be
/// empty) is the observed histogram and must sum to `trials`.
MultinomialTestResult multinomial_bias_test(std::span<const std::size_t> counts, std::size_t trials,
                                            std::size_t categories, std::size_t threshold,
                                            std::size_t mc_samples, std::uint64_t seed);

/// RSS change signs when the person stands at the midpoint of each link, split by the
/// sign of the link's fade level (servo-nodes at default positions).
struct ObstructionSignRates {
    std::size_t anti_total = 0;
    std::size_t anti_negative = 0;
    std::size_t anti_positive = 0;
    std::size_t deep_total = 0;
    std::size_t deep_negative = 0;
    std::size_t deep_positive = 0;

    double anti_negative_rate() const;
    double anti_positive_rate() const;
    double deep_negative_rate() const;
    double deep_positive_rate() const;
};

ObstructionSignRates obstruction_sign_rates(const Scenario& scenario, std::size_t cycles_per_link);

/// (baseline − improved) / baseline.
double improvement(double baseline_rmse, double improved_rmse);

} // namespace rti
