#pragma once

#include "rti/reconstruction.hpp"
#include "rti/tdma.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace rti {

struct CalibrationConfig {
    std::size_t samples_per_evaluation = 10; ///< M, TDMA cycles averaged per servo position
    double static_window_s = 10.0;           ///< empty-room averaging window
    double cycle_period_s = 0.4;             ///< duration of one TDMA cycle
    std::size_t max_iterations = 10;         ///< full sweeps over all sensors

    std::size_t static_window_cycles() const;
    void validate() const;
};

/// R̄: time average per entry, then the unweighted mean over all present link × channel
/// entries. Throws InvalidArgument when no sample is present.
double mean_network_rss(std::span<const MeasurementFrame> frames);

/// R̄_p for platform sensor `platform_id` against the deployed set: the sum of both link
/// directions divided by |D| |C|. Entries missing in either direction are skipped and the
/// normalization counts only the (d, c) pairs used.
double candidate_mean_rss(const BaselineTable& baseline, int platform_id, std::span<const int> deployed);

struct IncrementalSpot {
    Point2D spot;
    std::array<double, kServoPositions> candidate_rss{}; ///< R̄_p for p = 1..8
    int selected = 1;
    Point2D placement;
};

struct IncrementalResult {
    std::vector<Point2D> placements; ///< the fixed first sensor, then one per spot
    std::vector<IncrementalSpot> spots;
    std::int64_t cycles = 0;
};

/// Deploy-one-at-a-time calibration with an eight-sensor platform. `spots[0]` is the fixed
/// first sensor; each later spot hosts the platform, and the sensor at the stop with the
/// highest R̄_p (lowest p on ties) is deployed there.
IncrementalResult incremental_calibrate(std::span<const Point2D> spots, const Environment& env,
                                        const ChannelSet& channels, const CalibrationConfig& config,
                                        std::uint64_t seed, double platform_radius = kDefaultServoRadius);

struct MeanRssRecord {
    std::size_t iteration = 0;
    double mean_rss = 0.0;
};

struct AcceptedMove {
    int node_id = 0;
    int old_position = 1;
    int new_position = 1;
};

/// One R̄_s^p evaluation, as written to the calibration log.
struct EvaluationRecord {
    std::size_t iteration = 0;
    int sensor_id = 0;
    int position = 1;
    double mean_rss = 0.0;
    bool accepted = false;
};

struct CalibrationState {
    std::map<int, int> positions;
    std::vector<MeanRssRecord> history; ///< initial R̄, then one record per accepted move
    std::vector<AcceptedMove> accepted_moves;
    std::vector<EvaluationRecord> evaluations;
    std::size_t iterations = 0;
    bool converged = false;
    std::int64_t cycles = 0;
};

/// Rotates each sensor in ascending id order through all stops, M cycles per stop, and
/// keeps the best stop iff its R̄ strictly beats the incumbent; otherwise the sensor goes
/// back where it was. Sweeps repeat until one accepts nothing or max_iterations is hit
/// (then `converged` is false and the best state so far is kept).
/// All servos must start at p = 1.
CalibrationState network_calibrate(TdmaNetwork& network, const CalibrationConfig& config);

/// Counts of final positions; index 0 is p = 1.
std::array<std::size_t, kServoPositions> position_histogram(std::span<const CalibrationState> states);

} // namespace rti
