#pragma once

#include "rti/calibration.hpp"
#include "rti/harness.hpp"
#include "rti/reconstruction.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rti {

/// Shortest round-trip decimal form; the basis of byte-identical outputs.
std::string format_number(double v);

// RSS trace: "cycle,tx_id,rx_id,channel,rssi_dbm", empty rssi field for a lost packet.
void write_trace_csv(const std::filesystem::path& path, std::span<const MeasurementFrame> frames);
// Servo stop of every node per cycle: "cycle,node_id,position".
void write_positions_csv(const std::filesystem::path& path, std::span<const MeasurementFrame> frames);
/// Rebuilds frames from a trace and its positions file. Node order follows the
/// positions file, channel order the trace.
std::vector<MeasurementFrame> read_trace(const std::filesystem::path& trace_path,
                                         const std::filesystem::path& positions_path);

/// Cycle ranges of a recording: the empty-room training block, then one block per point.
struct Segment {
    std::string name; ///< "training" or "point"
    std::int64_t first_cycle = 0;
    std::int64_t last_cycle = 0;
    std::optional<Point2D> truth;
};

std::vector<Segment> recording_segments(const Recording& recording, std::span<const Point2D> truth);
void write_segments_csv(const std::filesystem::path& path, std::span<const Segment> segments);
std::vector<Segment> read_segments_csv(const std::filesystem::path& path);

/// η, per-channel intercepts and per-entry fade level and widths.
std::string model_to_json(const RtiModel& model);
void write_model_json(const std::filesystem::path& path, const RtiModel& model);

void write_image_csv(const std::filesystem::path& path, const Eigen::VectorXd& image, const VoxelGrid& grid);
/// 8-bit binary PGM, min-max normalized, top row = largest y.
void write_image_pgm(const std::filesystem::path& path, const Eigen::VectorXd& image, const VoxelGrid& grid);

void write_calibration_log(const std::filesystem::path& path, const CalibrationState& state);
void write_incremental_log(const std::filesystem::path& path, const IncrementalResult& result);

struct LocalizationRecord {
    std::int64_t cycle = 0;
    std::string segment;
    Localization localization;
    std::optional<Point2D> truth;
};
void write_localizations_csv(const std::filesystem::path& path, std::span<const LocalizationRecord> rows);

/// summary.csv, points.csv, table.txt and, when a report kept its images, images/.
/// Throws IoError when the directory or a file cannot be written.
void emit_report(std::span<const ExperimentReport> reports, const VoxelGrid& grid,
                 const std::filesystem::path& directory);

/// Text table with one column per variant present and the improvement of servo-calibrated
/// over standard and over servo-default, in percent.
std::string report_table(std::span<const ExperimentReport> reports);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

} // namespace rti
