#include "rti/io.hpp"

#include "rti/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace rti {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const fs::path& path, bool binary = false) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) {
        throw IoError("write to " + path.string() + " failed");
    }
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        fields.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

template <typename T>
T parse_field(const std::string& s, const fs::path& path, std::size_t line) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": bad field '" + s + "'");
    }
    return v;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw IoError(path.string() + ": expected header '" + header + "'");
    }
    const std::size_t columns = split(header).size();
    std::vector<std::vector<std::string>> rows;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) {
            continue;
        }
        auto fields = split(line);
        if (fields.size() != columns) {
            throw IoError(path.string() + ":" + std::to_string(n) + ": expected " + std::to_string(columns) +
                          " fields");
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

std::pair<double, double> min_max(const Eigen::VectorXd& image) {
    if (image.size() == 0) {
        throw InvalidArgument("empty image");
    }
    return {image.minCoeff(), image.maxCoeff()};
}

} // namespace

std::string format_number(double v) {
    if (v == 0.0) {
        return "0"; // folds -0
    }
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) {
        throw Error("number formatting failed");
    }
    return std::string(buf, ptr);
}

void write_trace_csv(const fs::path& path, std::span<const MeasurementFrame> frames) {
    auto out = open_out(path);
    out << "cycle,tx_id,rx_id,channel,rssi_dbm\n";
    for (const auto& f : frames) {
        const auto& layout = f.layout;
        for (std::size_t tx = 0; tx < layout.nodes(); ++tx) {
            for (std::size_t rx = 0; rx < layout.nodes(); ++rx) {
                if (tx == rx) {
                    continue;
                }
                for (std::size_t c = 0; c < layout.channels().size(); ++c) {
                    out << f.cycle << ',' << layout.node_ids()[tx] << ',' << layout.node_ids()[rx] << ','
                        << layout.channels()[c] << ',';
                    if (const auto& s = f.rssi[layout.entry(tx, rx, c)]) {
                        out << format_number(*s);
                    }
                    out << '\n';
                }
            }
        }
    }
    finish(out, path);
}

void write_positions_csv(const fs::path& path, std::span<const MeasurementFrame> frames) {
    auto out = open_out(path);
    out << "cycle,node_id,position\n";
    for (const auto& f : frames) {
        for (std::size_t i = 0; i < f.layout.nodes(); ++i) {
            out << f.cycle << ',' << f.layout.node_ids()[i] << ',' << f.positions[i] << '\n';
        }
    }
    finish(out, path);
}

std::vector<MeasurementFrame> read_trace(const fs::path& trace_path, const fs::path& positions_path) {
    // cycle -> (ids, positions), in file order
    std::map<std::int64_t, std::pair<std::vector<int>, std::vector<int>>> nodes;
    std::vector<std::int64_t> order;
    std::size_t line = 1;
    for (const auto& row : read_csv(positions_path, "cycle,node_id,position")) {
        ++line;
        const auto cycle = parse_field<std::int64_t>(row[0], positions_path, line);
        auto [it, inserted] = nodes.try_emplace(cycle);
        if (inserted) {
            order.push_back(cycle);
        }
        it->second.first.push_back(parse_field<int>(row[1], positions_path, line));
        it->second.second.push_back(parse_field<int>(row[2], positions_path, line));
    }
    if (order.empty()) {
        throw IoError(positions_path.string() + ": no cycles");
    }

    struct Sample {
        int tx, rx, channel;
        std::optional<double> rssi;
    };
    std::map<std::int64_t, std::vector<Sample>> samples;
    std::vector<int> channels;
    line = 1;
    for (const auto& row : read_csv(trace_path, "cycle,tx_id,rx_id,channel,rssi_dbm")) {
        ++line;
        Sample s{parse_field<int>(row[1], trace_path, line), parse_field<int>(row[2], trace_path, line),
                 parse_field<int>(row[3], trace_path, line), std::nullopt};
        if (!row[4].empty()) {
            s.rssi = parse_field<double>(row[4], trace_path, line);
        }
        if (std::find(channels.begin(), channels.end(), s.channel) == channels.end()) {
            channels.push_back(s.channel);
        }
        samples[parse_field<std::int64_t>(row[0], trace_path, line)].push_back(s);
    }

    std::vector<MeasurementFrame> frames;
    frames.reserve(order.size());
    for (std::int64_t cycle : order) {
        const auto& [ids, positions] = nodes.at(cycle);
        MeasurementFrame f;
        f.cycle = cycle;
        try {
            f.layout = LinkLayout(ids, channels);
        } catch (const InvalidArgument& e) {
            throw IoError("cycle " + std::to_string(cycle) + ": " + e.what());
        }
        f.positions = positions;
        f.rssi.assign(f.layout.entries(), std::nullopt);
        const auto it = samples.find(cycle);
        if (it == samples.end() || it->second.size() != f.layout.entries()) {
            throw IoError(trace_path.string() + ": cycle " + std::to_string(cycle) +
                          " does not hold one row per link and channel");
        }
        for (const auto& s : it->second) {
            try {
                f.rssi[f.layout.entry(f.layout.node_index(s.tx), f.layout.node_index(s.rx),
                                      f.layout.channel_index(s.channel))] = s.rssi;
            } catch (const InvalidArgument& e) {
                throw IoError(trace_path.string() + ": cycle " + std::to_string(cycle) + ": " + e.what());
            }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

std::vector<Segment> recording_segments(const Recording& recording, std::span<const Point2D> truth) {
    if (truth.size() != recording.point_frames.size()) {
        throw InvalidArgument("one ground-truth point per recorded dwell expected");
    }
    std::vector<Segment> out;
    if (!recording.training.empty()) {
        out.push_back({"training", recording.training.front().cycle, recording.training.back().cycle, std::nullopt});
    }
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& dwell = recording.point_frames[i];
        if (!dwell.empty()) {
            out.push_back({"point", dwell.front().cycle, dwell.back().cycle, truth[i]});
        }
    }
    return out;
}

void write_segments_csv(const fs::path& path, std::span<const Segment> segments) {
    auto out = open_out(path);
    out << "segment,first_cycle,last_cycle,truth_x,truth_y\n";
    for (const auto& s : segments) {
        out << s.name << ',' << s.first_cycle << ',' << s.last_cycle << ',';
        if (s.truth) {
            out << format_number(s.truth->x) << ',' << format_number(s.truth->y);
        } else {
            out << ',';
        }
        out << '\n';
    }
    finish(out, path);
}

std::vector<Segment> read_segments_csv(const fs::path& path) {
    std::vector<Segment> out;
    std::size_t line = 1;
    for (const auto& row : read_csv(path, "segment,first_cycle,last_cycle,truth_x,truth_y")) {
        ++line;
        Segment s;
        s.name = row[0];
        if (s.name != "training" && s.name != "point") {
            throw IoError(path.string() + ":" + std::to_string(line) + ": unknown segment '" + s.name + "'");
        }
        s.first_cycle = parse_field<std::int64_t>(row[1], path, line);
        s.last_cycle = parse_field<std::int64_t>(row[2], path, line);
        if (!row[3].empty()) {
            s.truth = Point2D{parse_field<double>(row[3], path, line), parse_field<double>(row[4], path, line)};
        }
        out.push_back(s);
    }
    return out;
}

std::string model_to_json(const RtiModel& model) {
    const auto& layout = model.layout;
    json j;
    j["eta"] = model.fit.eta;
    json intercepts = json::object();
    for (std::size_t c = 0; c < layout.channels().size(); ++c) {
        intercepts[std::to_string(layout.channels()[c])] = model.fit.intercepts[c];
    }
    j["intercepts_dbm"] = intercepts;
    j["voxel_size"] = model.grid.voxel_size();
    j["voxels"] = {model.grid.nx(), model.grid.ny()};
    json nodes = json::array();
    for (std::size_t i = 0; i < layout.nodes(); ++i) {
        nodes.push_back({{"id", layout.node_ids()[i]}, {"x", model.antennas[i].x}, {"y", model.antennas[i].y}});
    }
    j["nodes"] = nodes;
    json entries = json::array();
    for (std::size_t l = 0; l < layout.links(); ++l) {
        const std::size_t tx = layout.tx_of(l);
        const std::size_t rx = layout.rx_of(l);
        for (std::size_t c = 0; c < layout.channels().size(); ++c) {
            const std::size_t e = l * layout.channels().size() + c;
            json row = {{"tx", layout.node_ids()[tx]}, {"rx", layout.node_ids()[rx]}, {"channel", layout.channels()[c]}};
            if (model.fade.level[e]) {
                row["fade_db"] = *model.fade.level[e];
                row["lambda_plus"] = model.widths.width[e]->plus;
                row["lambda_minus"] = model.widths.width[e]->minus;
            } else {
                row["fade_db"] = nullptr;
            }
            entries.push_back(row);
        }
    }
    j["entries"] = entries;
    return j.dump(1) + "\n";
}

void write_model_json(const fs::path& path, const RtiModel& model) { write_text(path, model_to_json(model)); }

void write_image_csv(const fs::path& path, const Eigen::VectorXd& image, const VoxelGrid& grid) {
    if (static_cast<std::size_t>(image.size()) != grid.size()) {
        throw InvalidArgument("image size does not match the grid");
    }
    auto out = open_out(path);
    out << "x,y,value\n";
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Point2D c = grid.center(j);
        out << format_number(c.x) << ',' << format_number(c.y) << ',' << format_number(image[static_cast<Eigen::Index>(j)])
            << '\n';
    }
    finish(out, path);
}

void write_image_pgm(const fs::path& path, const Eigen::VectorXd& image, const VoxelGrid& grid) {
    if (static_cast<std::size_t>(image.size()) != grid.size()) {
        throw InvalidArgument("image size does not match the grid");
    }
    const auto [lo, hi] = min_max(image);
    auto out = open_out(path, true);
    out << "P5\n" << grid.nx() << ' ' << grid.ny() << "\n255\n";
    for (std::size_t row = 0; row < grid.ny(); ++row) {
        const std::size_t iy = grid.ny() - 1 - row;
        for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
            const double v = image[static_cast<Eigen::Index>(iy * grid.nx() + ix)];
            const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
            out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * t))));
        }
    }
    finish(out, path);
}

void write_calibration_log(const fs::path& path, const CalibrationState& state) {
    auto out = open_out(path);
    out << "iteration,sensor_id,position,mean_rss_dbm,accepted\n";
    for (const auto& e : state.evaluations) {
        out << e.iteration << ',' << e.sensor_id << ',' << e.position << ',' << format_number(e.mean_rss) << ','
            << (e.accepted ? 1 : 0) << '\n';
    }
    finish(out, path);
}

void write_incremental_log(const fs::path& path, const IncrementalResult& result) {
    auto out = open_out(path);
    out << "spot,spot_x,spot_y,position,mean_rss_dbm,selected\n";
    for (std::size_t s = 0; s < result.spots.size(); ++s) {
        const auto& spot = result.spots[s];
        for (int p = 1; p <= kServoPositions; ++p) {
            out << s + 1 << ',' << format_number(spot.spot.x) << ',' << format_number(spot.spot.y) << ',' << p << ','
                << format_number(spot.candidate_rss[static_cast<std::size_t>(p - 1)]) << ','
                << (p == spot.selected ? 1 : 0) << '\n';
        }
    }
    finish(out, path);
}

void write_localizations_csv(const fs::path& path, std::span<const LocalizationRecord> rows) {
    auto out = open_out(path);
    out << "cycle,segment,x,y,voxel,degenerate,truth_x,truth_y\n";
    for (const auto& r : rows) {
        out << r.cycle << ',' << r.segment << ',' << format_number(r.localization.position.x) << ','
            << format_number(r.localization.position.y) << ',' << r.localization.voxel << ','
            << (r.localization.degenerate ? 1 : 0) << ',';
        if (r.truth) {
            out << format_number(r.truth->x) << ',' << format_number(r.truth->y);
        } else {
            out << ',';
        }
        out << '\n';
    }
    finish(out, path);
}

std::string report_table(std::span<const ExperimentReport> reports) {
    std::map<Variant, std::vector<double>> by_variant;
    for (const auto& r : reports) {
        by_variant[r.variant].push_back(r.rmse);
    }
    auto mean_of = [&](Variant v) -> std::optional<double> {
        const auto it = by_variant.find(v);
        if (it == by_variant.end()) {
            return std::nullopt;
        }
        double s = 0.0;
        for (double x : it->second) {
            s += x;
        }
        return s / static_cast<double>(it->second.size());
    };
    auto cell = [](std::optional<double> v, bool percent) {
        if (!v) {
            return std::string("-");
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, percent ? "%.0f%%" : "%.2f m", percent ? 100.0 * *v : *v);
        return std::string(buf);
    };
    const auto standard = mean_of(Variant::Standard);
    const auto random = mean_of(Variant::ServoRandom);
    const auto def = mean_of(Variant::ServoDefault);
    const auto cal = mean_of(Variant::ServoCalibrated);
    std::optional<double> vs_standard;
    std::optional<double> vs_default;
    if (standard && cal && *standard > 0.0) {
        vs_standard = improvement(*standard, *cal);
    }
    if (def && cal && *def > 0.0) {
        vs_default = improvement(*def, *cal);
    }

    std::string scenario = reports.empty() ? std::string("-") : reports.front().scenario;
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-14s %-10s %-10s %-10s %-10s %-12s %-12s\n", "Scenario", "Standard",
                  "Random", "Default", "Calibrated", "Impr. (std)", "Impr. (def)");
    out << line;
    std::snprintf(line, sizeof line, "%-14s %-10s %-10s %-10s %-10s %-12s %-12s\n", scenario.c_str(),
                  cell(standard, false).c_str(), cell(random, false).c_str(), cell(def, false).c_str(),
                  cell(cal, false).c_str(), cell(vs_standard, true).c_str(), cell(vs_default, true).c_str());
    out << line;
    out << "RMSE is the mean over the tests of each variant.\n";
    return out.str();
}

void emit_report(std::span<const ExperimentReport> reports, const VoxelGrid& grid, const fs::path& directory) {
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec || !fs::is_directory(directory)) {
        throw IoError("cannot create report directory " + directory.string());
    }
    {
        const auto path = directory / "summary.csv";
        auto out = open_out(path);
        out << "scenario,variant,nodes,rmse_m,median_error_m,anti_fade_fraction,calibration_iterations,flagged,"
               "frames_hash\n";
        for (const auto& r : reports) {
            std::vector<double> errors;
            for (const auto& p : r.points) {
                errors.push_back(p.error);
            }
            out << r.scenario << ',' << to_string(r.variant) << ',' << r.node_count() << ','
                << format_number(r.rmse) << ',' << (errors.empty() ? std::string() : format_number(median(errors)))
                << ',' << format_number(r.anti_fade_fraction) << ','
                << (r.calibration ? std::to_string(r.calibration->iterations) : std::string()) << ','
                << (r.flagged ? 1 : 0) << ',' << r.frames_hash << '\n';
        }
        finish(out, path);
    }
    {
        const auto path = directory / "points.csv";
        auto out = open_out(path);
        out << "variant,point,truth_x,truth_y,estimate_x,estimate_y,error_m,degenerate_frames\n";
        for (const auto& r : reports) {
            for (std::size_t i = 0; i < r.points.size(); ++i) {
                const auto& p = r.points[i];
                out << to_string(r.variant) << ',' << i << ',' << format_number(p.truth.x) << ','
                    << format_number(p.truth.y) << ',' << format_number(p.estimate.x) << ','
                    << format_number(p.estimate.y) << ',' << format_number(p.error) << ',' << p.degenerate_frames
                    << '\n';
            }
        }
        finish(out, path);
    }
    write_text(directory / "table.txt", report_table(reports));
    for (const auto& r : reports) {
        for (const auto& img : r.images) {
            const std::string stem = std::string(to_string(r.variant)) + "_p" + std::to_string(img.point) + "_c" +
                                     std::to_string(img.cycle);
            write_image_csv(directory / "images" / (stem + ".csv"), img.values, grid);
            write_image_pgm(directory / "images" / (stem + ".pgm"), img.values, grid);
        }
    }
}

void write_text(const fs::path& path, const std::string& content) {
    auto out = open_out(path, true);
    out << content;
    finish(out, path);
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace rti
