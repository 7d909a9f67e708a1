// rtisim: simulate, calibrate and evaluate rotating-sensor RTI deployments.

#include "rti/error.hpp"
#include "rti/harness.hpp"
#include "rti/io.hpp"
#include "rti/scenario.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rti;

namespace {

struct Common {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string channels;
    std::string out;
};

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            values.push_back(std::stoi(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw InvalidArgument(std::string("bad ") + what + " list '" + text + "'");
        }
    }
    if (values.empty()) {
        throw InvalidArgument(std::string("empty ") + what + " list");
    }
    return values;
}

Scenario load(const Common& c) {
    Scenario s = c.scenario.empty() ? lab_scenario(c.seed.value_or(1)) : load_scenario(c.scenario, c.seed);
    if (!c.channels.empty()) {
        s.channels = ChannelSet(parse_int_list(c.channels, "channel"));
    }
    s.validate();
    return s;
}

// Common flags live on the top-level app; subcommands fall through to them, so they
// may appear before or after the subcommand name.
void add_common(CLI::App& app, Common& c) {
    app.add_option("--scenario", c.scenario, "Scenario JSON file (default: built-in lab scene)");
    app.add_option("--seed", c.seed, "Seed overriding the scenario's");
    app.add_option("--channels", c.channels, "Comma-separated channel list, e.g. 11,16,21,26");
    app.add_option("--out", c.out, "Output directory");
}

void require_out(const Common& c) {
    if (c.out.empty()) {
        throw InvalidArgument("--out is required");
    }
}

/// Every node the scenario can field, keyed by id.
std::map<int, NodeState> node_catalog(const Scenario& s) {
    std::map<int, NodeState> all;
    for (const auto& n : s.servo_nodes_at_default()) {
        all.emplace(n.id, n);
    }
    for (const auto& n : s.standard_nodes()) {
        all.emplace(n.id, n);
    }
    return all;
}

std::vector<Point2D> antennas_of(const Scenario& s, const MeasurementFrame& frame) {
    const auto catalog = node_catalog(s);
    std::vector<Point2D> out;
    for (std::size_t i = 0; i < frame.layout.nodes(); ++i) {
        const int id = frame.layout.node_ids()[i];
        const auto it = catalog.find(id);
        if (it == catalog.end()) {
            throw InvalidArgument("trace node " + std::to_string(id) + " is not part of the scenario");
        }
        NodeState n = it->second;
        n.position = frame.positions[i];
        out.push_back(n.antenna());
    }
    return out;
}

struct LoadedTrace {
    std::vector<MeasurementFrame> frames;
    std::vector<Segment> segments;
};

LoadedTrace load_trace(const fs::path& dir) {
    LoadedTrace t;
    t.frames = read_trace(dir / "trace.csv", dir / "positions.csv");
    t.segments = read_segments_csv(dir / "segments.csv");
    return t;
}

const Segment* segment_of(const std::vector<Segment>& segments, std::int64_t cycle) {
    for (const auto& s : segments) {
        if (cycle >= s.first_cycle && cycle <= s.last_cycle) {
            return &s;
        }
    }
    return nullptr;
}

RtiModel train_from(const Scenario& s, const LoadedTrace& t) {
    std::vector<MeasurementFrame> training;
    for (const auto& f : t.frames) {
        const Segment* seg = segment_of(t.segments, f.cycle);
        if (seg != nullptr && seg->name == "training") {
            training.push_back(f);
        }
    }
    if (training.empty()) {
        throw InvalidArgument("the trace holds no training frames");
    }
    return build_rti_model(training, antennas_of(s, training.front()), s.grid(), s.rti);
}

Recording record_variant(const Scenario& s, Variant v) {
    switch (v) {
    case Variant::Standard:
        return record_standard(s);
    case Variant::ServoRandom: {
        TdmaNetwork net(s.servo_nodes(random_positions(s, s.seed)), s.environment, s.channels, servo_stream_seed(s));
        return record_session(s, net);
    }
    case Variant::ServoDefault: {
        TdmaNetwork net(s.servo_nodes_at_default(), s.environment, s.channels, servo_stream_seed(s));
        return record_session(s, net);
    }
    case Variant::ServoCalibrated: {
        TdmaNetwork net(s.servo_nodes_at_default(), s.environment, s.channels, servo_stream_seed(s));
        network_calibrate(net, s.calibration);
        return record_session(s, net);
    }
    }
    throw InvalidArgument("unknown variant");
}

int cmd_simulate(const Common& c, const std::string& variant) {
    require_out(c);
    const Scenario s = load(c);
    const Recording rec = record_variant(s, parse_variant(variant));
    std::vector<MeasurementFrame> frames = rec.training;
    for (const auto& dwell : rec.point_frames) {
        frames.insert(frames.end(), dwell.begin(), dwell.end());
    }
    const fs::path out(c.out);
    write_trace_csv(out / "trace.csv", frames);
    write_positions_csv(out / "positions.csv", frames);
    write_segments_csv(out / "segments.csv", recording_segments(rec, s.ground_truth));
    std::printf("%zu frames, %zu nodes, %zu samples per frame\n", frames.size(), frames.front().layout.nodes(),
                frames.front().layout.entries());
    return 0;
}

int cmd_train(const Common& c, const std::string& in) {
    require_out(c);
    const Scenario s = load(c);
    const RtiModel model = train_from(s, load_trace(in));
    write_model_json(fs::path(c.out) / "model.json", model);
    std::size_t anti = 0;
    std::size_t measured = 0;
    for (std::size_t e = 0; e < model.fade.level.size(); ++e) {
        if (model.fade.level[e]) {
            ++measured;
            anti += model.fade.anti_fade(e) ? 1 : 0;
        }
    }
    std::printf("eta %.4f, %zu of %zu entries anti-fade\n", model.fit.eta, anti, measured);
    return 0;
}

int cmd_localize(const Common& c, const std::string& in, bool images) {
    require_out(c);
    const Scenario s = load(c);
    const LoadedTrace t = load_trace(in);
    const RtiModel model = train_from(s, t);
    const fs::path out(c.out);
    std::vector<LocalizationRecord> rows;
    for (const auto& f : t.frames) {
        const Segment* seg = segment_of(t.segments, f.cycle);
        if (seg != nullptr && seg->name == "training") {
            continue;
        }
        const Eigen::VectorXd image = model.image(f);
        rows.push_back({f.cycle, seg != nullptr ? seg->name : "none", localize(image, model.grid),
                        seg != nullptr ? seg->truth : std::nullopt});
        if (images) {
            const std::string stem = "frame_c" + std::to_string(f.cycle);
            write_image_csv(out / "images" / (stem + ".csv"), image, model.grid);
            write_image_pgm(out / "images" / (stem + ".pgm"), image, model.grid);
        }
    }
    write_localizations_csv(out / "localization.csv", rows);
    std::printf("%zu frames localized\n", rows.size());
    return 0;
}

int cmd_calibrate(const Common& c, const std::string& mode) {
    require_out(c);
    const Scenario s = load(c);
    const fs::path out(c.out);
    if (mode == "network") {
        TdmaNetwork net(s.servo_nodes_at_default(), s.environment, s.channels, servo_stream_seed(s));
        const CalibrationState state = network_calibrate(net, s.calibration);
        write_calibration_log(out / "calibration_log.csv", state);
        std::ostringstream pos;
        pos << "node_id,position\n";
        for (const auto& [id, p] : state.positions) {
            pos << id << ',' << p << '\n';
        }
        write_text(out / "calibrated_positions.csv", pos.str());
        std::ostringstream hist;
        hist << "iteration,mean_rss_dbm\n";
        for (const auto& h : state.history) {
            hist << h.iteration << ',' << format_number(h.mean_rss) << '\n';
        }
        write_text(out / "history.csv", hist.str());
        std::printf("%zu iterations, %zu accepted moves, %s, %lld cycles\n", state.iterations,
                    state.accepted_moves.size(), state.converged ? "converged" : "NOT converged (flagged)",
                    static_cast<long long>(state.cycles));
        return 0;
    }
    if (mode == "incremental") {
        std::vector<Point2D> spots;
        for (const auto& site : s.servo_sites) {
            spots.push_back(site.base);
        }
        const IncrementalResult r =
            incremental_calibrate(spots, s.environment, s.channels, s.calibration, s.seed, s.servo_radius);
        write_incremental_log(out / "incremental_log.csv", r);
        std::ostringstream pl;
        pl << "sensor,x,y\n";
        for (std::size_t i = 0; i < r.placements.size(); ++i) {
            pl << i + 1 << ',' << format_number(r.placements[i].x) << ',' << format_number(r.placements[i].y) << '\n';
        }
        write_text(out / "placements.csv", pl.str());
        std::printf("%zu sensors placed, %lld cycles\n", r.placements.size(), static_cast<long long>(r.cycles));
        return 0;
    }
    throw InvalidArgument("unknown calibration mode '" + mode + "' (expected incremental or network)");
}

int cmd_evaluate(const Common& c, const std::string& variant, bool images) {
    require_out(c);
    const Scenario s = load(c);
    EvaluationOptions opts;
    opts.keep_images = images;
    std::vector<Variant> variants;
    if (variant == "all") {
        variants = {Variant::Standard, Variant::ServoRandom, Variant::ServoDefault, Variant::ServoCalibrated};
    } else {
        variants = {parse_variant(variant)};
    }
    std::vector<ExperimentReport> reports;
    for (Variant v : variants) {
        if (v == Variant::Standard) {
            auto std_reports = standard_reports(s, record_standard(s), s.standard_subsets, opts);
            reports.insert(reports.end(), std::make_move_iterator(std_reports.begin()),
                           std::make_move_iterator(std_reports.end()));
        } else {
            reports.push_back(run_experiment(s, v, opts));
        }
    }
    emit_report(reports, s.grid(), c.out);
    for (const auto& r : reports) {
        if (r.flagged) {
            std::fprintf(stderr, "warning: calibration hit max_iterations without converging\n");
        }
    }
    std::fputs(report_table(reports).c_str(), stdout);
    return 0;
}

struct AnalyzeArgs {
    std::size_t trials = 38;
    std::size_t categories = kServoPositions;
    std::size_t threshold = 9;
    std::size_t samples = 1000000;
    std::uint64_t seed = 1;
    std::string counts;
    std::size_t runs = 0;
};

int cmd_analyze(const Common& c, AnalyzeArgs a) {
    std::vector<std::size_t> counts;
    if (!a.counts.empty()) {
        for (int v : parse_int_list(a.counts, "count")) {
            if (v < 0) {
                throw InvalidArgument("counts must be non-negative");
            }
            counts.push_back(static_cast<std::size_t>(v));
        }
    } else if (a.runs > 0) {
        // histogram of calibrated stops over `runs` seeded scenes
        std::vector<CalibrationState> states;
        const std::uint64_t base = c.seed.value_or(1);
        for (std::size_t k = 0; k < a.runs; ++k) {
            Common ck = c;
            ck.seed = base + k;
            const Scenario s = load(ck);
            TdmaNetwork net(s.servo_nodes_at_default(), s.environment, s.channels, servo_stream_seed(s));
            states.push_back(network_calibrate(net, s.calibration));
        }
        const auto h = position_histogram(states);
        counts.assign(h.begin(), h.end());
        a.categories = kServoPositions;
    }
    if (!counts.empty()) {
        a.trials = 0;
        for (auto v : counts) {
            a.trials += v;
        }
    }
    const MultinomialTestResult r =
        multinomial_bias_test(counts, a.trials, a.categories, a.threshold, a.samples, a.seed);
    std::ostringstream csv;
    csv << "trials,categories,threshold,samples,seed,probability,observed_max,observed_meets_threshold\n";
    csv << a.trials << ',' << a.categories << ',' << a.threshold << ',' << r.samples << ',' << a.seed << ','
        << format_number(r.probability) << ',' << (r.observed_max ? std::to_string(*r.observed_max) : "") << ','
        << (r.observed_meets_threshold ? (*r.observed_meets_threshold ? "1" : "0") : "") << '\n';
    if (!c.out.empty()) {
        write_text(fs::path(c.out) / "analysis.csv", csv.str());
        if (!counts.empty()) {
            std::ostringstream h;
            h << "position,count\n";
            for (std::size_t i = 0; i < counts.size(); ++i) {
                h << i + 1 << ',' << counts[i] << '\n';
            }
            write_text(fs::path(c.out) / "histogram.csv", h.str());
        }
    }
    std::printf("P(max count >= %zu | %zu trials, %zu categories) = %.4f\n", a.threshold, a.trials, a.categories,
                r.probability);
    if (r.observed_max) {
        std::printf("observed max %zu: %s\n", *r.observed_max,
                    *r.observed_meets_threshold ? "meets threshold" : "below threshold");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rtisim: rotating-sensor radio tomographic imaging simulator"};
    app.require_subcommand(1);

    Common common;
    add_common(app, common);
    std::string variant = "servo-default";
    std::string eval_variant = "all";
    std::string in;
    std::string mode = "network";
    bool images = false;
    AnalyzeArgs analyze;

    auto* sim = app.add_subcommand("simulate", "Record empty-room and person frames as RSS traces");
    sim->fallthrough();
    sim->add_option("--variant", variant, "standard | servo-random | servo-default | servo-calibrated");

    auto* train = app.add_subcommand("train", "Fit the RTI model to a trace's training frames");
    train->fallthrough();
    train->add_option("--in", in, "Directory written by simulate")->required();

    auto* loc = app.add_subcommand("localize", "Localize every person frame of a trace");
    loc->fallthrough();
    loc->add_option("--in", in, "Directory written by simulate")->required();
    loc->add_flag("--images", images, "Dump per-frame images (CSV and PGM)");

    auto* cal = app.add_subcommand("calibrate", "Run a calibration procedure");
    cal->fallthrough();
    cal->add_option("--mode", mode, "incremental | network");

    auto* eval = app.add_subcommand("evaluate", "Run the ground-truth evaluation and write a report");
    eval->fallthrough();
    eval->add_option("--variant", eval_variant, "A variant name, or all");
    eval->add_flag("--images", images, "Dump per-frame images (CSV and PGM)");

    auto* an = app.add_subcommand("analyze-positions", "Histogram of calibrated stops and multinomial test");
    an->fallthrough();
    an->add_option("--trials", analyze.trials, "Number of calibrated sensors");
    an->add_option("--categories", analyze.categories, "Number of servo stops");
    an->add_option("--threshold", analyze.threshold, "Count the largest category must reach");
    an->add_option("--samples", analyze.samples, "Monte Carlo samples");
    an->add_option("--mc-seed", analyze.seed, "Monte Carlo seed");
    an->add_option("--counts", analyze.counts, "Observed histogram, comma-separated");
    an->add_option("--runs", analyze.runs, "Build the histogram from this many calibrated scenes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            return cmd_simulate(common, variant);
        }
        if (*train) {
            return cmd_train(common, in);
        }
        if (*loc) {
            return cmd_localize(common, in, images);
        }
        if (*cal) {
            return cmd_calibrate(common, mode);
        }
        if (*eval) {
            return cmd_evaluate(common, eval_variant, images);
        }
        if (*an) {
            return cmd_analyze(common, analyze);
        }
    } catch (const rti::Error& e) {
        std::fprintf(stderr, "rtisim: error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "rtisim: unexpected error: %s\n", e.what());
        return 3;
    }
    return 0;
}
