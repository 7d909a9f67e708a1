#include "rti/harness.hpp"

#include "rti/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

namespace rti {

namespace {

constexpr std::uint64_t kServoStream = 0x5e7;
constexpr std::uint64_t kStandardStream = 0x57d;
constexpr std::uint64_t kRandomPositionStream = 0x7a9;
constexpr std::uint64_t kSubsetStream = 0x5b5;

class Fnv1a {
public:
    void add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h_ ^= (v >> (8 * i)) & 0xffU;
            h_ *= 0x100000001b3ULL;
        }
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

void hash_frame(Fnv1a& h, const MeasurementFrame& f) {
    h.add(static_cast<std::uint64_t>(f.cycle));
    for (int id : f.layout.node_ids()) {
        h.add(static_cast<std::uint64_t>(id));
    }
    for (int p : f.positions) {
        h.add(static_cast<std::uint64_t>(p));
    }
    for (const auto& s : f.rssi) {
        h.add(s ? std::bit_cast<std::uint64_t>(*s) : 0x7ff8dead0000beefULL);
    }
}

std::vector<MeasurementFrame> restrict_frames(const std::vector<MeasurementFrame>& frames,
                                              const std::vector<int>& node_ids, bool whole) {
    if (whole) {
        return frames;
    }
    std::vector<MeasurementFrame> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        out.push_back(f.subset(node_ids));
    }
    return out;
}

} // namespace

std::string_view to_string(Variant v) {
    switch (v) {
    case Variant::Standard:
        return "standard";
    case Variant::ServoRandom:
        return "servo-random";
    case Variant::ServoDefault:
        return "servo-default";
    case Variant::ServoCalibrated:
        return "servo-calibrated";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : {Variant::Standard, Variant::ServoRandom, Variant::ServoDefault, Variant::ServoCalibrated}) {
        if (name == to_string(v)) {
            return v;
        }
    }
    throw InvalidArgument("unknown variant '" + std::string(name) +
                          "' (expected standard, servo-random, servo-default or servo-calibrated)");
}

std::uint64_t Recording::hash() const {
    Fnv1a h;
    for (const auto& f : training) {
        hash_frame(h, f);
    }
    for (const auto& point : point_frames) {
        for (const auto& f : point) {
            hash_frame(h, f);
        }
    }
    return h.value();
}

Recording record_session(const Scenario& scenario, TdmaNetwork& network) {
    Recording rec;
    rec.nodes = network.nodes();
    rec.training = network.run_cycles(scenario.training_cycles);
    rec.point_frames.reserve(scenario.ground_truth.size());
    for (const auto& truth : scenario.ground_truth) {
        PersonModel person = scenario.person;
        person.position = truth;
        rec.point_frames.push_back(network.run_cycles(scenario.dwell_cycles, person));
    }
    return rec;
}

std::uint64_t servo_stream_seed(const Scenario& scenario) { return derive_seed(scenario.seed, kServoStream); }
std::uint64_t standard_stream_seed(const Scenario& scenario) { return derive_seed(scenario.seed, kStandardStream); }

ExperimentReport evaluate_recording(const Scenario& scenario, const Recording& recording,
                                    const std::vector<int>& node_ids, Variant label,
                                    const EvaluationOptions& options) {
    if (scenario.ground_truth.empty() || recording.point_frames.empty()) {
        throw InvalidArgument("evaluation needs at least one ground-truth point");
    }
    if (recording.point_frames.size() != scenario.ground_truth.size()) {
        throw InvalidArgument("recording does not match the scenario's ground-truth points");
    }
    const auto& all_ids = recording.training.front().layout.node_ids();
    const bool whole = node_ids == all_ids;

    std::vector<Point2D> antennas;
    std::vector<int> positions;
    for (int id : node_ids) {
        auto it = std::find_if(recording.nodes.begin(), recording.nodes.end(),
                               [&](const NodeState& n) { return n.id == id; });
        if (it == recording.nodes.end()) {
            throw InvalidArgument("node " + std::to_string(id) + " is not part of the recording");
        }
        antennas.push_back(it->antenna());
        positions.push_back(it->position);
    }

    const auto training = restrict_frames(recording.training, node_ids, whole);
    const RtiModel model = build_rti_model(training, antennas, scenario.grid(), scenario.rti);

    ExperimentReport report;
    report.scenario = scenario.name;
    report.variant = label;
    report.node_ids = node_ids;
    report.positions = positions;
    std::size_t measured = 0;
    std::size_t anti = 0;
    for (std::size_t e = 0; e < model.fade.level.size(); ++e) {
        if (model.fade.level[e]) {
            ++measured;
            anti += model.fade.anti_fade(e) ? 1 : 0;
        }
    }
    report.anti_fade_fraction = measured == 0 ? 0.0 : static_cast<double>(anti) / static_cast<double>(measured);
    report.frames_hash = recording.hash();

    std::vector<double> errors;
    for (std::size_t i = 0; i < scenario.ground_truth.size(); ++i) {
        PointResult point;
        point.truth = scenario.ground_truth[i];
        std::vector<double> xs;
        std::vector<double> ys;
        for (const auto& frame : recording.point_frames[i]) {
            const auto f = whole ? frame : frame.subset(node_ids);
            const Eigen::VectorXd image = model.image(f);
            const Localization loc = localize(image, model.grid);
            if (loc.degenerate) {
                ++point.degenerate_frames;
            }
            xs.push_back(loc.position.x);
            ys.push_back(loc.position.y);
            point.frames.push_back(loc);
            if (options.keep_images) {
                report.images.push_back({i, f.cycle, image});
            }
        }
        point.estimate = {median(xs), median(ys)};
        point.error = distance(point.estimate, point.truth);
        errors.push_back(point.error);
        report.points.push_back(std::move(point));
    }
    report.rmse = rmse(errors);
    return report;
}

ExperimentReport run_servo_experiment(const Scenario& scenario, const std::vector<int>& positions,
                                      Variant label, const EvaluationOptions& options) {
    TdmaNetwork network(scenario.servo_nodes(positions), scenario.environment, scenario.channels,
                        servo_stream_seed(scenario));
    const Recording rec = record_session(scenario, network);
    return evaluate_recording(scenario, rec, network.layout().node_ids(), label, options);
}

std::vector<int> random_positions(const Scenario& scenario, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, kRandomPositionStream));
    std::uniform_int_distribution<int> stop(1, kServoPositions);
    std::vector<int> p(scenario.servo_sites.size());
    for (auto& v : p) {
        v = stop(rng);
    }
    return p;
}

std::vector<int> coin_flip_subset(const Scenario& scenario, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<int> ids;
    ids.reserve(scenario.servo_sites.size());
    for (const auto& site : scenario.servo_sites) {
        ids.push_back(coin(rng) ? standard_right_id(site.id) : standard_left_id(site.id));
    }
    return ids;
}

Recording record_standard(const Scenario& scenario) {
    TdmaNetwork network(scenario.standard_nodes(), scenario.environment, scenario.channels,
                        standard_stream_seed(scenario));
    return record_session(scenario, network);
}

std::vector<ExperimentReport> standard_reports(const Scenario& scenario, const Recording& recording,
                                               std::size_t count, const EvaluationOptions& options) {
    if (count == 0) {
        throw InvalidArgument("need at least one standard subset");
    }
    std::mt19937_64 rng(derive_seed(scenario.seed, kSubsetStream));
    std::vector<ExperimentReport> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        out.push_back(evaluate_recording(scenario, recording, coin_flip_subset(scenario, rng), Variant::Standard,
                                         options));
    }
    return out;
}

ExperimentReport run_experiment(const Scenario& scenario, Variant variant, const EvaluationOptions& options) {
    if (scenario.ground_truth.empty()) {
        throw InvalidArgument("evaluation needs at least one ground-truth point");
    }
    switch (variant) {
    case Variant::Standard: {
        const Recording rec = record_standard(scenario);
        std::mt19937_64 rng(derive_seed(scenario.seed, kSubsetStream));
        return evaluate_recording(scenario, rec, coin_flip_subset(scenario, rng), variant, options);
    }
    case Variant::ServoRandom:
        return run_servo_experiment(scenario, random_positions(scenario, scenario.seed), variant, options);
    case Variant::ServoDefault:
        return run_servo_experiment(scenario, std::vector<int>(scenario.servo_sites.size(), 1), variant, options);
    case Variant::ServoCalibrated: {
        TdmaNetwork network(scenario.servo_nodes_at_default(), scenario.environment, scenario.channels,
                            servo_stream_seed(scenario));
        CalibrationState state = network_calibrate(network, scenario.calibration);
        const Recording rec = record_session(scenario, network);
        ExperimentReport report = evaluate_recording(scenario, rec, network.layout().node_ids(), variant, options);
        report.flagged = !state.converged;
        report.calibration = std::move(state);
        return report;
    }
    }
    throw InvalidArgument("unknown variant");
}

SweepResult standard_subset_sweep(const Scenario& scenario, const Recording& recording,
                                  std::size_t subset_count, std::size_t nodes_per_subset, std::uint64_t seed) {
    if (subset_count == 0) {
        throw InvalidArgument("sweep needs at least one subset");
    }
    const auto& all = recording.training.front().layout.node_ids();
    if (nodes_per_subset < 2 || nodes_per_subset > all.size()) {
        throw InvalidArgument("subset size must lie in 2.." + std::to_string(all.size()));
    }
    std::mt19937_64 rng(derive_seed(seed, kSubsetStream));
    SweepResult result;
    result.frames_hash = recording.hash();
    for (std::size_t k = 0; k < subset_count; ++k) {
        std::vector<int> ids;
        if (nodes_per_subset == scenario.servo_sites.size()) {
            ids = coin_flip_subset(scenario, rng);
        } else {
            std::vector<int> pool = all;
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(nodes_per_subset);
            // keep recording order so subsets are canonical
            std::vector<int> ordered;
            for (int id : all) {
                if (std::find(pool.begin(), pool.end(), id) != pool.end()) {
                    ordered.push_back(id);
                }
            }
            ids = std::move(ordered);
        }
        const auto report = evaluate_recording(scenario, recording, ids, Variant::Standard);
        result.rmse.push_back(report.rmse);
        result.subsets.push_back(std::move(ids));
    }
    result.median = median(result.rmse);
    result.mean = std::accumulate(result.rmse.begin(), result.rmse.end(), 0.0) /
                  static_cast<double>(result.rmse.size());
    return result;
}

SweepResult standard_subset_sweep(const Scenario& scenario, std::size_t subset_count,
                                  std::size_t nodes_per_subset, std::uint64_t seed) {
    return standard_subset_sweep(scenario, record_standard(scenario), subset_count, nodes_per_subset, seed);
}

namespace {
double ratio(std::size_t n, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total);
}
} // namespace

double ObstructionSignRates::anti_negative_rate() const { return ratio(anti_negative, anti_total); }
double ObstructionSignRates::anti_positive_rate() const { return ratio(anti_positive, anti_total); }
double ObstructionSignRates::deep_negative_rate() const { return ratio(deep_negative, deep_total); }
double ObstructionSignRates::deep_positive_rate() const { return ratio(deep_positive, deep_total); }

ObstructionSignRates obstruction_sign_rates(const Scenario& scenario, std::size_t cycles_per_link) {
    if (cycles_per_link < 1) {
        throw InvalidArgument("need at least one cycle per obstruction");
    }
    TdmaNetwork network(scenario.servo_nodes_at_default(), scenario.environment, scenario.channels,
                        servo_stream_seed(scenario));
    const auto training = network.run_cycles(scenario.training_cycles);
    const BaselineTable baseline = train_baseline(training);
    const auto& layout = baseline.layout;
    std::vector<Point2D> antennas;
    for (const auto& n : network.nodes()) {
        antennas.push_back(n.antenna());
    }
    const auto distances = link_distances(layout, antennas);
    const FadeLevelTable fade = fade_level(baseline, fit_path_loss(baseline, distances), distances);

    ObstructionSignRates rates;
    for (std::size_t tx = 0; tx < layout.nodes(); ++tx) {
        for (std::size_t rx = 0; rx < layout.nodes(); ++rx) {
            if (tx == rx) {
                continue;
            }
            PersonModel person = scenario.person;
            person.position = 0.5 * (antennas[tx] + antennas[rx]);
            const auto frames = network.run_cycles(cycles_per_link, person);
            for (std::size_t c = 0; c < layout.channels().size(); ++c) {
                const std::size_t e = layout.entry(tx, rx, c);
                if (!baseline.mean[e] || !fade.level[e]) {
                    continue;
                }
                double sum = 0.0;
                std::size_t n = 0;
                for (const auto& f : frames) {
                    if (f.rssi[e]) {
                        sum += *f.rssi[e];
                        ++n;
                    }
                }
                if (n == 0) {
                    continue;
                }
                const double delta = sum / static_cast<double>(n) - *baseline.mean[e];
                const bool anti = fade.anti_fade(e);
                (anti ? rates.anti_total : rates.deep_total) += 1;
                if (delta < 0.0) {
                    (anti ? rates.anti_negative : rates.deep_negative) += 1;
                } else if (delta > 0.0) {
                    (anti ? rates.anti_positive : rates.deep_positive) += 1;
                }
            }
        }
    }
    return rates;
}

double rmse(std::span<const double> errors) {
    if (errors.empty()) {
        throw InvalidArgument("RMSE of an empty error list");
    }
    double sum = 0.0;
    for (double e : errors) {
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(errors.size()));
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw InvalidArgument("median of an empty list");
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<long>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<long>(mid));
    return (lower + upper) / 2.0;
}

MultinomialTestResult multinomial_bias_test(std::span<const std::size_t> counts, std::size_t trials,
                                            std::size_t categories, std::size_t threshold,
                                            std::size_t mc_samples, std::uint64_t seed) {
    if (categories == 0) {
        throw InvalidArgument("multinomial test needs at least one category");
    }
    if (mc_samples == 0) {
        throw InvalidArgument("multinomial test needs at least one Monte Carlo sample");
    }
    MultinomialTestResult result;
    result.samples = mc_samples;
    if (!counts.empty()) {
        if (counts.size() != categories) {
            throw InvalidArgument("observed histogram has " + std::to_string(counts.size()) +
                                  " categories, expected " + std::to_string(categories));
        }
        if (std::accumulate(counts.begin(), counts.end(), std::size_t{0}) != trials) {
            throw InvalidArgument("observed counts do not sum to the number of trials");
        }
        result.observed_max = *std::max_element(counts.begin(), counts.end());
        result.observed_meets_threshold = *result.observed_max >= threshold;
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, categories - 1);
    std::vector<std::size_t> bins(categories);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < mc_samples; ++s) {
        std::fill(bins.begin(), bins.end(), 0);
        std::size_t top = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            top = std::max(top, ++bins[pick(rng)]);
        }
        if (top >= threshold) {
            ++hits;
        }
    }
    result.probability = static_cast<double>(hits) / static_cast<double>(mc_samples);
    return result;
}

double improvement(double baseline_rmse, double improved_rmse) {
    if (!(baseline_rmse > 0.0)) {
        throw InvalidArgument("improvement needs a positive baseline RMSE");
    }
    return (baseline_rmse - improved_rmse) / baseline_rmse;
}

} // namespace rti
