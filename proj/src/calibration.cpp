#include "rti/calibration.hpp"

#include "rti/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rti {

std::size_t CalibrationConfig::static_window_cycles() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_window_s / cycle_period_s - 1e-9)));
}

void CalibrationConfig::validate() const {
    if (samples_per_evaluation < 1) {
        throw InvalidArgument("calibration needs at least one sample per evaluation");
    }
    if (!(static_window_s > 0.0) || !(cycle_period_s > 0.0)) {
        throw InvalidArgument("calibration window and cycle period must be positive");
    }
    if (max_iterations < 1) {
        throw InvalidArgument("calibration needs at least one iteration");
    }
}

double mean_network_rss(std::span<const MeasurementFrame> frames) {
    const BaselineTable baseline = train_baseline(frames);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& m : baseline.mean) {
        if (m) {
            sum += *m;
            ++n;
        }
    }
    if (n == 0) {
        throw InvalidArgument("no valid RSS samples to average");
    }
    return sum / static_cast<double>(n);
}

double candidate_mean_rss(const BaselineTable& baseline, int platform_id, std::span<const int> deployed) {
    if (deployed.empty()) {
        throw InvalidArgument("the deployed set must not be empty");
    }
    const auto& layout = baseline.layout;
    const std::size_t p = layout.node_index(platform_id);
    double sum = 0.0;
    std::size_t pairs = 0;
    for (int id : deployed) {
        const std::size_t d = layout.node_index(id);
        for (std::size_t c = 0; c < layout.channels().size(); ++c) {
            const auto& out = baseline.mean[layout.entry(p, d, c)];
            const auto& back = baseline.mean[layout.entry(d, p, c)];
            if (out && back) {
                sum += *out + *back;
                ++pairs;
            }
        }
    }
    if (pairs == 0) {
        throw InvalidArgument("no platform-to-deployed link was measured");
    }
    return sum / static_cast<double>(pairs);
}

IncrementalResult incremental_calibrate(std::span<const Point2D> spots, const Environment& env,
                                        const ChannelSet& channels, const CalibrationConfig& config,
                                        std::uint64_t seed, double platform_radius) {
    config.validate();
    if (spots.size() < 2) {
        throw InvalidArgument("incremental calibration needs the first sensor and at least one spot");
    }
    constexpr int kPlatformIdBase = 100000;

    IncrementalResult result;
    result.placements.push_back(spots.front());

    for (std::size_t s = 1; s < spots.size(); ++s) {
        std::vector<NodeState> nodes;
        std::vector<int> deployed;
        for (std::size_t d = 0; d < result.placements.size(); ++d) {
            const int id = static_cast<int>(d) + 1;
            nodes.push_back({id, result.placements[d], 0.0, 1});
            deployed.push_back(id);
        }
        for (int p = 1; p <= kServoPositions; ++p) {
            nodes.push_back({kPlatformIdBase + p, spots[s], platform_radius, p});
        }
        TdmaNetwork network(std::move(nodes), env, channels, derive_seed(seed, 0x1c, s));
        const auto frames = network.run_cycles(config.static_window_cycles());
        result.cycles += network.cycles_elapsed();
        const BaselineTable baseline = train_baseline(frames);

        IncrementalSpot record;
        record.spot = spots[s];
        for (int p = 1; p <= kServoPositions; ++p) {
            record.candidate_rss[static_cast<std::size_t>(p - 1)] =
                candidate_mean_rss(baseline, kPlatformIdBase + p, deployed);
        }
        // max_element returns the first maximum, i.e. the lowest p on ties
        const auto best = std::max_element(record.candidate_rss.begin(), record.candidate_rss.end());
        record.selected = static_cast<int>(best - record.candidate_rss.begin()) + 1;
        record.placement = network.node(kPlatformIdBase + record.selected).antenna();
        result.placements.push_back(record.placement);
        result.spots.push_back(record);
    }
    return result;
}

CalibrationState network_calibrate(TdmaNetwork& network, const CalibrationConfig& config) {
    config.validate();
    for (const auto& n : network.nodes()) {
        if (n.position != 1) {
            throw InvalidArgument("network calibration starts with every servo at p = 1 (node " +
                                  std::to_string(n.id) + " is at p = " + std::to_string(n.position) + ")");
        }
    }
    std::vector<int> order;
    for (const auto& n : network.nodes()) {
        order.push_back(n.id);
    }
    std::sort(order.begin(), order.end());

    const std::int64_t start = network.cycles_elapsed();
    CalibrationState state;
    double incumbent = mean_network_rss(network.run_cycles(config.static_window_cycles()));
    state.history.push_back({0, incumbent});

    for (std::size_t iteration = 1; iteration <= config.max_iterations; ++iteration) {
        state.iterations = iteration;
        bool moved = false;
        for (int sensor : order) {
            const int original = network.node(sensor).position;
            std::array<double, kServoPositions> rss{};
            const std::size_t first_record = state.evaluations.size();
            for (int p = 1; p <= kServoPositions; ++p) {
                network.rotate(sensor, p);
                const auto frames = network.run_cycles(config.samples_per_evaluation);
                rss[static_cast<std::size_t>(p - 1)] = mean_network_rss(frames);
                state.evaluations.push_back({iteration, sensor, p, rss[static_cast<std::size_t>(p - 1)], false});
            }
            int best = original;
            for (int p = 1; p <= kServoPositions; ++p) {
                if (rss[static_cast<std::size_t>(p - 1)] > rss[static_cast<std::size_t>(best - 1)]) {
                    best = p;
                }
            }
            const double best_rss = rss[static_cast<std::size_t>(best - 1)];
            if (best != original && best_rss > incumbent) {
                network.rotate(sensor, best);
                incumbent = best_rss;
                state.history.push_back({iteration, incumbent});
                state.accepted_moves.push_back({sensor, original, best});
                state.evaluations[first_record + static_cast<std::size_t>(best - 1)].accepted = true;
                moved = true;
            } else {
                network.rotate(sensor, original);
            }
        }
        if (!moved) {
            state.converged = true;
            break;
        }
    }
    for (const auto& n : network.nodes()) {
        state.positions[n.id] = n.position;
    }
    state.cycles = network.cycles_elapsed() - start;
    return state;
}

std::array<std::size_t, kServoPositions> position_histogram(std::span<const CalibrationState> states) {
    if (states.empty()) {
        throw InvalidArgument("position histogram needs at least one calibration state");
    }
    std::array<std::size_t, kServoPositions> counts{};
    for (const auto& s : states) {
        for (const auto& [id, p] : s.positions) {
            if (p < 1 || p > kServoPositions) {
                throw InvalidArgument("servo position out of range for node " + std::to_string(id));
            }
            ++counts[static_cast<std::size_t>(p - 1)];
        }
    }
    return counts;
}

} // namespace rti
