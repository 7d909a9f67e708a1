#pragma once

#include "rti/calibration.hpp"
#include "rti/channel.hpp"
#include "rti/reconstruction.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rti {

/// RTI settings used by scenarios: the library defaults with σ_N² = 30, which keeps the
/// least-squares image from piling up on voxels crossed by a single obstructed link.
inline RtiConfig scenario_rti_defaults() {
    RtiConfig c;
    c.regularization.sigma_n2 = 30.0;
    return c;
}

struct ServoSite {
    int id = 0;
    Point2D base;
};

/// A deployment: room and RF world, servo-node sites with their flanking standard
/// sensors, ground-truth test points and every processing parameter.
struct Scenario {
    std::string name = "scenario";
    Environment environment;
    std::vector<ServoSite> servo_sites;
    double servo_radius = kDefaultServoRadius;
    double standard_offset = 0.10; ///< flanking standard sensors, one per side (<= 0.20)
    ChannelSet channels{{11, 16, 21, 26}};
    std::vector<Point2D> ground_truth;
    std::size_t dwell_cycles = 20;
    std::size_t training_cycles = 25;
    PersonModel person;
    CalibrationConfig calibration;
    RtiConfig rti = scenario_rti_defaults();
    std::size_t standard_subsets = 10;
    std::uint64_t seed = 1;

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;

    std::vector<NodeState> servo_nodes(const std::vector<int>& positions) const;
    std::vector<NodeState> servo_nodes_at_default() const;

    /// Two static sensors per servo site, at ±standard_offset along the wall tangent.
    /// Ids: 2·servo_id + 1000 (left) and 2·servo_id + 1001 (right).
    std::vector<NodeState> standard_nodes() const;

    VoxelGrid grid() const;
};

int standard_left_id(int servo_id);
int standard_right_id(int servo_id);

/// Built-in desk-scale deployment: a 6 m × 9 m room, 14 servo-nodes along the walls,
/// 32 ground-truth points and a random scatterer field drawn from `seed`.
Scenario lab_scenario(std::uint64_t seed);

/// Parses a scenario document. `seed_override` replaces the document's seed before any
/// seed-derived content (a scatterer field given by count) is generated.
Scenario scenario_from_json(const std::string& text, std::optional<std::uint64_t> seed_override = std::nullopt);
Scenario load_scenario(const std::filesystem::path& path,
                       std::optional<std::uint64_t> seed_override = std::nullopt);
std::string scenario_to_json(const Scenario& scenario);

} // namespace rti
