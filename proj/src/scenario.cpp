#include "rti/scenario.hpp"

#include "rti/error.hpp"
#include "rti/tdma.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rti {

namespace {

using nlohmann::json;

constexpr std::size_t kLabScatterers = 16;
constexpr double kLabAmplitudeMin = 0.1;
constexpr double kLabAmplitudeMax = 0.5;
constexpr std::uint64_t kScattererStream = 0x5ca7;

Point2D wall_tangent(const Rect& room, Point2D base) {
    // direction along the nearest wall
    const double dx = std::min(base.x - room.min.x, room.max.x - base.x);
    const double dy = std::min(base.y - room.min.y, room.max.y - base.y);
    return dx <= dy ? Point2D{0.0, 1.0} : Point2D{1.0, 0.0};
}

Point2D point_from(const json& j) {
    if (j.is_array()) {
        return {j.at(0).get<double>(), j.at(1).get<double>()};
    }
    return {j.at("x").get<double>(), j.at("y").get<double>()};
}

json point_to(Point2D p) { return json::array({p.x, p.y}); }

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

} // namespace

int standard_left_id(int servo_id) { return 2 * servo_id + 1000; }
int standard_right_id(int servo_id) { return 2 * servo_id + 1001; }

void Scenario::validate() const {
    environment.validate();
    if (servo_sites.size() < 2) {
        throw InvalidArgument("scenario needs at least 2 servo-node sites");
    }
    std::set<int> ids;
    for (const auto& s : servo_sites) {
        if (!ids.insert(s.id).second) {
            throw InvalidArgument("duplicate servo-node id " + std::to_string(s.id));
        }
        if (s.id < 0) {
            throw InvalidArgument("servo-node ids must be non-negative");
        }
    }
    if (!(servo_radius >= 0.0)) {
        throw InvalidArgument("servo radius must be non-negative");
    }
    if (!(standard_offset > 0.0) || standard_offset > 0.20 + 1e-12) {
        throw InvalidArgument("standard sensors must sit within 0.20 m of their servo-node");
    }
    for (const auto& n : servo_nodes_at_default()) {
        for (int p = 1; p <= kServoPositions; ++p) {
            if (!environment.room.contains(antenna_position(n, p))) {
                throw InvalidArgument("servo-node " + std::to_string(n.id) + " leaves the room at p = " +
                                      std::to_string(p));
            }
        }
    }
    for (const auto& n : standard_nodes()) {
        if (!environment.room.contains(n.base_center)) {
            throw InvalidArgument("standard sensor " + std::to_string(n.id) + " outside the room");
        }
    }
    for (const auto& p : ground_truth) {
        if (!environment.room.contains(p)) {
            throw InvalidArgument("ground-truth point outside the room");
        }
    }
    if (dwell_cycles < 1 || training_cycles < 1) {
        throw InvalidArgument("dwell and training need at least one cycle");
    }
    if (!(person.body_radius > 0.0) || !(person.path_attenuation_db >= 0.0)) {
        throw InvalidArgument("person needs a positive body radius and non-negative attenuation");
    }
    calibration.validate();
    rti.lambda.validate();
    rti.probability.validate();
    rti.regularization.validate();
    if (!(rti.voxel_size > 0.0)) {
        throw InvalidArgument("voxel size must be positive");
    }
}

std::vector<NodeState> Scenario::servo_nodes(const std::vector<int>& positions) const {
    if (positions.size() != servo_sites.size()) {
        throw InvalidArgument("expected one servo position per site");
    }
    std::vector<NodeState> nodes;
    nodes.reserve(servo_sites.size());
    for (std::size_t i = 0; i < servo_sites.size(); ++i) {
        NodeState n{servo_sites[i].id, servo_sites[i].base, servo_radius, positions[i]};
        (void)n.antenna();
        nodes.push_back(n);
    }
    return nodes;
}

std::vector<NodeState> Scenario::servo_nodes_at_default() const {
    return servo_nodes(std::vector<int>(servo_sites.size(), 1));
}

std::vector<NodeState> Scenario::standard_nodes() const {
    std::vector<NodeState> nodes;
    nodes.reserve(2 * servo_sites.size());
    for (const auto& s : servo_sites) {
        const Point2D t = wall_tangent(environment.room, s.base);
        nodes.push_back({standard_left_id(s.id), s.base - standard_offset * t, 0.0, 1});
        nodes.push_back({standard_right_id(s.id), s.base + standard_offset * t, 0.0, 1});
    }
    return nodes;
}

VoxelGrid Scenario::grid() const { return VoxelGrid::covering(environment.room, rti.voxel_size); }

Scenario lab_scenario(std::uint64_t seed) {
    Scenario s;
    s.name = "lab";
    s.seed = seed;
    s.environment.room = {{0.0, 0.0}, {6.0, 9.0}};
    s.environment.seed = seed;
    s.environment.scatterers = generate_scatterers(s.environment.room, kLabScatterers, kLabAmplitudeMin,
                                                   kLabAmplitudeMax, derive_seed(seed, kScattererStream));
    int id = 1;
    // 4 sites on each long wall, 3 on each short wall
    for (double y : {1.3, 3.43, 5.57, 7.7}) {
        s.servo_sites.push_back({id++, {0.3, y}});
    }
    for (double x : {1.5, 3.0, 4.5}) {
        s.servo_sites.push_back({id++, {x, 8.7}});
    }
    for (double y : {7.7, 5.57, 3.43, 1.3}) {
        s.servo_sites.push_back({id++, {5.7, y}});
    }
    for (double x : {4.5, 3.0, 1.5}) {
        s.servo_sites.push_back({id++, {x, 0.3}});
    }
    for (double y = 1.0; y <= 8.0 + 1e-9; y += 1.0) {
        for (double x : {1.2, 2.4, 3.6, 4.8}) {
            s.ground_truth.push_back({x, y});
        }
    }
    s.validate();
    return s;
}

Scenario scenario_from_json(const std::string& text, std::optional<std::uint64_t> seed_override) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("scenario is not valid JSON: ") + e.what());
    }
    try {
        Scenario s;
        read_opt(j, "name", s.name);
        read_opt(j, "seed", s.seed);
        if (seed_override) {
            s.seed = *seed_override;
        }
        auto& env = s.environment;
        env.seed = s.seed;
        const auto& room = j.at("room");
        env.room = {point_from(room.at("min")), point_from(room.at("max"))};
        if (j.contains("environment")) {
            const auto& e = j.at("environment");
            read_opt(e, "tx_power_dbm", env.tx_power_dbm);
            read_opt(e, "path_loss_exponent", env.path_loss_exponent);
            read_opt(e, "reference_loss_db", env.reference_loss_db);
            read_opt(e, "noise_sigma_db", env.noise_sigma_db);
            read_opt(e, "quantization_db", env.quantization_db);
            read_opt(e, "rx_floor_dbm", env.rx_floor_dbm);
            read_opt(e, "packet_loss", env.packet_loss);
        }
        if (j.contains("scatterers")) {
            const auto& sc = j.at("scatterers");
            if (sc.is_array()) {
                for (const auto& item : sc) {
                    env.scatterers.push_back({point_from(item), item.at("amplitude").get<double>()});
                }
            } else {
                std::size_t count = kLabScatterers;
                double amin = kLabAmplitudeMin;
                double amax = kLabAmplitudeMax;
                std::uint64_t field_seed = derive_seed(s.seed, kScattererStream);
                read_opt(sc, "count", count);
                read_opt(sc, "amplitude_min", amin);
                read_opt(sc, "amplitude_max", amax);
                read_opt(sc, "seed", field_seed);
                env.scatterers = generate_scatterers(env.room, count, amin, amax, field_seed);
            }
        }
        read_opt(j, "servo_radius", s.servo_radius);
        read_opt(j, "standard_offset", s.standard_offset);
        for (const auto& n : j.at("nodes")) {
            s.servo_sites.push_back({n.at("id").get<int>(), point_from(n)});
        }
        if (j.contains("channels")) {
            s.channels = ChannelSet(j.at("channels").get<std::vector<int>>());
        }
        if (j.contains("ground_truth")) {
            for (const auto& p : j.at("ground_truth")) {
                s.ground_truth.push_back(point_from(p));
            }
        }
        read_opt(j, "dwell_cycles", s.dwell_cycles);
        read_opt(j, "training_cycles", s.training_cycles);
        read_opt(j, "standard_subsets", s.standard_subsets);
        if (j.contains("person")) {
            read_opt(j.at("person"), "body_radius", s.person.body_radius);
            read_opt(j.at("person"), "path_attenuation_db", s.person.path_attenuation_db);
        }
        if (j.contains("calibration")) {
            const auto& c = j.at("calibration");
            read_opt(c, "samples_per_evaluation", s.calibration.samples_per_evaluation);
            read_opt(c, "static_window_s", s.calibration.static_window_s);
            read_opt(c, "cycle_period_s", s.calibration.cycle_period_s);
            read_opt(c, "max_iterations", s.calibration.max_iterations);
        }
        if (j.contains("rti")) {
            const auto& r = j.at("rti");
            read_opt(r, "voxel_size", s.rti.voxel_size);
            read_opt(r, "sigma_n2", s.rti.regularization.sigma_n2);
            read_opt(r, "sigma_x2", s.rti.regularization.sigma_x2);
            read_opt(r, "delta_c", s.rti.regularization.delta_c);
            read_opt(r, "lambda_min", s.rti.lambda.min);
            read_opt(r, "lambda_slope", s.rti.lambda.slope);
            read_opt(r, "lambda_max", s.rti.lambda.max);
            read_opt(r, "dead_band_db", s.rti.probability.dead_band);
            read_opt(r, "saturation_db", s.rti.probability.saturation);
        }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open scenario file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return scenario_from_json(buf.str(), seed_override);
}

std::string scenario_to_json(const Scenario& s) {
    const auto& env = s.environment;
    json j;
    j["name"] = s.name;
    j["seed"] = s.seed;
    j["room"] = {{"min", point_to(env.room.min)}, {"max", point_to(env.room.max)}};
    j["environment"] = {{"tx_power_dbm", env.tx_power_dbm},
                        {"path_loss_exponent", env.path_loss_exponent},
                        {"reference_loss_db", env.reference_loss_db},
                        {"noise_sigma_db", env.noise_sigma_db},
                        {"quantization_db", env.quantization_db},
                        {"rx_floor_dbm", env.rx_floor_dbm},
                        {"packet_loss", env.packet_loss}};
    json scatterers = json::array();
    for (const auto& sc : env.scatterers) {
        scatterers.push_back({{"x", sc.position.x}, {"y", sc.position.y}, {"amplitude", sc.amplitude}});
    }
    j["scatterers"] = scatterers;
    j["servo_radius"] = s.servo_radius;
    j["standard_offset"] = s.standard_offset;
    json nodes = json::array();
    for (const auto& site : s.servo_sites) {
        nodes.push_back({{"id", site.id}, {"x", site.base.x}, {"y", site.base.y}});
    }
    j["nodes"] = nodes;
    j["channels"] = s.channels.channels();
    json truth = json::array();
    for (const auto& p : s.ground_truth) {
        truth.push_back(point_to(p));
    }
    j["ground_truth"] = truth;
    j["dwell_cycles"] = s.dwell_cycles;
    j["training_cycles"] = s.training_cycles;
    j["standard_subsets"] = s.standard_subsets;
    j["person"] = {{"body_radius", s.person.body_radius}, {"path_attenuation_db", s.person.path_attenuation_db}};
    j["calibration"] = {{"samples_per_evaluation", s.calibration.samples_per_evaluation},
                        {"static_window_s", s.calibration.static_window_s},
                        {"cycle_period_s", s.calibration.cycle_period_s},
                        {"max_iterations", s.calibration.max_iterations}};
    j["rti"] = {{"voxel_size", s.rti.voxel_size},
                {"sigma_n2", s.rti.regularization.sigma_n2},
                {"sigma_x2", s.rti.regularization.sigma_x2},
                {"delta_c", s.rti.regularization.delta_c},
                {"lambda_min", s.rti.lambda.min},
                {"lambda_slope", s.rti.lambda.slope},
                {"lambda_max", s.rti.lambda.max},
                {"dead_band_db", s.rti.probability.dead_band},
                {"saturation_db", s.rti.probability.saturation}};
    return j.dump(2);
}

} // namespace rti
