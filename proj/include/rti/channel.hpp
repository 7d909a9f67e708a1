#pragma once

#include "rti/geometry.hpp"

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace rti {

/// Number of discrete servo stops, 45 degrees apart.
inline constexpr int kServoPositions = 8;
inline constexpr double kDefaultServoRadius = 0.10;
inline constexpr double kSpeedOfLight = 299'792'458.0;

struct Scatterer {
    Point2D position;
    double amplitude = 0.0; ///< reflection coefficient in [0, 1]
};

/// The synthetic RF world every link is evaluated in.
struct Environment {
    Rect room{{0.0, 0.0}, {6.0, 9.0}};
    std::vector<Scatterer> scatterers;
    double tx_power_dbm = 4.5;
    double path_loss_exponent = 2.2;
    double reference_loss_db = 40.0; ///< at 1 m, at the 2.44 GHz band center
    double noise_sigma_db = 0.5;
    double quantization_db = 1.0;
    double rx_floor_dbm = -100.0;
    double packet_loss = 0.0;
    std::uint64_t seed = 1;

    /// Throws InvalidArgument when an invariant is violated.
    void validate() const;
};

/// Uniformly placed scatterers with amplitudes uniform in [amplitude_min, amplitude_max].
std::vector<Scatterer> generate_scatterers(const Rect& room, std::size_t count, double amplitude_min,
                                           double amplitude_max, std::uint64_t seed);

struct NodeState {
    int id = 0;
    Point2D base_center;
    double servo_radius = kDefaultServoRadius;
    int position = 1; ///< servo stop in 1..8

    Point2D antenna() const;
};

/// Antenna coordinates of `node` with its servo at stop p (p = 1 along +x).
Point2D antenna_position(const NodeState& node, int p);

struct PersonModel {
    Point2D position;
    double body_radius = 0.15;
    double path_attenuation_db = 8.0;
};

/// Ordered subset of IEEE 802.15.4 channels 11..26.
class ChannelSet {
public:
    ChannelSet(std::vector<int> channels);

    const std::vector<int>& channels() const { return channels_; }
    std::size_t size() const { return channels_.size(); }
    int operator[](std::size_t i) const { return channels_[i]; }
    auto begin() const { return channels_.begin(); }
    auto end() const { return channels_.end(); }

private:
    std::vector<int> channels_;
};

/// Center frequency in Hz: 2405 MHz + 5 MHz · (c − 11).
double channel_frequency(int channel);

/// Complex baseband gain relative to 1 m: line of sight plus one bounce per scatterer,
/// each path following the log-distance amplitude law over its own length.
std::complex<double> channel_gain(const Environment& env, Point2D tx, Point2D rx, int channel,
                                  const PersonModel* person = nullptr);

/// Noise-free received power in dBm before quantization (may be -inf on a perfect null).
double mean_rss_dbm(const Environment& env, Point2D tx, Point2D rx, int channel,
                    const PersonModel* person = nullptr);

/// Applies gaussian noise, quantization and the receiver floor to a noise-free level.
double measure_rss(const Environment& env, double level_dbm, std::mt19937_64& rng);

/// One RSS sample in dBm. Throws DegenerateLink when tx == rx and InvalidArgument when
/// the person stands outside the room.
double simulate_rss(const Environment& env, Point2D tx, Point2D rx, int channel,
                    const PersonModel* person, std::mt19937_64& rng);

} // namespace rti
