#include "rti/channel.hpp"

#include "rti/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace rti {

namespace {

constexpr double kBandCenterHz = 2.44e9;

double amplitude_at(double path_length, double exponent) {
    return std::pow(path_length, -exponent / 2.0);
}

} // namespace

void Environment::validate() const {
    if (!(room.width() > 0.0) || !(room.height() > 0.0)) {
        throw InvalidArgument("room must have positive extent");
    }
    for (const auto& s : scatterers) {
        if (s.amplitude < 0.0 || s.amplitude > 1.0) {
            throw InvalidArgument("scatterer amplitude must lie in [0, 1]");
        }
        if (!room.contains(s.position)) {
            throw InvalidArgument("scatterer outside room");
        }
    }
    if (noise_sigma_db < 0.0) {
        throw InvalidArgument("noise sigma must be non-negative");
    }
    if (quantization_db < 0.0) {
        throw InvalidArgument("quantization step must be non-negative");
    }
    if (packet_loss < 0.0 || packet_loss > 1.0) {
        throw InvalidArgument("packet loss must be a probability");
    }
}

std::vector<Scatterer> generate_scatterers(const Rect& room, std::size_t count, double amplitude_min,
                                           double amplitude_max, std::uint64_t seed) {
    if (amplitude_min < 0.0 || amplitude_max > 1.0 || amplitude_min > amplitude_max) {
        throw InvalidArgument("scatterer amplitude range must lie in [0, 1]");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(room.min.x, room.max.x);
    std::uniform_real_distribution<double> uy(room.min.y, room.max.y);
    std::uniform_real_distribution<double> ua(amplitude_min, amplitude_max);
    std::vector<Scatterer> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        out.push_back({{x, y}, ua(rng)});
    }
    return out;
}

Point2D NodeState::antenna() const { return antenna_position(*this, position); }

Point2D antenna_position(const NodeState& node, int p) {
    if (p < 1 || p > kServoPositions) {
        throw InvalidArgument("servo position must be in 1..8, got " + std::to_string(p));
    }
    // exact values on the axes keep p=1/3/5/7 free of sin/cos rounding
    static constexpr double kUnit[kServoPositions][2] = {
        {1.0, 0.0},
        {std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2},
        {0.0, 1.0},
        {-std::numbers::sqrt2 / 2, std::numbers::sqrt2 / 2},
        {-1.0, 0.0},
        {-std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2},
        {0.0, -1.0},
        {std::numbers::sqrt2 / 2, -std::numbers::sqrt2 / 2},
    };
    const auto& u = kUnit[p - 1];
    return {node.base_center.x + node.servo_radius * u[0],
            node.base_center.y + node.servo_radius * u[1]};
}

ChannelSet::ChannelSet(std::vector<int> channels) : channels_(std::move(channels)) {
    if (channels_.empty()) {
        throw InvalidArgument("channel set must not be empty");
    }
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        const int c = channels_[i];
        if (c < 11 || c > 26) {
            throw InvalidArgument("channel " + std::to_string(c) + " outside 11..26");
        }
        if (std::find(channels_.begin(), channels_.begin() + static_cast<long>(i), c) !=
            channels_.begin() + static_cast<long>(i)) {
            throw InvalidArgument("duplicate channel " + std::to_string(c));
        }
    }
}

double channel_frequency(int channel) {
    if (channel < 11 || channel > 26) {
        throw InvalidArgument("channel " + std::to_string(channel) + " outside 11..26");
    }
    return (2405.0 + 5.0 * (channel - 11)) * 1e6;
}

std::complex<double> channel_gain(const Environment& env, Point2D tx, Point2D rx, int channel,
                                  const PersonModel* person) {
    const double d = link_distance(tx, rx);
    const double k = 2.0 * std::numbers::pi * channel_frequency(channel) / kSpeedOfLight;
    const double eta = env.path_loss_exponent;

    double shadow = 1.0;
    double body = 0.0;
    if (person != nullptr) {
        shadow = std::pow(10.0, -person->path_attenuation_db / 20.0);
        body = person->body_radius;
    }
    const auto blocked = [&](Point2D a, Point2D b) {
        return person != nullptr && segment_distance(person->position, a, b) < body;
    };

    double g = amplitude_at(d, eta);
    if (blocked(tx, rx)) {
        g *= shadow;
    }
    std::complex<double> h = std::polar(g, -k * d);

    for (const auto& s : env.scatterers) {
        if (s.amplitude == 0.0) {
            continue;
        }
        const double path = distance(tx, s.position) + distance(s.position, rx);
        double a = s.amplitude * amplitude_at(path, eta);
        if (blocked(tx, s.position) || blocked(s.position, rx)) {
            a *= shadow;
        }
        h += std::polar(a, -k * path);
    }
    return h;
}

double mean_rss_dbm(const Environment& env, Point2D tx, Point2D rx, int channel,
                    const PersonModel* person) {
    const double magnitude = std::abs(channel_gain(env, tx, rx, channel, person));
    const double freq_loss = 20.0 * std::log10(channel_frequency(channel) / kBandCenterHz);
    if (magnitude == 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    return env.tx_power_dbm - env.reference_loss_db - freq_loss + 20.0 * std::log10(magnitude);
}

double measure_rss(const Environment& env, double level_dbm, std::mt19937_64& rng) {
    double v = level_dbm;
    if (env.noise_sigma_db > 0.0) {
        std::normal_distribution<double> noise(0.0, env.noise_sigma_db);
        v += noise(rng);
    }
    if (env.quantization_db > 0.0 && std::isfinite(v)) {
        v = std::round(v / env.quantization_db) * env.quantization_db;
    }
    return std::max(v, env.rx_floor_dbm);
}

double simulate_rss(const Environment& env, Point2D tx, Point2D rx, int channel,
                    const PersonModel* person, std::mt19937_64& rng) {
    if (person != nullptr && !env.room.contains(person->position)) {
        throw InvalidArgument("person outside room");
    }
    return measure_rss(env, mean_rss_dbm(env, tx, rx, channel, person), rng);
}

} // namespace rti
