// Small scene builders shared by the unit tests.
#pragma once

#include "rti/channel.hpp"

#include <cmath>

namespace fixture {

/// Large noiseless room: no noise, no quantization, no practical floor.
inline rti::Environment quiet_env() {
    rti::Environment env;
    env.room = {{-10, -10}, {10, 10}};
    env.noise_sigma_db = 0.0;
    env.quantization_db = 0.0;
    env.rx_floor_dbm = -1000.0;
    return env;
}

inline double wavelength(int channel) { return rti::kSpeedOfLight / rti::channel_frequency(channel); }

/// Point on the perpendicular bisector of tx–rx whose bounce path is longer than the link by `extra`.
inline rti::Point2D bisector_point(rti::Point2D tx, rti::Point2D rx, double extra) {
    const double d = rti::distance(tx, rx);
    const double h = std::sqrt(std::pow((d + extra) / 2, 2) - std::pow(d / 2, 2));
    const rti::Point2D mid = 0.5 * (tx + rx);
    const rti::Point2D n{-(rx.y - tx.y) / d, (rx.x - tx.x) / d};
    return mid + h * n;
}

} // namespace fixture
