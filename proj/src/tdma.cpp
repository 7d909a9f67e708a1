#include "rti/tdma.hpp"

#include "rti/error.hpp"

#include <algorithm>
#include <string>

namespace rti {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_nodes(const std::vector<NodeState>& nodes) {
    if (nodes.size() < 2) {
        throw InvalidArgument("a network needs at least 2 nodes");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            if (nodes[i].id == nodes[j].id) {
                throw InvalidArgument("duplicate node id " + std::to_string(nodes[i].id));
            }
        }
    }
}

LinkLayout layout_of(const std::vector<NodeState>& nodes, const ChannelSet& channels) {
    std::vector<int> ids;
    ids.reserve(nodes.size());
    for (const auto& n : nodes) {
        ids.push_back(n.id);
    }
    return LinkLayout(std::move(ids), channels.channels());
}

std::vector<double> noise_free_levels(const std::vector<NodeState>& nodes, const Environment& env,
                                      const PersonModel* person, const ChannelSet& channels) {
    const auto n = nodes.size();
    std::vector<Point2D> antennas;
    antennas.reserve(n);
    for (const auto& node : nodes) {
        antennas.push_back(node.antenna());
    }
    std::vector<double> levels;
    levels.reserve(n * (n - 1) * channels.size());
    for (std::size_t tx = 0; tx < n; ++tx) {
        for (std::size_t rx = 0; rx < n; ++rx) {
            if (tx == rx) {
                continue;
            }
            for (int c : channels) {
                levels.push_back(mean_rss_dbm(env, antennas[tx], antennas[rx], c, person));
            }
        }
    }
    return levels;
}

// Draw order is fixed: per entry, one gaussian (if noisy) then one uniform (if lossy).
std::vector<std::optional<double>> sample_levels(const std::vector<double>& levels,
                                                 const Environment& env, std::mt19937_64& rng) {
    std::vector<std::optional<double>> out;
    out.reserve(levels.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (double level : levels) {
        const double v = measure_rss(env, level, rng);
        if (env.packet_loss > 0.0 && unit(rng) < env.packet_loss) {
            out.emplace_back(std::nullopt);
        } else {
            out.emplace_back(v);
        }
    }
    return out;
}

void apply_command(std::vector<NodeState>& nodes, const std::optional<RotationCommand>& command) {
    if (!command) {
        return;
    }
    auto it = std::find_if(nodes.begin(), nodes.end(),
                           [&](const NodeState& n) { return n.id == command->node_id; });
    if (it == nodes.end()) {
        throw InvalidArgument("rotation command for unknown node " + std::to_string(command->node_id));
    }
    // validates the stop index
    (void)antenna_position(*it, command->position);
    it->position = command->position;
}

std::vector<int> positions_of(const std::vector<NodeState>& nodes) {
    std::vector<int> p;
    p.reserve(nodes.size());
    for (const auto& n : nodes) {
        p.push_back(n.position);
    }
    return p;
}

bool same_person(const std::optional<PersonModel>& a, const std::optional<PersonModel>& b) {
    if (a.has_value() != b.has_value()) {
        return false;
    }
    if (!a) {
        return true;
    }
    return a->position == b->position && a->body_radius == b->body_radius &&
           a->path_attenuation_db == b->path_attenuation_db;
}

} // namespace

LinkLayout::LinkLayout(std::vector<int> node_ids, std::vector<int> channels)
    : node_ids_(std::move(node_ids)), channels_(std::move(channels)) {
    if (node_ids_.size() < 2) {
        throw InvalidArgument("a link layout needs at least 2 nodes");
    }
    if (channels_.empty()) {
        throw InvalidArgument("a link layout needs at least 1 channel");
    }
}

std::size_t LinkLayout::link_index(std::size_t tx, std::size_t rx) const {
    if (tx == rx || tx >= nodes() || rx >= nodes()) {
        throw InvalidArgument("invalid directed link");
    }
    return tx * (nodes() - 1) + (rx < tx ? rx : rx - 1);
}

std::size_t LinkLayout::rx_of(std::size_t link) const {
    const std::size_t tx = tx_of(link);
    const std::size_t r = link % (nodes() - 1);
    return r < tx ? r : r + 1;
}

std::size_t LinkLayout::node_index(int id) const {
    auto it = std::find(node_ids_.begin(), node_ids_.end(), id);
    if (it == node_ids_.end()) {
        throw InvalidArgument("unknown node id " + std::to_string(id));
    }
    return static_cast<std::size_t>(it - node_ids_.begin());
}

std::size_t LinkLayout::channel_index(int channel) const {
    auto it = std::find(channels_.begin(), channels_.end(), channel);
    if (it == channels_.end()) {
        throw InvalidArgument("channel " + std::to_string(channel) + " not in layout");
    }
    return static_cast<std::size_t>(it - channels_.begin());
}

std::optional<double> MeasurementFrame::sample(int tx_id, int rx_id, int channel) const {
    return rssi.at(layout.entry(layout.node_index(tx_id), layout.node_index(rx_id),
                                layout.channel_index(channel)));
}

MeasurementFrame MeasurementFrame::subset(const std::vector<int>& node_ids) const {
    MeasurementFrame out;
    out.cycle = cycle;
    out.layout = LinkLayout(node_ids, layout.channels());
    std::vector<std::size_t> src;
    src.reserve(node_ids.size());
    for (int id : node_ids) {
        src.push_back(layout.node_index(id));
        out.positions.push_back(positions.at(src.back()));
    }
    const std::size_t nc = layout.channels().size();
    out.rssi.reserve(out.layout.entries());
    for (std::size_t tx = 0; tx < src.size(); ++tx) {
        for (std::size_t rx = 0; rx < src.size(); ++rx) {
            if (tx == rx) {
                continue;
            }
            for (std::size_t c = 0; c < nc; ++c) {
                out.rssi.push_back(rssi[layout.entry(src[tx], src[rx], c)]);
            }
        }
    }
    return out;
}

MeasurementFrame run_tdma_cycle(std::vector<NodeState>& nodes, const Environment& env,
                                const PersonModel* person, const ChannelSet& channels,
                                std::optional<RotationCommand> pending_command,
                                std::int64_t cycle, std::mt19937_64& rng) {
    check_nodes(nodes);
    if (person != nullptr && !env.room.contains(person->position)) {
        throw InvalidArgument("person outside room");
    }
    if (pending_command) {
        const bool known = std::any_of(nodes.begin(), nodes.end(), [&](const NodeState& n) {
            return n.id == pending_command->node_id;
        });
        if (!known) {
            throw InvalidArgument("rotation command for unknown node " +
                                  std::to_string(pending_command->node_id));
        }
    }
    MeasurementFrame frame;
    frame.cycle = cycle;
    frame.layout = layout_of(nodes, channels);
    frame.positions = positions_of(nodes);
    frame.rssi = sample_levels(noise_free_levels(nodes, env, person, channels), env, rng);
    apply_command(nodes, pending_command);
    return frame;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(base) ^ tag) ^ index);
}

TdmaNetwork::TdmaNetwork(std::vector<NodeState> nodes, Environment env, ChannelSet channels,
                         std::uint64_t stream_seed)
    : nodes_(std::move(nodes)), env_(std::move(env)), channels_(std::move(channels)),
      stream_seed_(stream_seed) {
    check_nodes(nodes_);
    env_.validate();
    for (const auto& n : nodes_) {
        (void)antenna_position(n, n.position);
    }
}

void TdmaNetwork::refresh_levels(const std::optional<PersonModel>& person) {
    auto pos = positions_of(nodes_);
    if (levels_valid_ && pos == levels_positions_ && same_person(person, levels_person_)) {
        return;
    }
    levels_ = noise_free_levels(nodes_, env_, person ? &*person : nullptr, channels_);
    levels_positions_ = std::move(pos);
    levels_person_ = person;
    levels_valid_ = true;
}

MeasurementFrame TdmaNetwork::run_cycle(const std::optional<PersonModel>& person,
                                        std::optional<RotationCommand> command) {
    if (person && !env_.room.contains(person->position)) {
        throw InvalidArgument("person outside room");
    }
    if (command) {
        (void)node(command->node_id);
    }
    refresh_levels(person);
    std::mt19937_64 rng(derive_seed(stream_seed_, 0, static_cast<std::uint64_t>(cycle_)));
    MeasurementFrame frame;
    frame.cycle = cycle_;
    frame.layout = layout();
    frame.positions = positions_of(nodes_);
    frame.rssi = sample_levels(levels_, env_, rng);
    apply_command(nodes_, command);
    ++cycle_;
    return frame;
}

std::vector<MeasurementFrame> TdmaNetwork::run_cycles(std::size_t count,
                                                      const std::optional<PersonModel>& person) {
    std::vector<MeasurementFrame> frames;
    frames.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        frames.push_back(run_cycle(person));
    }
    return frames;
}

std::size_t TdmaNetwork::rotate(int node_id, int position) {
    if (node(node_id).position == position) {
        return 0;
    }
    (void)run_cycle(std::nullopt, RotationCommand{node_id, position});
    return 1;
}

const NodeState& TdmaNetwork::node(int id) const {
    auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const NodeState& n) { return n.id == id; });
    if (it == nodes_.end()) {
        throw InvalidArgument("unknown node id " + std::to_string(id));
    }
    return *it;
}

std::vector<int> TdmaNetwork::positions() const { return positions_of(nodes_); }

LinkLayout TdmaNetwork::layout() const { return layout_of(nodes_, channels_); }

} // namespace rti
