#pragma once

#include "rti/channel.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace rti {

/// Indexing of directed link × channel entries for an ordered node list.
///
/// Link l enumerates ordered pairs (tx, rx), tx != rx, tx-major in node order;
/// entry e = l * |C| + channel index. L = N (N − 1).
class LinkLayout {
public:
    LinkLayout() = default;
    LinkLayout(std::vector<int> node_ids, std::vector<int> channels);

    const std::vector<int>& node_ids() const { return node_ids_; }
    const std::vector<int>& channels() const { return channels_; }
    std::size_t nodes() const { return node_ids_.size(); }
    std::size_t links() const { return nodes() * (nodes() - 1); }
    std::size_t entries() const { return links() * channels_.size(); }

    std::size_t link_index(std::size_t tx, std::size_t rx) const;
    std::size_t entry(std::size_t tx, std::size_t rx, std::size_t channel_index) const {
        return link_index(tx, rx) * channels_.size() + channel_index;
    }
    std::size_t tx_of(std::size_t link) const { return link / (nodes() - 1); }
    std::size_t rx_of(std::size_t link) const;

    /// Position of node id in the node list. Throws InvalidArgument for unknown ids.
    std::size_t node_index(int id) const;
    std::size_t channel_index(int channel) const;

    friend bool operator==(const LinkLayout&, const LinkLayout&) = default;

private:
    std::vector<int> node_ids_;
    std::vector<int> channels_;
};

/// One TDMA cycle worth of directed link × channel RSS samples.
struct MeasurementFrame {
    std::int64_t cycle = 0;
    LinkLayout layout;
    std::vector<int> positions;                ///< servo stop per node, in layout order
    std::vector<std::optional<double>> rssi;   ///< dBm per entry; nullopt = packet lost

    std::optional<double> sample(int tx_id, int rx_id, int channel) const;

    /// Restriction to a subset of nodes (in the given order), same channels.
    MeasurementFrame subset(const std::vector<int>& node_ids) const;
};

struct RotationCommand {
    int node_id = 0;
    int position = 1;
};

/// Samples every directed pair on every channel at the nodes' current antenna positions.
/// A pending command rotates the addressed node after the frame (effective next cycle).
/// Throws InvalidArgument for < 2 nodes, duplicate ids or a command to an unknown node.
MeasurementFrame run_tdma_cycle(std::vector<NodeState>& nodes, const Environment& env,
                                const PersonModel* person, const ChannelSet& channels,
                                std::optional<RotationCommand> pending_command,
                                std::int64_t cycle, std::mt19937_64& rng);

/// Seed for the RNG stream of one cycle, derived from a base seed and a stream tag.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, std::uint64_t index = 0);

/// A deployed network stepping through TDMA cycles.
///
/// Every cycle draws from its own RNG stream seeded from (stream seed, cycle index),
/// so frame k is independent of how many frames were requested before it. Noise-free
/// link levels are cached while node positions and the person stay unchanged.
class TdmaNetwork {
public:
    TdmaNetwork(std::vector<NodeState> nodes, Environment env, ChannelSet channels,
                std::uint64_t stream_seed);

    MeasurementFrame run_cycle(const std::optional<PersonModel>& person = std::nullopt,
                               std::optional<RotationCommand> command = std::nullopt);

    std::vector<MeasurementFrame> run_cycles(std::size_t count,
                                             const std::optional<PersonModel>& person = std::nullopt);

    /// Issues a rotation through the command slot of one cycle, unless the node already
    /// rests at `position`. Returns the number of cycles spent (0 or 1).
    std::size_t rotate(int node_id, int position);

    const std::vector<NodeState>& nodes() const { return nodes_; }
    const NodeState& node(int id) const;
    std::vector<int> positions() const;
    const Environment& environment() const { return env_; }
    const ChannelSet& channels() const { return channels_; }
    std::int64_t cycles_elapsed() const { return cycle_; }
    LinkLayout layout() const;

private:
    void refresh_levels(const std::optional<PersonModel>& person);

    std::vector<NodeState> nodes_;
    Environment env_;
    ChannelSet channels_;
    std::uint64_t stream_seed_;
    std::int64_t cycle_ = 0;

    std::vector<double> levels_;
    std::vector<int> levels_positions_;
    std::optional<PersonModel> levels_person_;
    bool levels_valid_ = false;
};

} // namespace rti
