#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "andlantis/clock.hpp"

namespace andlantis::mesh {

/// Opaque cluster node identifier. Worker ids start at 1; 0 is the head node.
struct NodeId {
    std::uint32_t value = 0;

    auto operator<=>(const NodeId &) const = default;
    std::string str() const;
};

inline constexpr NodeId kHeadNode{0};

struct NodeStats {
    NodeId node;
    std::uint64_t ram_total_mb = 0;
    std::uint64_t ram_free_mb = 0;
    double load_avg = 0.0;
    int active_vms = 0;
    int max_vms = 0;

    bool valid() const noexcept {
        return ram_free_mb <= ram_total_mb && max_vms >= 0 && active_vms >= 0 && active_vms <= max_vms &&
               load_avg >= 0.0;
    }
    bool operator==(const NodeStats &) const = default;
};

struct TransportConfig {
    double latency_s = 0.0;
    double head_bandwidth_mbps = 1000.0;
    double per_job_transfer_mb = 0.0; // APK in + results out

    void validate() const;
};

enum class MembershipAck { Joined, AlreadyMember, Left, NotMember };

struct Transfer {
    NodeId from;
    NodeId to;
    double payload_mb = 0.0;
    double requested_at_s = 0.0;
    double started_at_s = 0.0;
    double completed_at_s = 0.0;

    double duration_s() const noexcept { return completed_at_s - started_at_s; }
};

struct MessageEvent {
    double at_s = 0.0;
    std::string kind;
    NodeId from;
    NodeId to;
    double size_mb = 0.0;
};

/// Each running VM adds one runnable process to a node's load average.
inline constexpr double kLoadPerVm = 1.0;

/// Star-topology membership registry plus simulated transport. All
/// operations are serialized by an internal mutex; time comes from the
/// shared virtual clock.
class Mesh {
public:
    Mesh(VirtualClock &clock, TransportConfig cfg);

    MembershipAck join(const NodeStats &stats);
    MembershipAck leave(NodeId node);

    /// Scripted failure: the node goes silent at `at_s` (virtual time).
    void schedule_leave(NodeId node, double at_s);
    void schedule_join(const NodeStats &stats, double at_s);

    bool is_live(NodeId node) const;
    bool is_live(NodeId node, std::uint64_t incarnation) const;
    /// Bumped on every successful join; 0 when the node never joined.
    std::uint64_t incarnation(NodeId node) const;
    std::vector<NodeId> members() const;
    std::size_t size() const;

    void set_response_latency(NodeId node, double latency_s);

    /// One response per live node whose reply arrives within the timeout,
    /// sorted by NodeId. A node scheduled to leave before its reply would
    /// arrive is silent.
    std::vector<NodeStats> broadcast_stats(double timeout_s);

    /// Duration of an unqueued transfer: latency + payload * 8 / bandwidth.
    double transfer_duration(double payload_mb) const;

    /// Start a transfer now. Transfers touching the head node queue FIFO
    /// on the head link. Throws TransferError when an endpoint is not live.
    Transfer transfer(double payload_mb, NodeId from, NodeId to);

    /// Simulated node agent accounting: one slot per sandbox pair.
    bool reserve_slot(NodeId node, std::uint64_t ram_mb);
    void release_slot(NodeId node, std::uint64_t incarnation, std::uint64_t ram_mb);
    std::optional<NodeStats> stats(NodeId node) const;

    double head_busy_s() const;
    double head_free_at_s() const;
    std::vector<Transfer> head_transfers() const;
    std::vector<MessageEvent> message_log() const;
    /// Byte-stable rendering of the message log, for replay comparisons.
    std::string serialize_log() const;
    /// Large sweeps turn the message log off; transfers are still accounted.
    void set_message_logging(bool enabled);

    const TransportConfig &config() const noexcept { return cfg_; }
    VirtualClock &clock() noexcept { return clock_; }

private:
    struct Member {
        NodeStats stats;
        std::uint64_t incarnation = 0;
        std::optional<double> latency_s;
    };

    bool live_locked(NodeId node) const;
    void log_locked(std::string kind, NodeId from, NodeId to, double size_mb);

    VirtualClock &clock_;
    TransportConfig cfg_;
    mutable std::mutex mu_;
    std::map<NodeId, Member> members_;
    std::map<NodeId, std::uint64_t> incarnations_;
    std::map<NodeId, double> pending_leaves_;
    double head_free_at_ = 0.0;
    double head_busy_ = 0.0;
    std::vector<Transfer> head_transfers_;
    std::vector<MessageEvent> log_;
    bool logging_ = true;
};

} // namespace andlantis::mesh
