#include "andlantis/mesh.hpp"

#include <algorithm>
#include <cstdio>

#include "andlantis/error.hpp"

namespace andlantis::mesh {

std::string NodeId::str() const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "node-%03u", value);
    return buf;
}

void TransportConfig::validate() const {
    if (latency_s < 0.0 || per_job_transfer_mb < 0.0) {
        throw ConfigError("transport: latency_s and per_job_transfer_mb must be non-negative");
    }
    if (!(head_bandwidth_mbps > 0.0)) {
        throw ConfigError("transport: head_bandwidth_mbps must be positive");
    }
}

Mesh::Mesh(VirtualClock &clock, TransportConfig cfg) : clock_(clock), cfg_(cfg) { cfg_.validate(); }

MembershipAck Mesh::join(const NodeStats &stats) {
    if (stats.node == kHeadNode) {
        throw ContractViolation("node id 0 is reserved for the head node");
    }
    if (!stats.valid()) {
        throw ContractViolation("join: inconsistent stats for " + stats.node.str());
    }
    std::lock_guard lock(mu_);
    if (members_.contains(stats.node)) {
        return MembershipAck::AlreadyMember;
    }
    auto &inc = incarnations_[stats.node];
    ++inc;
    members_.emplace(stats.node, Member{stats, inc, std::nullopt});
    log_locked("join", stats.node, kHeadNode, 0.0);
    return MembershipAck::Joined;
}

MembershipAck Mesh::leave(NodeId node) {
    std::lock_guard lock(mu_);
    pending_leaves_.erase(node);
    if (members_.erase(node) == 0) {
        return MembershipAck::NotMember;
    }
    log_locked("leave", node, kHeadNode, 0.0);
    return MembershipAck::Left;
}

void Mesh::schedule_leave(NodeId node, double at_s) {
    {
        std::lock_guard lock(mu_);
        auto [it, inserted] = pending_leaves_.emplace(node, at_s);
        if (!inserted) {
            it->second = std::min(it->second, at_s);
        }
    }
    clock_.schedule_at(at_s, [this, node] { leave(node); });
}

void Mesh::schedule_join(const NodeStats &stats, double at_s) {
    clock_.schedule_at(at_s, [this, stats] { join(stats); });
}

bool Mesh::live_locked(NodeId node) const {
    if (node == kHeadNode) {
        return true;
    }
    return members_.contains(node);
}

bool Mesh::is_live(NodeId node) const {
    std::lock_guard lock(mu_);
    return live_locked(node);
}

bool Mesh::is_live(NodeId node, std::uint64_t incarnation) const {
    std::lock_guard lock(mu_);
    auto it = members_.find(node);
    return it != members_.end() && it->second.incarnation == incarnation;
}

std::uint64_t Mesh::incarnation(NodeId node) const {
    std::lock_guard lock(mu_);
    auto it = incarnations_.find(node);
    return it == incarnations_.end() ? 0 : it->second;
}

std::vector<NodeId> Mesh::members() const {
    std::lock_guard lock(mu_);
    std::vector<NodeId> out;
    out.reserve(members_.size());
    for (const auto &[id, m] : members_) {
        out.push_back(id);
    }
    return out;
}

std::size_t Mesh::size() const {
    std::lock_guard lock(mu_);
    return members_.size();
}

void Mesh::set_response_latency(NodeId node, double latency_s) {
    std::lock_guard lock(mu_);
    auto it = members_.find(node);
    if (it != members_.end()) {
        it->second.latency_s = latency_s;
    }
}

std::vector<NodeStats> Mesh::broadcast_stats(double timeout_s) {
    std::lock_guard lock(mu_);
    const double now = clock_.now();
    log_locked("stats_request", kHeadNode, kHeadNode, 0.0);
    std::vector<NodeStats> out;
    out.reserve(members_.size());
    for (const auto &[id, m] : members_) {
        const double latency = m.latency_s.value_or(cfg_.latency_s);
        if (latency > timeout_s) {
            continue;
        }
        auto leave = pending_leaves_.find(id);
        if (leave != pending_leaves_.end() && leave->second <= now + latency) {
            continue;
        }
        out.push_back(m.stats);
        log_locked("stats_response", id, kHeadNode, 0.0);
    }
    return out;
}

double Mesh::transfer_duration(double payload_mb) const {
    return cfg_.latency_s + payload_mb * 8.0 / cfg_.head_bandwidth_mbps;
}

Transfer Mesh::transfer(double payload_mb, NodeId from, NodeId to) {
    std::lock_guard lock(mu_);
    if (!live_locked(from) || !live_locked(to)) {
        throw TransferError("transfer " + from.str() + " -> " + to.str() + ": endpoint not live");
    }
    const double now = clock_.now();
    Transfer t{from, to, payload_mb, now, now, now};
    const double duration = transfer_duration(payload_mb);
    if (from == kHeadNode || to == kHeadNode) {
        t.started_at_s = std::max(now, head_free_at_);
        t.completed_at_s = t.started_at_s + duration;
        head_free_at_ = t.completed_at_s;
        head_busy_ += duration;
        head_transfers_.push_back(t);
    } else {
        t.completed_at_s = now + duration;
    }
    log_locked("transfer", from, to, payload_mb);
    return t;
}

bool Mesh::reserve_slot(NodeId node, std::uint64_t ram_mb) {
    std::lock_guard lock(mu_);
    auto it = members_.find(node);
    if (it == members_.end()) {
        return false;
    }
    auto &s = it->second.stats;
    s.active_vms += 1;
    s.ram_free_mb = s.ram_free_mb >= ram_mb ? s.ram_free_mb - ram_mb : 0;
    s.load_avg += kLoadPerVm;
    return true;
}

void Mesh::release_slot(NodeId node, std::uint64_t incarnation, std::uint64_t ram_mb) {
    std::lock_guard lock(mu_);
    auto it = members_.find(node);
    if (it == members_.end() || it->second.incarnation != incarnation) {
        return; // the machine that held the slot is gone
    }
    auto &s = it->second.stats;
    if (s.active_vms > 0) {
        s.active_vms -= 1;
        s.load_avg = std::max(0.0, s.load_avg - kLoadPerVm);
        s.ram_free_mb = std::min(s.ram_total_mb, s.ram_free_mb + ram_mb);
    }
}

std::optional<NodeStats> Mesh::stats(NodeId node) const {
    std::lock_guard lock(mu_);
    auto it = members_.find(node);
    if (it == members_.end()) {
        return std::nullopt;
    }
    return it->second.stats;
}

double Mesh::head_busy_s() const {
    std::lock_guard lock(mu_);
    return head_busy_;
}

double Mesh::head_free_at_s() const {
    std::lock_guard lock(mu_);
    return head_free_at_;
}

std::vector<Transfer> Mesh::head_transfers() const {
    std::lock_guard lock(mu_);
    return head_transfers_;
}

std::vector<MessageEvent> Mesh::message_log() const {
    std::lock_guard lock(mu_);
    return log_;
}

std::string Mesh::serialize_log() const {
    std::lock_guard lock(mu_);
    std::string out;
    char buf[160];
    for (const auto &e : log_) {
        std::snprintf(buf, sizeof buf, "%.9f %s %u %u %.6f\n", e.at_s, e.kind.c_str(), e.from.value, e.to.value,
                      e.size_mb);
        out += buf;
    }
    return out;
}

void Mesh::set_message_logging(bool enabled) {
    std::lock_guard lock(mu_);
    logging_ = enabled;
}

void Mesh::log_locked(std::string kind, NodeId from, NodeId to, double size_mb) {
    if (!logging_) {
        return;
    }
    log_.push_back(MessageEvent{clock_.now(), std::move(kind), from, to, size_mb});
}

} // namespace andlantis::mesh
