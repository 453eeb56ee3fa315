#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "andlantis/mesh.hpp"

namespace andlantis::remote {

std::string stats_to_json(const mesh::NodeStats &s);
mesh::NodeStats stats_from_json(const std::string &text);

/// Current host resources from /proc, reported as `node`.
mesh::NodeStats local_stats(mesh::NodeId node, int max_vms);

/// "host:port" or ":port" (all interfaces).
std::pair<std::string, int> parse_listen_addr(const std::string &addr);

/// Real-transport node agent. Answers GET /stats with this host's NodeStats
/// and GET /health with "ok".
class NodeAgent {
public:
    NodeAgent(mesh::NodeId node, int max_vms);
    ~NodeAgent();

    /// Blocks until stop() is called. Returns false if the address is unusable.
    bool listen(const std::string &host, int port);
    /// Bind to an ephemeral port; returns it, or -1.
    int bind_any(const std::string &host);
    bool listen_after_bind();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Ask a node agent for its stats; nullopt on timeout or bad reply.
std::optional<mesh::NodeStats> fetch_node_stats(const std::string &host, int port, double timeout_s);

} // namespace andlantis::remote
