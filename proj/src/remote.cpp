#include "andlantis/remote.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "andlantis/error.hpp"

namespace andlantis::remote {

using nlohmann::json;

std::string stats_to_json(const mesh::NodeStats &s) {
    json j;
    j["node"] = s.node.value;
    j["ram_total_mb"] = s.ram_total_mb;
    j["ram_free_mb"] = s.ram_free_mb;
    j["load_avg"] = s.load_avg;
    j["active_vms"] = s.active_vms;
    j["max_vms"] = s.max_vms;
    return j.dump();
}

mesh::NodeStats stats_from_json(const std::string &text) {
    try {
        const auto j = json::parse(text);
        mesh::NodeStats s;
        s.node = mesh::NodeId{j.at("node").get<std::uint32_t>()};
        s.ram_total_mb = j.at("ram_total_mb").get<std::uint64_t>();
        s.ram_free_mb = j.at("ram_free_mb").get<std::uint64_t>();
        s.load_avg = j.at("load_avg").get<double>();
        s.active_vms = j.at("active_vms").get<int>();
        s.max_vms = j.at("max_vms").get<int>();
        return s;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("bad node stats: ") + e.what());
    }
}

mesh::NodeStats local_stats(mesh::NodeId node, int max_vms) {
    mesh::NodeStats s;
    s.node = node;
    s.max_vms = max_vms;
    std::ifstream mem("/proc/meminfo");
    std::string key;
    std::uint64_t kb = 0;
    std::string unit;
    while (mem >> key >> kb) {
        std::getline(mem, unit);
        if (key == "MemTotal:") {
            s.ram_total_mb = kb / 1024;
        } else if (key == "MemAvailable:") {
            s.ram_free_mb = kb / 1024;
        }
    }
    s.ram_free_mb = std::min(s.ram_free_mb, s.ram_total_mb);
    std::ifstream load("/proc/loadavg");
    load >> s.load_avg;
    if (!std::isfinite(s.load_avg) || s.load_avg < 0.0) {
        s.load_avg = 0.0;
    }
    return s;
}

std::pair<std::string, int> parse_listen_addr(const std::string &addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) {
        throw ConfigError("listen address must be host:port, got '" + addr + "'");
    }
    std::string host = addr.substr(0, colon);
    const std::string port_s = addr.substr(colon + 1);
    std::size_t used = 0;
    int port = -1;
    try {
        port = std::stoi(port_s, &used);
    } catch (const std::exception &) {
        used = 0;
    }
    if (used == 0 || used != port_s.size() || port < 0 || port > 65535) {
        throw ConfigError("bad port in listen address '" + addr + "'");
    }
    return {host.empty() ? "0.0.0.0" : host, port};
}

struct NodeAgent::Impl {
    mesh::NodeId node;
    int max_vms = 0;
    httplib::Server server;
};

NodeAgent::NodeAgent(mesh::NodeId node, int max_vms) : impl_(std::make_unique<Impl>()) {
    impl_->node = node;
    impl_->max_vms = max_vms;
    Impl *p = impl_.get();
    impl_->server.Get("/stats", [p](const httplib::Request &, httplib::Response &res) {
        res.set_content(stats_to_json(local_stats(p->node, p->max_vms)), "application/json");
    });
    impl_->server.Get("/health", [](const httplib::Request &, httplib::Response &res) {
        res.set_content("ok", "text/plain");
    });
}

NodeAgent::~NodeAgent() { stop(); }

bool NodeAgent::listen(const std::string &host, int port) { return impl_->server.listen(host, port); }

int NodeAgent::bind_any(const std::string &host) { return impl_->server.bind_to_any_port(host); }

bool NodeAgent::listen_after_bind() { return impl_->server.listen_after_bind(); }

void NodeAgent::stop() {
    if (impl_) {
        impl_->server.stop();
    }
}

std::optional<mesh::NodeStats> fetch_node_stats(const std::string &host, int port, double timeout_s) {
    httplib::Client client(host, port);
    const auto usec = static_cast<long>(timeout_s * 1e6);
    client.set_connection_timeout(usec / 1000000, usec % 1000000);
    client.set_read_timeout(usec / 1000000, usec % 1000000);
    auto res = client.Get("/stats");
    if (!res || res->status != 200) {
        return std::nullopt;
    }
    try {
        auto s = stats_from_json(res->body);
        if (!s.valid()) {
            return std::nullopt;
        }
        return s;
    } catch (const ConfigError &) {
        return std::nullopt;
    }
}

} // namespace andlantis::remote
