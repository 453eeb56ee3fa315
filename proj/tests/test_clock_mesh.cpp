#include <doctest.h>

#include <random>

#include "andlantis/clock.hpp"
#include "andlantis/error.hpp"
#include "andlantis/mesh.hpp"
#include "harness.hpp"
#include "oracles.hpp"

using namespace andlantis;
using mesh::Mesh;
using mesh::NodeId;

TEST_CASE("clock fires in time order, ties by insertion") {
    VirtualClock c;
    std::vector<int> seen;
    c.schedule_at(5.0, [&] { seen.push_back(3); });
    c.schedule_at(1.0, [&] { seen.push_back(1); });
    c.schedule_at(1.0, [&] { seen.push_back(2); });
    c.run();
    CHECK(seen == std::vector<int>{1, 2, 3});
    CHECK(c.now() == 5.0);
    CHECK(c.idle());
}

TEST_CASE("clock cancel and run_until") {
    VirtualClock c;
    int hits = 0;
    auto id = c.schedule_at(2.0, [&] { ++hits; });
    c.schedule_at(3.0, [&] { ++hits; });
    c.schedule_at(9.0, [&] { ++hits; });
    c.cancel(id);
    c.run_until(4.0);
    CHECK(hits == 1);
    CHECK(c.now() == 4.0);
    CHECK(c.pending() == 1);
    // past times clamp to now
    c.schedule_at(1.0, [&] { hits += 10; });
    c.step();
    CHECK(hits == 11);
    CHECK(c.now() == 4.0);
}

TEST_CASE("membership basics") {
    VirtualClock c;
    Mesh m(c, {});
    CHECK(m.join(harness::node(1)) == mesh::MembershipAck::Joined);
    CHECK(m.members() == std::vector<NodeId>{NodeId{1}});
    CHECK(m.join(harness::node(1)) == mesh::MembershipAck::AlreadyMember);
    CHECK(m.leave(NodeId{1}) == mesh::MembershipAck::Left);
    CHECK(m.leave(NodeId{1}) == mesh::MembershipAck::NotMember);
    CHECK(m.size() == 0);
    CHECK(m.join(harness::node(1)) == mesh::MembershipAck::Joined);
    CHECK(m.members() == std::vector<NodeId>{NodeId{1}});
    CHECK(m.incarnation(NodeId{1}) == 2);
}

TEST_CASE("200 joins, 12 leaves -> 188 members and 188 responses") {
    VirtualClock c;
    Mesh m(c, {});
    for (std::uint32_t i = 1; i <= 200; ++i) {
        m.join(harness::node(i));
    }
    for (std::uint32_t i = 1; i <= 12; ++i) {
        m.leave(NodeId{i * 16});
    }
    CHECK(m.size() == 188);
    auto stats = m.broadcast_stats(1.0);
    CHECK(stats.size() == 188);
    CHECK(std::is_sorted(stats.begin(), stats.end(),
                         [](const auto &a, const auto &b) { return a.node < b.node; }));
}

TEST_CASE("broadcast drops slow nodes and nodes leaving mid-broadcast") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        VirtualClock c;
        Mesh m(c, {});
        const int n = 1 + static_cast<int>(rng() % 12);
        const double timeout = 1.0;
        std::set<std::uint32_t> expect;
        for (int i = 1; i <= n; ++i) {
            const auto id = static_cast<std::uint32_t>(i);
            m.join(harness::node(id));
            const double lat = static_cast<double>(rng() % 2000) / 1000.0;
            m.set_response_latency(NodeId{id}, lat);
            bool leaves = rng() % 4 == 0;
            if (leaves) {
                m.schedule_leave(NodeId{id}, lat / 2.0);
            }
            if (lat <= timeout && !leaves) {
                expect.insert(id);
            }
        }
        std::set<std::uint32_t> got;
        for (const auto &s : m.broadcast_stats(timeout)) {
            got.insert(s.node.value);
        }
        CHECK(got == expect);
    }
}

TEST_CASE("transfer duration arithmetic") {
    VirtualClock c;
    mesh::TransportConfig tc;
    tc.latency_s = 0.0;
    Mesh m0(c, tc);
    CHECK(m0.transfer_duration(0.0) == 0.0);
    tc.latency_s = 0.1;
    tc.head_bandwidth_mbps = 8.0;
    Mesh m1(c, tc);
    CHECK(m1.transfer_duration(1.0) == doctest::Approx(1.1));
}

TEST_CASE("head link is FIFO") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        VirtualClock c;
        mesh::TransportConfig tc;
        tc.head_bandwidth_mbps = 100.0;
        Mesh m(c, tc);
        m.join(harness::node(1));
        m.join(harness::node(2));
        std::vector<std::pair<double, double>> req;
        std::vector<double> got;
        double t = 0.0;
        for (int i = 0; i < 20; ++i) {
            t += static_cast<double>(rng() % 100) / 50.0;
            const double mb = 1.0 + static_cast<double>(rng() % 40);
            c.schedule_at(t, [&, mb, i] {
                auto tr = m.transfer(mb, i % 2 ? mesh::kHeadNode : NodeId{1}, i % 2 ? NodeId{2} : mesh::kHeadNode);
                got.push_back(tr.completed_at_s);
            });
            req.emplace_back(t, mb * 8.0 / 100.0);
        }
        c.run();
        auto want = oracle::fifo_link(req);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]));
        }
    }
    // two equal transfers at once: the second finishes at twice the single duration
    VirtualClock c;
    Mesh m(c, {});
    m.join(harness::node(1));
    const double d = m.transfer_duration(15.0);
    m.transfer(15.0, mesh::kHeadNode, NodeId{1});
    auto second = m.transfer(15.0, mesh::kHeadNode, NodeId{1});
    CHECK(second.completed_at_s == doctest::Approx(2 * d));
    CHECK(m.head_busy_s() == doctest::Approx(2 * d));
}

TEST_CASE("transfer to a dead node throws") {
    VirtualClock c;
    Mesh m(c, {});
    CHECK_THROWS_AS(m.transfer(1.0, mesh::kHeadNode, NodeId{4}), TransferError);
}

TEST_CASE("slot accounting keyed by incarnation") {
    VirtualClock c;
    Mesh m(c, {});
    m.join(harness::node(1, 3, 4096));
    CHECK(m.reserve_slot(NodeId{1}, 1024));
    auto s = *m.stats(NodeId{1});
    CHECK(s.active_vms == 1);
    CHECK(s.ram_free_mb == 3072);
    CHECK(s.load_avg == doctest::Approx(mesh::kLoadPerVm));
    const auto inc = m.incarnation(NodeId{1});
    m.leave(NodeId{1});
    m.join(harness::node(1, 3, 4096));
    m.release_slot(NodeId{1}, inc, 1024); // old incarnation: no-op
    CHECK(m.stats(NodeId{1})->active_vms == 0);
    CHECK(m.stats(NodeId{1})->ram_free_mb == 4096);
}

TEST_CASE("message log replays byte-identically") {
    auto run = [] {
        VirtualClock c;
        mesh::TransportConfig tc;
        tc.per_job_transfer_mb = 30.0;
        Mesh m(c, tc);
        for (std::uint32_t i = 1; i <= 4; ++i) {
            m.join(harness::node(i));
        }
        m.schedule_leave(NodeId{3}, 5.0);
        m.broadcast_stats(1.0);
        c.run_until(6.0);
        m.broadcast_stats(1.0);
        m.transfer(15.0, mesh::kHeadNode, NodeId{2});
        return m.serialize_log();
    };
    CHECK(run() == run());
    CHECK_FALSE(run().empty());
}
