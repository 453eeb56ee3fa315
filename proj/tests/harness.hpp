#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "andlantis/clock.hpp"
#include "andlantis/config.hpp"
#include "andlantis/mesh.hpp"
#include "andlantis/perfmodel.hpp"
#include "andlantis/scheduler.hpp"
#include "andlantis/worker.hpp"

#ifndef ANDLANTIS_FIXTURE_DIR
#define ANDLANTIS_FIXTURE_DIR "fixtures"
#endif

namespace harness {

inline std::filesystem::path fixture(const std::string &rel) { return std::filesystem::path(ANDLANTIS_FIXTURE_DIR) / rel; }

inline andlantis::mesh::NodeStats node(std::uint32_t id, int max_vms = 3, std::uint64_t ram_mb = 12288) {
    andlantis::mesh::NodeStats s;
    s.node = andlantis::mesh::NodeId{id};
    s.ram_total_mb = ram_mb;
    s.ram_free_mb = ram_mb;
    s.max_vms = max_vms;
    return s;
}

inline std::map<std::string, andlantis::worker::AppFixture> malware_apps() {
    using andlantis::sandbox::BehaviorModel;
    std::map<std::string, andlantis::worker::AppFixture> apps;
    for (std::string name : {"droidkungfu_a", "anserver_a", "smshider"}) {
        andlantis::worker::AppFixture f;
        f.model = BehaviorModel::load(fixture("apps/" + name + ".json"));
        f.ui = andlantis::config::load_ui_graph(fixture("ui/" + name + ".ui.json"));
        apps.emplace(name, std::move(f));
    }
    return apps;
}

inline std::shared_ptr<const andlantis::sandbox::BaselineImage> baseline() {
    static const auto img = std::make_shared<const andlantis::sandbox::BaselineImage>(
        andlantis::sandbox::BaselineImage::load(fixture("baseline.json")));
    return img;
}

/// Clock, mesh, worker and scheduler wired together.
struct Cluster {
    andlantis::VirtualClock clock;
    andlantis::mesh::Mesh mesh;
    andlantis::worker::AnalysisWorker worker;
    andlantis::sched::Scheduler sched;

    Cluster(int nodes, andlantis::worker::WorkerSettings ws = {}, andlantis::sched::ScheduleConfig cfg = {},
            double per_job_transfer_mb = 30.0, int max_vms = 3)
        : mesh(clock, transport(per_job_transfer_mb)), worker(baseline(), malware_apps(), ws),
          sched(clock, mesh, worker, fit(cfg, ws, max_vms)) {
        for (int i = 1; i <= nodes; ++i) {
            mesh.join(node(static_cast<std::uint32_t>(i), max_vms));
        }
    }

    static andlantis::mesh::TransportConfig transport(double mb) {
        andlantis::mesh::TransportConfig tc;
        tc.per_job_transfer_mb = mb;
        return tc;
    }
    static andlantis::sched::ScheduleConfig fit(andlantis::sched::ScheduleConfig cfg,
                                                const andlantis::worker::WorkerSettings &ws, int max_vms) {
        cfg.fixed_wait_s = ws.fixed_wait_s();
        cfg.max_vms_per_node = max_vms;
        return cfg;
    }
};

inline andlantis::sched::Job job(std::uint64_t id, std::string app = "empty", int retry_limit = 0,
                                 double stimulate_s = 300.0) {
    andlantis::sched::Job j;
    j.id = andlantis::sched::JobId{id};
    j.app_ref = std::move(app);
    j.retry_limit = retry_limit;
    j.stimulate_s = stimulate_s;
    return j;
}

} // namespace harness
