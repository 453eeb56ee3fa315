#include "andlantis/perfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>
#include <thread>

#include "andlantis/clock.hpp"
#include "andlantis/error.hpp"
#include "andlantis/mesh.hpp"

namespace andlantis::perf {

int ClusterSpec::live_nodes() const {
    int n = 0;
    for (int i = 1; i <= n_nodes; ++i) {
        n += node_failure_ids.contains(static_cast<std::uint32_t>(i)) ? 0 : 1;
    }
    return n;
}

void ClusterSpec::validate() const {
    if (n_nodes < 1) {
        throw ConfigError("cluster.n_nodes must be at least 1");
    }
    if (vms_per_node < 1) {
        throw ConfigError("cluster.vms_per_node must be at least 1");
    }
    if (node_ram_mb == 0) {
        throw ConfigError("cluster.node_ram_mb must be positive");
    }
}

void WorkloadSpec::validate() const {
    if (n_jobs < 0) {
        throw ConfigError("workload.n_jobs must be non-negative");
    }
    if (!(stimulate_s > 0.0)) {
        throw ConfigError("workload.stimulate_s must be positive");
    }
    if (fixed_wait_s < 0.0) {
        throw ConfigError("workload.fixed_wait_s must be non-negative");
    }
    if (wait_jitter_s < 0.0 || (wait_jitter_s > 0.0 && wait_jitter_s >= fixed_wait_s)) {
        throw ConfigError("workload.wait_jitter_s must be non-negative and below fixed_wait_s");
    }
    if (ram_req_mb == 0) {
        throw ConfigError("workload.ram_req_mb must be positive");
    }
    if (retry_limit < 0) {
        throw ConfigError("workload.retry_limit must be non-negative");
    }
}

void CommSpec::validate() const {
    if (per_job_comm_s < 0.0) {
        throw ConfigError("comm.per_job_comm_s must be non-negative");
    }
    if (!(head_bandwidth_mbps > 0.0)) {
        throw ConfigError("comm.head_bandwidth_mbps must be positive");
    }
}

double theoretical_runtime(double n_jobs, double n_nodes, double vms_per_node, double per_job_s) {
    if (!(n_jobs > 0.0) || !(per_job_s > 0.0)) {
        throw ConfigError("theoretical_runtime: n_jobs and per_job_s must be positive");
    }
    const double capacity = n_nodes * vms_per_node;
    if (!(capacity > 0.0)) {
        throw ConfigError("theoretical_runtime: zero capacity");
    }
    return n_jobs * per_job_s / capacity;
}

double wave_bound(int n_jobs, int slots, double per_job_s) {
    if (slots <= 0) {
        throw ConfigError("wave_bound: zero capacity");
    }
    return std::ceil(static_cast<double>(n_jobs) / slots) * per_job_s;
}

std::shared_ptr<const sandbox::BaselineImage> builtin_baseline() {
    static const auto image = [] {
        auto img = std::make_shared<sandbox::BaselineImage>();
        img->epoch_s = 1400000000;
        const forensics::FileOwner sys{1000, 1000, 0100644};
        img->fs.write("/system/build.prop", "ro.build.version.release=4.1.2\nro.product.model=sdk\n", sys,
                      img->epoch_s);
        img->fs.write("/system/etc/hosts", "127.0.0.1 localhost\n", sys, img->epoch_s);
        img->fs.write("/data/system/packages.list", "", sys, img->epoch_s);
        img->fs.add_dir("/data/local/tmp");
        return img;
    }();
    return image;
}

PerfReport simulate_run(const ClusterSpec &cluster, const WorkloadSpec &workload, const CommSpec &comm,
                        double ip_fail_prob, std::uint64_t seed, const SimOptions &opts) {
    cluster.validate();
    workload.validate();
    comm.validate();

    worker::WorkerSettings ws;
    ws.ip_fail_prob = ip_fail_prob;
    ws.seed = seed;
    ws.boot.boot_wait_s = workload.fixed_wait_s * opts.boot_share;
    ws.boot.ip_wait_s = workload.fixed_wait_s * opts.ip_share;
    ws.forensics_wait_s = workload.fixed_wait_s - ws.boot.boot_wait_s - ws.boot.ip_wait_s;
    ws.wait_jitter_s = workload.wait_jitter_s;
    ws.explore_budget = opts.explore_budget;
    const worker::AnalysisWorker worker(opts.baseline ? opts.baseline : builtin_baseline(), opts.apps, ws);

    VirtualClock clock;
    mesh::TransportConfig tc;
    tc.head_bandwidth_mbps = comm.head_bandwidth_mbps;
    tc.per_job_transfer_mb = comm.per_job_transfer_mb();
    mesh::Mesh mesh(clock, tc);
    mesh.set_message_logging(false);
    for (int i = 1; i <= cluster.n_nodes; ++i) {
        const auto id = static_cast<std::uint32_t>(i);
        if (cluster.node_failure_ids.contains(id)) {
            continue;
        }
        mesh::NodeStats s;
        s.node = mesh::NodeId{id};
        s.ram_total_mb = cluster.node_ram_mb;
        s.ram_free_mb = cluster.node_ram_mb;
        s.max_vms = cluster.vms_per_node;
        mesh.join(s);
    }

    sched::ScheduleConfig sc = opts.schedule;
    sc.max_vms_per_node = cluster.vms_per_node;
    sc.fixed_wait_s = workload.fixed_wait_s;
    sched::Scheduler scheduler(clock, mesh, worker, sc);

    // busy slot-time per node, measured from dispatch to the terminal or
    // retry transition
    std::map<std::uint32_t, double> busy;
    std::map<std::uint64_t, double> started;
    scheduler.set_observer([&](const sched::TransitionEvent &ev) {
        if (ev.new_state == sched::JobState::Dispatched) {
            started[ev.job.value] = ev.timestamp_s;
        } else if (ev.old_state != sched::JobState::Pending && ev.node &&
                   (ev.new_state == sched::JobState::Done || ev.new_state == sched::JobState::FailedAbandoned ||
                    ev.new_state == sched::JobState::FailedRetrying)) {
            busy[ev.node->value] += ev.timestamp_s - started[ev.job.value];
        }
    });

    std::vector<sched::Job> jobs;
    jobs.reserve(static_cast<std::size_t>(workload.n_jobs));
    for (int i = 1; i <= workload.n_jobs; ++i) {
        sched::Job j;
        j.id = sched::JobId{static_cast<std::uint64_t>(i)};
        j.app_ref = opts.app_ref;
        j.stimulate_s = workload.stimulate_s;
        j.ram_req_mb = workload.ram_req_mb;
        j.retry_limit = workload.retry_limit;
        jobs.push_back(std::move(j));
    }
    const auto results = scheduler.schedule_all(std::move(jobs));

    PerfReport r;
    r.n_nodes = cluster.n_nodes;
    r.wall_time_s = scheduler.last_terminal_at_s();
    r.comm_time_s = mesh.head_busy_s();
    r.comm_fraction = r.wall_time_s > 0.0 ? std::min(1.0, r.comm_time_s / r.wall_time_s) : 0.0;
    for (const auto &res : results) {
        (res.state == sched::JobState::Done ? r.jobs_done : r.jobs_failed) += 1;
    }
    r.jobs_dispatched = scheduler.landed();
    for (const auto &[node, t] : busy) {
        r.utilization[node] = r.wall_time_s > 0.0 ? t / (r.wall_time_s * cluster.vms_per_node) : 0.0;
    }
    return r;
}

std::vector<PerfReport> sweep(const std::vector<int> &node_counts, const ClusterSpec &cluster,
                              const WorkloadSpec &workload, const CommSpec &comm, double ip_fail_prob,
                              std::uint64_t seed, const SimOptions &opts, unsigned threads) {
    if (node_counts.empty()) {
        throw ConfigError("sweep: empty node list");
    }
    for (int n : node_counts) {
        if (n < 1) {
            throw ConfigError("sweep: node counts must be positive");
        }
    }
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    std::vector<PerfReport> out(node_counts.size());
    std::size_t next = 0;
    while (next < node_counts.size()) {
        std::vector<std::future<PerfReport>> batch;
        const std::size_t begin = next;
        for (; next < node_counts.size() && next - begin < threads; ++next) {
            ClusterSpec c = cluster;
            c.n_nodes = node_counts[next];
            batch.push_back(std::async(std::launch::async, [c, &workload, &comm, ip_fail_prob, seed, &opts] {
                return simulate_run(c, workload, comm, ip_fail_prob, seed, opts);
            }));
        }
        for (std::size_t i = 0; i < batch.size(); ++i) {
            out[begin + i] = batch[i].get();
        }
    }
    return out;
}

std::vector<SweepRow> speedup(const std::vector<PerfReport> &table, int baseline_count) {
    auto base = std::find_if(table.begin(), table.end(),
                             [&](const PerfReport &r) { return r.n_nodes == baseline_count; });
    if (base == table.end()) {
        throw ConfigError("speedup: baseline node count " + std::to_string(baseline_count) + " not in table");
    }
    std::vector<SweepRow> rows;
    for (const auto &r : table) {
        SweepRow row;
        row.report = r;
        row.ideal_speedup = r.n_nodes;
        row.speedup = r.wall_time_s > 0.0 ? baseline_count * base->wall_time_s / r.wall_time_s : 0.0;
        rows.push_back(row);
    }
    return rows;
}

void write_sweep_csv(std::ostream &out, const std::vector<SweepRow> &rows) {
    out << "n_nodes,wall_time_s,comm_time_s,comm_fraction,jobs_done,jobs_failed,speedup,ideal_speedup\n";
    char buf[256];
    for (const auto &row : rows) {
        const auto &r = row.report;
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%d,%d,%.6f,%.6f\n", r.n_nodes, r.wall_time_s,
                      r.comm_time_s, r.comm_fraction, r.jobs_done, r.jobs_failed, row.speedup, row.ideal_speedup);
        out << buf;
    }
}

std::string sweep_csv(const std::vector<SweepRow> &rows) {
    std::ostringstream os;
    write_sweep_csv(os, rows);
    return os.str();
}

} // namespace andlantis::perf
