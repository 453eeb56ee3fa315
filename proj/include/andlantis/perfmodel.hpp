#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "andlantis/scheduler.hpp"
#include "andlantis/worker.hpp"

namespace andlantis::perf {

struct ClusterSpec {
    int n_nodes = 188;
    int vms_per_node = 3;
    /// Node ids (1-based) that never join; they count toward n_nodes.
    std::set<std::uint32_t> node_failure_ids;
    std::uint64_t node_ram_mb = 12288;

    int live_nodes() const;
    void validate() const;
};

struct WorkloadSpec {
    int n_jobs = 1261;
    double stimulate_s = 300.0;
    double fixed_wait_s = 220.0;
    double wait_jitter_s = 30.0;
    std::uint64_t ram_req_mb = 1024;
    int retry_limit = 0;

    double per_job_service_s() const noexcept { return stimulate_s + fixed_wait_s; }
    void validate() const;
};

struct CommSpec {
    double per_job_comm_s = 0.24;
    double head_bandwidth_mbps = 1000.0;

    /// Payload that occupies the head link for per_job_comm_s, split evenly
    /// between dispatch and collection.
    double per_job_transfer_mb() const noexcept { return per_job_comm_s * head_bandwidth_mbps / 8.0; }
    void validate() const;
};

struct PerfReport {
    int n_nodes = 0;
    double wall_time_s = 0.0;
    double comm_time_s = 0.0;
    double comm_fraction = 0.0;
    int jobs_done = 0;
    int jobs_failed = 0;
    std::size_t jobs_dispatched = 0;
    std::map<std::uint32_t, double> utilization; // by node id, busy slot-time / (wall * vms)

    double throughput_per_hour() const noexcept {
        return wall_time_s > 0.0 ? 3600.0 * static_cast<double>(jobs_done + jobs_failed) / wall_time_s : 0.0;
    }
    bool operator==(const PerfReport &) const = default;
};

/// Everything besides cluster, workload and comm that a simulated run needs. The
/// defaults split fixed_wait_s 60/60/100 across boot, IP and forensics.
struct SimOptions {
    sched::ScheduleConfig schedule{};
    double boot_share = 60.0 / 220.0;
    double ip_share = 60.0 / 220.0;
    std::string app_ref = "empty";
    std::shared_ptr<const sandbox::BaselineImage> baseline; // null: a small built-in image
    std::map<std::string, worker::AppFixture> apps;
    std::size_t explore_budget = 100;
};

/// n_jobs * per_job_s / (n_nodes * vms_per_node).
double theoretical_runtime(double n_jobs, double n_nodes, double vms_per_node, double per_job_s);

/// Lower bound obtained by packing jobs into lockstep waves.
double wave_bound(int n_jobs, int slots, double per_job_s);

std::shared_ptr<const sandbox::BaselineImage> builtin_baseline();

PerfReport simulate_run(const ClusterSpec &cluster, const WorkloadSpec &workload, const CommSpec &comm,
                        double ip_fail_prob, std::uint64_t seed, const SimOptions &opts = {});

struct SweepRow {
    PerfReport report;
    double speedup = 0.0;
    double ideal_speedup = 0.0;
};

/// One simulate_run per node count, all on the same seed. Runs are
/// independent and execute on up to `threads` threads (0 = hardware).
std::vector<PerfReport> sweep(const std::vector<int> &node_counts, const ClusterSpec &cluster,
                              const WorkloadSpec &workload, const CommSpec &comm, double ip_fail_prob,
                              std::uint64_t seed, const SimOptions &opts = {}, unsigned threads = 0);

/// speedup(N) = baseline * wall(baseline) / wall(N); ideal(N) = N.
std::vector<SweepRow> speedup(const std::vector<PerfReport> &table, int baseline_count);

void write_sweep_csv(std::ostream &out, const std::vector<SweepRow> &rows);
std::string sweep_csv(const std::vector<SweepRow> &rows);

} // namespace andlantis::perf
