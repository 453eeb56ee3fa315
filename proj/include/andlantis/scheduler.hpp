#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "andlantis/clock.hpp"
#include "andlantis/forensics.hpp"
#include "andlantis/mesh.hpp"
#include "andlantis/sandbox.hpp"
#include "andlantis/uiexplore.hpp"
#include "andlantis/worker.hpp"

namespace andlantis::sched {

struct JobId {
    std::uint64_t value = 0;

    auto operator<=>(const JobId &) const = default;
    std::string str() const; // "job-00042"
    static JobId parse(std::string_view text);
};

struct Job {
    JobId id;
    std::string app_ref;
    double stimulate_s = 300.0;
    std::uint64_t ram_req_mb = 1024;
    int retry_limit = 0;

    void validate() const;
};

enum class JobState { Pending, Dispatched, Running, Collecting, Done, FailedAbandoned, FailedRetrying };

std::string to_string(JobState s);
JobState job_state_from_string(const std::string &s);
bool is_terminal(JobState s) noexcept;
bool is_valid_transition(JobState from, JobState to) noexcept;

enum class FailureKind {
    IpTimeout,    // emulator never got an address
    NodeCrash,    // node disappeared after the job landed
    NodeLost,     // node disappeared before the job landed
    TransferFail, // result could not be moved back to the head
    Deadline,     // global deadline expired
};

std::string to_string(FailureKind k);

enum class IpFailureSeen {
    AfterIpWait, // the node reports as soon as the IP wait expires
    AtStop,      // discovered when the window ends and the job is stopped
    AtCollect,   // discovered when collection returns no analysis
};

std::string to_string(IpFailureSeen s);
IpFailureSeen ip_failure_seen_from_string(const std::string &s);

struct ScheduleConfig {
    int max_vms_per_node = 3;
    double load_threshold = 4.0;
    double retry_timeout_s = 30.0;
    double broadcast_timeout_s = 1.0;
    /// Aggregate non-stimulation wait; must equal the worker's boot, IP and
    /// forensics waits combined.
    double fixed_wait_s = 220.0;
    double global_deadline_s = 7.0 * 86400.0;
    /// Also run a pass whenever a slot frees up, instead of only on the
    /// retry timer.
    bool wake_on_completion = true;
    /// When the head finds out that a job's emulator never got an address.
    IpFailureSeen ip_failure_seen = IpFailureSeen::AtCollect;

    void validate() const;
};

struct PhaseTimings {
    double queued_s = 0.0;
    double transfer_in_s = 0.0;
    double boot_s = 0.0;
    double stimulate_s = 0.0;
    double forensics_s = 0.0;
    double transfer_out_s = 0.0;

    double service_s() const noexcept { return boot_s + stimulate_s + forensics_s; }
};

struct JobResult {
    JobId job_id;
    JobState state = JobState::Pending;
    std::optional<mesh::NodeId> node;
    int attempts = 0;
    std::optional<FailureKind> failure;
    forensics::FsDiff fs_diff;
    forensics::ArtifactStore artifacts;
    std::vector<sandbox::NetLogEntry> net_log;
    ui::InteractionRecord interaction_record;
    bool root_flag = false;
    bool crashed = false;
    PhaseTimings timings;
    double finished_at_s = 0.0;
};

struct TransitionEvent {
    JobId job;
    JobState old_state;
    JobState new_state;
    double timestamp_s = 0.0;
    std::optional<mesh::NodeId> node;
};

/// One NDJSON line (no trailing newline).
std::string to_ndjson(const TransitionEvent &e);
TransitionEvent transition_from_ndjson(const std::string &line);

struct DispatchAck {
    bool accepted = false;
    double arrives_at_s = 0.0;
};

/// Nodes passing all three predicates, ordered by NodeId.
std::vector<mesh::NodeId> build_ready_queue(std::span<const mesh::NodeStats> stats, const Job &job,
                                            const ScheduleConfig &cfg);

/// Head-node scheduler. Runs entirely on the virtual clock: every state
/// change happens inside a clock callback, so the core is single-threaded
/// even when sandbox runs are farmed out to a RunPool.
class Scheduler {
public:
    using Observer = std::function<void(const TransitionEvent &)>;

    Scheduler(VirtualClock &clock, mesh::Mesh &mesh, const worker::AnalysisWorker &worker, ScheduleConfig cfg,
              worker::RunPool *pool = nullptr);

    void submit(Job job);
    /// Broadcast, queue, assign one job per queued node; repeat until no
    /// pending job or no eligible node is left.
    void run_pass();
    DispatchAck dispatch(JobId job, mesh::NodeId node);
    void stop_and_collect(JobId job);
    JobState on_failure(JobId job, FailureKind cause);

    /// Submit, drive the clock until every job is terminal, return results
    /// in submission order.
    std::vector<JobResult> schedule_all(std::vector<Job> jobs);

    JobState state(JobId job) const;
    const JobResult *result(JobId job) const;
    std::map<JobState, std::size_t> state_counts() const;
    int slots_in_use(mesh::NodeId node) const;
    std::size_t submitted() const noexcept { return order_.size(); }
    std::size_t landed() const noexcept { return landed_; }
    std::size_t pending() const noexcept { return pending_.size(); }
    bool all_terminal() const;
    double last_terminal_at_s() const noexcept { return last_terminal_at_; }
    const std::vector<mesh::NodeId> &last_broadcast() const noexcept { return last_broadcast_; }
    const std::vector<TransitionEvent> &transitions() const noexcept { return log_; }
    std::string transition_log() const;
    void set_observer(Observer obs) { observer_ = std::move(obs); }
    const ScheduleConfig &config() const noexcept { return cfg_; }

private:
    struct Entry {
        Job job;
        JobState state = JobState::Pending;
        int attempt = 0;  // bumped on every dispatch; stale events compare against it
        int failures = 0; // failures that consume a retry
        std::optional<mesh::NodeId> node;
        std::uint64_t incarnation = 0;
        bool holds_slot = false;
        worker::BootPlan plan;
        std::optional<std::shared_future<worker::SandboxRun>> run;
        double submitted_at = 0.0;
        double dispatched_at = 0.0;
        double running_at = 0.0;
        double collecting_at = 0.0;
        PhaseTimings timings;
        std::optional<JobResult> result;
    };

    Entry &entry(JobId id);
    const Entry &entry(JobId id) const;
    void move(Entry &e, JobState to);
    void release(Entry &e);
    void requeue(Entry &e);
    void finish(Entry &e, JobState terminal, std::optional<FailureKind> cause);
    bool current(const Entry &e, int attempt, JobState expected) const;

    void on_arrival(JobId id, int attempt);
    void on_window_end(JobId id, int attempt);
    void on_ip_timeout(JobId id, int attempt);
    void on_forensics_done(JobId id, int attempt);
    void on_collected(JobId id, int attempt, double transfer_s);
    void on_deadline();

    void request_pass();
    void arm_retry();

    VirtualClock &clock_;
    mesh::Mesh &mesh_;
    const worker::AnalysisWorker &worker_;
    ScheduleConfig cfg_;
    worker::RunPool *pool_;
    worker::RunPool deferred_{0};

    std::map<JobId, Entry> jobs_;
    std::vector<JobId> order_;
    std::deque<JobId> pending_;
    std::map<std::pair<mesh::NodeId, std::uint64_t>, int> slots_;
    std::vector<mesh::NodeId> last_broadcast_;
    std::vector<TransitionEvent> log_;
    Observer observer_;
    std::optional<VirtualClock::EventId> pass_event_;
    std::optional<VirtualClock::EventId> retry_event_;
    std::optional<VirtualClock::EventId> deadline_event_;
    std::size_t terminal_ = 0;
    std::size_t landed_ = 0;
    double last_terminal_at_ = 0.0;
    bool in_pass_ = false;
};

} // namespace andlantis::sched
