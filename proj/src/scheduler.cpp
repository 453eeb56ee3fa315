#include "andlantis/scheduler.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "andlantis/error.hpp"

namespace andlantis::sched {

using mesh::kHeadNode;
using mesh::NodeId;

namespace {

constexpr double kWindowSlack = 1e-9;

} // namespace

std::string JobId::str() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "job-%05llu", static_cast<unsigned long long>(value));
    return buf;
}

JobId JobId::parse(std::string_view text) {
    constexpr std::string_view prefix = "job-";
    if (text.substr(0, prefix.size()) != prefix || text.size() == prefix.size()) {
        throw ConfigError("bad job id: '" + std::string(text) + "'");
    }
    std::uint64_t v = 0;
    const char *first = text.data() + prefix.size();
    const char *last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        throw ConfigError("bad job id: '" + std::string(text) + "'");
    }
    return JobId{v};
}

void Job::validate() const {
    if (!(stimulate_s > 0.0)) {
        throw ContractViolation("job " + id.str() + ": stimulate_s must be positive");
    }
    if (ram_req_mb == 0) {
        throw ContractViolation("job " + id.str() + ": ram_req_mb must be positive");
    }
    if (retry_limit < 0) {
        throw ContractViolation("job " + id.str() + ": retry_limit must be non-negative");
    }
}

std::string to_string(JobState s) {
    switch (s) {
    case JobState::Pending: return "PENDING";
    case JobState::Dispatched: return "DISPATCHED";
    case JobState::Running: return "RUNNING";
    case JobState::Collecting: return "COLLECTING";
    case JobState::Done: return "DONE";
    case JobState::FailedAbandoned: return "FAILED_ABANDONED";
    case JobState::FailedRetrying: return "FAILED_RETRYING";
    }
    return "?";
}

JobState job_state_from_string(const std::string &s) {
    for (auto st : {JobState::Pending, JobState::Dispatched, JobState::Running, JobState::Collecting, JobState::Done,
                    JobState::FailedAbandoned, JobState::FailedRetrying}) {
        if (to_string(st) == s) {
            return st;
        }
    }
    throw ConfigError("unknown job state '" + s + "'");
}

bool is_terminal(JobState s) noexcept { return s == JobState::Done || s == JobState::FailedAbandoned; }

bool is_valid_transition(JobState from, JobState to) noexcept {
    using S = JobState;
    switch (from) {
    case S::Pending:
        // abandonment from PENDING only happens at the global deadline
        return to == S::Dispatched || to == S::FailedAbandoned;
    case S::Dispatched:
        return to == S::Running || to == S::FailedRetrying || to == S::FailedAbandoned;
    case S::Running:
        return to == S::Collecting || to == S::FailedRetrying || to == S::FailedAbandoned;
    case S::Collecting:
        return to == S::Done || to == S::FailedRetrying || to == S::FailedAbandoned;
    case S::FailedRetrying:
        return to == S::Pending;
    case S::Done:
    case S::FailedAbandoned:
        return false;
    }
    return false;
}

std::string to_string(FailureKind k) {
    switch (k) {
    case FailureKind::IpTimeout: return "ip_timeout";
    case FailureKind::NodeCrash: return "node_crash";
    case FailureKind::NodeLost: return "node_lost";
    case FailureKind::TransferFail: return "transfer_failure";
    case FailureKind::Deadline: return "deadline";
    }
    return "?";
}

std::string to_string(IpFailureSeen s) {
    switch (s) {
    case IpFailureSeen::AfterIpWait: return "after_ip_wait";
    case IpFailureSeen::AtStop: return "at_stop";
    case IpFailureSeen::AtCollect: return "at_collect";
    }
    return "?";
}

IpFailureSeen ip_failure_seen_from_string(const std::string &s) {
    for (auto v : {IpFailureSeen::AfterIpWait, IpFailureSeen::AtStop, IpFailureSeen::AtCollect}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw ConfigError("unknown ip_failure_seen '" + s + "'");
}

void ScheduleConfig::validate() const {
    if (max_vms_per_node < 1) {
        throw ConfigError("max_vms_per_node must be at least 1");
    }
    if (load_threshold < 0.0 || retry_timeout_s < 0.0 || broadcast_timeout_s < 0.0 || fixed_wait_s < 0.0 ||
        global_deadline_s < 0.0) {
        throw ConfigError("schedule times and thresholds must be non-negative");
    }
    if (retry_timeout_s == 0.0) {
        // a zero timeout with no eligible node would spin forever at one instant
        throw ConfigError("retry_timeout_s must be positive");
    }
}

std::string to_ndjson(const TransitionEvent &e) {
    nlohmann::json j;
    j["job_id"] = e.job.str();
    j["old"] = to_string(e.old_state);
    j["new"] = to_string(e.new_state);
    j["timestamp_s"] = e.timestamp_s;
    j["node"] = e.node ? nlohmann::json(e.node->value) : nlohmann::json(nullptr);
    return j.dump();
}

TransitionEvent transition_from_ndjson(const std::string &line) {
    try {
        auto j = nlohmann::json::parse(line);
        TransitionEvent e;
        e.job = JobId::parse(j.at("job_id").get<std::string>());
        e.old_state = job_state_from_string(j.at("old").get<std::string>());
        e.new_state = job_state_from_string(j.at("new").get<std::string>());
        e.timestamp_s = j.at("timestamp_s").get<double>();
        if (!j.at("node").is_null()) {
            e.node = NodeId{j.at("node").get<std::uint32_t>()};
        }
        return e;
    } catch (const nlohmann::json::exception &ex) {
        throw ConfigError(std::string("bad transition line: ") + ex.what());
    }
}

std::vector<NodeId> build_ready_queue(std::span<const mesh::NodeStats> stats, const Job &job,
                                      const ScheduleConfig &cfg) {
    std::vector<NodeId> out;
    for (const auto &s : stats) {
        if (s.ram_free_mb >= job.ram_req_mb && s.load_avg < cfg.load_threshold &&
            s.active_vms < cfg.max_vms_per_node) {
            out.push_back(s.node);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Scheduler::Scheduler(VirtualClock &clock, mesh::Mesh &mesh, const worker::AnalysisWorker &worker,
                     ScheduleConfig cfg, worker::RunPool *pool)
    : clock_(clock), mesh_(mesh), worker_(worker), cfg_(cfg), pool_(pool) {
    cfg_.validate();
    const double worker_wait = worker_.settings().fixed_wait_s();
    if (std::abs(worker_wait - cfg_.fixed_wait_s) > 1e-6) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "fixed_wait_s %.3f does not match boot+ip+forensics waits %.3f",
                      cfg_.fixed_wait_s, worker_wait);
        throw ConfigError(buf);
    }
    if (pool_ == nullptr) {
        pool_ = &deferred_;
    }
}

Scheduler::Entry &Scheduler::entry(JobId id) {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) {
        throw ContractViolation("unknown job " + id.str());
    }
    return it->second;
}

const Scheduler::Entry &Scheduler::entry(JobId id) const {
    auto it = jobs_.find(id);
    if (it == jobs_.end()) {
        throw ContractViolation("unknown job " + id.str());
    }
    return it->second;
}

void Scheduler::submit(Job job) {
    job.validate();
    if (jobs_.contains(job.id)) {
        throw ContractViolation("duplicate job id " + job.id.str());
    }
    if (!worker_.has_app(job.app_ref)) {
        throw ConfigError("job " + job.id.str() + ": unknown app '" + job.app_ref + "'");
    }
    Entry e;
    e.job = job;
    e.submitted_at = clock_.now();
    const JobId id = job.id;
    jobs_.emplace(id, std::move(e));
    order_.push_back(id);
    pending_.push_back(id);
}

void Scheduler::move(Entry &e, JobState to) {
    if (!is_valid_transition(e.state, to)) {
        throw ContractViolation("job " + e.job.id.str() + ": illegal transition " + to_string(e.state) + " -> " +
                                to_string(to));
    }
    TransitionEvent ev{e.job.id, e.state, to, clock_.now(), e.node};
    e.state = to;
    log_.push_back(ev);
    if (observer_) {
        observer_(ev);
    }
}

bool Scheduler::current(const Entry &e, int attempt, JobState expected) const {
    return e.attempt == attempt && e.state == expected;
}

void Scheduler::release(Entry &e) {
    if (!e.holds_slot) {
        return;
    }
    mesh_.release_slot(*e.node, e.incarnation, e.job.ram_req_mb);
    auto it = slots_.find({*e.node, e.incarnation});
    if (it != slots_.end() && --it->second == 0) {
        slots_.erase(it);
    }
    e.holds_slot = false;
    if (cfg_.wake_on_completion) {
        request_pass();
    }
}

void Scheduler::requeue(Entry &e) {
    move(e, JobState::Pending);
    e.submitted_at = clock_.now();
    e.run.reset();
    pending_.push_back(e.job.id);
    request_pass();
}

void Scheduler::finish(Entry &e, JobState terminal, std::optional<FailureKind> cause) {
    move(e, terminal);
    JobResult r;
    if (terminal == JobState::Done && e.run) {
        worker::SandboxRun run = e.run->get();
        r.fs_diff = std::move(run.diff);
        r.artifacts = std::move(run.artifacts);
        r.net_log = std::move(run.outcome.net_log);
        r.interaction_record = std::move(run.interactions);
        r.root_flag = run.outcome.root_flag;
        r.crashed = run.outcome.crashed;
    }
    r.job_id = e.job.id;
    r.state = terminal;
    r.node = e.node;
    r.attempts = e.attempt;
    r.failure = cause;
    r.timings = e.timings;
    r.finished_at_s = clock_.now();
    e.result = std::move(r);
    e.run.reset();
    ++terminal_;
    last_terminal_at_ = clock_.now();
    if (all_terminal()) {
        for (auto *ev : {&retry_event_, &deadline_event_, &pass_event_}) {
            if (*ev) {
                clock_.cancel(**ev);
                ev->reset();
            }
        }
    }
}

DispatchAck Scheduler::dispatch(JobId id, NodeId node) {
    Entry &e = entry(id);
    if (e.state != JobState::Pending) {
        throw ContractViolation("dispatch of " + id.str() + " in state " + to_string(e.state));
    }
    if (!std::binary_search(last_broadcast_.begin(), last_broadcast_.end(), node)) {
        throw ContractViolation("dispatch of " + id.str() + " to " + node.str() + " absent from last broadcast");
    }
    pending_.erase(std::find(pending_.begin(), pending_.end(), id));
    e.attempt += 1;
    e.node = node;
    e.incarnation = mesh_.incarnation(node);
    e.timings.queued_s += clock_.now() - e.submitted_at;
    e.dispatched_at = clock_.now();
    move(e, JobState::Dispatched);

    if (!mesh_.is_live(node)) {
        on_failure(id, FailureKind::NodeLost);
        return {false, clock_.now()};
    }
    int &used = slots_[{node, e.incarnation}];
    if (used >= cfg_.max_vms_per_node) {
        throw ContractViolation(node.str() + " would exceed max_vms_per_node");
    }
    used += 1;
    mesh_.reserve_slot(node, e.job.ram_req_mb);
    e.holds_slot = true;

    mesh::Transfer t;
    try {
        t = mesh_.transfer(mesh_.config().per_job_transfer_mb / 2.0, kHeadNode, node);
    } catch (const TransferError &) {
        on_failure(id, FailureKind::NodeLost);
        return {false, clock_.now()};
    }
    e.timings.transfer_in_s += t.completed_at_s - clock_.now();
    const int attempt = e.attempt;
    clock_.schedule_at(t.completed_at_s, [this, id, attempt] { on_arrival(id, attempt); });
    return {true, t.completed_at_s};
}

void Scheduler::on_arrival(JobId id, int attempt) {
    Entry &e = entry(id);
    if (!current(e, attempt, JobState::Dispatched)) {
        return;
    }
    if (!mesh_.is_live(*e.node, e.incarnation)) {
        on_failure(id, FailureKind::NodeLost);
        return;
    }
    move(e, JobState::Running);
    e.running_at = clock_.now();
    ++landed_;
    const worker::JobSpec spec{id.value, e.job.app_ref, e.job.stimulate_s};
    e.plan = worker_.plan(spec, attempt);
    if (e.plan.ip_timeout && cfg_.ip_failure_seen != IpFailureSeen::AtCollect) {
        const double seen_after =
            e.plan.ready_after_s() + (cfg_.ip_failure_seen == IpFailureSeen::AtStop ? e.job.stimulate_s : 0.0);
        clock_.schedule_in(seen_after, [this, id, attempt] { on_ip_timeout(id, attempt); });
        return;
    }
    if (!e.plan.ip_timeout) {
        const worker::AnalysisWorker *w = &worker_;
        e.run = pool_->submit([w, spec, attempt] { return w->execute(spec, attempt); });
    }
    clock_.schedule_in(e.plan.ready_after_s() + e.job.stimulate_s,
                       [this, id, attempt] { on_window_end(id, attempt); });
}

void Scheduler::on_ip_timeout(JobId id, int attempt) {
    Entry &e = entry(id);
    if (!current(e, attempt, JobState::Running)) {
        return;
    }
    e.timings.boot_s += e.plan.ready_after_s();
    e.timings.stimulate_s += clock_.now() - e.running_at - e.plan.ready_after_s();
    const bool alive = mesh_.is_live(*e.node, e.incarnation);
    on_failure(id, alive ? FailureKind::IpTimeout : FailureKind::NodeCrash);
}

void Scheduler::on_window_end(JobId id, int attempt) {
    Entry &e = entry(id);
    if (!current(e, attempt, JobState::Running)) {
        return;
    }
    stop_and_collect(id);
}

void Scheduler::stop_and_collect(JobId id) {
    Entry &e = entry(id);
    if (e.state != JobState::Running) {
        throw ContractViolation("stop_and_collect of " + id.str() + " in state " + to_string(e.state));
    }
    const double window_end = e.running_at + e.plan.ready_after_s() + e.job.stimulate_s;
    const bool early = e.plan.ip_timeout && cfg_.ip_failure_seen != IpFailureSeen::AtCollect;
    if (early || clock_.now() + kWindowSlack < window_end) {
        throw ContractViolation("stop_and_collect of " + id.str() + " before its stimulation window elapsed");
    }
    if (!mesh_.is_live(*e.node, e.incarnation)) {
        on_failure(id, FailureKind::NodeCrash);
        return;
    }
    e.timings.boot_s += e.plan.ready_after_s();
    e.timings.stimulate_s += e.job.stimulate_s;
    move(e, JobState::Collecting);
    e.collecting_at = clock_.now();
    const int attempt = e.attempt;
    clock_.schedule_in(e.plan.forensics_wait_s, [this, id, attempt] { on_forensics_done(id, attempt); });
}

void Scheduler::on_forensics_done(JobId id, int attempt) {
    Entry &e = entry(id);
    if (!current(e, attempt, JobState::Collecting)) {
        return;
    }
    if (!mesh_.is_live(*e.node, e.incarnation)) {
        on_failure(id, FailureKind::NodeCrash);
        return;
    }
    e.timings.forensics_s += clock_.now() - e.collecting_at;
    mesh::Transfer t;
    try {
        t = mesh_.transfer(mesh_.config().per_job_transfer_mb / 2.0, *e.node, kHeadNode);
    } catch (const TransferError &) {
        on_failure(id, FailureKind::TransferFail);
        return;
    }
    const double transfer_s = t.completed_at_s - clock_.now();
    clock_.schedule_at(t.completed_at_s,
                       [this, id, attempt, transfer_s] { on_collected(id, attempt, transfer_s); });
}

void Scheduler::on_collected(JobId id, int attempt, double transfer_s) {
    Entry &e = entry(id);
    if (!current(e, attempt, JobState::Collecting)) {
        return;
    }
    e.timings.transfer_out_s += transfer_s;
    if (e.plan.ip_timeout) {
        // logs came back, analysis did not
        on_failure(id, FailureKind::IpTimeout);
        return;
    }
    release(e);
    finish(e, JobState::Done, std::nullopt);
}

JobState Scheduler::on_failure(JobId id, FailureKind cause) {
    Entry &e = entry(id);
    const bool in_flight =
        e.state == JobState::Dispatched || e.state == JobState::Running || e.state == JobState::Collecting;
    if (!in_flight && !(cause == FailureKind::Deadline && e.state == JobState::Pending)) {
        throw ContractViolation("on_failure of " + id.str() + " in state " + to_string(e.state));
    }
    release(e);

    if (cause == FailureKind::Deadline) {
        if (e.state == JobState::Pending) {
            pending_.erase(std::find(pending_.begin(), pending_.end(), id));
        }
        finish(e, JobState::FailedAbandoned, cause);
        return JobState::FailedAbandoned;
    }
    if (cause == FailureKind::NodeLost) {
        // nothing ran, so no retry is consumed
        move(e, JobState::FailedRetrying);
        requeue(e);
        return JobState::FailedRetrying;
    }
    if (cause == FailureKind::IpTimeout && e.state == JobState::Running) {
        // the node is still up; its emulator logs come back to the head
        try {
            mesh_.transfer(mesh_.config().per_job_transfer_mb / 2.0, *e.node, kHeadNode);
        } catch (const TransferError &) {
        }
    }
    e.failures += 1;
    if (e.failures > e.job.retry_limit) {
        finish(e, JobState::FailedAbandoned, cause);
        return JobState::FailedAbandoned;
    }
    move(e, JobState::FailedRetrying);
    requeue(e);
    return JobState::FailedRetrying;
}

void Scheduler::on_deadline() {
    deadline_event_.reset();
    for (JobId id : order_) {
        if (!is_terminal(entry(id).state)) {
            on_failure(id, FailureKind::Deadline);
        }
    }
}

void Scheduler::request_pass() {
    if (pending_.empty() || pass_event_ || in_pass_) {
        return;
    }
    pass_event_ = clock_.schedule_at(clock_.now(), [this] {
        pass_event_.reset();
        run_pass();
    });
}

void Scheduler::arm_retry() {
    if (pending_.empty() || retry_event_) {
        return;
    }
    retry_event_ = clock_.schedule_in(cfg_.retry_timeout_s, [this] {
        retry_event_.reset();
        run_pass();
    });
}

void Scheduler::run_pass() {
    if (pending_.empty()) {
        return;
    }
    in_pass_ = true;
    for (;;) {
        const auto stats = mesh_.broadcast_stats(cfg_.broadcast_timeout_s);
        last_broadcast_.clear();
        for (const auto &s : stats) {
            last_broadcast_.push_back(s.node);
        }
        // the least demanding pending job decides which nodes are worth queueing
        const Job *probe = &entry(pending_.front()).job;
        for (JobId id : pending_) {
            const Job &j = entry(id).job;
            if (j.ram_req_mb < probe->ram_req_mb) {
                probe = &j;
            }
        }
        const auto queue = build_ready_queue(stats, *probe, cfg_);
        std::size_t placed = 0;
        for (NodeId node : queue) {
            if (pending_.empty()) {
                break;
            }
            auto st = std::lower_bound(stats.begin(), stats.end(), node,
                                       [](const mesh::NodeStats &s, NodeId n) { return s.node < n; });
            auto it = std::find_if(pending_.begin(), pending_.end(),
                                   [&](JobId id) { return entry(id).job.ram_req_mb <= st->ram_free_mb; });
            if (it == pending_.end()) {
                continue;
            }
            if (dispatch(*it, node).accepted) {
                ++placed;
            }
        }
        if (pending_.empty()) {
            break;
        }
        if (placed == 0) {
            arm_retry();
            break;
        }
    }
    in_pass_ = false;
}

std::vector<JobResult> Scheduler::schedule_all(std::vector<Job> jobs) {
    std::vector<JobId> ids;
    ids.reserve(jobs.size());
    for (auto &j : jobs) {
        ids.push_back(j.id);
        submit(std::move(j));
    }
    if (!all_terminal()) {
        if (!deadline_event_) {
            deadline_event_ = clock_.schedule_in(cfg_.global_deadline_s, [this] { on_deadline(); });
        }
        request_pass();
        clock_.run_while([this] { return !all_terminal(); });
    }
    std::vector<JobResult> out;
    out.reserve(ids.size());
    for (JobId id : ids) {
        out.push_back(*entry(id).result);
    }
    return out;
}

JobState Scheduler::state(JobId job) const { return entry(job).state; }

const JobResult *Scheduler::result(JobId job) const {
    const Entry &e = entry(job);
    return e.result ? &*e.result : nullptr;
}

std::map<JobState, std::size_t> Scheduler::state_counts() const {
    std::map<JobState, std::size_t> out;
    for (const auto &[id, e] : jobs_) {
        out[e.state == JobState::FailedRetrying ? JobState::Pending : e.state] += 1;
    }
    return out;
}

int Scheduler::slots_in_use(NodeId node) const {
    const std::uint64_t inc = mesh_.incarnation(node);
    auto it = slots_.find({node, inc});
    return it == slots_.end() ? 0 : it->second;
}

bool Scheduler::all_terminal() const { return terminal_ == jobs_.size(); }

std::string Scheduler::transition_log() const {
    std::string out;
    for (const auto &e : log_) {
        out += to_ndjson(e);
        out += '\n';
    }
    return out;
}

} // namespace andlantis::sched
