#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "andlantis/forensics.hpp"
#include "andlantis/sandbox.hpp"
#include "andlantis/uiexplore.hpp"

namespace andlantis::worker {

struct AppFixture {
    sandbox::BehaviorModel model;
    std::optional<ui::UiGraph> ui;
};

/// Node-side analysis parameters. The three waits make up the fixed
/// per-job overhead on top of the stimulation window.
struct WorkerSettings {
    double ip_fail_prob = 0.0;
    std::uint64_t seed = 0;
    sandbox::BootTiming boot{};
    double forensics_wait_s = 100.0;
    double wait_jitter_s = 0.0; // uniform half-width on the total wait
    std::size_t explore_budget = 100;
    double interaction_interval_s = 1.0;
    ui::ExploreConfig explore{};

    double fixed_wait_s() const noexcept { return boot.boot_wait_s + boot.ip_wait_s + forensics_wait_s; }
    void validate() const;
};

struct JobSpec {
    std::uint64_t job_id = 0;
    std::string app_ref;
    double stimulate_s = 300.0;
};

/// Cheap, seed-determined part of a run: boot outcome and jittered waits.
struct BootPlan {
    bool ip_timeout = false;
    double boot_wait_s = 0.0;
    double ip_wait_s = 0.0;
    double forensics_wait_s = 0.0;

    double ready_after_s() const noexcept { return boot_wait_s + ip_wait_s; }
};

struct SandboxRun {
    sandbox::VmLifecycle final_vm_state = sandbox::VmLifecycle::Created;
    sandbox::SandboxOutcome outcome;
    forensics::FsDiff diff;
    forensics::ArtifactStore artifacts;
    ui::InteractionRecord interactions;
    std::vector<sandbox::FiredAction> fired;
    std::vector<std::pair<sandbox::VmLifecycle, sandbox::VmLifecycle>> vm_transitions;
};

class AnalysisWorker {
public:
    static constexpr std::string_view kEmptyApp = "empty";

    AnalysisWorker(std::shared_ptr<const sandbox::BaselineImage> baseline, std::map<std::string, AppFixture> apps,
                   WorkerSettings settings);

    std::uint64_t attempt_seed(std::uint64_t job_id, int attempt) const noexcept;
    BootPlan plan(const JobSpec &job, int attempt) const;

    /// Full sandbox lifecycle for one attempt. Pure in (job, attempt).
    SandboxRun execute(const JobSpec &job, int attempt) const;

    bool has_app(const std::string &app_ref) const;
    const WorkerSettings &settings() const noexcept { return settings_; }
    const forensics::FsSnapshot &baseline_snapshot() const noexcept { return baseline_snapshot_; }
    const sandbox::BaselineImage &baseline() const noexcept { return *baseline_; }

private:
    const AppFixture &app(const std::string &app_ref) const;

    std::shared_ptr<const sandbox::BaselineImage> baseline_;
    forensics::FsSnapshot baseline_snapshot_;
    std::map<std::string, AppFixture> apps_;
    AppFixture empty_app_;
    WorkerSettings settings_;
};

/// Fixed-size thread pool for sandbox runs. With zero threads work is
/// deferred and runs on the thread that first asks for the result.
class RunPool {
public:
    explicit RunPool(std::size_t threads = 0);
    ~RunPool();
    RunPool(const RunPool &) = delete;
    RunPool &operator=(const RunPool &) = delete;

    std::shared_future<SandboxRun> submit(std::function<SandboxRun()> fn);
    std::size_t threads() const noexcept { return threads_.size(); }

private:
    void loop();

    std::vector<std::thread> threads_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::packaged_task<SandboxRun()>> queue_;
    bool stopping_ = false;
};

} // namespace andlantis::worker
