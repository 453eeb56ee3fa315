#include "andlantis/worker.hpp"

#include <cmath>

#include "andlantis/error.hpp"
#include "andlantis/rng.hpp"

namespace andlantis::worker {

void WorkerSettings::validate() const {
    if (ip_fail_prob < 0.0 || ip_fail_prob > 1.0) {
        throw ConfigError("ip_fail_prob must be in [0, 1]");
    }
    if (boot.boot_wait_s < 0.0 || boot.ip_wait_s < 0.0 || forensics_wait_s < 0.0) {
        throw ConfigError("wait times must be non-negative");
    }
    if (wait_jitter_s < 0.0 || (wait_jitter_s > 0.0 && wait_jitter_s >= fixed_wait_s())) {
        throw ConfigError("wait_jitter_s must be non-negative and below the fixed wait");
    }
    if (!(interaction_interval_s > 0.0)) {
        throw ConfigError("interaction_interval_s must be positive");
    }
}

AnalysisWorker::AnalysisWorker(std::shared_ptr<const sandbox::BaselineImage> baseline,
                               std::map<std::string, AppFixture> apps, WorkerSettings settings)
    : baseline_(std::move(baseline)), apps_(std::move(apps)), settings_(std::move(settings)) {
    if (!baseline_) {
        throw ConfigError("analysis worker: no baseline image configured");
    }
    settings_.validate();
    baseline_snapshot_ = forensics::snapshot(baseline_->fs, baseline_->epoch_s);
    empty_app_.model.app_id = std::string(kEmptyApp);
}

std::uint64_t AnalysisWorker::attempt_seed(std::uint64_t job_id, int attempt) const noexcept {
    return derive_seed(settings_.seed, {job_id, static_cast<std::uint64_t>(attempt)});
}

bool AnalysisWorker::has_app(const std::string &app_ref) const {
    return app_ref == kEmptyApp || apps_.contains(app_ref);
}

const AppFixture &AnalysisWorker::app(const std::string &app_ref) const {
    if (app_ref == kEmptyApp) {
        return empty_app_;
    }
    auto it = apps_.find(app_ref);
    if (it == apps_.end()) {
        throw ConfigError("unknown app fixture '" + app_ref + "'");
    }
    return it->second;
}

BootPlan AnalysisWorker::plan(const JobSpec &job, int attempt) const {
    const std::uint64_t seed = attempt_seed(job.job_id, attempt);
    BootPlan p;
    p.ip_timeout = Rng(derive_seed(seed, {1})).bernoulli(settings_.ip_fail_prob);
    double scale = 1.0;
    const double total = settings_.fixed_wait_s();
    if (settings_.wait_jitter_s > 0.0 && total > 0.0) {
        const double delta = Rng(derive_seed(seed, {2})).uniform(-settings_.wait_jitter_s, settings_.wait_jitter_s);
        scale = (total + delta) / total;
    }
    p.boot_wait_s = settings_.boot.boot_wait_s * scale;
    p.ip_wait_s = settings_.boot.ip_wait_s * scale;
    p.forensics_wait_s = settings_.forensics_wait_s * scale;
    return p;
}

SandboxRun AnalysisWorker::execute(const JobSpec &job, int attempt) const {
    const AppFixture &fixture = app(job.app_ref);
    const std::uint64_t seed = attempt_seed(job.job_id, attempt);
    const BootPlan p = plan(job, attempt);

    auto pair = sandbox::SandboxPair::spawn(fixture.model.app_id, baseline_.get(), seed);
    SandboxRun run;
    pair.boot(settings_.ip_fail_prob, derive_seed(seed, {1}), {p.boot_wait_s, p.ip_wait_s});
    if (pair.state() == sandbox::VmLifecycle::Ready) {
        pair.install_and_launch(fixture.model);
        if (fixture.ui && !pair.crashed()) {
            const auto window_cap = static_cast<std::size_t>(std::floor(job.stimulate_s / settings_.interaction_interval_s));
            const std::size_t budget = std::min(settings_.explore_budget, window_cap);
            std::size_t n = 0;
            double last_offset = 0.0;
            run.interactions = ui::explore(*fixture.ui, budget, settings_.explore,
                                           [&](const ui::InteractionStep &step) {
                                               last_offset = static_cast<double>(++n) * settings_.interaction_interval_s;
                                               pair.run_timers(last_offset);
                                               pair.fire_ui(step.element_id, last_offset);
                                           });
            if (run.interactions.crashed()) {
                pair.record_app_crash(last_offset);
            }
        }
        pair.run_timers(job.stimulate_s);
    }
    run.outcome = pair.stop_and_snapshot();
    run.final_vm_state = pair.state();
    run.fired = pair.fired();
    run.vm_transitions = pair.transitions();
    run.diff = forensics::diff(baseline_snapshot_, run.outcome.snapshot);
    run.artifacts = forensics::extract_artifacts(run.diff, pair.fs());
    return run;
}

RunPool::RunPool(std::size_t threads) {
    for (std::size_t i = 0; i < threads; ++i) {
        threads_.emplace_back([this] { loop(); });
    }
}

RunPool::~RunPool() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto &t : threads_) {
        t.join();
    }
}

std::shared_future<SandboxRun> RunPool::submit(std::function<SandboxRun()> fn) {
    if (threads_.empty()) {
        return std::async(std::launch::deferred, std::move(fn)).share();
    }
    std::packaged_task<SandboxRun()> task(std::move(fn));
    auto fut = task.get_future().share();
    {
        std::lock_guard lock(mu_);
        queue_.push_back(std::move(task));
    }
    cv_.notify_one();
    return fut;
}

void RunPool::loop() {
    for (;;) {
        std::packaged_task<SandboxRun()> task;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) {
                return;
            }
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

} // namespace andlantis::worker
