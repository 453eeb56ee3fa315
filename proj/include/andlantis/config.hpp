#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "andlantis/perfmodel.hpp"
#include "andlantis/scheduler.hpp"
#include "andlantis/worker.hpp"

namespace andlantis::config {

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr const char *kSeedEnv = "ANDLANTIS_SEED";

/// Scripted node departure (and optional return) in virtual seconds.
struct NodeLeave {
    std::uint32_t node = 0;
    double at_s = 0.0;
    std::optional<double> rejoin_at_s;
};

struct AppPaths {
    std::filesystem::path behavior;
    std::optional<std::filesystem::path> ui;
};

struct ExperimentConfig {
    std::uint64_t seed = kDefaultSeed;
    double ip_fail_prob = 0.0;
    perf::ClusterSpec cluster;
    perf::WorkloadSpec workload;
    perf::CommSpec comm;
    sched::ScheduleConfig schedule;
    double boot_wait_s = 60.0;
    double ip_wait_s = 60.0;
    double forensics_wait_s = 100.0;
    std::size_t explore_budget = 100;
    double interaction_interval_s = 1.0;
    /// Jobs cycle through these fixture names; "empty" needs no fixture.
    std::vector<std::string> apps{"empty"};
    std::vector<NodeLeave> node_leaves;
    std::optional<std::filesystem::path> baseline;
    std::map<std::string, AppPaths> fixtures;
    std::filesystem::path output_dir = "andlantis-out";
    std::size_t workers = 0;

    /// Paths are resolved against `base_dir`. Throws ConfigError naming the
    /// offending field.
    static ExperimentConfig from_json(std::string_view text, const std::filesystem::path &base_dir);
    static ExperimentConfig load(const std::filesystem::path &file);

    void validate() const;
    std::vector<sched::Job> jobs() const;
    worker::WorkerSettings worker_settings() const;
    sched::ScheduleConfig schedule_config() const;
    perf::SimOptions sim_options() const;
};

/// Parse ANDLANTIS_SEED if set. Throws ConfigError on a malformed value.
std::optional<std::uint64_t> seed_from_env();

/// Loaded fixtures, ready for a worker.
struct FixtureSet {
    std::shared_ptr<const sandbox::BaselineImage> baseline;
    std::map<std::string, worker::AppFixture> apps;
};

FixtureSet load_fixtures(const ExperimentConfig &cfg);
ui::UiGraph load_ui_graph(const std::filesystem::path &file);
std::string read_file(const std::filesystem::path &file);

} // namespace andlantis::config
