#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "andlantis/config.hpp"
#include "andlantis/forensics.hpp"
#include "andlantis/scheduler.hpp"

namespace andlantis::cli {

struct ManifestJob {
    std::string job_id;
    std::string app;
    std::string state;
    std::optional<std::uint32_t> node;
    int attempts = 0;
    std::string failure;
    std::string report;
};

struct RunManifest {
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    double comm_time_s = 0.0;
    int jobs_done = 0;
    int jobs_failed = 0;
    std::vector<ManifestJob> jobs;
    std::vector<std::string> files; // relative to out_dir, sorted, manifest.json excluded
};

/// Run every configured job on the simulated cluster and write the output
/// tree. An existing output directory is only reused when it holds a
/// previous run (a manifest.json); its listed files are replaced.
RunManifest cmd_run(const config::ExperimentConfig &cfg, const std::filesystem::path &out_dir);

/// Snapshot two directories and return the canonical report JSON.
std::string cmd_diff(const std::filesystem::path &base, const std::filesystem::path &post,
                     forensics::MetadataCompare metadata = forensics::MetadataCompare::Portable);

struct SweepOutput {
    std::vector<perf::SweepRow> rows;
    std::string csv;
    std::string anchors; // human-readable summary
};

std::vector<int> parse_node_list(const std::string &text);
SweepOutput cmd_sweep(const config::ExperimentConfig &cfg, const std::vector<int> &nodes);

/// Record plus coverage as JSON.
std::string cmd_explore(const std::filesystem::path &graph, std::size_t budget);

std::string format_duration(double seconds);

} // namespace andlantis::cli
