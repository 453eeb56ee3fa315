#include "andlantis/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "andlantis/clock.hpp"
#include "andlantis/error.hpp"
#include "andlantis/mesh.hpp"
#include "andlantis/sandbox.hpp"
#include "andlantis/uiexplore.hpp"
#include "andlantis/worker.hpp"

namespace andlantis::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path &p, std::string_view content) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + p.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw Error("write failed: " + p.string());
    }
}

// Sandbox paths are absolute; keep them inside the artifact directory.
fs::path artifact_relpath(const std::string &vpath) {
    fs::path rel = fs::path(vpath).relative_path().lexically_normal();
    for (const auto &part : rel) {
        if (part == "..") {
            throw IntegrityError("artifact path escapes its directory: " + vpath);
        }
    }
    return rel;
}

// Clear a previous run out of `dir` (only the files its manifest lists).
void prepare_output(const fs::path &dir) {
    std::error_code ec;
    if (!fs::exists(dir, ec)) {
        fs::create_directories(dir);
        return;
    }
    if (!fs::is_directory(dir, ec)) {
        throw ConfigError("output path is not a directory: " + dir.string());
    }
    if (fs::is_empty(dir, ec)) {
        return;
    }
    const fs::path manifest = dir / "manifest.json";
    if (!fs::is_regular_file(manifest, ec)) {
        throw ConfigError("output directory is not empty and holds no previous run: " + dir.string());
    }
    json old;
    try {
        old = json::parse(config::read_file(manifest));
    } catch (const json::exception &e) {
        throw ConfigError("cannot parse previous manifest " + manifest.string() + ": " + e.what());
    }
    for (const auto &f : old.value("files", json::array())) {
        fs::remove(dir / artifact_relpath("/" + f.get<std::string>()), ec);
    }
    fs::remove(manifest, ec);
    for (const char *sub : {"artifacts", "reports"}) {
        fs::remove_all(dir / sub, ec);
    }
}

std::vector<std::string> list_files(const fs::path &dir) {
    std::vector<std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            std::string rel = fs::relative(e.path(), dir).generic_string();
            if (rel != "manifest.json") {
                out.push_back(std::move(rel));
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::string format_duration(double seconds) {
    const auto total = static_cast<long long>(std::llround(seconds));
    const long long h = total / 3600;
    const long long m = (total % 3600) / 60;
    const long long s = total % 60;
    char buf[64];
    if (h > 0) {
        std::snprintf(buf, sizeof buf, "%lld h %lld m %lld s", h, m, s);
    } else {
        std::snprintf(buf, sizeof buf, "%lld m %lld s", m, s);
    }
    return buf;
}

RunManifest cmd_run(const config::ExperimentConfig &cfg, const fs::path &out_dir) {
    cfg.validate();
    const auto fixtures = config::load_fixtures(cfg);
    const worker::AnalysisWorker worker(fixtures.baseline, fixtures.apps, cfg.worker_settings());

    VirtualClock clock;
    mesh::TransportConfig tc;
    tc.head_bandwidth_mbps = cfg.comm.head_bandwidth_mbps;
    tc.per_job_transfer_mb = cfg.comm.per_job_transfer_mb();
    mesh::Mesh mesh(clock, tc);
    auto node_stats = [&](std::uint32_t id) {
        mesh::NodeStats s;
        s.node = mesh::NodeId{id};
        s.ram_total_mb = cfg.cluster.node_ram_mb;
        s.ram_free_mb = cfg.cluster.node_ram_mb;
        s.max_vms = cfg.cluster.vms_per_node;
        return s;
    };
    for (int i = 1; i <= cfg.cluster.n_nodes; ++i) {
        const auto id = static_cast<std::uint32_t>(i);
        if (!cfg.cluster.node_failure_ids.contains(id)) {
            mesh.join(node_stats(id));
        }
    }
    for (const auto &l : cfg.node_leaves) {
        mesh.schedule_leave(mesh::NodeId{l.node}, l.at_s);
        if (l.rejoin_at_s) {
            mesh.schedule_join(node_stats(l.node), *l.rejoin_at_s);
        }
    }

    worker::RunPool pool(cfg.workers);
    sched::Scheduler scheduler(clock, mesh, worker, cfg.schedule_config(), &pool);
    auto jobs = cfg.jobs();
    std::map<std::uint64_t, std::string> app_of;
    for (const auto &j : jobs) {
        app_of[j.id.value] = j.app_ref;
    }
    const auto results = scheduler.schedule_all(std::move(jobs));

    prepare_output(out_dir);
    write_file(out_dir / "transitions.ndjson", scheduler.transition_log());

    RunManifest m;
    m.out_dir = out_dir;
    m.seed = cfg.seed;
    m.wall_time_s = scheduler.last_terminal_at_s();
    m.comm_time_s = mesh.head_busy_s();
    for (const auto &r : results) {
        const std::string id = r.job_id.str();
        forensics::ReportInputs in;
        in.job_id = id;
        in.diff = &r.fs_diff;
        in.artifacts = &r.artifacts;
        in.root_flag = r.root_flag;
        in.net_summary = sandbox::summarize(r.net_log);
        in.interaction_steps = static_cast<std::int64_t>(r.interaction_record.interactions());
        in.crash = r.crashed;
        const std::string report_rel = "reports/" + id + ".json";
        write_file(out_dir / report_rel, forensics::emit_report(in));
        for (const auto &[path, bytes] : r.artifacts) {
            write_file(out_dir / "artifacts" / id / artifact_relpath(path), bytes);
        }
        ManifestJob mj;
        mj.job_id = id;
        mj.app = app_of[r.job_id.value];
        mj.state = sched::to_string(r.state);
        if (r.node) {
            mj.node = r.node->value;
        }
        mj.attempts = r.attempts;
        mj.failure = r.failure ? sched::to_string(*r.failure) : "";
        mj.report = report_rel;
        m.jobs.push_back(std::move(mj));
        (r.state == sched::JobState::Done ? m.jobs_done : m.jobs_failed) += 1;
    }
    m.files = list_files(out_dir);

    json jm;
    jm["seed"] = m.seed;
    jm["wall_time_s"] = m.wall_time_s;
    jm["comm_time_s"] = m.comm_time_s;
    jm["jobs_done"] = m.jobs_done;
    jm["jobs_failed"] = m.jobs_failed;
    jm["files"] = m.files;
    json jobs_json = json::array();
    for (const auto &j : m.jobs) {
        json o;
        o["job_id"] = j.job_id;
        o["app"] = j.app;
        o["state"] = j.state;
        o["node"] = j.node ? json(*j.node) : json(nullptr);
        o["attempts"] = j.attempts;
        o["failure"] = j.failure.empty() ? json(nullptr) : json(j.failure);
        o["report"] = j.report;
        jobs_json.push_back(std::move(o));
    }
    jm["jobs"] = std::move(jobs_json);
    write_file(out_dir / "manifest.json", jm.dump(2) + "\n");
    return m;
}

std::string cmd_diff(const fs::path &base, const fs::path &post, forensics::MetadataCompare metadata) {
    for (const auto &p : {base, post}) {
        std::error_code ec;
        if (!fs::is_directory(p, ec)) {
            throw ConfigError("not a readable directory: " + p.string());
        }
    }
    const auto a = forensics::snapshot(base);
    const auto b = forensics::snapshot(post);
    forensics::DiffOptions opts;
    opts.metadata = metadata;
    const auto d = forensics::diff(a, b, opts);
    const auto artifacts = forensics::extract_artifacts(d, post);
    forensics::ReportInputs in;
    in.job_id = "diff";
    in.diff = &d;
    in.artifacts = &artifacts;
    return forensics::emit_report(in);
}

std::vector<int> parse_node_list(const std::string &text) {
    std::vector<int> out;
    std::stringstream ss(text + ",");
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception &) {
            throw ConfigError("--nodes: not an integer: '" + item + "'");
        }
        if (used != item.size() || v < 1) {
            throw ConfigError("--nodes: expected positive integers, got '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("--nodes: empty list");
    }
    std::set<int> seen(out.begin(), out.end());
    if (seen.size() != out.size()) {
        throw ConfigError("--nodes: duplicate node count");
    }
    return out;
}

SweepOutput cmd_sweep(const config::ExperimentConfig &cfg, const std::vector<int> &nodes) {
    cfg.validate();
    perf::ClusterSpec cluster = cfg.cluster;
    // swept counts are live nodes
    cluster.node_failure_ids.clear();
    const auto table =
        perf::sweep(nodes, cluster, cfg.workload, cfg.comm, cfg.ip_fail_prob, cfg.seed, cfg.sim_options());
    const int baseline = *std::min_element(nodes.begin(), nodes.end());
    SweepOutput out;
    out.rows = perf::speedup(table, baseline);
    out.csv = perf::sweep_csv(out.rows);

    const auto largest = std::max_element(out.rows.begin(), out.rows.end(), [](const auto &a, const auto &b) {
        return a.report.n_nodes < b.report.n_nodes;
    });
    const auto smallest = std::min_element(out.rows.begin(), out.rows.end(), [](const auto &a, const auto &b) {
        return a.report.n_nodes < b.report.n_nodes;
    });
    const int n = largest->report.n_nodes;
    std::ostringstream os;
    char buf[256];
    if (cfg.workload.n_jobs > 0) {
        const double t_stim =
            perf::theoretical_runtime(cfg.workload.n_jobs, n, cfg.cluster.vms_per_node, cfg.workload.stimulate_s);
        const double t_full = perf::theoretical_runtime(cfg.workload.n_jobs, n, cfg.cluster.vms_per_node,
                                                        cfg.workload.per_job_service_s());
        std::snprintf(buf, sizeof buf, "theoretical runtime, %d nodes, stimulation only: %.1f s (%s)\n", n, t_stim,
                      format_duration(t_stim).c_str());
        os << buf;
        std::snprintf(buf, sizeof buf, "theoretical runtime, %d nodes, with fixed waits: %.1f s (%s)\n", n, t_full,
                      format_duration(t_full).c_str());
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "simulated runtime, %d nodes: %.1f s (%s), %.0f jobs/hour, %d done, %d failed\n", n,
                  largest->report.wall_time_s, format_duration(largest->report.wall_time_s).c_str(),
                  largest->report.throughput_per_hour(), largest->report.jobs_done, largest->report.jobs_failed);
    os << buf;
    std::snprintf(buf, sizeof buf, "comm fraction: %.4f at %d nodes, %.4f at %d nodes\n",
                  smallest->report.comm_fraction, smallest->report.n_nodes, largest->report.comm_fraction, n);
    os << buf;
    std::snprintf(buf, sizeof buf, "parallel efficiency at %d nodes vs %d: %.4f\n", n, baseline,
                  largest->speedup / largest->ideal_speedup);
    os << buf;
    out.anchors = os.str();
    return out;
}

std::string cmd_explore(const fs::path &graph, std::size_t budget) {
    const auto g = config::load_ui_graph(graph);
    const auto record = ui::explore(g, budget);
    return record.to_json();
}

} // namespace andlantis::cli
