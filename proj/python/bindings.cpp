#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "andlantis/commands.hpp"
#include "andlantis/config.hpp"
#include "andlantis/error.hpp"
#include "andlantis/hashing.hpp"
#include "andlantis/perfmodel.hpp"
#include "andlantis/scheduler.hpp"
#include "andlantis/uiexplore.hpp"

namespace py = pybind11;
using namespace andlantis;

namespace {

py::dict report_dict(const perf::PerfReport &r) {
    py::dict d;
    d["n_nodes"] = r.n_nodes;
    d["wall_time_s"] = r.wall_time_s;
    d["comm_time_s"] = r.comm_time_s;
    d["comm_fraction"] = r.comm_fraction;
    d["jobs_done"] = r.jobs_done;
    d["jobs_failed"] = r.jobs_failed;
    d["jobs_dispatched"] = r.jobs_dispatched;
    d["throughput_per_hour"] = r.throughput_per_hour();
    return d;
}

struct PerfArgs {
    perf::ClusterSpec cluster;
    perf::WorkloadSpec workload;
    perf::CommSpec comm;
};

PerfArgs perf_args(int n_nodes, int vms_per_node, int n_jobs, double stimulate_s, double fixed_wait_s,
                   double wait_jitter_s, double per_job_comm_s) {
    PerfArgs a;
    a.cluster.n_nodes = n_nodes;
    a.cluster.vms_per_node = vms_per_node;
    a.workload.n_jobs = n_jobs;
    a.workload.stimulate_s = stimulate_s;
    a.workload.fixed_wait_s = fixed_wait_s;
    a.workload.wait_jitter_s = wait_jitter_s;
    a.comm.per_job_comm_s = per_job_comm_s;
    return a;
}

std::vector<perf::PerfReport> reports_from(const py::list &rows) {
    std::vector<perf::PerfReport> out;
    for (const auto &item : rows) {
        const auto d = item.cast<py::dict>();
        perf::PerfReport r;
        r.n_nodes = d["n_nodes"].cast<int>();
        r.wall_time_s = d["wall_time_s"].cast<double>();
        r.comm_time_s = d["comm_time_s"].cast<double>();
        r.comm_fraction = d["comm_fraction"].cast<double>();
        r.jobs_done = d["jobs_done"].cast<int>();
        r.jobs_failed = d["jobs_failed"].cast<int>();
        out.push_back(r);
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "andlantis core: scheduler, sandbox, forensics, UI exploration and performance model";
    m.attr("__version__") = "0.3.0";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
    py::register_exception<ReplayMismatch>(m, "ReplayMismatch", PyExc_RuntimeError);

    m.def("theoretical_runtime", &perf::theoretical_runtime, py::arg("n_jobs"), py::arg("n_nodes"),
          py::arg("vms_per_node"), py::arg("per_job_s"));
    m.def("wave_bound", &perf::wave_bound, py::arg("n_jobs"), py::arg("slots"), py::arg("per_job_s"));

    m.def(
        "simulate_run",
        [](int n_nodes, int vms_per_node, int n_jobs, double stimulate_s, double fixed_wait_s, double wait_jitter_s,
           double per_job_comm_s, double ip_fail_prob, std::uint64_t seed) {
            const auto a = perf_args(n_nodes, vms_per_node, n_jobs, stimulate_s, fixed_wait_s, wait_jitter_s,
                                     per_job_comm_s);
            py::gil_scoped_release nogil;
            auto r = perf::simulate_run(a.cluster, a.workload, a.comm, ip_fail_prob, seed);
            py::gil_scoped_acquire gil;
            return report_dict(r);
        },
        py::arg("n_nodes") = 188, py::arg("vms_per_node") = 3, py::arg("n_jobs") = 1261, py::arg("stimulate_s") = 300.0,
        py::arg("fixed_wait_s") = 220.0, py::arg("wait_jitter_s") = 30.0, py::arg("per_job_comm_s") = 0.24,
        py::arg("ip_fail_prob") = 0.03, py::arg("seed") = config::kDefaultSeed);

    m.def(
        "sweep",
        [](const std::vector<int> &nodes, int vms_per_node, int n_jobs, double stimulate_s, double fixed_wait_s,
           double wait_jitter_s, double per_job_comm_s, double ip_fail_prob, std::uint64_t seed) {
            const auto a = perf_args(nodes.empty() ? 1 : nodes.front(), vms_per_node, n_jobs, stimulate_s,
                                     fixed_wait_s, wait_jitter_s, per_job_comm_s);
            std::vector<perf::PerfReport> table;
            {
                py::gil_scoped_release nogil;
                table = perf::sweep(nodes, a.cluster, a.workload, a.comm, ip_fail_prob, seed);
            }
            py::list out;
            for (const auto &r : table) {
                out.append(report_dict(r));
            }
            return out;
        },
        py::arg("nodes"), py::arg("vms_per_node") = 3, py::arg("n_jobs") = 1261, py::arg("stimulate_s") = 300.0,
        py::arg("fixed_wait_s") = 220.0, py::arg("wait_jitter_s") = 30.0, py::arg("per_job_comm_s") = 0.24,
        py::arg("ip_fail_prob") = 0.03, py::arg("seed") = config::kDefaultSeed);

    m.def(
        "speedup",
        [](const py::list &rows, int baseline) {
            std::vector<std::pair<int, double>> out;
            for (const auto &row : perf::speedup(reports_from(rows), baseline)) {
                out.emplace_back(row.report.n_nodes, row.speedup);
            }
            return out;
        },
        py::arg("table"), py::arg("baseline_count"));

    m.def(
        "sweep_csv",
        [](const py::list &rows, int baseline) { return perf::sweep_csv(perf::speedup(reports_from(rows), baseline)); },
        py::arg("table"), py::arg("baseline_count"));

    m.def(
        "build_ready_queue",
        [](const py::list &stats, std::uint64_t ram_req_mb, double load_threshold, int max_vms_per_node) {
            std::vector<mesh::NodeStats> v;
            for (const auto &item : stats) {
                const auto d = item.cast<py::dict>();
                mesh::NodeStats s;
                s.node = mesh::NodeId{d["node"].cast<std::uint32_t>()};
                s.ram_free_mb = d["ram_free_mb"].cast<std::uint64_t>();
                s.ram_total_mb = d.contains("ram_total_mb") ? d["ram_total_mb"].cast<std::uint64_t>() : s.ram_free_mb;
                s.load_avg = d["load_avg"].cast<double>();
                s.active_vms = d["active_vms"].cast<int>();
                s.max_vms = d.contains("max_vms") ? d["max_vms"].cast<int>() : max_vms_per_node;
                v.push_back(s);
            }
            sched::Job job;
            job.ram_req_mb = ram_req_mb;
            sched::ScheduleConfig cfg;
            cfg.load_threshold = load_threshold;
            cfg.max_vms_per_node = max_vms_per_node;
            std::vector<std::uint32_t> out;
            for (auto id : sched::build_ready_queue(v, job, cfg)) {
                out.push_back(id.value);
            }
            return out;
        },
        py::arg("stats"), py::arg("ram_req_mb") = 1024, py::arg("load_threshold") = 4.0,
        py::arg("max_vms_per_node") = 3);

    m.def(
        "explore",
        [](const std::string &graph_json, std::size_t budget) {
            return ui::explore(ui::UiGraph::from_json(graph_json), budget).to_json();
        },
        py::arg("graph_json"), py::arg("budget"));

    m.def(
        "replay",
        [](const std::string &graph_json, const std::string &record_json) {
            std::vector<std::string> out;
            for (const auto &o : ui::replay(ui::UiGraph::from_json(graph_json), ui::InteractionRecord::from_json(record_json))) {
                out.push_back(o.str());
            }
            return out;
        },
        py::arg("graph_json"), py::arg("record_json"));

    m.def(
        "diff_dirs",
        [](const std::string &base, const std::string &post, bool full_metadata) {
            return cli::cmd_diff(base, post,
                                 full_metadata ? forensics::MetadataCompare::Full : forensics::MetadataCompare::Portable);
        },
        py::arg("base"), py::arg("post"), py::arg("full_metadata") = false);

    m.def(
        "classify", [](const py::bytes &content) { return forensics::classify(std::string(content)); },
        py::arg("content"));

    m.def(
        "digests",
        [](const py::bytes &content) {
            const auto d = forensics::digest_all(std::string(content));
            py::dict out;
            out["md5"] = d.md5;
            out["sha1"] = d.sha1;
            out["sha256"] = d.sha256;
            return out;
        },
        py::arg("content"));

    m.def(
        "run",
        [](const std::string &config_path, const std::string &out_dir) {
            auto cfg = config::ExperimentConfig::load(config_path);
            if (auto seed = config::seed_from_env()) {
                cfg.seed = *seed;
            }
            cli::RunManifest man;
            {
                py::gil_scoped_release nogil;
                man = cli::cmd_run(cfg, out_dir.empty() ? cfg.output_dir : std::filesystem::path(out_dir));
            }
            py::dict d;
            d["out_dir"] = man.out_dir.string();
            d["seed"] = man.seed;
            d["wall_time_s"] = man.wall_time_s;
            d["comm_time_s"] = man.comm_time_s;
            d["jobs_done"] = man.jobs_done;
            d["jobs_failed"] = man.jobs_failed;
            d["files"] = man.files;
            py::list jobs;
            for (const auto &j : man.jobs) {
                py::dict o;
                o["job_id"] = j.job_id;
                o["app"] = j.app;
                o["state"] = j.state;
                o["attempts"] = j.attempts;
                jobs.append(o);
            }
            d["jobs"] = jobs;
            return d;
        },
        py::arg("config_path"), py::arg("out_dir") = "");
}
