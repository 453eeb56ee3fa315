// andlantis command line driver.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "andlantis/commands.hpp"
#include "andlantis/config.hpp"
#include "andlantis/error.hpp"
#include "andlantis/remote.hpp"

namespace fs = std::filesystem;
using namespace andlantis;

namespace {

config::ExperimentConfig load_config(const std::string &path) {
    auto cfg = config::ExperimentConfig::load(path);
    if (auto seed = config::seed_from_env()) {
        cfg.seed = *seed;
    }
    return cfg;
}

remote::NodeAgent *g_agent = nullptr;

void on_signal(int) {
    if (g_agent != nullptr) {
        g_agent->stop();
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"andlantis: distributed dynamic analysis over a simulated cluster"};
    app.require_subcommand(1);

    std::string run_config;
    std::string run_out;
    std::size_t run_workers = 0;
    auto *run = app.add_subcommand("run", "run every configured job and write the output tree");
    run->add_option("config", run_config, "experiment config (JSON)")->required();
    run->add_option("--out", run_out, "output directory (overrides output_dir)");
    auto *workers_opt = run->add_option("--workers", run_workers, "threads for sandbox runs (overrides workers)");

    std::string diff_base;
    std::string diff_post;
    bool diff_full = false;
    auto *diff = app.add_subcommand("diff", "snapshot two directories and print the report JSON");
    diff->add_option("base", diff_base, "baseline directory")->required();
    diff->add_option("post", diff_post, "post-run directory")->required();
    diff->add_flag("--full-metadata", diff_full, "also compare dev, ino and ctime");

    std::string sweep_config;
    std::string sweep_nodes;
    std::string sweep_out;
    auto *sweep = app.add_subcommand("sweep", "simulate the workload over several node counts");
    sweep->add_option("config", sweep_config, "experiment config (JSON)")->required();
    sweep->add_option("--nodes", sweep_nodes, "comma-separated node counts")->required();
    sweep->add_option("--out", sweep_out, "CSV path (default <output_dir>/sweep.csv)");

    std::string explore_graph;
    std::size_t explore_budget = 100;
    auto *explore = app.add_subcommand("explore", "stimulate a UI graph fixture and print the record");
    explore->add_option("graph", explore_graph, "UI graph fixture (JSON)")->required();
    explore->add_option("--budget", explore_budget, "maximum interactions")->required();

    std::string node_listen;
    std::uint32_t node_id = 1;
    int node_max_vms = 3;
    auto *node = app.add_subcommand("node", "serve this host's stats to a head node");
    node->add_option("--listen", node_listen, "host:port")->required();
    node->add_option("--id", node_id, "node id (1 and up)")->check(CLI::PositiveNumber);
    node->add_option("--max-vms", node_max_vms, "sandbox pair capacity")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (*run) {
            auto cfg = load_config(run_config);
            if (workers_opt->count() > 0) {
                cfg.workers = run_workers;
            }
            const fs::path out = run_out.empty() ? cfg.output_dir : fs::path(run_out);
            const auto m = cli::cmd_run(cfg, out);
            std::printf("%d done, %d failed, wall %.1f s (%s), comm %.2f s -> %s\n", m.jobs_done, m.jobs_failed,
                        m.wall_time_s, cli::format_duration(m.wall_time_s).c_str(), m.comm_time_s,
                        out.string().c_str());
        } else if (*diff) {
            std::cout << cli::cmd_diff(diff_base, diff_post,
                                       diff_full ? forensics::MetadataCompare::Full
                                                 : forensics::MetadataCompare::Portable);
        } else if (*sweep) {
            const auto nodes = cli::parse_node_list(sweep_nodes);
            const auto cfg = load_config(sweep_config);
            const auto res = cli::cmd_sweep(cfg, nodes);
            const fs::path out = sweep_out.empty() ? cfg.output_dir / "sweep.csv" : fs::path(sweep_out);
            if (out.has_parent_path()) {
                fs::create_directories(out.parent_path());
            }
            std::ofstream f(out, std::ios::binary | std::ios::trunc);
            if (!f) {
                throw Error("cannot write " + out.string());
            }
            f << res.csv;
            std::cout << res.anchors << "wrote " << out.string() << "\n";
        } else if (*explore) {
            std::cout << cli::cmd_explore(explore_graph, explore_budget);
        } else if (*node) {
            const auto [host, port] = remote::parse_listen_addr(node_listen);
            remote::NodeAgent agent(mesh::NodeId{node_id}, node_max_vms);
            g_agent = &agent;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::fprintf(stderr, "node %u listening on %s:%d\n", node_id, host.c_str(), port);
            if (!agent.listen(host, port)) {
                g_agent = nullptr;
                throw Error("cannot listen on " + node_listen);
            }
            g_agent = nullptr;
        }
    } catch (const ConfigError &e) {
        std::fprintf(stderr, "andlantis: %s\n", e.what());
        return 2;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "andlantis: %s\n", e.what());
        return 1;
    }
    return 0;
}
