#include "andlantis/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "andlantis/error.hpp"

namespace andlantis::config {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Strict reader: every key must be known, every value must have the right
// type. Errors name the dotted field path.
class Section {
public:
    Section(const json &j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw ConfigError("field '" + display() + "': expected an object");
        }
    }

    void finish() const {
        for (const auto &[key, _] : j_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError("field '" + field(key) + "': unknown key");
            }
        }
    }

    bool has(const std::string &key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    double number(const std::string &key, double fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto &v = j_.at(key);
        if (!v.is_number()) {
            throw ConfigError("field '" + field(key) + "': expected a number");
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            throw ConfigError("field '" + field(key) + "': must be finite");
        }
        return d;
    }

    std::int64_t integer(const std::string &key, std::int64_t fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto &v = j_.at(key);
        if (!v.is_number_integer()) {
            throw ConfigError("field '" + field(key) + "': expected an integer");
        }
        return v.get<std::int64_t>();
    }

    std::uint64_t unsigned_integer(const std::string &key, std::uint64_t fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto &v = j_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigError("field '" + field(key) + "': expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string &key, bool fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto &v = j_.at(key);
        if (!v.is_boolean()) {
            throw ConfigError("field '" + field(key) + "': expected true or false");
        }
        return v.get<bool>();
    }

    std::string string(const std::string &key, const std::string &fallback) {
        if (!has(key)) {
            return fallback;
        }
        const auto &v = j_.at(key);
        if (!v.is_string()) {
            throw ConfigError("field '" + field(key) + "': expected a string");
        }
        return v.get<std::string>();
    }

    const json &array(const std::string &key) {
        const auto &v = j_.at(key);
        if (!v.is_array()) {
            throw ConfigError("field '" + field(key) + "': expected an array");
        }
        return v;
    }

    const json &raw(const std::string &key) const { return j_.at(key); }
    std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json &j_;
    std::string path_;
    std::set<std::string> seen_;
};

fs::path resolve(const fs::path &base, const std::string &p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

void require_file(const fs::path &p, const std::string &field) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) {
        throw ConfigError("field '" + field + "': file not found: " + p.string());
    }
}

} // namespace

std::string read_file(const fs::path &file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot read " + file.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ui::UiGraph load_ui_graph(const fs::path &file) {
    try {
        return ui::UiGraph::from_json(read_file(file));
    } catch (const ConfigError &e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

std::optional<std::uint64_t> seed_from_env() {
    const char *raw = std::getenv(kSeedEnv);
    if (raw == nullptr || *raw == '\0') {
        return std::nullopt;
    }
    errno = 0;
    char *end = nullptr;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (errno != 0 || *end != '\0' || *raw == '-') {
        throw ConfigError(std::string(kSeedEnv) + ": not an unsigned integer: '" + raw + "'");
    }
    return static_cast<std::uint64_t>(v);
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text, const fs::path &base_dir) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error &e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ExperimentConfig c;
    Section top(root, "");
    c.seed = top.unsigned_integer("seed", kDefaultSeed);
    c.ip_fail_prob = top.number("ip_fail_prob", 0.0);
    c.workers = top.unsigned_integer("workers", 0);
    if (top.has("output_dir")) {
        c.output_dir = resolve(base_dir, top.string("output_dir", ""));
    }

    if (top.has("cluster")) {
        Section s(top.raw("cluster"), "cluster");
        c.cluster.n_nodes = static_cast<int>(s.integer("n_nodes", c.cluster.n_nodes));
        c.cluster.vms_per_node = static_cast<int>(s.integer("vms_per_node", c.cluster.vms_per_node));
        c.cluster.node_ram_mb = s.unsigned_integer("node_ram_mb", c.cluster.node_ram_mb);
        if (s.has("node_failure_ids")) {
            for (const auto &v : s.array("node_failure_ids")) {
                if (!v.is_number_unsigned()) {
                    throw ConfigError("field 'cluster.node_failure_ids': expected non-negative integers");
                }
                c.cluster.node_failure_ids.insert(v.get<std::uint32_t>());
            }
        }
        if (s.has("node_leaves")) {
            std::size_t i = 0;
            for (const auto &v : s.array("node_leaves")) {
                Section l(v, "cluster.node_leaves[" + std::to_string(i++) + "]");
                NodeLeave nl;
                nl.node = static_cast<std::uint32_t>(l.unsigned_integer("node", 0));
                nl.at_s = l.number("at_s", 0.0);
                if (l.has("rejoin_at_s")) {
                    nl.rejoin_at_s = l.number("rejoin_at_s", 0.0);
                }
                l.finish();
                c.node_leaves.push_back(nl);
            }
        }
        s.finish();
    }

    bool fixed_given = false;
    if (top.has("workload")) {
        Section s(top.raw("workload"), "workload");
        c.workload.n_jobs = static_cast<int>(s.integer("n_jobs", c.workload.n_jobs));
        c.workload.stimulate_s = s.number("stimulate_s", c.workload.stimulate_s);
        fixed_given = s.has("fixed_wait_s");
        c.workload.fixed_wait_s = s.number("fixed_wait_s", c.workload.fixed_wait_s);
        c.workload.wait_jitter_s = s.number("wait_jitter_s", c.workload.wait_jitter_s);
        c.workload.ram_req_mb = s.unsigned_integer("ram_req_mb", c.workload.ram_req_mb);
        c.workload.retry_limit = static_cast<int>(s.integer("retry_limit", c.workload.retry_limit));
        if (s.has("apps")) {
            c.apps.clear();
            for (const auto &v : s.array("apps")) {
                if (!v.is_string()) {
                    throw ConfigError("field 'workload.apps': expected strings");
                }
                c.apps.push_back(v.get<std::string>());
            }
        }
        s.finish();
    }

    if (top.has("comm")) {
        Section s(top.raw("comm"), "comm");
        c.comm.per_job_comm_s = s.number("per_job_comm_s", c.comm.per_job_comm_s);
        c.comm.head_bandwidth_mbps = s.number("head_bandwidth_mbps", c.comm.head_bandwidth_mbps);
        s.finish();
    }

    bool waits_given = false;
    if (top.has("schedule")) {
        Section s(top.raw("schedule"), "schedule");
        if (s.has("max_vms_per_node")) {
            const auto v = static_cast<int>(s.integer("max_vms_per_node", c.cluster.vms_per_node));
            if (top.has("cluster") && root.at("cluster").contains("vms_per_node") && v != c.cluster.vms_per_node) {
                throw ConfigError("field 'schedule.max_vms_per_node': disagrees with cluster.vms_per_node");
            }
            c.cluster.vms_per_node = v;
        }
        c.schedule.load_threshold = s.number("load_threshold", c.schedule.load_threshold);
        c.schedule.retry_timeout_s = s.number("retry_timeout_s", c.schedule.retry_timeout_s);
        c.schedule.broadcast_timeout_s = s.number("broadcast_timeout_s", c.schedule.broadcast_timeout_s);
        c.schedule.global_deadline_s = s.number("global_deadline_s", c.schedule.global_deadline_s);
        c.schedule.wake_on_completion = s.boolean("wake_on_completion", c.schedule.wake_on_completion);
        if (s.has("ip_failure_seen")) {
            try {
                c.schedule.ip_failure_seen = sched::ip_failure_seen_from_string(s.string("ip_failure_seen", ""));
            } catch (const ConfigError &e) {
                throw ConfigError(std::string("field 'schedule.ip_failure_seen': ") + e.what());
            }
        }
        waits_given = s.has("boot_wait_s") || s.has("ip_wait_s") || s.has("forensics_wait_s");
        c.boot_wait_s = s.number("boot_wait_s", c.boot_wait_s);
        c.ip_wait_s = s.number("ip_wait_s", c.ip_wait_s);
        c.forensics_wait_s = s.number("forensics_wait_s", c.forensics_wait_s);
        s.finish();
    }
    const double total = c.boot_wait_s + c.ip_wait_s + c.forensics_wait_s;
    if (waits_given && fixed_given) {
        if (std::abs(total - c.workload.fixed_wait_s) > 1e-6) {
            throw ConfigError("field 'workload.fixed_wait_s': must equal schedule boot_wait_s + ip_wait_s + "
                              "forensics_wait_s");
        }
    } else if (waits_given) {
        c.workload.fixed_wait_s = total;
    } else {
        // keep the 60/60/100 proportions for whatever total was asked for
        const double k = c.workload.fixed_wait_s / 220.0;
        c.boot_wait_s = 60.0 * k;
        c.ip_wait_s = 60.0 * k;
        c.forensics_wait_s = c.workload.fixed_wait_s - c.boot_wait_s - c.ip_wait_s;
    }

    if (top.has("stimulation")) {
        Section s(top.raw("stimulation"), "stimulation");
        c.explore_budget = s.unsigned_integer("explore_budget", c.explore_budget);
        c.interaction_interval_s = s.number("interaction_interval_s", c.interaction_interval_s);
        s.finish();
    }

    if (top.has("fixtures")) {
        Section s(top.raw("fixtures"), "fixtures");
        if (s.has("baseline")) {
            c.baseline = resolve(base_dir, s.string("baseline", ""));
            require_file(*c.baseline, "fixtures.baseline");
        }
        if (s.has("apps")) {
            const json &apps = s.raw("apps");
            if (!apps.is_object()) {
                throw ConfigError("field 'fixtures.apps': expected an object");
            }
            for (const auto &[name, v] : apps.items()) {
                const std::string path = "fixtures.apps." + name;
                if (name == worker::AnalysisWorker::kEmptyApp) {
                    throw ConfigError("field '" + path + "': the name 'empty' is reserved");
                }
                Section a(v, path);
                AppPaths p;
                if (!a.has("behavior")) {
                    throw ConfigError("field '" + path + ".behavior': missing");
                }
                p.behavior = resolve(base_dir, a.string("behavior", ""));
                require_file(p.behavior, path + ".behavior");
                if (a.has("ui")) {
                    p.ui = resolve(base_dir, a.string("ui", ""));
                    require_file(*p.ui, path + ".ui");
                }
                a.finish();
                c.fixtures.emplace(name, std::move(p));
            }
        }
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path &file) {
    const std::string text = read_file(file);
    try {
        return from_json(text, file.parent_path());
    } catch (const ConfigError &e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void ExperimentConfig::validate() const {
    if (ip_fail_prob < 0.0 || ip_fail_prob > 1.0) {
        throw ConfigError("field 'ip_fail_prob': must be in [0, 1]");
    }
    cluster.validate();
    workload.validate();
    comm.validate();
    schedule_config().validate();
    worker_settings().validate();
    if (apps.empty()) {
        throw ConfigError("field 'workload.apps': must not be empty");
    }
    for (const auto &a : apps) {
        if (a != worker::AnalysisWorker::kEmptyApp && !fixtures.contains(a)) {
            throw ConfigError("field 'workload.apps': no fixture named '" + a + "'");
        }
    }
    for (const auto &l : node_leaves) {
        if (l.node == 0 || static_cast<int>(l.node) > cluster.n_nodes) {
            throw ConfigError("field 'cluster.node_leaves': node " + std::to_string(l.node) + " out of range");
        }
        if (l.at_s < 0.0 || (l.rejoin_at_s && *l.rejoin_at_s < l.at_s)) {
            throw ConfigError("field 'cluster.node_leaves': times must be non-negative and rejoin after leave");
        }
    }
}

std::vector<sched::Job> ExperimentConfig::jobs() const {
    std::vector<sched::Job> out;
    out.reserve(static_cast<std::size_t>(workload.n_jobs));
    for (int i = 1; i <= workload.n_jobs; ++i) {
        sched::Job j;
        j.id = sched::JobId{static_cast<std::uint64_t>(i)};
        j.app_ref = apps[static_cast<std::size_t>(i - 1) % apps.size()];
        j.stimulate_s = workload.stimulate_s;
        j.ram_req_mb = workload.ram_req_mb;
        j.retry_limit = workload.retry_limit;
        out.push_back(std::move(j));
    }
    return out;
}

worker::WorkerSettings ExperimentConfig::worker_settings() const {
    worker::WorkerSettings w;
    w.ip_fail_prob = ip_fail_prob;
    w.seed = seed;
    w.boot.boot_wait_s = boot_wait_s;
    w.boot.ip_wait_s = ip_wait_s;
    w.forensics_wait_s = forensics_wait_s;
    w.wait_jitter_s = workload.wait_jitter_s;
    w.explore_budget = explore_budget;
    w.interaction_interval_s = interaction_interval_s;
    return w;
}

sched::ScheduleConfig ExperimentConfig::schedule_config() const {
    sched::ScheduleConfig s = schedule;
    s.max_vms_per_node = cluster.vms_per_node;
    s.fixed_wait_s = workload.fixed_wait_s;
    return s;
}

perf::SimOptions ExperimentConfig::sim_options() const {
    perf::SimOptions o;
    o.schedule = schedule_config();
    if (workload.fixed_wait_s > 0.0) {
        o.boot_share = boot_wait_s / workload.fixed_wait_s;
        o.ip_share = ip_wait_s / workload.fixed_wait_s;
    }
    o.explore_budget = explore_budget;
    return o;
}

FixtureSet load_fixtures(const ExperimentConfig &cfg) {
    FixtureSet out;
    out.baseline = cfg.baseline ? std::make_shared<const sandbox::BaselineImage>(sandbox::BaselineImage::load(*cfg.baseline))
                                : perf::builtin_baseline();
    for (const auto &[name, paths] : cfg.fixtures) {
        worker::AppFixture f;
        f.model = sandbox::BehaviorModel::load(paths.behavior);
        if (paths.ui) {
            f.ui = load_ui_graph(*paths.ui);
        }
        out.apps.emplace(name, std::move(f));
    }
    return out;
}

} // namespace andlantis::config
