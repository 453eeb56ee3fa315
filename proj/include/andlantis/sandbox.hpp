#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "andlantis/forensics.hpp"
#include "andlantis/vfs.hpp"

namespace andlantis::sandbox {

enum class VmLifecycle {
    Created,
    Booting,
    AcquiringIp,
    Ready,
    Installing,
    Stimulating,
    Collecting,
    Stopped,
    FailedIpTimeout,
};

std::string to_string(VmLifecycle s);
bool is_terminal(VmLifecycle s) noexcept;
/// Forward by one step, ACQUIRING_IP -> FAILED_IP_TIMEOUT, or teardown to
/// STOPPED from a state where the app never started.
bool is_valid_transition(VmLifecycle from, VmLifecycle to) noexcept;

enum class Protocol { Dns, Http, Smtp, Other };
enum class Direction { Request, Response };

std::string to_string(Protocol p);
Protocol protocol_from_string(std::string_view s);

struct NetLogEntry {
    double timestamp_s = 0.0;
    Direction direction = Direction::Request;
    Protocol protocol = Protocol::Other;
    std::string host;
    std::string payload_tag;
    std::int64_t byte_count = 0;

    bool operator==(const NetLogEntry &) const = default;
};

forensics::NetSummary summarize(const std::vector<NetLogEntry> &log);

// Behavior model ------------------------------------------------------------

struct CreateFile {
    std::string path;
    std::string content_tag;
    bool operator==(const CreateFile &) const = default;
};
struct ModifyFile {
    std::string path;
    std::string content_tag;
    bool operator==(const ModifyFile &) const = default;
};
struct DeleteFile {
    std::string path;
    bool operator==(const DeleteFile &) const = default;
};
struct NetRequest {
    std::string host;
    Protocol protocol = Protocol::Http;
    std::string payload_tag;
    bool operator==(const NetRequest &) const = default;
};
struct EscalateRoot {
    bool operator==(const EscalateRoot &) const = default;
};
struct Crash {
    bool operator==(const Crash &) const = default;
};

using Action = std::variant<CreateFile, ModifyFile, DeleteFile, NetRequest, EscalateRoot, Crash>;

struct OnInstall {
    bool operator==(const OnInstall &) const = default;
};
struct OnUi {
    std::string element_id;
    bool operator==(const OnUi &) const = default;
};
struct Every {
    double period_s = 0.0;
    bool operator==(const Every &) const = default;
};

using Trigger = std::variant<OnInstall, OnUi, Every>;

struct Rule {
    Trigger trigger;
    std::vector<Action> actions;
    bool operator==(const Rule &) const = default;
};

/// Scripted stand-in for an application.
struct BehaviorModel {
    std::string app_id;
    std::vector<Rule> rules;

    void validate() const;
    static BehaviorModel from_json(std::string_view text);
    static BehaviorModel load(const std::filesystem::path &file);
    std::string to_json() const;
    bool operator==(const BehaviorModel &) const = default;
};

std::string describe(const Action &a);

// Baseline image --------------------------------------------------------------

/// Deterministic synthetic bytes for a content tag. "apk" starts with the
/// ZIP local-file-header magic, "sqlite" with the SQLite header, "elf" with
/// the ELF magic, "empty" is empty; anything else is printable text.
std::string synthesize_content(std::string_view tag, std::string_view path, std::uint32_t generation);

struct BaselineImage {
    forensics::VirtualFs fs;
    std::int64_t epoch_s = 0;

    static BaselineImage from_json(std::string_view text);
    /// Throws ConfigError when the file is missing or malformed.
    static BaselineImage load(const std::filesystem::path &file);
};

// Sandbox pair -----------------------------------------------------------------

struct BootTiming {
    double boot_wait_s = 60.0;
    double ip_wait_s = 60.0;
};

struct FiredAction {
    double at_s = 0.0;  // pair-local time
    std::string source; // "install", "ui:<element>", "every:<rule index>"
    Action action;
    bool applied = true;
    std::string note;

    bool operator==(const FiredAction &) const = default;
};

/// Fake internet-service responder paired with the analysis VM.
class NetResponder {
public:
    static constexpr std::string_view kDnsAnswer = "A 10.0.2.2";

    /// Canned, deterministic answer; never drops a request.
    NetLogEntry respond(const NetLogEntry &request) const;
};

struct SandboxOutcome {
    forensics::FsSnapshot snapshot;
    std::vector<NetLogEntry> net_log;
    bool root_flag = false;
    bool crashed = false;
};

/// Analysis VM + responder. Confined to one worker; not thread-safe.
/// All times are pair-local seconds since spawn.
class SandboxPair {
public:
    static constexpr std::string_view kProtectedPrefix = "/system/";
    static constexpr std::int64_t kAppUidBase = 10000;

    /// Both instances CREATED, filesystem copied from the baseline. Throws
    /// ConfigError when `baseline` is null.
    static SandboxPair spawn(std::string app_id, const BaselineImage *baseline, std::uint64_t seed);

    /// READY with probability 1 - ip_fail_prob, else FAILED_IP_TIMEOUT; a
    /// pure function of `seed`. Either way takes boot_wait + ip_wait.
    VmLifecycle boot(double ip_fail_prob, std::uint64_t seed, const BootTiming &timing = {});

    /// READY -> INSTALLING -> STIMULATING. Fires ON_INSTALL rules and arms
    /// EVERY timers relative to this instant.
    void install_and_launch(const BehaviorModel &model);

    /// ON_UI rules bound to `element_id`, at `offset_s` into stimulation.
    std::vector<FiredAction> fire_ui(std::string_view element_id, double offset_s);

    /// Fire every EVERY(period) occurrence at k * period <= elapsed_s not yet
    /// fired, in timestamp order (ties by rule order).
    std::vector<FiredAction> run_timers(double elapsed_s);

    /// The app crashed from the UI side at `offset_s`; nothing fires after.
    void record_app_crash(double offset_s);

    /// Freeze the filesystem and seal all logs.
    SandboxOutcome stop_and_snapshot();

    VmLifecycle state() const noexcept { return state_; }
    const std::string &app_id() const noexcept { return app_id_; }
    const forensics::VirtualFs &fs() const noexcept { return fs_; }
    const std::vector<NetLogEntry> &net_log() const noexcept { return net_log_; }
    const std::vector<FiredAction> &fired() const noexcept { return fired_; }
    const std::vector<std::pair<VmLifecycle, VmLifecycle>> &transitions() const noexcept { return transitions_; }
    bool root_flag() const noexcept { return root_; }
    bool crashed() const noexcept { return crashed_; }
    bool sealed() const noexcept { return sealed_; }
    double now_s() const noexcept { return now_; }
    double stimulation_start_s() const noexcept { return stim_start_; }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    SandboxPair() = default;

    void move_to(VmLifecycle next);
    void require_stimulating(const char *op) const;
    void advance_to(double t);
    FiredAction apply(const Action &a, std::string source);
    forensics::FileOwner owner() const;

    std::string app_id_;
    std::uint64_t seed_ = 0;
    std::int64_t epoch_s_ = 0;
    VmLifecycle state_ = VmLifecycle::Created;
    forensics::VirtualFs fs_;
    NetResponder responder_;
    std::vector<NetLogEntry> net_log_;
    std::vector<FiredAction> fired_;
    std::vector<std::pair<VmLifecycle, VmLifecycle>> transitions_;
    std::map<std::string, std::uint32_t> generation_;
    BehaviorModel model_;
    std::vector<std::pair<double, std::uint64_t>> timers_; // (period, times fired), by rule index
    std::vector<std::size_t> timer_rules_;
    bool root_ = false;
    bool crashed_ = false;
    bool sealed_ = false;
    double now_ = 0.0;
    double stim_start_ = 0.0;
};

} // namespace andlantis::sandbox
