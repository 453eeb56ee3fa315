#include "andlantis/sandbox.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "andlantis/error.hpp"
#include "andlantis/rng.hpp"

namespace andlantis::sandbox {

std::string to_string(VmLifecycle s) {
    switch (s) {
    case VmLifecycle::Created:
        return "CREATED";
    case VmLifecycle::Booting:
        return "BOOTING";
    case VmLifecycle::AcquiringIp:
        return "ACQUIRING_IP";
    case VmLifecycle::Ready:
        return "READY";
    case VmLifecycle::Installing:
        return "INSTALLING";
    case VmLifecycle::Stimulating:
        return "STIMULATING";
    case VmLifecycle::Collecting:
        return "COLLECTING";
    case VmLifecycle::Stopped:
        return "STOPPED";
    case VmLifecycle::FailedIpTimeout:
        return "FAILED_IP_TIMEOUT";
    }
    return "?";
}

bool is_terminal(VmLifecycle s) noexcept {
    return s == VmLifecycle::Stopped || s == VmLifecycle::FailedIpTimeout;
}

bool is_valid_transition(VmLifecycle from, VmLifecycle to) noexcept {
    if (is_terminal(from)) {
        return false;
    }
    if (from == VmLifecycle::AcquiringIp && to == VmLifecycle::FailedIpTimeout) {
        return true;
    }
    if (to == VmLifecycle::Stopped && (from == VmLifecycle::Created || from == VmLifecycle::Ready)) {
        return true;
    }
    if (to == VmLifecycle::FailedIpTimeout) {
        return false;
    }
    return static_cast<int>(to) == static_cast<int>(from) + 1;
}

forensics::NetSummary summarize(const std::vector<NetLogEntry> &log) {
    forensics::NetSummary s;
    std::set<std::string> hosts;
    for (const auto &e : log) {
        if (e.direction == Direction::Request) {
            ++s.requests;
            hosts.insert(e.host);
        } else {
            ++s.responses;
        }
    }
    s.hosts.assign(hosts.begin(), hosts.end());
    return s;
}

NetLogEntry NetResponder::respond(const NetLogEntry &request) const {
    NetLogEntry r;
    r.timestamp_s = request.timestamp_s;
    r.direction = Direction::Response;
    r.protocol = request.protocol;
    r.host = request.host;
    switch (request.protocol) {
    case Protocol::Dns:
        r.payload_tag = std::string(kDnsAnswer);
        break;
    case Protocol::Http:
        r.payload_tag = "HTTP/1.1 200 OK inetsim-default.html";
        break;
    case Protocol::Smtp:
        r.payload_tag = "250 2.0.0 Ok: queued";
        break;
    case Protocol::Other:
        r.payload_tag = "refused";
        break;
    }
    r.byte_count = static_cast<std::int64_t>(r.payload_tag.size());
    return r;
}

SandboxPair SandboxPair::spawn(std::string app_id, const BaselineImage *baseline, std::uint64_t seed) {
    if (baseline == nullptr) {
        throw ConfigError("spawn_pair: no baseline image configured");
    }
    SandboxPair p;
    p.app_id_ = std::move(app_id);
    p.seed_ = seed;
    p.epoch_s_ = baseline->epoch_s;
    p.fs_ = baseline->fs;
    return p;
}

void SandboxPair::move_to(VmLifecycle next) {
    if (!is_valid_transition(state_, next)) {
        throw ContractViolation("sandbox: illegal transition " + to_string(state_) + " -> " + to_string(next));
    }
    transitions_.emplace_back(state_, next);
    state_ = next;
}

void SandboxPair::require_stimulating(const char *op) const {
    if (sealed_) {
        throw SealedError(std::string(op) + ": sandbox logs are sealed");
    }
    if (state_ != VmLifecycle::Stimulating) {
        throw ContractViolation(std::string(op) + ": pair is " + to_string(state_) + ", not STIMULATING");
    }
}

void SandboxPair::advance_to(double t) {
    if (t < now_) {
        throw ContractViolation("sandbox: events must be delivered in time order");
    }
    now_ = t;
}

VmLifecycle SandboxPair::boot(double ip_fail_prob, std::uint64_t seed, const BootTiming &timing) {
    if (state_ != VmLifecycle::Created) {
        throw ContractViolation("boot: pair is " + to_string(state_) + ", not CREATED");
    }
    Rng rng(seed);
    const bool fails = rng.bernoulli(ip_fail_prob);
    move_to(VmLifecycle::Booting);
    advance_to(now_ + timing.boot_wait_s);
    move_to(VmLifecycle::AcquiringIp);
    advance_to(now_ + timing.ip_wait_s);
    move_to(fails ? VmLifecycle::FailedIpTimeout : VmLifecycle::Ready);
    return state_;
}

forensics::FileOwner SandboxPair::owner() const {
    if (root_) {
        return {0, 0, 0100644};
    }
    const std::int64_t uid = kAppUidBase + static_cast<std::int64_t>(fnv1a(app_id_) % 1000);
    return {uid, uid, 0100660};
}

FiredAction SandboxPair::apply(const Action &a, std::string source) {
    FiredAction f{now_, std::move(source), a, true, {}};
    const auto stamp = epoch_s_ + static_cast<std::int64_t>(std::floor(now_));
    auto is_protected = [this](const std::string &path) {
        return !root_ && std::string_view(path).starts_with(kProtectedPrefix);
    };
    std::visit(
        [&](const auto &x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, CreateFile> || std::is_same_v<T, ModifyFile>) {
                if (is_protected(x.path)) {
                    f.applied = false;
                    f.note = "permission denied";
                    return;
                }
                const std::uint32_t gen = ++generation_[x.path];
                fs_.write(x.path, synthesize_content(x.content_tag, x.path, gen), owner(), stamp);
            } else if constexpr (std::is_same_v<T, DeleteFile>) {
                if (is_protected(x.path)) {
                    f.applied = false;
                    f.note = "permission denied";
                    return;
                }
                if (!fs_.remove(x.path)) {
                    f.note = "absent";
                }
            } else if constexpr (std::is_same_v<T, NetRequest>) {
                NetLogEntry req{now_,
                                Direction::Request,
                                x.protocol,
                                x.host,
                                x.payload_tag,
                                static_cast<std::int64_t>(x.host.size() + x.payload_tag.size() + 32)};
                net_log_.push_back(req);
                net_log_.push_back(responder_.respond(req));
            } else if constexpr (std::is_same_v<T, EscalateRoot>) {
                root_ = true;
            } else {
                crashed_ = true;
            }
        },
        a);
    fired_.push_back(f);
    return f;
}

void SandboxPair::install_and_launch(const BehaviorModel &model) {
    if (sealed_) {
        throw SealedError("install_and_launch: sandbox logs are sealed");
    }
    if (state_ != VmLifecycle::Ready) {
        throw ContractViolation("install_and_launch: pair is " + to_string(state_) + ", not READY");
    }
    model_ = model;
    move_to(VmLifecycle::Installing);
    for (const auto &rule : model_.rules) {
        if (!std::holds_alternative<OnInstall>(rule.trigger)) {
            continue;
        }
        for (const auto &a : rule.actions) {
            if (crashed_) {
                break;
            }
            apply(a, "install");
        }
    }
    timers_.clear();
    timer_rules_.clear();
    for (std::size_t i = 0; i < model_.rules.size(); ++i) {
        if (const auto *every = std::get_if<Every>(&model_.rules[i].trigger)) {
            timers_.emplace_back(every->period_s, 0);
            timer_rules_.push_back(i);
        }
    }
    move_to(VmLifecycle::Stimulating);
    stim_start_ = now_;
}

std::vector<FiredAction> SandboxPair::fire_ui(std::string_view element_id, double offset_s) {
    require_stimulating("fire_ui");
    advance_to(stim_start_ + offset_s);
    std::vector<FiredAction> out;
    if (crashed_) {
        return out;
    }
    for (const auto &rule : model_.rules) {
        const auto *ui = std::get_if<OnUi>(&rule.trigger);
        if (ui == nullptr || ui->element_id != element_id) {
            continue;
        }
        for (const auto &a : rule.actions) {
            if (crashed_) {
                return out;
            }
            out.push_back(apply(a, "ui:" + ui->element_id));
        }
    }
    return out;
}

std::vector<FiredAction> SandboxPair::run_timers(double elapsed_s) {
    require_stimulating("run_timers");
    struct Due {
        double at;
        std::size_t timer;
    };
    std::vector<Due> due;
    for (std::size_t t = 0; t < timers_.size(); ++t) {
        const auto [period, count] = timers_[t];
        for (std::uint64_t k = count + 1; static_cast<double>(k) * period <= elapsed_s; ++k) {
            due.push_back({static_cast<double>(k) * period, t});
        }
    }
    std::stable_sort(due.begin(), due.end(), [](const Due &a, const Due &b) {
        return a.at != b.at ? a.at < b.at : a.timer < b.timer;
    });
    std::vector<FiredAction> out;
    for (const auto &d : due) {
        if (crashed_) {
            break;
        }
        advance_to(stim_start_ + d.at);
        const auto &rule = model_.rules[timer_rules_[d.timer]];
        for (const auto &a : rule.actions) {
            if (crashed_) {
                break;
            }
            out.push_back(apply(a, "every:" + std::to_string(timer_rules_[d.timer])));
        }
        timers_[d.timer].second += 1;
    }
    advance_to(std::max(now_, stim_start_ + elapsed_s));
    return out;
}

void SandboxPair::record_app_crash(double offset_s) {
    require_stimulating("record_app_crash");
    advance_to(stim_start_ + offset_s);
    if (!crashed_) {
        apply(Crash{}, "ui");
    }
}

SandboxOutcome SandboxPair::stop_and_snapshot() {
    if (sealed_) {
        throw SealedError("stop_and_snapshot: already stopped");
    }
    SandboxOutcome out;
    const auto stamp = epoch_s_ + static_cast<std::int64_t>(std::floor(now_));
    if (state_ == VmLifecycle::Stimulating) {
        move_to(VmLifecycle::Collecting);
        out.snapshot = forensics::snapshot(fs_, stamp);
        move_to(VmLifecycle::Stopped);
    } else {
        if (!is_terminal(state_)) {
            move_to(VmLifecycle::Stopped);
        }
        out.snapshot = forensics::snapshot(fs_, stamp);
    }
    sealed_ = true;
    out.net_log = net_log_;
    out.root_flag = root_;
    out.crashed = crashed_;
    return out;
}

} // namespace andlantis::sandbox
