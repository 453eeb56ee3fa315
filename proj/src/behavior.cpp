#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "andlantis/error.hpp"
#include "andlantis/rng.hpp"
#include "andlantis/sandbox.hpp"

namespace andlantis::sandbox {

using nlohmann::json;

std::string to_string(Protocol p) {
    switch (p) {
    case Protocol::Dns:
        return "DNS";
    case Protocol::Http:
        return "HTTP";
    case Protocol::Smtp:
        return "SMTP";
    case Protocol::Other:
        return "other";
    }
    return "other";
}

Protocol protocol_from_string(std::string_view s) {
    if (s == "DNS" || s == "dns") {
        return Protocol::Dns;
    }
    if (s == "HTTP" || s == "http") {
        return Protocol::Http;
    }
    if (s == "SMTP" || s == "smtp") {
        return Protocol::Smtp;
    }
    return Protocol::Other;
}

namespace {

std::string read_text(const std::filesystem::path &file, const char *what) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw ConfigError(std::string(what) + " fixture not found: " + file.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

Action action_from_json(const json &j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "create_file") {
        return CreateFile{j.at("path").get<std::string>(), j.value("content_tag", std::string("text"))};
    }
    if (kind == "modify_file") {
        return ModifyFile{j.at("path").get<std::string>(), j.value("content_tag", std::string("text"))};
    }
    if (kind == "delete_file") {
        return DeleteFile{j.at("path").get<std::string>()};
    }
    if (kind == "net_request") {
        return NetRequest{j.at("host").get<std::string>(),
                          protocol_from_string(j.value("protocol", std::string("HTTP"))),
                          j.value("payload_tag", std::string())};
    }
    if (kind == "escalate_root") {
        return EscalateRoot{};
    }
    if (kind == "crash") {
        return Crash{};
    }
    throw ConfigError("unknown action kind '" + kind + "'");
}

json action_to_json(const Action &a) {
    return std::visit(
        [](const auto &x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, CreateFile>) {
                return {{"kind", "create_file"}, {"path", x.path}, {"content_tag", x.content_tag}};
            } else if constexpr (std::is_same_v<T, ModifyFile>) {
                return {{"kind", "modify_file"}, {"path", x.path}, {"content_tag", x.content_tag}};
            } else if constexpr (std::is_same_v<T, DeleteFile>) {
                return {{"kind", "delete_file"}, {"path", x.path}};
            } else if constexpr (std::is_same_v<T, NetRequest>) {
                return {{"kind", "net_request"},
                        {"host", x.host},
                        {"protocol", to_string(x.protocol)},
                        {"payload_tag", x.payload_tag}};
            } else if constexpr (std::is_same_v<T, EscalateRoot>) {
                return {{"kind", "escalate_root"}};
            } else {
                return {{"kind", "crash"}};
            }
        },
        a);
}

Trigger trigger_from_json(const json &j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "on_install") {
        return OnInstall{};
    }
    if (kind == "on_ui") {
        return OnUi{j.at("element_id").get<std::string>()};
    }
    if (kind == "every") {
        return Every{j.at("period_s").get<double>()};
    }
    throw ConfigError("unknown trigger kind '" + kind + "'");
}

json trigger_to_json(const Trigger &t) {
    if (std::holds_alternative<OnInstall>(t)) {
        return {{"kind", "on_install"}};
    }
    if (const auto *ui = std::get_if<OnUi>(&t)) {
        return {{"kind", "on_ui"}, {"element_id", ui->element_id}};
    }
    return {{"kind", "every"}, {"period_s", std::get<Every>(t).period_s}};
}

} // namespace

std::string describe(const Action &a) { return action_to_json(a).dump(); }

void BehaviorModel::validate() const {
    if (app_id.empty()) {
        throw ConfigError("behavior model without app_id");
    }
    for (const auto &rule : rules) {
        if (const auto *every = std::get_if<Every>(&rule.trigger); every && !(every->period_s > 0.0)) {
            throw ConfigError(app_id + ": every.period_s must be positive");
        }
        for (const auto &a : rule.actions) {
            std::visit(
                [&](const auto &x) {
                    using T = std::decay_t<decltype(x)>;
                    if constexpr (std::is_same_v<T, CreateFile> || std::is_same_v<T, ModifyFile> ||
                                  std::is_same_v<T, DeleteFile>) {
                        try {
                            forensics::require_absolute(x.path);
                        } catch (const ContractViolation &e) {
                            throw ConfigError(app_id + ": " + e.what());
                        }
                    }
                },
                a);
        }
    }
}

BehaviorModel BehaviorModel::from_json(std::string_view text) {
    BehaviorModel m;
    try {
        const json j = json::parse(text);
        m.app_id = j.at("app_id").get<std::string>();
        for (const auto &r : j.value("rules", json::array())) {
            Rule rule{trigger_from_json(r.at("trigger")), {}};
            for (const auto &a : r.value("actions", json::array())) {
                rule.actions.push_back(action_from_json(a));
            }
            m.rules.push_back(std::move(rule));
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed behavior model: ") + e.what());
    }
    m.validate();
    return m;
}

BehaviorModel BehaviorModel::load(const std::filesystem::path &file) {
    return from_json(read_text(file, "behavior model"));
}

std::string BehaviorModel::to_json() const {
    json rules_j = json::array();
    for (const auto &r : rules) {
        json actions = json::array();
        for (const auto &a : r.actions) {
            actions.push_back(action_to_json(a));
        }
        rules_j.push_back({{"trigger", trigger_to_json(r.trigger)}, {"actions", std::move(actions)}});
    }
    return json{{"app_id", app_id}, {"rules", std::move(rules_j)}}.dump(2) + "\n";
}

std::string synthesize_content(std::string_view tag, std::string_view path, std::uint32_t generation) {
    const std::uint64_t seed = derive_seed(fnv1a(tag), {fnv1a(path), generation});
    Rng rng(seed);
    auto random_bytes = [&](std::string &out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(static_cast<char>(rng.next_u64() & 0xff));
        }
    };
    std::string out;
    if (tag == "empty") {
        return out;
    }
    if (tag == "apk") {
        out.assign("PK\x03\x04\x14\x00\x08\x08\x08\x00", 10);
        random_bytes(out, 20);
        out += "AndroidManifest.xml";
        random_bytes(out, 224);
        return out;
    }
    if (tag == "sqlite") {
        out.assign("SQLite format 3\0", 16);
        random_bytes(out, 240);
        return out;
    }
    if (tag == "elf") {
        out.assign("\x7f" "ELF\x01\x01\x01\x00", 8);
        random_bytes(out, 248);
        return out;
    }
    const std::uint64_t salt = rng.next_u64();
    char line[96];
    for (int i = 0; i < 4; ++i) {
        std::snprintf(line, sizeof line, "%.*s %016llx %u:%d\n", static_cast<int>(std::min<std::size_t>(tag.size(), 40)),
                      tag.data(), static_cast<unsigned long long>(salt), generation, i);
        out += line;
    }
    return out;
}

BaselineImage BaselineImage::from_json(std::string_view text) {
    BaselineImage img;
    try {
        const json j = json::parse(text);
        img.epoch_s = j.value("epoch_s", std::int64_t{0});
        for (const auto &d : j.value("dirs", json::array())) {
            img.fs.add_dir(d.get<std::string>());
        }
        for (const auto &f : j.at("files")) {
            const auto path = f.at("path").get<std::string>();
            std::string content = f.contains("content") ? f.at("content").get<std::string>()
                                                        : synthesize_content(f.value("content_tag", std::string("text")),
                                                                             path, 0);
            forensics::FileOwner owner{f.value("uid", std::int64_t{0}), f.value("gid", std::int64_t{0}),
                                       f.value("mode", std::int64_t{0100644})};
            img.fs.write(path, std::move(content), owner, img.epoch_s);
        }
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed baseline image: ") + e.what());
    } catch (const ContractViolation &e) {
        throw ConfigError(std::string("baseline image: ") + e.what());
    }
    return img;
}

BaselineImage BaselineImage::load(const std::filesystem::path &file) {
    return from_json(read_text(file, "baseline image"));
}

} // namespace andlantis::sandbox
