#include <algorithm>

#include <json.hpp>

#include "andlantis/error.hpp"
#include "andlantis/forensics.hpp"

namespace andlantis::forensics {

using nlohmann::json;

namespace {

json stat_to_json(const StatBlock &s) {
    return json{{"dev", s.dev},         {"ino", s.ino},       {"mode", s.mode},   {"nlink", s.nlink},
                {"uid", s.uid},         {"gid", s.gid},       {"rdev", s.rdev},   {"size", s.size},
                {"blksize", s.blksize}, {"blocks", s.blocks}, {"atime", s.atime}, {"mtime", s.mtime},
                {"ctime", s.ctime}};
}

StatBlock stat_from_json(const json &j) {
    StatBlock s;
    s.dev = j.at("dev").get<std::int64_t>();
    s.ino = j.at("ino").get<std::int64_t>();
    s.mode = j.at("mode").get<std::int64_t>();
    s.nlink = j.at("nlink").get<std::int64_t>();
    s.uid = j.at("uid").get<std::int64_t>();
    s.gid = j.at("gid").get<std::int64_t>();
    s.rdev = j.at("rdev").get<std::int64_t>();
    s.size = j.at("size").get<std::int64_t>();
    s.blksize = j.at("blksize").get<std::int64_t>();
    s.blocks = j.at("blocks").get<std::int64_t>();
    s.atime = j.at("atime").get<std::int64_t>();
    s.mtime = j.at("mtime").get<std::int64_t>();
    s.ctime = j.at("ctime").get<std::int64_t>();
    return s;
}

json record_to_json(const FileRecord &r) {
    json j{{"path", r.path}, {"md5", r.md5}, {"sha1", r.sha1}, {"sha256", r.sha256}, {"stat", stat_to_json(r.stat)}};
    if (r.error) {
        j["error"] = true;
    }
    return j;
}

FileRecord record_from_json(const json &j) {
    FileRecord r;
    r.path = j.at("path").get<std::string>();
    r.md5 = j.at("md5").get<std::string>();
    r.sha1 = j.at("sha1").get<std::string>();
    r.sha256 = j.at("sha256").get<std::string>();
    r.stat = stat_from_json(j.at("stat"));
    r.error = j.value("error", false);
    return r;
}

json pair_to_json(const RecordPair &p) { return json{{"base", record_to_json(p.base)}, {"post", record_to_json(p.post)}}; }

RecordPair pair_from_json(const json &j) { return {record_from_json(j.at("base")), record_from_json(j.at("post"))}; }

std::string tag_of(const ArtifactStore *artifacts, const std::string &path) {
    if (artifacts != nullptr) {
        auto it = artifacts->find(path);
        if (it != artifacts->end()) {
            return classify(it->second);
        }
    }
    return classify({});
}

} // namespace

ReportDocument build_report(const ReportInputs &in) {
    ReportDocument doc;
    doc.job_id = in.job_id;
    doc.root_flag = in.root_flag;
    doc.net_summary = in.net_summary;
    std::sort(doc.net_summary.hosts.begin(), doc.net_summary.hosts.end());
    doc.net_summary.hosts.erase(std::unique(doc.net_summary.hosts.begin(), doc.net_summary.hosts.end()),
                                doc.net_summary.hosts.end());
    doc.interaction_steps = in.interaction_steps;
    doc.crash = in.crash;
    if (in.diff != nullptr) {
        for (const auto &rec : in.diff->created) {
            doc.created.push_back({rec, tag_of(in.artifacts, rec.path)});
        }
        for (const auto &pair : in.diff->modified) {
            doc.modified.push_back({pair, tag_of(in.artifacts, pair.post.path)});
        }
        doc.metadata_changed = in.diff->metadata_changed;
        doc.deleted = in.diff->deleted;
    }
    return doc;
}

std::string serialize_report(const ReportDocument &doc) {
    json created = json::array();
    for (const auto &t : doc.created) {
        json r = record_to_json(t.record);
        r["type_tag"] = t.type_tag;
        created.push_back(std::move(r));
    }
    json modified = json::array();
    for (const auto &t : doc.modified) {
        json r = pair_to_json(t.pair);
        r["type_tag"] = t.type_tag;
        modified.push_back(std::move(r));
    }
    json meta = json::array();
    for (const auto &p : doc.metadata_changed) {
        meta.push_back(pair_to_json(p));
    }
    json deleted = json::array();
    for (const auto &r : doc.deleted) {
        deleted.push_back(record_to_json(r));
    }
    json out{{"job_id", doc.job_id},
             {"root_flag", doc.root_flag},
             {"created", std::move(created)},
             {"modified", std::move(modified)},
             {"metadata_changed", std::move(meta)},
             {"deleted", std::move(deleted)},
             {"net_summary",
              {{"requests", doc.net_summary.requests},
               {"responses", doc.net_summary.responses},
               {"hosts", doc.net_summary.hosts}}},
             {"interaction_steps", doc.interaction_steps},
             {"crash", doc.crash}};
    return out.dump(2) + "\n";
}

ReportDocument parse_report(std::string_view json_text) {
    try {
        const json j = json::parse(json_text);
        ReportDocument doc;
        doc.job_id = j.at("job_id").get<std::string>();
        doc.root_flag = j.at("root_flag").get<bool>();
        for (const auto &r : j.at("created")) {
            doc.created.push_back({record_from_json(r), r.at("type_tag").get<std::string>()});
        }
        for (const auto &r : j.at("modified")) {
            doc.modified.push_back({pair_from_json(r), r.at("type_tag").get<std::string>()});
        }
        for (const auto &r : j.at("metadata_changed")) {
            doc.metadata_changed.push_back(pair_from_json(r));
        }
        for (const auto &r : j.at("deleted")) {
            doc.deleted.push_back(record_from_json(r));
        }
        const auto &net = j.at("net_summary");
        doc.net_summary.requests = net.at("requests").get<std::int64_t>();
        doc.net_summary.responses = net.at("responses").get<std::int64_t>();
        doc.net_summary.hosts = net.at("hosts").get<std::vector<std::string>>();
        doc.interaction_steps = j.at("interaction_steps").get<std::int64_t>();
        doc.crash = j.at("crash").get<bool>();
        return doc;
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
}

std::string serialize_record(const FileRecord &rec) { return record_to_json(rec).dump(); }

FileRecord parse_record(std::string_view json_text) {
    try {
        return record_from_json(json::parse(json_text));
    } catch (const json::exception &e) {
        throw ConfigError(std::string("malformed record: ") + e.what());
    }
}

} // namespace andlantis::forensics
