#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "andlantis/vfs.hpp"

namespace andlantis::forensics {

/// Per-file forensic record: three digests of the full content plus stat.
struct FileRecord {
    std::string path;
    std::string md5;
    std::string sha1;
    std::string sha256;
    StatBlock stat;
    bool error = false; // content unreadable; digests are of the empty string

    bool operator==(const FileRecord &) const = default;
};

FileRecord make_record(std::string path, std::string_view content, const StatBlock &stat);

struct FsSnapshot {
    std::map<std::string, FileRecord> files; // sorted by path
    std::vector<std::string> other_paths;     // directories and special files, path only
    std::int64_t taken_at = 0;

    bool operator==(const FsSnapshot &) const = default;
};

struct RecordPair {
    FileRecord base;
    FileRecord post;

    bool operator==(const RecordPair &) const = default;
};

struct FsDiff {
    std::vector<FileRecord> created;
    std::vector<FileRecord> deleted;
    std::vector<RecordPair> modified;         // sha256 differs
    std::vector<RecordPair> metadata_changed; // same sha256, stat differs

    bool empty() const noexcept {
        return created.empty() && deleted.empty() && modified.empty() && metadata_changed.empty();
    }
    bool operator==(const FsDiff &) const = default;
};

/// Which stat fields decide metadata_changed. atime is never compared.
/// Portable additionally ignores dev, ino and ctime, which always differ
/// between two distinct directory trees.
enum class MetadataCompare { Full, Portable };

struct DiffOptions {
    MetadataCompare metadata = MetadataCompare::Full;
};

bool same_metadata(const StatBlock &a, const StatBlock &b, MetadataCompare mode);

FsSnapshot snapshot(const VirtualFs &fs, std::int64_t taken_at = 0);

/// Walk a real directory. Paths are recorded relative to `root` with a
/// leading '/'. Unreadable files keep their entry with `error` set.
FsSnapshot snapshot(const std::filesystem::path &root);

FsDiff diff(const FsSnapshot &base, const FsSnapshot &post, DiffOptions opts = {});

using ArtifactStore = std::map<std::string, std::string>;

/// Copies of every created and modified file. Throws IntegrityError when
/// the source no longer holds the content the diff recorded.
ArtifactStore extract_artifacts(const FsDiff &diff, const VirtualFs &post_fs);
ArtifactStore extract_artifacts(const FsDiff &diff, const std::filesystem::path &post_root);

/// Magic-byte sniff: "zip/apk", "sqlite", "text" or "binary".
std::string classify(std::string_view content);

// ---------------------------------------------------------------------------
// Report documents

struct NetSummary {
    std::int64_t requests = 0;
    std::int64_t responses = 0;
    std::vector<std::string> hosts; // sorted, unique

    bool operator==(const NetSummary &) const = default;
};

struct TaggedRecord {
    FileRecord record;
    std::string type_tag;

    bool operator==(const TaggedRecord &) const = default;
};

struct TaggedPair {
    RecordPair pair;
    std::string type_tag;

    bool operator==(const TaggedPair &) const = default;
};

struct ReportDocument {
    std::string job_id;
    bool root_flag = false;
    std::vector<TaggedRecord> created;
    std::vector<TaggedPair> modified;
    std::vector<RecordPair> metadata_changed;
    std::vector<FileRecord> deleted;
    NetSummary net_summary;
    std::int64_t interaction_steps = 0;
    bool crash = false;

    bool operator==(const ReportDocument &) const = default;
};

struct ReportInputs {
    std::string job_id;
    const FsDiff *diff = nullptr;
    const ArtifactStore *artifacts = nullptr; // type tags come from these bytes
    bool root_flag = false;
    NetSummary net_summary;
    std::int64_t interaction_steps = 0;
    bool crash = false;
};

ReportDocument build_report(const ReportInputs &in);

/// Canonical JSON: sorted keys, two-space indent, trailing newline.
std::string serialize_report(const ReportDocument &doc);
ReportDocument parse_report(std::string_view json_text);

inline std::string emit_report(const ReportInputs &in) { return serialize_report(build_report(in)); }

/// One Arkhunter record as canonical JSON (no trailing newline).
std::string serialize_record(const FileRecord &rec);
FileRecord parse_record(std::string_view json_text);

} // namespace andlantis::forensics
