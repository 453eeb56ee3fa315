#include "andlantis/forensics.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "andlantis/error.hpp"
#include "andlantis/hashing.hpp"

namespace andlantis::forensics {

FileRecord make_record(std::string path, std::string_view content, const StatBlock &stat) {
    auto d = digest_all(content);
    return FileRecord{std::move(path), std::move(d.md5), std::move(d.sha1), std::move(d.sha256), stat, false};
}

bool same_metadata(const StatBlock &a, const StatBlock &b, MetadataCompare mode) {
    const bool portable = a.mode == b.mode && a.nlink == b.nlink && a.uid == b.uid && a.gid == b.gid &&
                          a.rdev == b.rdev && a.size == b.size && a.blksize == b.blksize &&
                          a.blocks == b.blocks && a.mtime == b.mtime;
    if (mode == MetadataCompare::Portable) {
        return portable;
    }
    return portable && a.dev == b.dev && a.ino == b.ino && a.ctime == b.ctime;
}

FsSnapshot snapshot(const VirtualFs &fs, std::int64_t taken_at) {
    FsSnapshot snap;
    snap.taken_at = taken_at;
    for (const auto &[path, file] : fs.files()) {
        snap.files.emplace(path, make_record(path, file.content, file.stat));
    }
    snap.other_paths.assign(fs.dirs().begin(), fs.dirs().end());
    return snap;
}

namespace {

StatBlock from_stat(const struct stat &st) {
    StatBlock b;
    b.dev = static_cast<std::int64_t>(st.st_dev);
    b.ino = static_cast<std::int64_t>(st.st_ino);
    b.mode = static_cast<std::int64_t>(st.st_mode);
    b.nlink = static_cast<std::int64_t>(st.st_nlink);
    b.uid = static_cast<std::int64_t>(st.st_uid);
    b.gid = static_cast<std::int64_t>(st.st_gid);
    b.rdev = static_cast<std::int64_t>(st.st_rdev);
    b.size = static_cast<std::int64_t>(st.st_size);
    b.blksize = static_cast<std::int64_t>(st.st_blksize);
    b.blocks = static_cast<std::int64_t>(st.st_blocks);
    b.atime = static_cast<std::int64_t>(st.st_atime);
    b.mtime = static_cast<std::int64_t>(st.st_mtime);
    b.ctime = static_cast<std::int64_t>(st.st_ctime);
    return b;
}

bool read_file(const std::filesystem::path &p, std::string &out) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        return false;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        return false;
    }
    out = std::move(ss).str();
    return true;
}

std::string logical_path(const std::filesystem::path &root, const std::filesystem::path &p) {
    return "/" + p.lexically_relative(root).generic_string();
}

} // namespace

FsSnapshot snapshot(const std::filesystem::path &root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw ConfigError("snapshot: not a readable directory: " + root.string());
    }
    FsSnapshot snap;
    snap.taken_at = 0;
    fs::recursive_directory_iterator it(root, fs::directory_options::skip_permission_denied, ec);
    if (ec) {
        throw ConfigError("snapshot: cannot open " + root.string() + ": " + ec.message());
    }
    for (; it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) {
            break;
        }
        const fs::path &p = it->path();
        struct stat st {};
        if (::lstat(p.c_str(), &st) != 0) {
            continue;
        }
        std::string path = logical_path(root, p);
        if (!S_ISREG(st.st_mode)) {
            snap.other_paths.push_back(std::move(path));
            continue;
        }
        std::string content;
        if (read_file(p, content)) {
            snap.files.emplace(path, make_record(path, content, from_stat(st)));
        } else {
            FileRecord rec = make_record(path, std::string_view{}, from_stat(st));
            rec.error = true;
            snap.files.emplace(path, std::move(rec));
        }
    }
    std::sort(snap.other_paths.begin(), snap.other_paths.end());
    return snap;
}

FsDiff diff(const FsSnapshot &base, const FsSnapshot &post, DiffOptions opts) {
    FsDiff d;
    auto b = base.files.begin();
    auto p = post.files.begin();
    while (b != base.files.end() || p != post.files.end()) {
        if (p == post.files.end() || (b != base.files.end() && b->first < p->first)) {
            d.deleted.push_back(b->second);
            ++b;
        } else if (b == base.files.end() || p->first < b->first) {
            d.created.push_back(p->second);
            ++p;
        } else {
            if (b->second.sha256 != p->second.sha256) {
                d.modified.push_back({b->second, p->second});
            } else if (!same_metadata(b->second.stat, p->second.stat, opts.metadata)) {
                d.metadata_changed.push_back({b->second, p->second});
            }
            ++b;
            ++p;
        }
    }
    return d;
}

namespace {

template <typename Fetch>
ArtifactStore extract_with(const FsDiff &diff, Fetch &&fetch) {
    ArtifactStore store;
    auto copy = [&](const FileRecord &rec) {
        std::string content;
        if (!fetch(rec.path, content)) {
            throw IntegrityError("artifact missing from post image: " + rec.path);
        }
        if (!rec.error && sha256_hex(content) != rec.sha256) {
            throw IntegrityError("artifact changed since snapshot: " + rec.path);
        }
        store.emplace(rec.path, std::move(content));
    };
    for (const auto &rec : diff.created) {
        copy(rec);
    }
    for (const auto &pair : diff.modified) {
        copy(pair.post);
    }
    return store;
}

} // namespace

ArtifactStore extract_artifacts(const FsDiff &diff, const VirtualFs &post_fs) {
    return extract_with(diff, [&](const std::string &path, std::string &out) {
        const VfsFile *f = post_fs.find(path);
        if (f == nullptr) {
            return false;
        }
        out = f->content;
        return true;
    });
}

ArtifactStore extract_artifacts(const FsDiff &diff, const std::filesystem::path &post_root) {
    return extract_with(diff, [&](const std::string &path, std::string &out) {
        return read_file(post_root / std::filesystem::path(path).relative_path(), out);
    });
}

std::string classify(std::string_view content) {
    static constexpr std::string_view kZip{"PK\x03\x04", 4};
    static constexpr std::string_view kSqlite{"SQLite format 3\0", 16};
    if (content.starts_with(kZip)) {
        return "zip/apk";
    }
    if (content.starts_with(kSqlite)) {
        return "sqlite";
    }
    if (content.empty()) {
        return "binary";
    }
    auto printable = std::count_if(content.begin(), content.end(), [](char ch) {
        auto c = static_cast<unsigned char>(ch);
        return (c >= 0x20 && c < 0x7f) || c == '\n' || c == '\r' || c == '\t';
    });
    return static_cast<std::size_t>(printable) * 2 > content.size() ? "text" : "binary";
}

} // namespace andlantis::forensics
