#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>

namespace andlantis::forensics {

/// The thirteen fields of stat(2), as exported in forensic records.
struct StatBlock {
    std::int64_t dev = 0;
    std::int64_t ino = 0;
    std::int64_t mode = 0;
    std::int64_t nlink = 0;
    std::int64_t uid = 0;
    std::int64_t gid = 0;
    std::int64_t rdev = 0;
    std::int64_t size = 0;
    std::int64_t blksize = 0;
    std::int64_t blocks = 0;
    std::int64_t atime = 0;
    std::int64_t mtime = 0;
    std::int64_t ctime = 0;

    bool operator==(const StatBlock &) const = default;
};

struct FileOwner {
    std::int64_t uid = 0;
    std::int64_t gid = 0;
    std::int64_t mode = 0100644;
};

struct VfsFile {
    std::string content;
    StatBlock stat;
};

/// In-memory filesystem image: regular files with stat blocks plus a set of
/// directory paths. Paths are absolute and use '/' separators.
class VirtualFs {
public:
    static constexpr std::int64_t kDevice = 0xfd00;
    static constexpr std::int64_t kBlockSize = 4096;

    /// Create or overwrite. Overwrites keep inode and ownership, and bump
    /// mtime/ctime/atime to `time_s`. Parent directories are added.
    void write(std::string_view path, std::string content, const FileOwner &owner, std::int64_t time_s);
    bool remove(std::string_view path);
    void add_dir(std::string_view path);

    const VfsFile *find(std::string_view path) const;
    bool contains(std::string_view path) const { return find(path) != nullptr; }

    const std::map<std::string, VfsFile, std::less<>> &files() const noexcept { return files_; }
    const std::set<std::string, std::less<>> &dirs() const noexcept { return dirs_; }
    std::size_t size() const noexcept { return files_.size(); }

    /// Same paths with the same bytes; stat blocks are not compared.
    bool same_content(const VirtualFs &other) const;
    bool operator==(const VirtualFs &other) const;

private:
    std::map<std::string, VfsFile, std::less<>> files_;
    std::set<std::string, std::less<>> dirs_;
    std::int64_t next_ino_ = 2;
};

/// Throws ContractViolation unless `path` is absolute and normalized.
void require_absolute(std::string_view path);

} // namespace andlantis::forensics
