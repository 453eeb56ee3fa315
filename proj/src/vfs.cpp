#include "andlantis/vfs.hpp"

#include "andlantis/error.hpp"

namespace andlantis::forensics {

void require_absolute(std::string_view path) {
    const bool ok = path.size() >= 2 && path.front() == '/' && path.back() != '/' &&
                    path.find("//") == std::string_view::npos && path.find("/../") == std::string_view::npos &&
                    path.find("/./") == std::string_view::npos;
    if (!ok) {
        throw ContractViolation("not an absolute normalized path: '" + std::string(path) + "'");
    }
}

namespace {

std::int64_t blocks_for(std::int64_t size) {
    // 512-byte units, allocated a whole filesystem block at a time.
    const std::int64_t fs_blocks = (size + VirtualFs::kBlockSize - 1) / VirtualFs::kBlockSize;
    return fs_blocks * (VirtualFs::kBlockSize / 512);
}

} // namespace

void VirtualFs::write(std::string_view path, std::string content, const FileOwner &owner, std::int64_t time_s) {
    require_absolute(path);
    auto slash = path.rfind('/');
    if (slash > 0) {
        add_dir(path.substr(0, slash));
    }
    auto it = files_.find(path);
    if (it == files_.end()) {
        StatBlock st;
        st.dev = kDevice;
        st.ino = next_ino_++;
        st.mode = owner.mode;
        st.nlink = 1;
        st.uid = owner.uid;
        st.gid = owner.gid;
        st.blksize = kBlockSize;
        it = files_.emplace(std::string(path), VfsFile{{}, st}).first;
    }
    auto &f = it->second;
    f.content = std::move(content);
    f.stat.size = static_cast<std::int64_t>(f.content.size());
    f.stat.blocks = blocks_for(f.stat.size);
    f.stat.atime = f.stat.mtime = f.stat.ctime = time_s;
}

bool VirtualFs::remove(std::string_view path) {
    auto it = files_.find(path);
    if (it == files_.end()) {
        return false;
    }
    files_.erase(it);
    return true;
}

void VirtualFs::add_dir(std::string_view path) {
    while (!path.empty() && path != "/") {
        if (!dirs_.emplace(path).second) {
            return; // ancestors were added with it
        }
        auto slash = path.rfind('/');
        path = path.substr(0, slash);
    }
}

const VfsFile *VirtualFs::find(std::string_view path) const {
    auto it = files_.find(path);
    return it == files_.end() ? nullptr : &it->second;
}

bool VirtualFs::same_content(const VirtualFs &other) const {
    if (files_.size() != other.files_.size()) {
        return false;
    }
    auto a = files_.begin();
    auto b = other.files_.begin();
    for (; a != files_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.content != b->second.content) {
            return false;
        }
    }
    return true;
}

bool VirtualFs::operator==(const VirtualFs &other) const {
    if (!same_content(other) || dirs_ != other.dirs_) {
        return false;
    }
    auto b = other.files_.begin();
    for (const auto &[path, f] : files_) {
        if (!(f.stat == b->second.stat)) {
            return false;
        }
        ++b;
    }
    return true;
}

} // namespace andlantis::forensics
