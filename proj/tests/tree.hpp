#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "andlantis/vfs.hpp"

namespace tree {

namespace fs = std::filesystem;

inline std::vector<std::string> list(const fs::path &root) {
    std::vector<std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            out.push_back(fs::relative(e.path(), root).generic_string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Same relative paths with the same bytes.
inline bool equal(const fs::path &a, const fs::path &b) {
    const auto la = list(a);
    if (la != list(b)) {
        return false;
    }
    return std::all_of(la.begin(), la.end(), [&](const std::string &rel) { return slurp(a / rel) == slurp(b / rel); });
}

/// Write an in-memory image out as a real directory tree.
inline void materialize(const andlantis::forensics::VirtualFs &vfs, const fs::path &root) {
    fs::create_directories(root);
    for (const auto &d : vfs.dirs()) {
        fs::create_directories(root / fs::path(d).relative_path());
    }
    for (const auto &[path, f] : vfs.files()) {
        const auto p = root / fs::path(path).relative_path();
        fs::create_directories(p.parent_path());
        std::ofstream(p, std::ios::binary).write(f.content.data(), static_cast<std::streamsize>(f.content.size()));
    }
}

} // namespace tree
