#pragma once

#include <string>
#include <string_view>

namespace andlantis::forensics {

struct Digests {
    std::string md5;
    std::string sha1;
    std::string sha256;

    bool operator==(const Digests &) const = default;
};

/// Lowercase hex MD5, SHA-1 and SHA-256 of `bytes`.
Digests digest_all(std::string_view bytes);
std::string md5_hex(std::string_view bytes);
std::string sha1_hex(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);

} // namespace andlantis::forensics
