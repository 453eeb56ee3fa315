#include "andlantis/hashing.hpp"

#include <openssl/evp.h>

#include "andlantis/error.hpp"

namespace andlantis::forensics {
namespace {

std::string hex_digest(const EVP_MD *md, std::string_view bytes) {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out, &len, md, nullptr) != 1) {
        throw Error("EVP_Digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex(static_cast<std::size_t>(len) * 2, '0');
    for (unsigned int i = 0; i < len; ++i) {
        hex[2 * i] = kHex[out[i] >> 4];
        hex[2 * i + 1] = kHex[out[i] & 0x0f];
    }
    return hex;
}

} // namespace

std::string md5_hex(std::string_view bytes) { return hex_digest(EVP_md5(), bytes); }
std::string sha1_hex(std::string_view bytes) { return hex_digest(EVP_sha1(), bytes); }
std::string sha256_hex(std::string_view bytes) { return hex_digest(EVP_sha256(), bytes); }

Digests digest_all(std::string_view bytes) { return {md5_hex(bytes), sha1_hex(bytes), sha256_hex(bytes)}; }

} // namespace andlantis::forensics
