#pragma once

// Shared low-level helpers: deterministic RNG, SHA-256, canonical JSON.
// Everything here is dependency-light so any module can include it.

#include <cstdint>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"

namespace rgao {

using json = nlohmann::json;

// Deterministic 64-bit generator (splitmix64). std::mt19937_64 would also do,
// but the std distributions are implementation-defined; this keeps every
// generated fixture reproducible down to the byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Multiply-shift keeps it bias-free enough for fixtures.
    std::uint64_t below(std::uint64_t n) {
        return n == 0 ? 0 : static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {  // inclusive bounds
        return lo + below(hi - lo + 1);
    }

    double unit() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool chance(double p) { return unit() < p; }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(below(v.size()))];
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
        }
    }

private:
    std::uint64_t state_;
};

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

// Canonical form used for hashing: sorted keys, no whitespace, UTF-8.
// nlohmann::json keeps object keys sorted already; dump() emits no whitespace.
inline std::string canonical_json(const json& j) { return j.dump(); }

}  // namespace rgao
