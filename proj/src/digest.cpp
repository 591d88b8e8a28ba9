#include "ldd/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace ldd {

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int md_len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &md_len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(md_len * 2);
    for (unsigned int i = 0; i < md_len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0x0f]);
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

KeyedRng::KeyedRng(std::uint64_t seed, std::string_view key)
    : state_(seed ^ fnv1a64(key)) {
    // One warm-up step so nearby (seed, key) states decorrelate.
    splitmix64_next(state_);
}

double KeyedRng::next_unit() {
    // 53 high bits -> double in [0,1).
    return static_cast<double>(splitmix64_next(state_) >> 11) * 0x1.0p-53;
}

}  // namespace ldd
