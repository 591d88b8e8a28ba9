#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ldd {

/// Hex-encoded SHA-256 of the exact input bytes.
std::string sha256_hex(std::string_view bytes);

/// FNV-1a 64-bit hash. Stable across platforms and process restarts,
/// used for deterministic seeding, never for content addressing.
std::uint64_t fnv1a64(std::string_view bytes);

/// SplitMix64 step; the standard finalizer-style generator.
std::uint64_t splitmix64_next(std::uint64_t& state);

/// Deterministic stream of doubles in [0,1) keyed by (seed, key).
class KeyedRng {
public:
    KeyedRng(std::uint64_t seed, std::string_view key);
    double next_unit();

private:
    std::uint64_t state_;
};

}  // namespace ldd
