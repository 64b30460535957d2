#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ants {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of the SHA-256 digest, big-endian. Stable across platforms and runs.
std::uint64_t stable_hash64(std::string_view data);

/// SplitMix64 finalizer; used to derive independent seeds from (seed, counter) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

/// Maps a 64-bit random word onto [0, bound) by multiply-shift.
constexpr std::uint64_t bounded(std::uint64_t word, std::uint64_t bound) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(word) * bound) >> 64);
}

std::string base64_encode(std::string_view data);

} // namespace ants
