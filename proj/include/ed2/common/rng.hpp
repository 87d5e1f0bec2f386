#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ed2 {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent seeds and counter-based draws.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Seed of the named sub-stream ("data", "init", "planner", "shuffle", ...) of a root seed.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) noexcept {
    return mix64(root ^ mix64(hash_name(stream)));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return mix64(root ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
    return Rng(derive_seed(root, stream));
}

// Counter-based uniform draw in [0, 1): a pure function of (key, a, b, c).
constexpr double counter_uniform(std::uint64_t key, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) noexcept {
    std::uint64_t x = mix64(key ^ mix64(a ^ mix64(b ^ mix64(c))));
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

}  // namespace ed2
