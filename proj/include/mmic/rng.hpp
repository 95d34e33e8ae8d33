#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mmic {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Derive a seed for a named sub-stream, e.g. derive_seed(base, {client, round}).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) noexcept {
    std::uint64_t s = mix_seed(base);
    for (auto v : stream) s = mix_seed(s ^ mix_seed(v + 0x632BE59BD9B4E019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> stream = {}) {
    return Rng(derive_seed(base, stream));
}

} // namespace mmic
