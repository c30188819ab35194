#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seedbank {

// Every replica owns one of these; nothing in the library touches a global stream.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// Hash-based splitting of the master seed. The rule is part of the output
// contract (manifests echo it), so changing it is a major-version change.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica, std::string_view stream);

inline constexpr std::string_view kSeedRule =
    "splitmix64(splitmix64(splitmix64(master) ^ (replica * 0x9E3779B97F4A7C15)) ^ fnv1a64(label))";

inline Rng make_rng(std::uint64_t master, std::uint64_t replica, std::string_view stream) {
    return Rng(derive_seed(master, replica, stream));
}

} // namespace seedbank
