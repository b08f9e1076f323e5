#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pqv {

/// SplitMix64 finalizer; bijective mixing of a 64-bit word.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// 64-bit FNV-1a hash of a tag string.
constexpr std::uint64_t fnv1a(std::string_view tag) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Sub-seed for a named component of a composite generator:
/// splitmix64(seed XOR fnv1a(tag)). Stable across releases.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    return splitmix64(seed ^ fnv1a(tag));
}

/// Seeded Gaussian/uniform source. Streams are reproducible within one build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    double normal() { return normal_(engine_); }
    double uniform(double a, double b) {
        return a + (b - a) * std::generate_canonical<double, 53>(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pqv
