#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace traffic {

/// splitmix64 finalizer; used to derive substream seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic random stream. mt19937_64 supplies the bits; the uniform
/// and normal transforms are written out explicitly so the sequence does not
/// depend on the standard library's distribution implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform draw in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; draws come in cached pairs.
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Named substreams derived from one master seed, one per stochastic
/// subsystem. Streams with distinct names are independent and reproducible.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t master) : master_(master) {}

    RandomStream stream(std::string_view name) const {
        return RandomStream(mix64(master_ ^ fnv1a64(name)));
    }

    std::uint64_t master() const { return master_; }

private:
    std::uint64_t master_;
};

}  // namespace traffic
