#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace remfpca {

/// Seedable random stream with a documented, platform-independent mapping
/// from seed to values:
///   - engine: std::mt19937_64 seeded with the 64-bit seed;
///   - uniform(): ((x >> 11) + 0.5) * 2^-53 for each raw draw x, in (0, 1);
///   - normal(): Box-Muller on two consecutive uniforms u1, u2, returning
///     sqrt(-2 ln u1) cos(2 pi u2) and caching sqrt(-2 ln u1) sin(2 pi u2)
///     for the next call;
///   - below(n): Lemire's multiply-shift reduction of one raw draw.
/// Output is identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    std::uint64_t below(std::uint64_t n);

    /// Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// SplitMix64 finalizer applied to master + (index + 1) * golden ratio; seeds
/// for replication i depend only on (master, i).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace remfpca
