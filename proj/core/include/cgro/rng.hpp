#pragma once

#include <cstdint>
#include <string_view>

namespace cgro {

/// Deterministic PRNG used everywhere in the lab.
///
/// All randomness flows from one master seed. Independent streams are
/// derived as derive_stream(master, role, index), so results never depend
/// on thread count or evaluation order. The generator is xoshiro256**
/// seeded through splitmix64; normal variates use the Marsaglia polar
/// method on top of an explicit u64 -> [0,1) mapping, so sequences are
/// identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform01();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via Marsaglia polar; second variate is cached.
    double normal();

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

private:
    std::uint64_t s_[4];
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Stream derivation: FNV-1a over the role string mixed with the master
/// seed and index through splitmix64 finalizers.
std::uint64_t derive_stream(std::uint64_t master, std::string_view role,
                            std::uint64_t index);

}  // namespace cgro
