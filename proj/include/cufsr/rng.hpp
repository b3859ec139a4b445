#pragma once

#include <array>
#include <cstdint>

namespace cufsr {

/// xoshiro256** seeded through splitmix64. Its output sequence and the
/// uniform mappings below are fixed, so runs reproduce across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0);

    std::uint64_t next();

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Independent stream derived from this generator's state and `tag`.
    Rng fork(std::uint64_t tag) const;

private:
    std::array<std::uint64_t, 4> s_{};
};

} // namespace cufsr
