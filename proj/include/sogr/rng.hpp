#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sogr {

/// FNV-1a hash, used to derive per-name random streams.
uint64_t fnv1a64(std::string_view s);

/// splitmix64 finalizer; mixes a seed with a stream id.
uint64_t mix64(uint64_t a, uint64_t b);

/// Deterministic random stream. mt19937_64 has a standard-pinned sequence,
/// and the transforms below are written out so results do not depend on the
/// C++ runtime's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    /// Named stream: the sequence depends only on (seed, name), not on the
    /// order streams are created in.
    Rng(uint64_t seed, std::string_view name) : eng_(mix64(seed, fnv1a64(name))) {}

    uint64_t next_u64() { return eng_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    int64_t uniform_int(int64_t n);

    /// Standard normal via Box-Muller (second value cached).
    double normal();

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Exponential(1) via inversion.
    double exponential();

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// In-place Fisher-Yates shuffle driven by `rng` (std::shuffle is
/// implementation-defined, this is not).
void shuffle_indices(std::vector<size_t>& v, Rng& rng);

}  // namespace sogr
