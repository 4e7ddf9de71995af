#pragma once

#include <cstdint>
#include <vector>

namespace dopplerkit {

/// Deterministic splitmix64 stream. All randomness in the toolkit flows
/// through this type so that outputs are bit-identical across platforms;
/// std::random distributions are implementation-defined and never used.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [lo, hi], inclusive, unbiased (rejection sampling).
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Sum of 12 uniforms minus 6: zero-mean, unit-variance, range [-6, 6].
    double gauss12();

    /// Independent child stream. fork(a) and fork(b) are decorrelated for a != b.
    Rng fork(std::uint64_t tag) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::uint64_t state_;
};

/// Stateless 64-bit mix of two words; used to key per-pixel noise streams.
std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b);

}  // namespace dopplerkit
