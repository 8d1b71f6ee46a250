#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace banditscreen {

// Seeded random generator used by every stochastic component. Distributions
// are implemented here (Box-Muller, rejection sampling) instead of
// std::*_distribution so that streams are reproducible independent of the
// standard library, and so draws can be counted by tests.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1).
    double uniform() {
        ++uniform_draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller, one value per call (no cached pair).
    double normal() {
        ++normal_draws_;
        double u1 = 1.0 - static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform index in [0, n). Rejection sampling keeps it exactly uniform.
    std::size_t uniform_index(std::size_t n) {
        ++index_draws_;
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return static_cast<std::size_t>(r % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Draw counters; used by tests that assert how much randomness an
    // operation consumed (e.g. one noise vector per Thompson draw).
    std::uint64_t normal_draws() const { return normal_draws_; }
    std::uint64_t uniform_draws() const { return uniform_draws_; }
    std::uint64_t index_draws() const { return index_draws_; }

  private:
    std::mt19937_64 engine_;
    std::uint64_t normal_draws_ = 0;
    std::uint64_t uniform_draws_ = 0;
    std::uint64_t index_draws_ = 0;
};

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a over a string; stable across platforms (unlike std::hash).
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace banditscreen
