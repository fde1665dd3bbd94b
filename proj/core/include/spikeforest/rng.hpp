#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace spikeforest {

// Chain-owned random source. All draws are funneled through hand-pinned
// transforms of the raw mt19937_64 stream so that traces are reproducible
// bit-for-bit across standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derives an independent stream, e.g. one per chain or replication.
    static std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
        // splitmix64 step
        std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() { return engine_(); }

    // uniform on [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer on {0, ..., bound-1}, bound >= 1
    std::uint64_t uniform_int(std::uint64_t bound) {
        // rejection sampling on the top bits, no modulo bias
        std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller on open-interval uniforms
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(theta);
        have_spare_ = true;
        return radius * std::cos(theta);
    }

    double normal(double mean, double variance) {
        return mean + std::sqrt(variance) * normal();
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace spikeforest
