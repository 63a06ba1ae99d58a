// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace dynmm {

// Deterministic generator. mt19937_64 has a fully specified integer stream,
// so identical seeds reproduce identical draws on every platform. The float
// transforms are coded explicitly (no std::*_distribution, whose output is
// implementation-defined). normal() never caches a spare value, so the
// (seed, draw count) pair captures the full generator state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed), seed_(seed), count_(0) {}

    std::uint64_t next_u64() {
        ++count_;
        return eng_();
    }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (cos branch only).
    double normal();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draw_count() const { return count_; }

    // Rebuilds the exact stream position by replaying `count` raw draws.
    static Rng restore(std::uint64_t seed, std::uint64_t count);

private:
    std::mt19937_64 eng_;
    std::uint64_t seed_;
    std::uint64_t count_;
};

// splitmix64-style combiner for deriving independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace dynmm
