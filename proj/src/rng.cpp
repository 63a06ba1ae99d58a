// SPDX-License-Identifier: Apache-2.0
#include "dynmm/rng.hpp"

#include <cmath>

#include "dynmm/common.hpp"

namespace dynmm {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    check(n > 0, Errc::numeric, "uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

double Rng::normal() {
    // u1 in (0, 1] so the log is finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Rng Rng::restore(std::uint64_t seed, std::uint64_t count) {
    Rng r(seed);
    for (std::uint64_t i = 0; i < count; ++i) r.eng_();
    r.count_ = count;
    return r;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull + (b << 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace dynmm
