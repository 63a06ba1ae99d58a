// SPDX-License-Identifier: Apache-2.0
#include "dynmm/common.hpp"

namespace dynmm {

namespace flops {
namespace {
thread_local std::uint64_t g_madds = 0;
}
void reset() { g_madds = 0; }
void add(std::uint64_t madds) { g_madds += madds; }
std::uint64_t count() { return g_madds; }
}  // namespace flops

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace dynmm
