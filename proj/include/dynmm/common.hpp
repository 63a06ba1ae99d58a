// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dynmm {

// Error categories. Values double as process exit codes in the CLI.
enum class Errc : int {
    ok = 0,
    validation = 2,  // bad input data, config, or argument
    numeric = 3,     // non-finite loss, zero-norm vector, etc.
    io = 4,          // file not found, short read, checksum mismatch
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string msg) : std::runtime_error(std::move(msg)), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void check(bool cond, Errc code, const std::string& msg) {
    if (!cond) fail(code, msg);
}

using ItemId = std::uint64_t;
using UserId = std::uint64_t;
using Timestamp = std::int64_t;

// Thread-local multiply-add counter. The dense kernels report their madd
// counts here so complexity experiments can read exact operation counts.
namespace flops {
void reset();
void add(std::uint64_t madds);
std::uint64_t count();
}  // namespace flops

// FNV-1a over raw bytes; used for parameter digests (frozenness checks)
// and checkpoint checksums.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace dynmm
