// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dynmm/linalg.hpp"

namespace dynmm {

// Checkpoint container: magic, version, named records, FNV-1a trailer.
// Records are (name, dtype, dims, payload); floats are little-endian f64.
// Loads verify the checksum before any state is touched, so a corrupted
// file never yields a partial restore.

constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointWriter {
public:
    void put_f64(const std::string& name, const Vec& data,
                 const std::vector<std::uint64_t>& dims = {});
    void put_mat(const std::string& name, const Mat& m);
    void put_u64(const std::string& name, const std::vector<std::uint64_t>& data);
    void put_scalar(const std::string& name, double v);
    void put_scalar_u64(const std::string& name, std::uint64_t v);
    void put_text(const std::string& name, const std::string& text);

    std::string to_bytes() const;
    void write_file(const std::string& path) const;

private:
    struct Rec {
        std::string name;
        std::uint8_t dtype;  // 0 = f64, 1 = u64, 2 = bytes
        std::vector<std::uint64_t> dims;
        std::string payload;
    };
    std::vector<Rec> recs_;
    void add(Rec r);
};

class CheckpointReader {
public:
    static CheckpointReader from_bytes(const std::string& bytes);
    static CheckpointReader from_file(const std::string& path);

    bool has(const std::string& name) const { return recs_.count(name) != 0; }
    std::vector<std::string> names() const;

    Vec get_f64(const std::string& name) const;
    Mat get_mat(const std::string& name) const;  // requires 2 dims
    std::vector<std::uint64_t> get_u64(const std::string& name) const;
    double get_scalar(const std::string& name) const;
    std::uint64_t get_scalar_u64(const std::string& name) const;
    std::string get_text(const std::string& name) const;
    std::vector<std::uint64_t> dims(const std::string& name) const;

private:
    struct Rec {
        std::uint8_t dtype;
        std::vector<std::uint64_t> dims;
        std::string payload;
    };
    std::map<std::string, Rec> recs_;
    const Rec& rec(const std::string& name, std::uint8_t want_dtype) const;
};

}  // namespace dynmm
