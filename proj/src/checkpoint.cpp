// SPDX-License-Identifier: Apache-2.0
#include "dynmm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dynmm/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace dynmm {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'C', 'K'};

template <typename T>
void append_pod(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T read_pod(const std::string& in, std::size_t& off) {
    check(off + sizeof(T) <= in.size(), Errc::io, "checkpoint: truncated file");
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

}  // namespace

void CheckpointWriter::add(Rec r) {
    for (const auto& e : recs_)
        check(e.name != r.name, Errc::validation, "checkpoint: duplicate record '" + r.name + "'");
    recs_.push_back(std::move(r));
}

void CheckpointWriter::put_f64(const std::string& name, const Vec& data,
                               const std::vector<std::uint64_t>& dims) {
    Rec r{name, 0, dims, {}};
    if (r.dims.empty()) r.dims = {data.size()};
    std::uint64_t n = 1;
    for (auto d : r.dims) n *= d;
    check(n == data.size(), Errc::validation, "checkpoint: dims do not match data for '" + name + "'");
    r.payload.assign(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(double));
    add(std::move(r));
}

void CheckpointWriter::put_mat(const std::string& name, const Mat& m) {
    put_f64(name, m.a, {m.rows, m.cols});
}

void CheckpointWriter::put_u64(const std::string& name, const std::vector<std::uint64_t>& data) {
    Rec r{name, 1, {data.size()}, {}};
    r.payload.assign(reinterpret_cast<const char*>(data.data()),
                     data.size() * sizeof(std::uint64_t));
    add(std::move(r));
}

void CheckpointWriter::put_scalar(const std::string& name, double v) { put_f64(name, Vec{v}); }

void CheckpointWriter::put_scalar_u64(const std::string& name, std::uint64_t v) {
    put_u64(name, {v});
}

void CheckpointWriter::put_text(const std::string& name, const std::string& text) {
    Rec r{name, 2, {text.size()}, text};
    add(std::move(r));
}

std::string CheckpointWriter::to_bytes() const {
    std::string out;
    out.append(kMagic, 4);
    append_pod<std::uint32_t>(out, kCheckpointVersion);
    append_pod<std::uint64_t>(out, recs_.size());
    for (const auto& r : recs_) {
        append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
        out.append(r.name);
        append_pod<std::uint8_t>(out, r.dtype);
        append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(r.dims.size()));
        for (auto d : r.dims) append_pod<std::uint64_t>(out, d);
        append_pod<std::uint64_t>(out, r.payload.size());
        out.append(r.payload);
    }
    append_pod<std::uint64_t>(out, fnv1a(out.data(), out.size()));
    return out;
}

void CheckpointWriter::write_file(const std::string& path) const {
    const std::string bytes = to_bytes();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(f.good(), Errc::io, "checkpoint: cannot open '" + path + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    check(f.good(), Errc::io, "checkpoint: write failed for '" + path + "'");
}

CheckpointReader CheckpointReader::from_bytes(const std::string& bytes) {
    check(bytes.size() >= 4 + 4 + 8 + 8, Errc::io, "checkpoint: file too short");
    const std::size_t body = bytes.size() - 8;
    std::size_t off = body;
    const std::uint64_t stored = read_pod<std::uint64_t>(bytes, off);
    check(stored == fnv1a(bytes.data(), body), Errc::io, "checkpoint: checksum mismatch");

    off = 0;
    check(std::memcmp(bytes.data(), kMagic, 4) == 0, Errc::io, "checkpoint: bad magic");
    off = 4;
    const auto version = read_pod<std::uint32_t>(bytes, off);
    check(version == kCheckpointVersion, Errc::io,
          "checkpoint: unsupported version " + std::to_string(version));
    const auto count = read_pod<std::uint64_t>(bytes, off);

    CheckpointReader r;
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(bytes, off);
        check(off + name_len <= body, Errc::io, "checkpoint: truncated record name");
        std::string name = bytes.substr(off, name_len);
        off += name_len;
        Rec rec;
        rec.dtype = read_pod<std::uint8_t>(bytes, off);
        const auto ndims = read_pod<std::uint32_t>(bytes, off);
        for (std::uint32_t j = 0; j < ndims; ++j) rec.dims.push_back(read_pod<std::uint64_t>(bytes, off));
        const auto payload_len = read_pod<std::uint64_t>(bytes, off);
        check(off + payload_len <= body, Errc::io, "checkpoint: truncated payload");
        rec.payload = bytes.substr(off, payload_len);
        off += payload_len;
        r.recs_.emplace(std::move(name), std::move(rec));
    }
    check(off == body, Errc::io, "checkpoint: trailing bytes");
    return r;
}

CheckpointReader CheckpointReader::from_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), Errc::io, "checkpoint: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_bytes(bytes);
}

std::vector<std::string> CheckpointReader::names() const {
    std::vector<std::string> out;
    out.reserve(recs_.size());
    for (const auto& [k, v] : recs_) out.push_back(k);
    return out;
}

const CheckpointReader::Rec& CheckpointReader::rec(const std::string& name,
                                                   std::uint8_t want_dtype) const {
    auto it = recs_.find(name);
    check(it != recs_.end(), Errc::io, "checkpoint: missing record '" + name + "'");
    check(it->second.dtype == want_dtype, Errc::io, "checkpoint: wrong dtype for '" + name + "'");
    return it->second;
}

Vec CheckpointReader::get_f64(const std::string& name) const {
    const Rec& r = rec(name, 0);
    Vec out(r.payload.size() / sizeof(double));
    std::memcpy(out.data(), r.payload.data(), r.payload.size());
    return out;
}

Mat CheckpointReader::get_mat(const std::string& name) const {
    const Rec& r = rec(name, 0);
    check(r.dims.size() == 2, Errc::io, "checkpoint: '" + name + "' is not a matrix");
    Mat m(static_cast<std::size_t>(r.dims[0]), static_cast<std::size_t>(r.dims[1]));
    check(r.payload.size() == m.a.size() * sizeof(double), Errc::io,
          "checkpoint: payload size mismatch for '" + name + "'");
    std::memcpy(m.a.data(), r.payload.data(), r.payload.size());
    return m;
}

std::vector<std::uint64_t> CheckpointReader::get_u64(const std::string& name) const {
    const Rec& r = rec(name, 1);
    std::vector<std::uint64_t> out(r.payload.size() / sizeof(std::uint64_t));
    std::memcpy(out.data(), r.payload.data(), r.payload.size());
    return out;
}

double CheckpointReader::get_scalar(const std::string& name) const {
    Vec v = get_f64(name);
    check(v.size() == 1, Errc::io, "checkpoint: '" + name + "' is not a scalar");
    return v[0];
}

std::uint64_t CheckpointReader::get_scalar_u64(const std::string& name) const {
    auto v = get_u64(name);
    check(v.size() == 1, Errc::io, "checkpoint: '" + name + "' is not a scalar");
    return v[0];
}

std::string CheckpointReader::get_text(const std::string& name) const {
    return rec(name, 2).payload;
}

std::vector<std::uint64_t> CheckpointReader::dims(const std::string& name) const {
    auto it = recs_.find(name);
    check(it != recs_.end(), Errc::io, "checkpoint: missing record '" + name + "'");
    return it->second.dims;
}

}  // namespace dynmm
