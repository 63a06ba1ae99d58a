// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dynmm/checkpoint.hpp"
#include "dynmm/config.hpp"
#include "dynmm/linalg.hpp"
#include "dynmm/rng.hpp"

using namespace dynmm;

TEST_CASE("mat_vec identity and zero cases") {
    Mat id(3, 3);
    for (int i = 0; i < 3; ++i) id(i, i) = 1.0;
    Vec x = {1, 2, 3};
    CHECK(mat_vec(id, x) == x);

    Mat z(2, 3);
    CHECK(mat_vec(z, Vec{1, 1, 1}) == Vec{0, 0});
}

TEST_CASE("mat_vec hand-multiplied 2x2") {
    Mat m(2, 2);
    m(0, 0) = 1;
    m(0, 1) = 2;
    m(1, 0) = 3;
    m(1, 1) = 4;
    CHECK(mat_vec(m, Vec{1, 1}) == Vec{3, 7});
}

TEST_CASE("mat_vec dimension mismatch is a typed error") {
    Mat m(2, 3);
    CHECK_THROWS_AS(mat_vec(m, Vec{1, 1}), Error);
    try {
        mat_vec(m, Vec{1, 1});
    } catch (const Error& e) {
        CHECK(e.code() == Errc::validation);
    }
}

TEST_CASE("mat_vec matches naive triple-loop oracle exactly") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Mat m(5, 5);
        Vec x(5);
        for (auto& v : m.a) v = rng.normal();
        for (auto& v : x) v = rng.normal();
        Vec y = mat_vec(m, x);
        for (std::size_t r = 0; r < 5; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < 5; ++c) acc += m(r, c) * x[c];
            CHECK(y[r] == acc);
        }
    }
}

TEST_CASE("cosine closed forms") {
    CHECK(cosine(Vec{1, 0}, Vec{1, 0}) == doctest::Approx(1.0));
    CHECK(cosine(Vec{1, 0}, Vec{0, 1}) == doctest::Approx(0.0));
    CHECK(cosine(Vec{1, 1}, Vec{1, 0}) == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK_THROWS_AS(cosine(Vec{0, 0}, Vec{1, 0}), Error);
    try {
        cosine(Vec{0, 0}, Vec{1, 0});
    } catch (const Error& e) {
        CHECK(e.code() == Errc::numeric);
    }
}

TEST_CASE("seeded rng is deterministic and seed-sensitive") {
    Rng a(123), b(123), c(124);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.uniform();
        const double vb = b.uniform();
        const double vc = c.uniform();
        all_equal = all_equal && (va == vb);
        any_diff = any_diff || (va != vc);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng restore continues the stream exactly") {
    Rng a(99);
    for (int i = 0; i < 37; ++i) a.normal();
    Rng b = Rng::restore(a.seed(), a.draw_count());
    for (int i = 0; i < 50; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("config defaults round-trip through serialization") {
    ModelConfig cfg;
    cfg.validate();
    ModelConfig back = ModelConfig::from_text(cfg.to_text());
    CHECK(back.to_text() == cfg.to_text());
}

TEST_CASE("config rejects unknown keys with a hard error") {
    CHECK_THROWS_AS(ModelConfig::from_text("no_such_key = 1\n"), Error);
}

TEST_CASE("config round-trips non-default doubles exactly") {
    ModelConfig cfg;
    cfg.set("lr_adapter", "0.0012345678901234567");
    cfg.set("tau", "0.07");
    ModelConfig back = ModelConfig::from_text(cfg.to_text());
    CHECK(back.lr_adapter == cfg.lr_adapter);
    CHECK(back.tau == cfg.tau);
}

TEST_CASE("config env override") {
    ::setenv("DYNMM_BATCH", "17", 1);
    ::setenv("DYNMM_FAITH_PROSE_MODE", "false", 1);
    ModelConfig cfg;
    cfg.apply_env();
    CHECK(cfg.batch == 17);
    CHECK(cfg.faith_prose_mode == false);
    ::unsetenv("DYNMM_BATCH");
    ::unsetenv("DYNMM_FAITH_PROSE_MODE");
}

TEST_CASE("config validation catches bad values") {
    ModelConfig cfg;
    cfg.E = 64;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("checkpoint round-trip is byte-stable") {
    CheckpointWriter w;
    w.put_f64("a", Vec{1.5, -2.25, 3.75});
    Mat m(2, 2);
    m.a = {1, 2, 3, 4};
    w.put_mat("m", m);
    w.put_u64("ids", {7, 8, 9});
    w.put_text("cfg", "d = 8\n");
    const std::string bytes = w.to_bytes();

    CheckpointReader r = CheckpointReader::from_bytes(bytes);
    CHECK(r.get_f64("a") == Vec{1.5, -2.25, 3.75});
    CHECK(r.get_mat("m").a == Vec{1, 2, 3, 4});
    CHECK(r.get_u64("ids") == std::vector<std::uint64_t>{7, 8, 9});
    CHECK(r.get_text("cfg") == "d = 8\n");

    // Re-serializing the same content yields identical bytes.
    CheckpointWriter w2;
    w2.put_f64("a", r.get_f64("a"));
    w2.put_mat("m", r.get_mat("m"));
    w2.put_u64("ids", r.get_u64("ids"));
    w2.put_text("cfg", r.get_text("cfg"));
    CHECK(w2.to_bytes() == bytes);
}

TEST_CASE("checkpoint detects corruption, no partial load") {
    CheckpointWriter w;
    w.put_f64("a", Vec{1, 2, 3});
    std::string bytes = w.to_bytes();
    bytes[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(CheckpointReader::from_bytes(bytes), Error);
    try {
        CheckpointReader::from_bytes(bytes);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::io);
    }
}

TEST_CASE("flop counter tracks multiply-adds") {
    flops::reset();
    Mat m(4, 6);
    Vec x(6, 1.0);
    mat_vec(m, x);
    CHECK(flops::count() == 24);
}
