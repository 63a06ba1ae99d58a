// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "dynmm/common.hpp"

namespace dynmm {

using Vec = std::vector<double>;

// Dense row-major matrix. Accumulations run left-to-right over columns, the
// same order a naive triple loop uses, so results match such an oracle
// bit-for-bit.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
    std::size_t size() const { return a.size(); }
};

Vec mat_vec(const Mat& m, const Vec& x);    // y = M x
Vec mat_tvec(const Mat& m, const Vec& x);   // y = M^T x
void add_outer(Mat& g, const Vec& u, const Vec& v, double scale = 1.0);  // G += scale * u v^T

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
void axpy(double alpha, const Vec& x, Vec& y);  // y += alpha * x
Vec scaled(const Vec& x, double alpha);
Vec concat(const Vec& a, const Vec& b);
double sqdist(const Vec& a, const Vec& b);  // ||a - b||^2

// Cosine similarity; zero-norm input is a numeric error.
double cosine(const Vec& a, const Vec& b);

bool all_finite(const Vec& a);

}  // namespace dynmm
