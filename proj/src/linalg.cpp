// SPDX-License-Identifier: Apache-2.0
#include "dynmm/linalg.hpp"

#include <cmath>

namespace dynmm {

Vec mat_vec(const Mat& m, const Vec& x) {
    check(m.cols == x.size(), Errc::validation, "mat_vec: inner dimensions disagree");
    Vec y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        const double* row = m.a.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
    flops::add(static_cast<std::uint64_t>(m.rows) * m.cols);
    return y;
}

Vec mat_tvec(const Mat& m, const Vec& x) {
    check(m.rows == x.size(), Errc::validation, "mat_tvec: inner dimensions disagree");
    Vec y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.a.data() + r * m.cols;
        for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * x[r];
    }
    flops::add(static_cast<std::uint64_t>(m.rows) * m.cols);
    return y;
}

void add_outer(Mat& g, const Vec& u, const Vec& v, double scale) {
    check(g.rows == u.size() && g.cols == v.size(), Errc::validation, "add_outer: shape mismatch");
    for (std::size_t r = 0; r < g.rows; ++r) {
        double* row = g.a.data() + r * g.cols;
        const double ur = scale * u[r];
        for (std::size_t c = 0; c < g.cols; ++c) row[c] += ur * v[c];
    }
    flops::add(static_cast<std::uint64_t>(g.rows) * g.cols);
}

double dot(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), Errc::validation, "dot: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    flops::add(a.size());
    return acc;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, const Vec& x, Vec& y) {
    check(x.size() == y.size(), Errc::validation, "axpy: dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
    flops::add(x.size());
}

Vec scaled(const Vec& x, double alpha) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = alpha * x[i];
    flops::add(x.size());
    return y;
}

Vec concat(const Vec& a, const Vec& b) {
    Vec y;
    y.reserve(a.size() + b.size());
    y.insert(y.end(), a.begin(), a.end());
    y.insert(y.end(), b.begin(), b.end());
    return y;
}

double sqdist(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), Errc::validation, "sqdist: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    flops::add(a.size());
    return acc;
}

double cosine(const Vec& a, const Vec& b) {
    check(a.size() == b.size(), Errc::validation, "cosine: dimension mismatch");
    const double na = norm2(a);
    const double nb = norm2(b);
    check(na > 0.0 && nb > 0.0, Errc::numeric, "cosine: zero-norm input");
    return dot(a, b) / (na * nb);
}

bool all_finite(const Vec& a) {
    for (double v : a)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace dynmm
