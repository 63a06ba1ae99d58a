// SPDX-License-Identifier: Apache-2.0
#include "dynmm/nn.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace dynmm {

namespace kink {
namespace {
thread_local bool g_on = false;
thread_local std::uint64_t g_sig = 0;
}
void begin() {
    g_on = true;
    g_sig = 0xcbf29ce484222325ull;
}
void end() { g_on = false; }
bool enabled() { return g_on; }
void note(bool active) {
    if (!g_on) return;
    g_sig ^= active ? 0x9eu : 0x31u;
    g_sig *= 0x100000001b3ull;
}
std::uint64_t signature() { return g_sig; }
}  // namespace kink

Mlp2 Mlp2::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
    Mlp2 m;
    m.W1 = Mat(hidden, in);
    m.b1.assign(hidden, 0.0);
    m.W2 = Mat(out, hidden);
    m.b2.assign(out, 0.0);
    return m;
}

Mlp2 Mlp2::random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
    Mlp2 m = zeros(in, hidden, out);
    const double s1 = std::sqrt(2.0 / static_cast<double>(in));
    const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
    for (double& w : m.W1.a) w = rng.normal() * s1;
    for (double& w : m.W2.a) w = rng.normal() * s2;
    return m;
}

void Mlp2::zero() {
    std::fill(W1.a.begin(), W1.a.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(W2.a.begin(), W2.a.end(), 0.0);
    std::fill(b2.begin(), b2.end(), 0.0);
}

bool Mlp2::shape_matches(const Mlp2& o) const {
    return W1.rows == o.W1.rows && W1.cols == o.W1.cols && W2.rows == o.W2.rows &&
           W2.cols == o.W2.cols;
}

Vec mlp2_forward(const Mlp2& m, const Vec& x, Mlp2Cache* cache) {
    check(x.size() == m.in(), Errc::validation, "mlp2_forward: input dimension mismatch");
    Vec pre = mat_vec(m.W1, x);
    axpy(1.0, m.b1, pre);
    Vec hid(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) {
        const bool active = pre[i] > 0.0;
        kink::note(active);
        hid[i] = active ? pre[i] : 0.0;
    }
    Vec y = mat_vec(m.W2, hid);
    axpy(1.0, m.b2, y);
    if (cache) {
        cache->x = x;
        cache->pre = std::move(pre);
        cache->hid = hid;
    }
    return y;
}

Vec mlp2_backward(const Mlp2& m, const Mlp2Cache& cache, const Vec& dy, Mlp2& grad) {
    check(grad.shape_matches(m), Errc::validation, "mlp2_backward: gradient holder shape mismatch");
    check(dy.size() == m.out(), Errc::validation, "mlp2_backward: dy dimension mismatch");
    check(cache.x.size() == m.in() && cache.pre.size() == m.hidden(), Errc::validation,
          "mlp2_backward: stale cache shape");
    add_outer(grad.W2, dy, cache.hid);
    axpy(1.0, dy, grad.b2);
    Vec dh = mat_tvec(m.W2, dy);
    for (std::size_t i = 0; i < dh.size(); ++i)
        if (!(cache.pre[i] > 0.0)) dh[i] = 0.0;
    add_outer(grad.W1, dh, cache.x);
    axpy(1.0, dh, grad.b1);
    return mat_tvec(m.W1, dh);
}

void ParamSet::add(const std::string& prefix, Mlp2& m) {
    add(prefix + ".W1", m.W1);
    add(prefix + ".b1", m.b1);
    add(prefix + ".W2", m.W2);
    add(prefix + ".b2", m.b2);
}

std::size_t ParamSet::total_scalars() const {
    std::size_t n = 0;
    for (const auto& r : refs_) n += r.v->size();
    return n;
}

void ParamSet::zero_all() {
    for (auto& r : refs_) std::fill(r.v->begin(), r.v->end(), 0.0);
}

void ParamSet::copy_values_from(const ParamSet& o) {
    check(o.size() == size(), Errc::validation, "ParamSet::copy_values_from: size mismatch");
    for (std::size_t i = 0; i < refs_.size(); ++i) {
        check(o.refs_[i].v->size() == refs_[i].v->size(), Errc::validation,
              "ParamSet::copy_values_from: shape mismatch at " + refs_[i].name);
        *refs_[i].v = *o.refs_[i].v;
    }
}

std::uint64_t ParamSet::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& r : refs_) {
        h = fnv1a(r.name.data(), r.name.size(), h);
        h = fnv1a(r.v->data(), r.v->size() * sizeof(double), h);
    }
    return h;
}

bool ParamSet::all_finite() const {
    for (const auto& r : refs_)
        if (!dynmm::all_finite(*r.v)) return false;
    return true;
}

void AdamW::init(const ParamSet& params) {
    m_.clear();
    v_.clear();
    for (const auto& r : params.refs()) {
        m_.emplace_back(r.v->size(), 0.0);
        v_.emplace_back(r.v->size(), 0.0);
    }
    step_ = 0;
}

void AdamW::step(const ParamSet& params, const ParamSet& grads) {
    check(m_.size() == params.size(), Errc::validation, "AdamW: not initialized for this ParamSet");
    check(grads.size() == params.size(), Errc::validation, "AdamW: grad set size mismatch");
    for (const auto& r : grads.refs())
        check(dynmm::all_finite(*r.v), Errc::numeric, "AdamW: non-finite gradient in " + r.name);
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Vec& p = *params.refs()[i].v;
        const Vec& g = *grads.refs()[i].v;
        Vec& m = m_[i];
        Vec& v = v_[i];
        check(p.size() == g.size(), Errc::validation, "AdamW: gradient shape mismatch");
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[j]);
        }
        flops::add(p.size() * 5);
    }
}

FiniteDiffReport finite_diff_check(const LossFn& fn, const ParamSet& params,
                                   const ParamSet& analytic_grads, double h) {
    check(params.size() == analytic_grads.size(), Errc::validation,
          "finite_diff_check: param/grad set mismatch");
    FiniteDiffReport rep;
    for (std::size_t b = 0; b < params.size(); ++b) {
        Vec& theta = *params.refs()[b].v;
        const Vec& g = *analytic_grads.refs()[b].v;
        FiniteDiffReport::Block blk;
        blk.name = params.refs()[b].name;
        for (std::size_t j = 0; j < theta.size(); ++j) {
            const double orig = theta[j];
            theta[j] = orig + h;
            const LossEval up = fn();
            theta[j] = orig - h;
            const LossEval dn = fn();
            theta[j] = orig;
            if (up.kink_sig != dn.kink_sig) {
                ++blk.excluded;
                continue;
            }
            const double fd = (up.loss - dn.loss) / (2.0 * h);
            const double denom = std::max({1e-8, std::fabs(fd), std::fabs(g[j])});
            const double rel = std::fabs(fd - g[j]) / denom;
            blk.max_rel_err = std::max(blk.max_rel_err, rel);
            ++blk.checked;
        }
        rep.max_rel_err = std::max(rep.max_rel_err, blk.max_rel_err);
        rep.excluded_total += blk.excluded;
        rep.blocks.push_back(std::move(blk));
    }
    return rep;
}

std::string FiniteDiffReport::to_string() const {
    std::ostringstream os;
    for (const auto& b : blocks) {
        os << "  " << b.name << ": max_rel_err=" << b.max_rel_err << " checked=" << b.checked;
        if (b.excluded) os << " excluded=" << b.excluded;
        os << "\n";
    }
    os << "  overall max_rel_err=" << max_rel_err << " excluded=" << excluded_total << "\n";
    return os.str();
}

}  // namespace dynmm
