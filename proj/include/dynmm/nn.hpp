// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dynmm/linalg.hpp"
#include "dynmm/rng.hpp"

namespace dynmm {

// Records which side of each ReLU/hinge kink a forward pass took. The
// finite-difference checker compares signatures at theta+h and theta-h and
// excludes coordinates whose perturbation crosses a kink.
namespace kink {
void begin();
void end();
bool enabled();
void note(bool active);
std::uint64_t signature();
}  // namespace kink

// Two-layer perceptron y = W2 relu(W1 x + b1) + b2. The ReLU subgradient at
// exactly 0 is 0. The same struct doubles as its own gradient holder.
struct Mlp2 {
    Mat W1;
    Vec b1;
    Mat W2;
    Vec b2;

    std::size_t in() const { return W1.cols; }
    std::size_t hidden() const { return W1.rows; }
    std::size_t out() const { return W2.rows; }

    static Mlp2 zeros(std::size_t in, std::size_t hidden, std::size_t out);
    // He-scaled normal init, deterministic under the rng.
    static Mlp2 random(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

    void zero();
    bool shape_matches(const Mlp2& o) const;
};

struct Mlp2Cache {
    Vec x;    // input
    Vec pre;  // W1 x + b1
    Vec hid;  // relu(pre)
};

// cache may be null when no backward pass will follow.
Vec mlp2_forward(const Mlp2& m, const Vec& x, Mlp2Cache* cache = nullptr);

// Accumulates parameter gradients into `grad` and returns dL/dx.
Vec mlp2_backward(const Mlp2& m, const Mlp2Cache& cache, const Vec& dy, Mlp2& grad);

// Named views over the flat storage of trainable blocks. Two ParamSets built
// by the same registration calls over a parameter struct and its gradient
// mirror are index-aligned.
struct ParamRef {
    std::string name;
    Vec* v;
};

class ParamSet {
public:
    void add(const std::string& name, Vec& v) { refs_.push_back({name, &v}); }
    void add(const std::string& name, Mat& m) { refs_.push_back({name, &m.a}); }
    void add(const std::string& prefix, Mlp2& m);

    const std::vector<ParamRef>& refs() const { return refs_; }
    std::size_t size() const { return refs_.size(); }
    std::size_t total_scalars() const;

    void zero_all();
    void copy_values_from(const ParamSet& o);
    std::uint64_t digest() const;  // byte digest, for frozenness checks
    bool all_finite() const;

private:
    std::vector<ParamRef> refs_;
};

// Decoupled-weight-decay Adam over a ParamSet. Moment buffers are parallel
// to the refs; step() rejects non-finite gradients.
class AdamW {
public:
    AdamW() = default;
    AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
        : lr(lr), beta1(beta1), beta2(beta2), eps(eps), weight_decay(weight_decay) {}

    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;

    void init(const ParamSet& params);
    void step(const ParamSet& params, const ParamSet& grads);

    std::uint64_t step_count() const { return step_; }
    std::vector<Vec>& first_moments() { return m_; }
    std::vector<Vec>& second_moments() { return v_; }
    void set_step_count(std::uint64_t s) { step_ = s; }

private:
    std::vector<Vec> m_, v_;
    std::uint64_t step_ = 0;
};

// Loss evaluation hook for gradient checking: returns the loss value and the
// kink signature of the forward pass.
struct LossEval {
    double loss = 0.0;
    std::uint64_t kink_sig = 0;
};
using LossFn = std::function<LossEval()>;

struct FiniteDiffReport {
    struct Block {
        std::string name;
        double max_rel_err = 0.0;
        std::size_t checked = 0;
        std::size_t excluded = 0;  // kink-crossing coordinates
    };
    std::vector<Block> blocks;
    double max_rel_err = 0.0;
    std::size_t excluded_total = 0;
    bool passed(double tol) const { return max_rel_err < tol; }
    std::string to_string() const;
};

// Central differences with step h against the supplied analytic gradients.
FiniteDiffReport finite_diff_check(const LossFn& fn, const ParamSet& params,
                                   const ParamSet& analytic_grads, double h = 1e-5);

}  // namespace dynmm
