// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <span>
#include <unordered_map>

#include "dynmm/config.hpp"
#include "dynmm/dataset.hpp"
#include "dynmm/nn.hpp"

namespace dynmm {

enum class EntityKind { item, user };

// Aggregates of one window's events, shared by all summaries of that window.
struct WindowStats {
    std::unordered_map<std::size_t, std::uint64_t> item_counts;
    std::unordered_map<std::size_t, std::uint64_t> user_counts;
    std::unordered_map<std::size_t, std::vector<std::size_t>> items_by_user;  // sorted unique
    std::unordered_map<std::size_t, std::vector<std::size_t>> users_by_item;  // sorted unique
    std::unordered_map<std::size_t, std::vector<Timestamp>> item_event_times;
    std::unordered_map<std::size_t, std::vector<Timestamp>> user_event_times;
    std::uint64_t total = 0;
    Timestamp t_begin = 0;
    Timestamp t_end = 0;
    std::uint32_t window_id = 0;

    static WindowStats build(std::span<const Interaction> events, std::uint32_t window_id);
};

struct WindowSummary {
    Vec v;  // d_s = 8 lanes, schema below
    std::uint32_t window_id = 0;
    std::uint64_t entity = 0;
    EntityKind kind = EntityKind::item;
};

// Fixed 8-lane schema (empty window -> all-zero except the bias lane... the
// bias lane is part of the schema and always 1 when the summary is built
// from a window; a fully absent summary is the zero vector):
//   0: log(1 + count of entity events in W)
//   1: count / total events in W
//   2: popularity rank percentile among active same-kind entities
//      (#active with strictly smaller count / #active; 0 if inactive)
//   3: (count_W - count_prevW) / max(1, count_W + count_prevW)
//   4: mean cosine of co-interacted item CF embeddings to this entity's CF
//      embedding (items: co-items via shared users; users: their items)
//   5: recency-weighted count, half-life = window span / 2
//   6: unique counterparts / total unique counterparts in W
//   7: constant 1
WindowSummary summarize_window(const WindowStats& cur, const WindowStats* prev, EntityKind kind,
                               std::size_t entity_idx, const Dataset& ds, const ModelConfig& cfg);

struct ReplayTuple {
    std::size_t user = 0;
    std::size_t pos = 0;
    std::size_t neg = 0;
    std::uint32_t window_id = 0;
};

// FIFO ring of training tuples.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 1024) : capacity_(capacity) {}

    void push(const ReplayTuple& t);
    std::vector<ReplayTuple> sample(std::size_t n, Rng& rng) const;
    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::deque<ReplayTuple>& contents() const { return buf_; }
    void set_contents(std::deque<ReplayTuple> c) { buf_ = std::move(c); }

private:
    std::size_t capacity_;
    std::deque<ReplayTuple> buf_;
};

// Trainable online state: the gated residual adapter, its EMA shadow, EWC
// anchors/importances and the replay buffer. Base parameters never live
// here; only the adapter updates online.
struct AdapterState {
    Mlp2 g_delta;       // (d + d_s) -> d
    Mlp2 g_delta_user;  // used only when separate_user is set
    Vec gate_item;      // w, dim d + d_s
    Vec gate_user;
    bool separate_user = false;

    std::vector<Vec> ema;             // parallel to register_params order
    std::vector<Vec> ewc_anchor;      // theta*
    std::vector<Vec> ewc_importance;  // F, non-negative
    ReplayBuffer replay;
    std::uint32_t window_counter = 0;

    static AdapterState init(const ModelConfig& cfg, Rng& rng);
    // Zero residual: g_delta == 0 makes the system exactly the frozen base.
    static AdapterState zeros(const ModelConfig& cfg);

    void register_params(ParamSet& set, const std::string& prefix = "adapter");
    const Mlp2& adapter_for(EntityKind kind) const;

    void init_shadow_buffers();  // sizes ema/ewc buffers from current params
    void ema_update(double decay);
    void refresh_anchor();  // theta* <- theta (importances kept)
    double ewc_penalty() const;
    // grads += coeff * 2 F (theta - theta*)
    void add_ewc_grad(double coeff, ParamSet& grads);

    // Copy with parameters replaced by the EMA shadow (for serving).
    AdapterState ema_copy() const;
};

double gate(const Vec& entity_features, const Vec& summary, const Vec& gate_w);

struct DynCache {
    Vec gate_in;
    double alpha = 0.0;
    Vec g_out;
    Mlp2Cache g_cache;
};

// z = z_base + alpha * g_delta([features; summary]); requires base kind.
JointLatent dynamic_latent(const JointLatent& base, const Vec& entity_features, const Vec& summary,
                           const AdapterState& st, EntityKind kind, DynCache* cache = nullptr);

// Backward through the residual: accumulates adapter/gate grads.
void dynamic_latent_backward(const AdapterState& st, EntityKind kind, const DynCache& cache,
                             const Vec& dz, AdapterState& grads);

// KL(N(z, s^2 I) || N(z_base, s^2 I)) + lambda_ewc * sum F (theta - theta*)^2.
double stability_loss(const Vec& z, const Vec& z_base, const LossWeights& w,
                      const AdapterState& st);

// F_j = mean over the sample of squared ranking-loss gradients. The caller
// supplies the per-tuple gradient evaluation (it needs the full scoring
// path); grads arrive in register_params order.
using TupleGradFn =
    std::function<void(const ReplayTuple& t, const ParamSet& grads_out)>;
void estimate_fisher(AdapterState& st, std::span<const ReplayTuple> sample, const TupleGradFn& fn);

}  // namespace dynmm
