// SPDX-License-Identifier: Apache-2.0
#include "dynmm/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dynmm {

WindowStats WindowStats::build(std::span<const Interaction> events, std::uint32_t window_id) {
    WindowStats s;
    s.window_id = window_id;
    if (events.empty()) return s;
    s.t_begin = events.front().ts;
    s.t_end = events.front().ts;
    for (const auto& e : events) {
        ++s.item_counts[e.item];
        ++s.user_counts[e.user];
        s.items_by_user[e.user].push_back(e.item);
        s.users_by_item[e.item].push_back(e.user);
        s.item_event_times[e.item].push_back(e.ts);
        s.user_event_times[e.user].push_back(e.ts);
        s.t_begin = std::min(s.t_begin, e.ts);
        s.t_end = std::max(s.t_end, e.ts);
        ++s.total;
    }
    auto dedup = [](std::unordered_map<std::size_t, std::vector<std::size_t>>& m) {
        for (auto& [k, v] : m) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    };
    dedup(s.items_by_user);
    dedup(s.users_by_item);
    return s;
}

namespace {

double rank_percentile(const std::unordered_map<std::size_t, std::uint64_t>& counts,
                       std::uint64_t my_count) {
    if (my_count == 0 || counts.empty()) return 0.0;
    std::size_t below = 0;
    for (const auto& [id, c] : counts)
        if (c < my_count) ++below;
    return static_cast<double>(below) / static_cast<double>(counts.size());
}

double safe_cosine(const Vec& a, const Vec& b) {
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

}  // namespace

WindowSummary summarize_window(const WindowStats& cur, const WindowStats* prev, EntityKind kind,
                               std::size_t entity_idx, const Dataset& ds, const ModelConfig& cfg) {
    check(cfg.d_s == 8, Errc::validation, "summarize_window: d_s must be 8");
    WindowSummary out;
    out.window_id = cur.window_id;
    out.entity = entity_idx;
    out.kind = kind;
    out.v.assign(cfg.d_s, 0.0);
    if (cur.total == 0) return out;  // empty window -> zero summary

    const bool is_item = kind == EntityKind::item;
    const auto& counts = is_item ? cur.item_counts : cur.user_counts;
    std::uint64_t count = 0;
    if (auto it = counts.find(entity_idx); it != counts.end()) count = it->second;

    out.v[0] = std::log1p(static_cast<double>(count));
    out.v[1] = static_cast<double>(count) / static_cast<double>(cur.total);
    out.v[2] = rank_percentile(counts, count);

    std::uint64_t prev_count = 0;
    if (prev) {
        const auto& pc = is_item ? prev->item_counts : prev->user_counts;
        if (auto it = pc.find(entity_idx); it != pc.end()) prev_count = it->second;
    }
    out.v[3] = (static_cast<double>(count) - static_cast<double>(prev_count)) /
               std::max<double>(1.0, static_cast<double>(count + prev_count));

    // Lane 4: co-interaction affinity in CF space.
    const Vec& own_cf = is_item ? ds.items[entity_idx].feature(Modality::cf)
                                : ds.users[entity_idx].cf_embedding;
    {
        std::set<std::size_t> co_items;
        if (is_item) {
            if (auto uit = cur.users_by_item.find(entity_idx); uit != cur.users_by_item.end())
                for (std::size_t u : uit->second)
                    for (std::size_t j : cur.items_by_user.at(u))
                        if (j != entity_idx) co_items.insert(j);
        } else {
            if (auto iit = cur.items_by_user.find(entity_idx); iit != cur.items_by_user.end())
                co_items.insert(iit->second.begin(), iit->second.end());
        }
        if (!co_items.empty()) {
            double acc = 0.0;
            for (std::size_t j : co_items) acc += safe_cosine(own_cf, ds.items[j].feature(Modality::cf));
            out.v[4] = acc / static_cast<double>(co_items.size());
        }
    }

    // Lane 5: recency weighting with half-life = span / 2.
    {
        const auto& times = is_item ? cur.item_event_times : cur.user_event_times;
        if (auto it = times.find(entity_idx); it != times.end()) {
            const double span = static_cast<double>(cur.t_end - cur.t_begin);
            const double half_life = span / 2.0;
            double acc = 0.0;
            for (Timestamp t : it->second) {
                if (half_life <= 0.0) {
                    acc += 1.0;
                } else {
                    acc += std::pow(0.5, static_cast<double>(cur.t_end - t) / half_life);
                }
            }
            out.v[5] = acc;
        }
    }

    // Lane 6: unique counterparts, normalized.
    {
        const auto& mine = is_item ? cur.users_by_item : cur.items_by_user;
        const std::size_t total_counterparts =
            is_item ? cur.user_counts.size() : cur.item_counts.size();
        if (auto it = mine.find(entity_idx); it != mine.end() && total_counterparts > 0)
            out.v[6] = static_cast<double>(it->second.size()) /
                       static_cast<double>(total_counterparts);
    }

    out.v[7] = 1.0;
    return out;
}

void ReplayBuffer::push(const ReplayTuple& t) {
    if (capacity_ == 0) return;
    if (buf_.size() == capacity_) buf_.pop_front();
    buf_.push_back(t);
}

std::vector<ReplayTuple> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
    std::vector<ReplayTuple> out;
    if (buf_.empty()) return out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(buf_[rng.uniform_int(buf_.size())]);
    return out;
}

AdapterState AdapterState::init(const ModelConfig& cfg, Rng& rng) {
    AdapterState st;
    const std::size_t in = cfg.d + cfg.d_s;
    st.g_delta = Mlp2::random(in, cfg.adapter_hidden_dim(), cfg.d, rng);
    st.separate_user = cfg.separate_user_adapter;
    if (st.separate_user) st.g_delta_user = Mlp2::random(in, cfg.adapter_hidden_dim(), cfg.d, rng);
    st.gate_item.assign(in, 0.0);
    st.gate_user.assign(in, 0.0);
    st.replay = ReplayBuffer(cfg.replay_capacity);
    st.init_shadow_buffers();
    return st;
}

AdapterState AdapterState::zeros(const ModelConfig& cfg) {
    AdapterState st;
    const std::size_t in = cfg.d + cfg.d_s;
    st.g_delta = Mlp2::zeros(in, cfg.adapter_hidden_dim(), cfg.d);
    st.separate_user = cfg.separate_user_adapter;
    if (st.separate_user) st.g_delta_user = Mlp2::zeros(in, cfg.adapter_hidden_dim(), cfg.d);
    st.gate_item.assign(in, 0.0);
    st.gate_user.assign(in, 0.0);
    st.replay = ReplayBuffer(cfg.replay_capacity);
    st.init_shadow_buffers();
    return st;
}

void AdapterState::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + ".g_delta", g_delta);
    if (separate_user) set.add(prefix + ".g_delta_user", g_delta_user);
    set.add(prefix + ".gate_item", gate_item);
    set.add(prefix + ".gate_user", gate_user);
}

const Mlp2& AdapterState::adapter_for(EntityKind kind) const {
    if (kind == EntityKind::user && separate_user) return g_delta_user;
    return g_delta;
}

void AdapterState::init_shadow_buffers() {
    ParamSet set;
    register_params(set);
    ema.clear();
    ewc_anchor.clear();
    ewc_importance.clear();
    for (const auto& r : set.refs()) {
        ema.push_back(*r.v);
        ewc_anchor.push_back(*r.v);
        ewc_importance.emplace_back(r.v->size(), 0.0);
    }
}

void AdapterState::ema_update(double decay) {
    ParamSet set;
    register_params(set);
    check(ema.size() == set.size(), Errc::validation, "AdapterState: ema buffers not initialized");
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vec& p = *set.refs()[i].v;
        Vec& s = ema[i];
        for (std::size_t j = 0; j < p.size(); ++j) s[j] = decay * s[j] + (1.0 - decay) * p[j];
    }
}

void AdapterState::refresh_anchor() {
    ParamSet set;
    register_params(set);
    for (std::size_t i = 0; i < set.size(); ++i) ewc_anchor[i] = *set.refs()[i].v;
}

double AdapterState::ewc_penalty() const {
    ParamSet set;
    const_cast<AdapterState*>(this)->register_params(set);
    double acc = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vec& p = *set.refs()[i].v;
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double diff = p[j] - ewc_anchor[i][j];
            acc += ewc_importance[i][j] * diff * diff;
        }
    }
    return acc;
}

void AdapterState::add_ewc_grad(double coeff, ParamSet& grads) {
    ParamSet set;
    register_params(set);
    check(grads.size() == set.size(), Errc::validation, "add_ewc_grad: grad set mismatch");
    for (std::size_t i = 0; i < set.size(); ++i) {
        const Vec& p = *set.refs()[i].v;
        Vec& g = *grads.refs()[i].v;
        for (std::size_t j = 0; j < p.size(); ++j)
            g[j] += coeff * 2.0 * ewc_importance[i][j] * (p[j] - ewc_anchor[i][j]);
    }
}

AdapterState AdapterState::ema_copy() const {
    AdapterState copy = *this;
    ParamSet set;
    copy.register_params(set);
    for (std::size_t i = 0; i < set.size(); ++i) *set.refs()[i].v = ema[i];
    return copy;
}

double gate(const Vec& entity_features, const Vec& summary, const Vec& gate_w) {
    const Vec in = concat(entity_features, summary);
    check(in.size() == gate_w.size(), Errc::validation, "gate: dimension mismatch");
    return 1.0 / (1.0 + std::exp(-dot(gate_w, in)));
}

JointLatent dynamic_latent(const JointLatent& base, const Vec& entity_features, const Vec& summary,
                           const AdapterState& st, EntityKind kind, DynCache* cache) {
    check(base.kind == LatentKind::base, Errc::validation,
          "dynamic_latent: input latent must be of base kind");
    const Vec in = concat(entity_features, summary);
    const Vec& w = kind == EntityKind::item ? st.gate_item : st.gate_user;
    check(in.size() == w.size(), Errc::validation, "dynamic_latent: gate dimension mismatch");
    const double alpha = 1.0 / (1.0 + std::exp(-dot(w, in)));
    Mlp2Cache local;
    Mlp2Cache* gc = cache ? &cache->g_cache : &local;
    Vec g_out = mlp2_forward(st.adapter_for(kind), in, gc);
    JointLatent out;
    out.kind = LatentKind::dynamic;
    out.v = base.v;
    axpy(alpha, g_out, out.v);
    if (cache) {
        cache->gate_in = in;
        cache->alpha = alpha;
        cache->g_out = std::move(g_out);
    }
    return out;
}

void dynamic_latent_backward(const AdapterState& st, EntityKind kind, const DynCache& cache,
                             const Vec& dz, AdapterState& grads) {
    // z = z_base + alpha * g  =>  dg = alpha * dz ; dalpha = dz . g
    Mlp2& g_grad = (kind == EntityKind::user && st.separate_user) ? grads.g_delta_user
                                                                  : grads.g_delta;
    mlp2_backward(st.adapter_for(kind), cache.g_cache, scaled(dz, cache.alpha), g_grad);
    const double dalpha = dot(dz, cache.g_out);
    const double dsig = cache.alpha * (1.0 - cache.alpha) * dalpha;
    Vec& gw = kind == EntityKind::item ? grads.gate_item : grads.gate_user;
    axpy(dsig, cache.gate_in, gw);
}

double stability_loss(const Vec& z, const Vec& z_base, const LossWeights& w,
                      const AdapterState& st) {
    check(w.sigma_sq > 0.0, Errc::numeric, "stability_loss: sigma_sq must be positive");
    return sqdist(z, z_base) / (2.0 * w.sigma_sq) + w.lambda_ewc * st.ewc_penalty();
}

void estimate_fisher(AdapterState& st, std::span<const ReplayTuple> sample,
                     const TupleGradFn& fn) {
    check(!sample.empty(), Errc::validation, "estimate_fisher: empty sample");
    ParamSet set;
    st.register_params(set);
    std::vector<Vec> acc;
    for (const auto& r : set.refs()) acc.emplace_back(r.v->size(), 0.0);

    // Per-tuple gradient buffers, squared then averaged.
    AdapterState scratch = st;
    ParamSet scratch_set;
    scratch.register_params(scratch_set);
    for (const auto& t : sample) {
        scratch_set.zero_all();
        fn(t, scratch_set);
        for (std::size_t i = 0; i < scratch_set.size(); ++i) {
            const Vec& g = *scratch_set.refs()[i].v;
            for (std::size_t j = 0; j < g.size(); ++j) acc[i][j] += g[j] * g[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(sample.size());
    for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < acc[i].size(); ++j) acc[i][j] *= inv;
    st.ewc_importance = std::move(acc);
}

}  // namespace dynmm
