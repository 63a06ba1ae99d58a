// SPDX-License-Identifier: Apache-2.0
#include "dynmm/fusion.hpp"

#include <cmath>

#include "dynmm/base_aligner.hpp"

namespace dynmm {

ModalityProjector ModalityProjector::init(const ModelConfig& cfg, Rng& rng) {
    ModalityProjector p;
    p.txt = Mlp2::random(cfg.d_t, cfg.d, cfg.d, rng);
    p.vis = Mlp2::random(cfg.d_vis, cfg.d, cfg.d, rng);
    p.aud = Mlp2::random(cfg.d_aud, cfg.d, cfg.d, rng);
    return p;
}

ModalityProjector ModalityProjector::zeros_like(const ModalityProjector& o) {
    ModalityProjector p;
    p.txt = Mlp2::zeros(o.txt.in(), o.txt.hidden(), o.txt.out());
    p.vis = Mlp2::zeros(o.vis.in(), o.vis.hidden(), o.vis.out());
    p.aud = Mlp2::zeros(o.aud.in(), o.aud.hidden(), o.aud.out());
    return p;
}

const Mlp2& ModalityProjector::of(Modality m) const {
    switch (m) {
        case Modality::txt: return txt;
        case Modality::vis: return vis;
        case Modality::aud: return aud;
        default: fail(Errc::validation, "projector: unknown modality (cf is not projected)");
    }
}

Mlp2& ModalityProjector::of(Modality m) {
    return const_cast<Mlp2&>(static_cast<const ModalityProjector*>(this)->of(m));
}

Vec project(const ModalityProjector& p, Modality m, const Vec& feature, Mlp2Cache* cache) {
    return mlp2_forward(p.of(m), feature, cache);
}

namespace {

struct CosParts {
    double na, nb, cos;
};

CosParts cos_parts(const Vec& a, const Vec& b) {
    const double na = norm2(a), nb = norm2(b);
    check(na > 0.0 && nb > 0.0, Errc::numeric, "info_nce: zero-norm embedding");
    return {na, nb, dot(a, b) / (na * nb)};
}

}  // namespace

double info_nce(const std::vector<Vec>& anchors, const std::vector<Vec>& positives, double tau) {
    return info_nce_grad(anchors, positives, tau, nullptr, nullptr);
}

double info_nce_grad(const std::vector<Vec>& anchors, const std::vector<Vec>& positives, double tau,
                     std::vector<Vec>* d_anchors, std::vector<Vec>* d_positives) {
    const std::size_t n = anchors.size();
    check(n == positives.size(), Errc::validation, "info_nce: list length mismatch");
    check(n >= 2, Errc::validation, "info_nce: need at least 2 pairs");
    check(tau > 0.0, Errc::validation, "info_nce: tau must be positive");

    std::vector<CosParts> parts(n * n);
    std::vector<double> sim(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            parts[i * n + j] = cos_parts(anchors[i], positives[j]);
            sim[i * n + j] = parts[i * n + j].cos / tau;
        }

    double loss = 0.0;
    std::vector<double> soft(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        double mx = sim[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, sim[i * n + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            soft[i * n + j] = std::exp(sim[i * n + j] - mx);
            z += soft[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) soft[i * n + j] /= z;
        loss += -(sim[i * n + i] - mx - std::log(z));
    }
    loss /= static_cast<double>(n);

    if (d_anchors || d_positives) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double dsim =
                    (soft[i * n + j] - (i == j ? 1.0 : 0.0)) / (static_cast<double>(n) * tau);
                if (dsim == 0.0) continue;
                const CosParts& cp = parts[i * n + j];
                // dcos/da = b/(na*nb) - cos * a/na^2 ; symmetric for b.
                if (d_anchors) {
                    Vec& da = (*d_anchors)[i];
                    for (std::size_t t = 0; t < da.size(); ++t)
                        da[t] += dsim * (positives[j][t] / (cp.na * cp.nb) -
                                         cp.cos * anchors[i][t] / (cp.na * cp.na));
                }
                if (d_positives) {
                    Vec& dp = (*d_positives)[j];
                    for (std::size_t t = 0; t < dp.size(); ++t)
                        dp[t] += dsim * (anchors[i][t] / (cp.na * cp.nb) -
                                         cp.cos * positives[j][t] / (cp.nb * cp.nb));
                }
            }
        }
        flops::add(4 * n * n * anchors[0].size());
    }
    return loss;
}

namespace {

const std::vector<std::pair<Modality, Modality>>& pair_set(bool include_audio) {
    static const std::vector<std::pair<Modality, Modality>> base = {
        {Modality::cf, Modality::txt}, {Modality::cf, Modality::vis}, {Modality::txt, Modality::vis}};
    static const std::vector<std::pair<Modality, Modality>> with_audio = {
        {Modality::cf, Modality::txt}, {Modality::cf, Modality::vis}, {Modality::txt, Modality::vis},
        {Modality::cf, Modality::aud}, {Modality::txt, Modality::aud}};
    return include_audio ? with_audio : base;
}

}  // namespace

double masked_mm_loss(const ContrastiveBatch& batch, bool include_audio_pairs) {
    double loss = 0.0;
    for (const auto& [m1, m2] : pair_set(include_audio_pairs)) {
        std::vector<Vec> a, p;
        for (const auto& e : batch.embs) {
            const Vec& v1 = e[static_cast<int>(m1)];
            const Vec& v2 = e[static_cast<int>(m2)];
            if (v1.empty() || v2.empty()) continue;
            a.push_back(v1);
            p.push_back(v2);
        }
        if (a.size() < 2) continue;
        loss += info_nce(a, p, batch.tau);
    }
    return loss;
}

double masked_mm_loss_grad(const ContrastiveBatch& batch, bool include_audio_pairs,
                           std::vector<std::array<Vec, 4>>& d_embs) {
    check(d_embs.size() == batch.embs.size(), Errc::validation,
          "masked_mm_loss_grad: gradient holder size mismatch");
    double loss = 0.0;
    for (const auto& [m1, m2] : pair_set(include_audio_pairs)) {
        std::vector<Vec> a, p;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < batch.embs.size(); ++i) {
            const Vec& v1 = batch.embs[i][static_cast<int>(m1)];
            const Vec& v2 = batch.embs[i][static_cast<int>(m2)];
            if (v1.empty() || v2.empty()) continue;
            a.push_back(v1);
            p.push_back(v2);
            idx.push_back(i);
        }
        if (a.size() < 2) continue;
        std::vector<Vec> da(a.size()), dp(p.size());
        for (std::size_t t = 0; t < a.size(); ++t) {
            da[t].assign(a[t].size(), 0.0);
            dp[t].assign(p[t].size(), 0.0);
        }
        loss += info_nce_grad(a, p, batch.tau, &da, &dp);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            Vec& g1 = d_embs[idx[t]][static_cast<int>(m1)];
            Vec& g2 = d_embs[idx[t]][static_cast<int>(m2)];
            if (g1.empty()) g1.assign(da[t].size(), 0.0);
            if (g2.empty()) g2.assign(dp[t].size(), 0.0);
            axpy(1.0, da[t], g1);
            axpy(1.0, dp[t], g2);
        }
    }
    return loss;
}

JointLatent fuse_item(const BaseAlignerParams& base, const ModalityProjector& proj,
                      const ItemRecord& item, const ModelConfig& cfg, FuseCache* cache) {
    check(item.mask[Modality::cf], Errc::validation, "fuse_item: item lacks cf feature");
    const Vec& cf = item.feature(Modality::cf);

    Vec blend = cf;
    std::size_t used = 0;
    const std::pair<Modality, bool> sides[] = {{Modality::vis, cfg.use_vis},
                                               {Modality::aud, cfg.use_aud}};
    for (const auto& [m, enabled] : sides) {
        if (!enabled || !item.mask[m]) continue;
        Mlp2Cache* pc = cache ? &cache->proj[static_cast<int>(m)] : nullptr;
        Vec pm = project(proj, m, item.feature(m), pc);
        axpy(1.0, pm, blend);
        if (cache) cache->used[static_cast<int>(m)] = true;
        ++used;
    }
    const double inv = 1.0 / static_cast<double>(1 + used);
    for (auto& v : blend) v *= inv;

    Vec txt_in(base.item_fuser.in() - cfg.d, 0.0);
    if (cfg.use_txt && item.mask[Modality::txt]) txt_in = item.feature(Modality::txt);

    JointLatent out;
    out.kind = LatentKind::base;
    out.v = mlp2_forward(base.item_fuser, concat(blend, txt_in), cache ? &cache->fuser : nullptr);
    if (cache) cache->inv_blend = inv;
    return out;
}

void fuse_item_backward(const BaseAlignerParams& base, const ModalityProjector& proj,
                        const FuseCache& cache, const Vec& dz, Mlp2& d_item_fuser,
                        ModalityProjector& d_proj) {
    Vec dx = mlp2_backward(base.item_fuser, cache.fuser, dz, d_item_fuser);
    // First d entries are d(blend); text input is a raw feature (constant).
    const std::size_t d = base.item_fuser.out();
    Vec d_blend(dx.begin(), dx.begin() + static_cast<std::ptrdiff_t>(d));
    for (auto& v : d_blend) v *= cache.inv_blend;
    for (Modality m : {Modality::vis, Modality::aud}) {
        if (!cache.used[static_cast<int>(m)]) continue;
        mlp2_backward(proj.of(m), cache.proj[static_cast<int>(m)], d_blend, d_proj.of(m));
    }
}

}  // namespace dynmm
