// SPDX-License-Identifier: Apache-2.0
#include "dynmm/base_aligner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "dynmm/fusion.hpp"

namespace dynmm {

namespace {

std::uint32_t modality_dim(const ModelConfig& cfg, Modality m) {
    switch (m) {
        case Modality::cf: return cfg.d;
        case Modality::txt: return cfg.d_t;
        case Modality::vis: return cfg.d_vis;
        case Modality::aud: return cfg.d_aud;
    }
    return 0;
}

}  // namespace

BaseAlignerParams BaseAlignerParams::init(const ModelConfig& cfg, Rng& rng) {
    BaseAlignerParams p;
    p.item_fuser = Mlp2::random(cfg.d + cfg.d_t, cfg.d, cfg.d, rng);
    p.user_fuser = Mlp2::random(cfg.d, cfg.d, cfg.d, rng);
    for (Modality m : kModalities)
        p.decoders[static_cast<int>(m)] = Mlp2::random(cfg.d, cfg.d, modality_dim(cfg, m), rng);
    return p;
}

BaseAlignerParams BaseAlignerParams::zeros_like(const BaseAlignerParams& o) {
    BaseAlignerParams p;
    p.item_fuser = Mlp2::zeros(o.item_fuser.in(), o.item_fuser.hidden(), o.item_fuser.out());
    p.user_fuser = Mlp2::zeros(o.user_fuser.in(), o.user_fuser.hidden(), o.user_fuser.out());
    for (int m = 0; m < 4; ++m)
        p.decoders[m] = Mlp2::zeros(o.decoders[m].in(), o.decoders[m].hidden(), o.decoders[m].out());
    return p;
}

void BaseAlignerParams::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + ".item_fuser", item_fuser);
    set.add(prefix + ".user_fuser", user_fuser);
    for (Modality m : kModalities)
        set.add(prefix + ".dec_" + modality_name(m), decoders[static_cast<int>(m)]);
}

std::uint64_t BaseAlignerParams::digest() const {
    ParamSet set;
    const_cast<BaseAlignerParams*>(this)->register_params(set);
    return set.digest();
}

JointLatent encode_item_base(const BaseAlignerParams& p, const ItemRecord& item, Mlp2Cache* cache) {
    check(item.mask[Modality::cf], Errc::validation,
          "encode_item_base: item " + std::to_string(item.id) + " lacks cf feature");
    const std::size_t d_t = p.item_fuser.in() - p.item_fuser.out();
    Vec txt(d_t, 0.0);
    if (item.mask[Modality::txt]) txt = item.feature(Modality::txt);
    JointLatent out;
    out.kind = LatentKind::base;
    out.v = mlp2_forward(p.item_fuser, concat(item.feature(Modality::cf), txt), cache);
    return out;
}

JointLatent encode_user_base(const BaseAlignerParams& p, const UserRecord& user, Mlp2Cache* cache) {
    JointLatent out;
    out.kind = LatentKind::base;
    out.v = mlp2_forward(p.user_fuser, user.cf_embedding, cache);
    return out;
}

double recon_loss(const BaseAlignerParams& p, const ItemRecord& item, const Vec& z) {
    double loss = 0.0;
    for (Modality m : kModalities) {
        if (!item.mask[m]) continue;
        Vec dec = mlp2_forward(p.decoders[static_cast<int>(m)], z);
        loss += sqdist(dec, item.feature(m));
    }
    return loss;
}

Vec recon_loss_grad(const BaseAlignerParams& p, const ItemRecord& item, const Vec& z, double scale,
                    BaseAlignerParams& grads, double* loss_out) {
    Vec dz(z.size(), 0.0);
    double loss = 0.0;
    for (Modality m : kModalities) {
        if (!item.mask[m]) continue;
        Mlp2Cache cache;
        Vec dec = mlp2_forward(p.decoders[static_cast<int>(m)], z, &cache);
        const Vec& target = item.feature(m);
        loss += sqdist(dec, target);
        Vec ddec(dec.size());
        for (std::size_t i = 0; i < dec.size(); ++i) ddec[i] = scale * 2.0 * (dec[i] - target[i]);
        Vec dzm = mlp2_backward(p.decoders[static_cast<int>(m)], cache, ddec,
                                grads.decoders[static_cast<int>(m)]);
        axpy(1.0, dzm, dz);
    }
    if (loss_out) *loss_out = loss;
    return dz;
}

BaseAlignerParams pretrain_base(const Dataset& ds, const ModelConfig& cfg,
                                std::vector<double>* epoch_losses) {
    check(!ds.interactions.empty(), Errc::validation, "pretrain_base: empty interaction set");
    Rng init_rng(mix_seed(cfg.seed, 0x6261u));  // distinct stream per stage
    BaseAlignerParams params = BaseAlignerParams::init(cfg, init_rng);
    BaseAlignerParams grads = BaseAlignerParams::zeros_like(params);

    ParamSet pset, gset;
    params.register_params(pset);
    grads.register_params(gset);
    AdamW opt(cfg.lr_proj, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, cfg.weight_decay);
    opt.init(pset);

    std::vector<std::size_t> order(ds.interactions.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::uint32_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        Rng rng(mix_seed(cfg.seed, mix_seed(0x6262u, epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.uniform_int(i)]);

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t end = std::min(order.size(), start + cfg.batch);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            gset.zero_all();
            double batch_loss = 0.0;

            std::set<std::size_t> batch_items;
            for (std::size_t t = start; t < end; ++t) {
                const Interaction& ev = ds.interactions[order[t]];
                std::size_t neg = ev.item;
                while (neg == ev.item)
                    neg = static_cast<std::size_t>(rng.uniform_int(ds.items.size()));

                Mlp2Cache uc, pc, nc;
                Vec h = encode_user_base(params, ds.users[ev.user], &uc).v;
                Vec zp = encode_item_base(params, ds.items[ev.item], &pc).v;
                Vec zn = encode_item_base(params, ds.items[neg], &nc).v;

                const double diff = dot(h, zp) - dot(h, zn);
                batch_loss += inv_b * (std::log1p(std::exp(-std::fabs(diff))) +
                                       (diff < 0 ? -diff : 0.0));  // softplus(-diff), stable
                const double gd = inv_b * (1.0 / (1.0 + std::exp(-diff)) - 1.0);

                Vec dh = scaled(zp, gd);
                axpy(-gd, zn, dh);
                mlp2_backward(params.user_fuser, uc, dh, grads.user_fuser);
                mlp2_backward(params.item_fuser, pc, scaled(h, gd), grads.item_fuser);
                mlp2_backward(params.item_fuser, nc, scaled(h, -gd), grads.item_fuser);

                // Masked reconstruction on the positive item.
                double rl = 0.0;
                Vec dz = recon_loss_grad(params, ds.items[ev.item], zp,
                                         cfg.w.lambda_r * inv_b, grads, &rl);
                batch_loss += cfg.w.lambda_r * inv_b * rl;
                mlp2_backward(params.item_fuser, pc, dz, grads.item_fuser);

                batch_items.insert(ev.item);
            }

            // Two-view alignment: cf-only view vs txt-only view of the
            // batch's unique items that carry text.
            if (cfg.w.lambda_m > 0.0) {
                std::vector<std::size_t> ids;
                for (std::size_t it : batch_items)
                    if (ds.items[it].mask[Modality::txt]) ids.push_back(it);
                if (ids.size() >= 2) {
                    const std::size_t d = cfg.d, d_t = params.item_fuser.in() - d;
                    std::vector<Vec> va(ids.size()), vp(ids.size());
                    std::vector<Mlp2Cache> ca(ids.size()), cp(ids.size());
                    for (std::size_t t = 0; t < ids.size(); ++t) {
                        const ItemRecord& item = ds.items[ids[t]];
                        va[t] = mlp2_forward(params.item_fuser,
                                             concat(item.feature(Modality::cf), Vec(d_t, 0.0)), &ca[t]);
                        vp[t] = mlp2_forward(params.item_fuser,
                                             concat(Vec(d, 0.0), item.feature(Modality::txt)), &cp[t]);
                    }
                    std::vector<Vec> da(ids.size()), dp(ids.size());
                    for (std::size_t t = 0; t < ids.size(); ++t) {
                        da[t].assign(d, 0.0);
                        dp[t].assign(d, 0.0);
                    }
                    const double al = info_nce_grad(va, vp, cfg.tau, &da, &dp);
                    batch_loss += cfg.w.lambda_m * al;
                    for (std::size_t t = 0; t < ids.size(); ++t) {
                        mlp2_backward(params.item_fuser, ca[t], scaled(da[t], cfg.w.lambda_m),
                                      grads.item_fuser);
                        mlp2_backward(params.item_fuser, cp[t], scaled(dp[t], cfg.w.lambda_m),
                                      grads.item_fuser);
                    }
                }
            }

            check(std::isfinite(batch_loss), Errc::numeric, "pretrain_base: non-finite loss");
            opt.step(pset, gset);
            epoch_loss += batch_loss;
            ++n_batches;
        }
        if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(n_batches));
    }

    params.freeze();
    return params;
}

}  // namespace dynmm
