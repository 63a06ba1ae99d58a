// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include "dynmm/config.hpp"
#include "dynmm/dataset.hpp"
#include "dynmm/nn.hpp"
#include "dynmm/types.hpp"

namespace dynmm {

// The once-trained, then frozen fusion of CF and text features into the
// joint latent space, plus the per-modality decoders used by the
// reconstruction loss. After freeze() any training entry point rejects it;
// digest() supports bit-identity checks.
struct BaseAlignerParams {
    Mlp2 item_fuser;             // (d + d_t) -> d
    Mlp2 user_fuser;             // d -> d
    std::array<Mlp2, 4> decoders;  // d -> modality dim, indexed by Modality
    bool frozen = false;

    static BaseAlignerParams init(const ModelConfig& cfg, Rng& rng);
    static BaseAlignerParams zeros_like(const BaseAlignerParams& o);

    void freeze() { frozen = true; }
    void register_params(ParamSet& set, const std::string& prefix = "base") ;
    std::uint64_t digest() const;
};

// z^base from [e_cf ; e_txt or 0]. Missing text is replaced by the zero
// vector before fusion. Requires the cf feature.
JointLatent encode_item_base(const BaseAlignerParams& p, const ItemRecord& item,
                             Mlp2Cache* cache = nullptr);

JointLatent encode_user_base(const BaseAlignerParams& p, const UserRecord& user,
                             Mlp2Cache* cache = nullptr);

// Masked reconstruction: sum over available modalities of
// ||dec_m(z) - e_m||^2. Terms for masked modalities are absent entirely.
double recon_loss(const BaseAlignerParams& p, const ItemRecord& item, const Vec& z);

// Gradient form: accumulates decoder grads and returns dL/dz.
Vec recon_loss_grad(const BaseAlignerParams& p, const ItemRecord& item, const Vec& z,
                    double scale, BaseAlignerParams& grads, double* loss_out);

// Stage-one training: BPR ranking + two-view contrastive alignment +
// masked reconstruction, AdamW, fixed epoch count, deterministic under
// cfg.seed. Returns frozen parameters; per-epoch losses optionally out.
BaseAlignerParams pretrain_base(const Dataset& ds, const ModelConfig& cfg,
                                std::vector<double>* epoch_losses = nullptr);

}  // namespace dynmm
