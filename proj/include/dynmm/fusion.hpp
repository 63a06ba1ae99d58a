// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "dynmm/config.hpp"
#include "dynmm/nn.hpp"
#include "dynmm/types.hpp"

namespace dynmm {

// Per-modality projection heads mapping side features into the joint space.
struct ModalityProjector {
    Mlp2 txt, vis, aud;

    static ModalityProjector init(const ModelConfig& cfg, Rng& rng);
    static ModalityProjector zeros_like(const ModalityProjector& o);

    const Mlp2& of(Modality m) const;
    Mlp2& of(Modality m);
};

Vec project(const ModalityProjector& p, Modality m, const Vec& feature, Mlp2Cache* cache = nullptr);

// InfoNCE over matched (anchor_i, positive_i) lists with cosine/tau
// similarity:  -(1/n) sum_i log softmax_j(cos(a_i, p_j)/tau)[j = i].
// Requires n >= 2 and nonzero-norm inputs.
double info_nce(const std::vector<Vec>& anchors, const std::vector<Vec>& positives, double tau);

// Same value; accumulates dL/danchor and dL/dpositive when requested.
double info_nce_grad(const std::vector<Vec>& anchors, const std::vector<Vec>& positives, double tau,
                     std::vector<Vec>* d_anchors, std::vector<Vec>* d_positives);

// A batch of items with whatever joint-space embeddings are available per
// modality (cf is used raw; side modalities are projected). An empty vector
// marks a missing modality.
struct ContrastiveBatch {
    std::vector<std::array<Vec, 4>> embs;
    double tau = 0.1;
};

// Indicator-masked sum of pairwise InfoNCE terms over the modality pairs
// (cf,txt), (cf,vis), (txt,vis), extended with (cf,aud), (txt,aud) when
// include_audio_pairs is set. Pairs with fewer than two eligible items
// contribute 0.
double masked_mm_loss(const ContrastiveBatch& batch, bool include_audio_pairs);

// Gradient form: d_embs mirrors batch.embs and is accumulated into.
double masked_mm_loss_grad(const ContrastiveBatch& batch, bool include_audio_pairs,
                           std::vector<std::array<Vec, 4>>& d_embs);

struct BaseAlignerParams;  // fwd decl (base_aligner.hpp)

// Cache of one enriched item encoding, for backpropagation.
struct FuseCache {
    std::array<Mlp2Cache, 4> proj;   // side projections actually used
    std::array<bool, 4> used = {false, false, false, false};
    Mlp2Cache fuser;
    double inv_blend = 1.0;  // 1 / (1 + #used side projections)
};

// Effective frozen item encoding: CF blended with the projections of the
// available (and enabled) vis/aud modalities, text fed through its own fuser
// slot. Missing modalities contribute the zero vector pre-fusion, so the
// output is invariant to their stored feature values.
//   blend = (e_cf + sum_m proj_m(e_m)) / (1 + #side)
//   z     = item_fuser([blend ; e_txt or 0])
JointLatent fuse_item(const BaseAlignerParams& base, const ModalityProjector& proj,
                      const ItemRecord& item, const ModelConfig& cfg, FuseCache* cache = nullptr);

// Backward through fuse_item; accumulates fuser/projector grads, returns
// nothing else (raw features are constants).
void fuse_item_backward(const BaseAlignerParams& base, const ModalityProjector& proj,
                        const FuseCache& cache, const Vec& dz, Mlp2& d_item_fuser,
                        ModalityProjector& d_proj);

}  // namespace dynmm
