// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dynmm/config.hpp"
#include "dynmm/dataset.hpp"
#include "dynmm/nn.hpp"

namespace dynmm {

// Extracted grounding for one recommendation: top-k collaborative
// neighbors (sorted by similarity descending, ties by ascending item id)
// plus attended attributes (weights form a sub-distribution).
struct EvidencePack {
    std::vector<std::pair<std::size_t, double>> neighbors;        // (item internal idx, cosine)
    std::vector<std::pair<std::uint32_t, double>> attributes;     // (attr id, weight)
    bool empty() const { return neighbors.empty() && attributes.empty(); }
};

// Exact top-k by cosine over item CF embeddings; the anchor itself is
// excluded. Requires a catalog of at least 2 items.
std::vector<std::pair<std::size_t, double>> top_k_neighbors(std::size_t anchor_idx,
                                                            const std::vector<ItemRecord>& items,
                                                            std::size_t k);

// Trainable evidence encoder: one head per evidence type plus the bilinear
// attention over the attribute embedding table.
struct EvidenceParams {
    Mlp2 f_nbr;      // [neighbor latent ; similarity] -> token row, (d+1) -> d_ell
    Mlp2 f_attr;     // [attribute embedding ; weight] -> token row, (d+1) -> d_ell
    Mat W_a;         // d x d bilinear attention
    Mat attr_table;  // n_attr x d learned attribute embeddings

    static EvidenceParams init(const ModelConfig& cfg, std::size_t n_attrs, Rng& rng);
    static EvidenceParams zeros_like(const EvidenceParams& o);
    void register_params(ParamSet& set, const std::string& prefix = "evid");
};

struct AttentionCache {
    std::vector<std::uint32_t> attrs;     // the item's attribute ids
    std::vector<double> probs;            // full softmax over attrs
    std::vector<std::size_t> selected;    // indices into attrs, kept order
    Vec user_latent;
};

// softmax over score_k = user_latent . W_a . emb_k for the item's
// attributes; keeps the top m_attr weights (ties by ascending attribute
// id), unrenormalized. Selection membership is recorded as kink state.
std::vector<std::pair<std::uint32_t, double>> attend_attributes(const Vec& user_latent,
                                                                const ItemRecord& item,
                                                                const EvidenceParams& p,
                                                                std::uint32_t m_attr,
                                                                AttentionCache* cache = nullptr);

// Token layout: rows [0, min(k, E/2)) hold neighbor encodings, the next
// min(m_attr, E - nbr_region) rows hold attribute encodings, remaining rows
// are zero. An empty pack yields the zero matrix.
struct EvidenceCache {
    std::vector<Mlp2Cache> nbr;                 // per used neighbor row
    std::vector<Mlp2Cache> attr;                // per used attribute row
    std::vector<std::size_t> nbr_rows, attr_rows;  // row indices in the token matrix
    AttentionCache attention;
    bool has_attention = false;
};

using LatentLookup = std::function<const Vec&(std::size_t item_idx)>;

Mat encode_evidence(const EvidencePack& pack, const EvidenceParams& p, const LatentLookup& latent_of,
                    const ModelConfig& cfg, EvidenceCache* cache = nullptr);

// Backward through encode_evidence (and, when the cache carries attention
// state, through the attribute attention). d_tokens is E x d_ell.
void encode_evidence_backward(const EvidencePack& pack, const EvidenceParams& p,
                              const LatentLookup& latent_of, const EvidenceCache& cache,
                              const Mat& d_tokens, EvidenceParams& grads);

// Faithfulness hinge of the multi-task objective. Prose mode (default)
// penalizes evidence whose removal does not hurt:
//     max(0, acc_without - acc_with + delta)
// Formula mode implements the displayed form:
//     max(0, acc_with - acc_without - delta)
double faithfulness_loss(double acc_with, double acc_without, double delta, bool prose_mode);

// Cached neighbor dictionaries, persisted per item and invalidated by a
// params digest + dataset fingerprint + staleness timestamp.
struct EvidenceCacheFile {
    std::uint64_t params_digest = 0;
    std::uint64_t dataset_fingerprint = 0;
    Timestamp built_at = 0;
    std::uint32_t k = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> neighbors;  // per item idx
};

void write_evidence_cache(const std::string& path, const EvidenceCacheFile& cache);
EvidenceCacheFile read_evidence_cache(const std::string& path);

}  // namespace dynmm
