// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "dynmm/config.hpp"
#include "dynmm/dataset.hpp"

namespace dynmm {

// Synthetic benchmark generator. Users and items carry latent preference
// vectors in R^pref_dim; interactions are sampled proportionally to
// softmax(q_i . p_u / temp). Generation is a pure function of the spec: a
// fixed seed yields byte-identical dataset files.
//
// Constructions:
//  * drift: events at position >= drift_onset_frac * n use user vectors
//    rotated by drift_angle_deg in every (2j, 2j+1) coordinate plane. User
//    CF embeddings always reflect the PRE-drift vectors (a stale snapshot).
//  * modality dependence: side features are the item vector lifted into the
//    modality space plus noise scaled by (1 - modality_dependence); at 1.0
//    the feature equals the lifted item vector exactly.
//  * evidence dependence: with this probability the next item of a user is
//    drawn uniformly from the top-10 latent-space neighbors of their
//    previous item.
//  * cold items: a cold_fraction of items appears only in the last 10% of
//    events (they end up with < 5 interactions in a temporal train split);
//    their CF embeddings are pure noise, mimicking untrained CF rows. Side
//    features keep full quality.
struct SyntheticSpec {
    std::uint64_t n_users = 100;
    std::uint64_t n_items = 50;
    std::uint64_t n_interactions = 2000;
    double drift_onset_frac = 1.0;  // 1.0 = no drift
    double drift_angle_deg = 0.0;
    double modality_dependence = 0.5;
    double evidence_dependence = 0.0;
    double cold_fraction = 0.0;
    std::uint64_t seed = 1;
    std::uint32_t pref_dim = 8;
    double temp = 0.3;      // softmax temperature for item choice
    double cf_noise = 0.05; // warm CF embedding noise scale
    // Fraction of items whose side features are withheld entirely.
    double missing_txt_frac = 0.0;
    double missing_vis_frac = 0.0;
    double missing_aud_frac = 0.0;

    void validate() const;
    // key=value overrides, e.g. "n_users=10,seed=3".
    static SyntheticSpec from_kv(const std::string& kv);
};

// Writes a complete dataset directory. Feature dims come from cfg
// (d, d_t, d_vis, d_aud); cfg.d must be >= spec.pref_dim.
void generate_synthetic(const SyntheticSpec& spec, const ModelConfig& cfg,
                        const std::string& out_dir);

// Convenience: generate into out_dir and ingest it back.
Dataset generate_and_load(const SyntheticSpec& spec, const ModelConfig& cfg,
                          const std::string& out_dir);

}  // namespace dynmm
