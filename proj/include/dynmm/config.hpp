// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace dynmm {

// Coefficients of the composite training objective.
struct LossWeights {
    double lambda_m = 0.5;     // contrastive alignment
    double lambda_r = 0.1;     // reconstruction
    double lambda_s = 0.1;     // stability (latent KL + EWC)
    double lambda_ewc = 0.01;  // EWC share inside the stability term
    double lambda_e = 0.0;     // rationale LM loss; no reference text, stays 0
    double lambda_f = 1.0;     // faithfulness hinge
    double sigma_sq = 1.0;     // variance of the stability Gaussians
    double delta = 0.05;       // faithfulness margin
};

enum class WindowMode { events, seconds };

// Flat configuration; every field is addressable in key=value config files
// and overridable via DYNMM_<KEY> environment variables.
struct ModelConfig {
    std::uint32_t d = 256;     // joint latent dim
    std::uint32_t d_s = 8;     // window summary dim, fixed by the summary schema
    std::uint32_t d_t = 256;   // text feature dim
    std::uint32_t d_vis = 512; // visual feature dim
    std::uint32_t d_aud = 768; // audio feature dim
    std::uint32_t d_ell = 64;  // backbone token dim
    std::uint32_t E = 16;      // evidence token count, <= 32
    std::uint32_t L = 50;      // history length
    std::uint32_t C = 20;      // candidates per request (latency/default config)
    std::uint32_t k = 5;       // neighbor count for evidence
    std::uint64_t window = 500;          // events per window (or seconds, per mode)
    WindowMode window_mode = WindowMode::events;
    std::uint32_t replay_capacity = 1024;
    double ema_decay = 0.99;
    double lr_adapter = 1e-3;
    double lr_proj = 5e-4;
    std::uint32_t batch = 256;
    std::uint64_t seed = 42;

    LossWeights w;

    double tau = 0.1;                 // contrastive temperature
    std::uint32_t m_attr = 4;         // attributes kept per evidence pack
    std::uint32_t adapter_hidden = 0; // 0 means "use d"
    std::uint32_t train_negatives = 4;
    std::uint32_t eval_negatives = 99;
    std::uint32_t pretrain_epochs = 5;  // base aligner stage
    std::uint32_t fusion_epochs = 5;    // modality projector stage
    std::uint32_t prompt_epochs = 5;    // token projector + evidence stage
    std::uint32_t online_passes = 1;
    bool include_audio_pairs = true;  // extend the contrastive pair set with audio
    bool faith_prose_mode = true;     // hinge orientation, see evidence module
    bool serve_ema = true;
    bool separate_user_adapter = false;
    bool full_catalog_eval = false;
    bool adapter_enabled = true;
    // Modalities honored at encode time; dropping one here simulates a
    // missing modality at test time.
    bool use_txt = true;
    bool use_vis = true;
    bool use_aud = true;

    // AdamW (standard defaults; the reference setup names only the optimizer).
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;

    // Product quantization defaults.
    std::uint32_t pq_m = 8;
    std::uint32_t pq_k = 256;
    std::uint32_t pq_iters = 25;

    std::uint32_t adapter_hidden_dim() const { return adapter_hidden == 0 ? d : adapter_hidden; }

    void validate() const;

    // key=value text, one key per line, round-trip exact.
    std::string to_text() const;
    static ModelConfig from_text(const std::string& text);
    static ModelConfig load_file(const std::string& path);

    // Applies key=value with full validation; unknown key is an error.
    void set(const std::string& key, const std::string& value);

    // Scans DYNMM_<KEY> for every known key and applies the ones present.
    void apply_env(const std::string& prefix = "DYNMM_");
};

}  // namespace dynmm
