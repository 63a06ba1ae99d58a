// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dynmm/config.hpp"
#include "dynmm/evidence.hpp"
#include "dynmm/nn.hpp"

namespace dynmm {

enum class Segment { USR, HIST, EVID, CAND };

struct SoftToken {
    Vec v;
    Segment segment = Segment::USR;
};

// Ordered soft prompt: [USR x1, HIST x<=L, EVID xE, CAND xC].
struct PromptBundle {
    std::vector<SoftToken> tokens;
    std::vector<std::size_t> candidate_ids;  // aligned with the CAND tokens
    std::size_t hist_count = 0;
    std::size_t evid_count = 0;

    std::size_t total_tokens() const { return tokens.size(); }
};

// history is oldest-to-newest; when longer than cfg.L the oldest entries
// are dropped. evidence rows are copied verbatim into the EVID segment.
PromptBundle assemble_prompt(const Vec& user_token, const std::vector<Vec>& history_tokens,
                             const Mat& evidence_tokens, const std::vector<Vec>& candidate_tokens,
                             const std::vector<std::size_t>& candidate_ids, const ModelConfig& cfg);

// Deterministic frozen scorer standing in for a pluggable backbone:
//   ctx     = Mix . [usr ; mean(HIST) ; mean(EVID)]
//   score_c = ctx . cand_c
// Mix is a fixed-seed linear map that is never trained.
struct BackboneStub {
    Mat mix;  // d_ell x 3*d_ell

    static BackboneStub init(std::uint32_t d_ell, std::uint64_t seed);
    std::uint64_t digest() const { return fnv1a(mix.a.data(), mix.a.size() * sizeof(double)); }
};

struct StubCache {
    Vec mix_in;  // [usr ; mean_hist ; mean_evid]
    Vec ctx;
};

std::vector<double> stub_score(const BackboneStub& stub, const PromptBundle& bundle,
                               StubCache* cache = nullptr);

// Backward through the scorer. Returns gradients for the user token, each
// history token, each evidence row (E x d_ell), and each candidate token.
struct StubGrads {
    Vec d_user;
    std::vector<Vec> d_hist;
    Mat d_evid;
    std::vector<Vec> d_cand;
};
StubGrads stub_score_backward(const BackboneStub& stub, const PromptBundle& bundle,
                              const StubCache& cache, const std::vector<double>& dscores);

// Descending by score; ties broken by ascending external id (supplied by
// the id lookup so rankings are stable across catalog orderings).
std::vector<std::size_t> rank_candidates(const std::vector<double>& scores,
                                         const std::vector<std::size_t>& candidate_ids,
                                         const std::function<std::uint64_t(std::size_t)>& external_id);

// Template-grounded rationale. Every named entity is emitted in canonical
// backtick form (`item:<id>` / `attr:<name>`) so groundedness is a
// mechanical containment check. Template choice is determined by which
// evidence kinds are present.
struct RationaleNaming {
    std::function<std::string(std::size_t)> item_name;        // internal idx -> name
    std::function<std::string(std::uint32_t)> attr_name;      // attr id -> name
};

std::string generate_rationale(const EvidencePack& pack, std::size_t recommended_idx,
                               const RationaleNaming& naming);

// Extracts the canonical `...` entity tokens from a rationale.
std::vector<std::string> extract_entities(const std::string& text);

// True iff every named entity is the recommended item or appears in the pack.
bool rationale_grounded(const std::string& text, const EvidencePack& pack,
                        std::size_t recommended_idx, const RationaleNaming& naming);

}  // namespace dynmm
