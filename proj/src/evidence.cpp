// SPDX-License-Identifier: Apache-2.0
#include "dynmm/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace dynmm {

std::vector<std::pair<std::size_t, double>> top_k_neighbors(std::size_t anchor_idx,
                                                            const std::vector<ItemRecord>& items,
                                                            std::size_t k) {
    check(k >= 1, Errc::validation, "top_k_neighbors: k must be >= 1");
    check(items.size() >= 2, Errc::validation, "top_k_neighbors: catalog smaller than 2");
    check(anchor_idx < items.size(), Errc::validation, "top_k_neighbors: anchor out of range");
    const Vec& anchor = items[anchor_idx].feature(Modality::cf);

    std::vector<std::pair<std::size_t, double>> sims;
    sims.reserve(items.size() - 1);
    for (std::size_t j = 0; j < items.size(); ++j) {
        if (j == anchor_idx) continue;
        sims.emplace_back(j, cosine(anchor, items[j].feature(Modality::cf)));
    }
    const std::size_t keep = std::min(k, sims.size());
    auto better = [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return items[a.first].id < items[b.first].id;  // tie: ascending item id
    };
    std::partial_sort(sims.begin(), sims.begin() + static_cast<std::ptrdiff_t>(keep), sims.end(),
                      better);
    sims.resize(keep);
    return sims;
}

EvidenceParams EvidenceParams::init(const ModelConfig& cfg, std::size_t n_attrs, Rng& rng) {
    EvidenceParams p;
    p.f_nbr = Mlp2::random(cfg.d + 1, cfg.d_ell, cfg.d_ell, rng);
    p.f_attr = Mlp2::random(cfg.d + 1, cfg.d_ell, cfg.d_ell, rng);
    p.W_a = Mat(cfg.d, cfg.d);
    const double s = 1.0 / std::sqrt(static_cast<double>(cfg.d));
    for (auto& v : p.W_a.a) v = rng.normal() * s;
    p.attr_table = Mat(std::max<std::size_t>(n_attrs, 1), cfg.d);
    for (auto& v : p.attr_table.a) v = rng.normal() * s;
    return p;
}

EvidenceParams EvidenceParams::zeros_like(const EvidenceParams& o) {
    EvidenceParams p;
    p.f_nbr = Mlp2::zeros(o.f_nbr.in(), o.f_nbr.hidden(), o.f_nbr.out());
    p.f_attr = Mlp2::zeros(o.f_attr.in(), o.f_attr.hidden(), o.f_attr.out());
    p.W_a = Mat(o.W_a.rows, o.W_a.cols);
    p.attr_table = Mat(o.attr_table.rows, o.attr_table.cols);
    return p;
}

void EvidenceParams::register_params(ParamSet& set, const std::string& prefix) {
    set.add(prefix + ".f_nbr", f_nbr);
    set.add(prefix + ".f_attr", f_attr);
    set.add(prefix + ".W_a", W_a);
    set.add(prefix + ".attr_table", attr_table);
}

std::vector<std::pair<std::uint32_t, double>> attend_attributes(const Vec& user_latent,
                                                                const ItemRecord& item,
                                                                const EvidenceParams& p,
                                                                std::uint32_t m_attr,
                                                                AttentionCache* cache) {
    std::vector<std::pair<std::uint32_t, double>> out;
    if (item.attributes.empty() || m_attr == 0) return out;

    const Vec wh = mat_tvec(p.W_a, user_latent);  // (W_a^T h), scores = wh . emb_k
    const std::size_t n = item.attributes.size();
    std::vector<double> scores(n);
    for (std::size_t t = 0; t < n; ++t) {
        const std::uint32_t a = item.attributes[t];
        check(a < p.attr_table.rows, Errc::validation, "attend_attributes: attribute id out of range");
        double s = 0.0;
        for (std::size_t c = 0; c < p.attr_table.cols; ++c) s += wh[c] * p.attr_table(a, c);
        scores[t] = s;
    }
    flops::add(n * p.attr_table.cols);

    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    std::vector<double> probs(n);
    for (std::size_t t = 0; t < n; ++t) {
        probs[t] = std::exp(scores[t] - mx);
        z += probs[t];
    }
    for (auto& v : probs) v /= z;

    std::vector<std::size_t> order(n);
    for (std::size_t t = 0; t < n; ++t) order[t] = t;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (probs[a] != probs[b]) return probs[a] > probs[b];
        return item.attributes[a] < item.attributes[b];
    });
    const std::size_t keep = std::min<std::size_t>(m_attr, n);

    std::vector<std::size_t> selected(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    // Selection membership is a kink: record it so finite differences skip
    // coordinates that flip the top-m set.
    for (std::size_t t = 0; t < n; ++t)
        kink::note(std::find(selected.begin(), selected.end(), t) != selected.end());

    for (std::size_t t : selected) out.emplace_back(item.attributes[t], probs[t]);
    if (cache) {
        cache->attrs.assign(item.attributes.begin(), item.attributes.end());
        cache->probs = probs;
        cache->selected = selected;
        cache->user_latent = user_latent;
    }
    return out;
}

namespace {

std::size_t neighbor_region(const ModelConfig& cfg) {
    return std::min<std::size_t>(cfg.k, cfg.E / 2);
}

}  // namespace

Mat encode_evidence(const EvidencePack& pack, const EvidenceParams& p, const LatentLookup& latent_of,
                    const ModelConfig& cfg, EvidenceCache* cache) {
    Mat tokens(cfg.E, cfg.d_ell);
    const std::size_t nbr_region = neighbor_region(cfg);
    const std::size_t n_nbr = std::min(pack.neighbors.size(), nbr_region);
    for (std::size_t t = 0; t < n_nbr; ++t) {
        const auto& [idx, sim] = pack.neighbors[t];
        Vec in = latent_of(idx);
        in.push_back(sim);
        Mlp2Cache c;
        Vec row = mlp2_forward(p.f_nbr, in, cache ? &c : nullptr);
        std::copy(row.begin(), row.end(), tokens.a.begin() + static_cast<std::ptrdiff_t>(t * cfg.d_ell));
        if (cache) {
            cache->nbr.push_back(std::move(c));
            cache->nbr_rows.push_back(t);
        }
    }
    const std::size_t attr_region = std::min<std::size_t>(cfg.m_attr, cfg.E - nbr_region);
    const std::size_t n_attr = std::min(pack.attributes.size(), attr_region);
    for (std::size_t t = 0; t < n_attr; ++t) {
        const auto& [attr, weight] = pack.attributes[t];
        check(attr < p.attr_table.rows, Errc::validation, "encode_evidence: attribute id out of range");
        Vec in(p.attr_table.cols + 1);
        for (std::size_t c = 0; c < p.attr_table.cols; ++c) in[c] = p.attr_table(attr, c);
        in.back() = weight;
        Mlp2Cache c;
        Vec row = mlp2_forward(p.f_attr, in, cache ? &c : nullptr);
        const std::size_t r = nbr_region + t;
        std::copy(row.begin(), row.end(), tokens.a.begin() + static_cast<std::ptrdiff_t>(r * cfg.d_ell));
        if (cache) {
            cache->attr.push_back(std::move(c));
            cache->attr_rows.push_back(r);
        }
    }
    return tokens;
}

void encode_evidence_backward(const EvidencePack& pack, const EvidenceParams& p,
                              const LatentLookup& latent_of, const EvidenceCache& cache,
                              const Mat& d_tokens, EvidenceParams& grads) {
    (void)latent_of;  // neighbor latents are cached dictionary constants
    const std::size_t d_ell = p.f_nbr.out();
    for (std::size_t t = 0; t < cache.nbr_rows.size(); ++t) {
        const std::size_t r = cache.nbr_rows[t];
        Vec dy(d_tokens.a.begin() + static_cast<std::ptrdiff_t>(r * d_ell),
               d_tokens.a.begin() + static_cast<std::ptrdiff_t>((r + 1) * d_ell));
        mlp2_backward(p.f_nbr, cache.nbr[t], dy, grads.f_nbr);
    }

    // Attribute rows: gradients reach the table twice (embedding input and
    // the attention weight lane) and the attention matrix through the
    // softmax.
    std::vector<double> d_weight(cache.attr_rows.size(), 0.0);
    for (std::size_t t = 0; t < cache.attr_rows.size(); ++t) {
        const std::size_t r = cache.attr_rows[t];
        Vec dy(d_tokens.a.begin() + static_cast<std::ptrdiff_t>(r * d_ell),
               d_tokens.a.begin() + static_cast<std::ptrdiff_t>((r + 1) * d_ell));
        Vec din = mlp2_backward(p.f_attr, cache.attr[t], dy, grads.f_attr);
        const std::uint32_t attr = pack.attributes[t].first;
        for (std::size_t c = 0; c < p.attr_table.cols; ++c) grads.attr_table(attr, c) += din[c];
        d_weight[t] = din.back();
    }

    if (cache.has_attention && !cache.attention.attrs.empty() && !d_weight.empty()) {
        const AttentionCache& at = cache.attention;
        const std::size_t n = at.attrs.size();
        // dL/dscore_j = sum_t d_weight[t] * p_t (delta_{sel(t), j} - p_j)
        std::vector<double> dscore(n, 0.0);
        double weighted = 0.0;
        for (std::size_t t = 0; t < d_weight.size() && t < at.selected.size(); ++t)
            weighted += d_weight[t] * at.probs[at.selected[t]];
        for (std::size_t j = 0; j < n; ++j) dscore[j] = -weighted * at.probs[j];
        for (std::size_t t = 0; t < d_weight.size() && t < at.selected.size(); ++t)
            dscore[at.selected[t]] += d_weight[t] * at.probs[at.selected[t]];

        // score_j = h^T W_a e_j : dW_a += dscore_j * h e_j^T ; de_j += dscore_j * W_a^T h
        const Vec wh = mat_tvec(p.W_a, at.user_latent);
        for (std::size_t j = 0; j < n; ++j) {
            if (dscore[j] == 0.0) continue;
            const std::uint32_t a = at.attrs[j];
            Vec emb(p.attr_table.cols);
            for (std::size_t c = 0; c < p.attr_table.cols; ++c) emb[c] = p.attr_table(a, c);
            add_outer(grads.W_a, at.user_latent, emb, dscore[j]);
            for (std::size_t c = 0; c < p.attr_table.cols; ++c)
                grads.attr_table(a, c) += dscore[j] * wh[c];
        }
    }
}

double faithfulness_loss(double acc_with, double acc_without, double delta, bool prose_mode) {
    check(acc_with >= 0.0 && acc_with <= 1.0 && acc_without >= 0.0 && acc_without <= 1.0,
          Errc::validation, "faithfulness_loss: accuracies must be in [0, 1]");
    const double arg = prose_mode ? acc_without - acc_with + delta : acc_with - acc_without - delta;
    kink::note(arg > 0.0);
    return arg > 0.0 ? arg : 0.0;
}

void write_evidence_cache(const std::string& path, const EvidenceCacheFile& cache) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(f.good(), Errc::io, "evidence cache: cannot open '" + path + "' for writing");
    std::string out;
    out.append("DMEV", 4);
    auto put = [&out](const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); };
    const std::uint32_t version = 1;
    put(&version, 4);
    put(&cache.params_digest, 8);
    put(&cache.dataset_fingerprint, 8);
    put(&cache.built_at, 8);
    put(&cache.k, 4);
    const std::uint64_t n = cache.neighbors.size();
    put(&n, 8);
    for (const auto& lst : cache.neighbors) {
        const std::uint32_t m = static_cast<std::uint32_t>(lst.size());
        put(&m, 4);
        for (const auto& [idx, sim] : lst) {
            const std::uint64_t i64 = idx;
            put(&i64, 8);
            put(&sim, 8);
        }
    }
    const std::uint64_t checksum = fnv1a(out.data(), out.size());
    put(&checksum, 8);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    check(f.good(), Errc::io, "evidence cache: write failed for '" + path + "'");
}

EvidenceCacheFile read_evidence_cache(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), Errc::io, "evidence cache: cannot open '" + path + "'");
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    check(bytes.size() >= 4 + 4 + 8 + 8 + 8 + 4 + 8 + 8, Errc::io, "evidence cache: file too short");
    const std::uint64_t stored = [&] {
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + bytes.size() - 8, 8);
        return v;
    }();
    check(stored == fnv1a(bytes.data(), bytes.size() - 8), Errc::io,
          "evidence cache: checksum mismatch");
    std::size_t off = 0;
    auto get = [&](void* p, std::size_t n) {
        check(off + n <= bytes.size() - 8, Errc::io, "evidence cache: truncated");
        std::memcpy(p, bytes.data() + off, n);
        off += n;
    };
    char magic[4];
    get(magic, 4);
    check(std::memcmp(magic, "DMEV", 4) == 0, Errc::io, "evidence cache: bad magic");
    std::uint32_t version;
    get(&version, 4);
    check(version == 1, Errc::io, "evidence cache: unsupported version");
    EvidenceCacheFile cache;
    get(&cache.params_digest, 8);
    get(&cache.dataset_fingerprint, 8);
    get(&cache.built_at, 8);
    get(&cache.k, 4);
    std::uint64_t n;
    get(&n, 8);
    cache.neighbors.resize(n);
    for (auto& lst : cache.neighbors) {
        std::uint32_t m;
        get(&m, 4);
        lst.resize(m);
        for (auto& [idx, sim] : lst) {
            std::uint64_t i64;
            get(&i64, 8);
            idx = static_cast<std::size_t>(i64);
            get(&sim, 8);
        }
    }
    return cache;
}

}  // namespace dynmm
