// SPDX-License-Identifier: Apache-2.0
#include "dynmm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "dynmm/rng.hpp"

namespace fs = std::filesystem;

namespace dynmm {

namespace {

Vec sample_latent(Rng& rng, std::uint32_t g) {
    Vec v(g);
    const double s = 1.0 / std::sqrt(static_cast<double>(g));
    for (auto& x : v) x = rng.normal() * s;
    return v;
}

// Lift a pref_dim vector into the first coordinates of a dim-d space.
Vec lift(const Vec& q, std::uint32_t dim) {
    Vec v(dim, 0.0);
    std::copy(q.begin(), q.end(), v.begin());
    return v;
}

Vec rotate_planes(const Vec& p, double angle_rad) {
    Vec out = p;
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    for (std::size_t j = 0; j + 1 < p.size(); j += 2) {
        out[j] = c * p[j] - s * p[j + 1];
        out[j + 1] = s * p[j] + c * p[j + 1];
    }
    return out;
}

std::size_t sample_softmax(const std::vector<double>& logits, Rng& rng) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    std::vector<double> w(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        w[i] = std::exp(logits[i] - mx);
        total += w[i];
    }
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < w.size(); ++i) {
        u -= w[i];
        if (u <= 0.0) return i;
    }
    return w.size() - 1;
}

}  // namespace

void SyntheticSpec::validate() const {
    check(n_users >= 1 && n_items >= 2 && n_interactions >= 1, Errc::validation,
          "synthetic: need at least 1 user, 2 items, 1 interaction");
    check(drift_onset_frac >= 0.0 && drift_onset_frac <= 1.0, Errc::validation,
          "synthetic: drift_onset_frac must be in [0, 1]");
    check(modality_dependence >= 0.0 && modality_dependence <= 1.0, Errc::validation,
          "synthetic: modality_dependence must be in [0, 1]");
    check(evidence_dependence >= 0.0 && evidence_dependence <= 1.0, Errc::validation,
          "synthetic: evidence_dependence must be in [0, 1]");
    check(cold_fraction >= 0.0 && cold_fraction < 1.0, Errc::validation,
          "synthetic: cold_fraction must be in [0, 1)");
    check(pref_dim >= 2, Errc::validation, "synthetic: pref_dim must be >= 2");
    check(temp > 0.0, Errc::validation, "synthetic: temp must be positive");
    for (double f : {missing_txt_frac, missing_vis_frac, missing_aud_frac})
        check(f >= 0.0 && f < 1.0, Errc::validation, "synthetic: missing fractions must be in [0, 1)");
}

SyntheticSpec SyntheticSpec::from_kv(const std::string& kv) {
    SyntheticSpec s;
    std::string cur;
    auto apply = [&s](const std::string& pair) {
        if (pair.empty()) return;
        auto eq = pair.find('=');
        check(eq != std::string::npos, Errc::validation, "synthetic spec: expected key=value in '" + pair + "'");
        const std::string key = pair.substr(0, eq);
        const std::string val = pair.substr(eq + 1);
        auto as_u64 = [&] { return std::stoull(val); };
        auto as_dbl = [&] { return std::stod(val); };
        try {
            if (key == "n_users") s.n_users = as_u64();
            else if (key == "n_items") s.n_items = as_u64();
            else if (key == "n_interactions") s.n_interactions = as_u64();
            else if (key == "drift_onset_frac") s.drift_onset_frac = as_dbl();
            else if (key == "drift_angle_deg") s.drift_angle_deg = as_dbl();
            else if (key == "modality_dependence") s.modality_dependence = as_dbl();
            else if (key == "evidence_dependence") s.evidence_dependence = as_dbl();
            else if (key == "cold_fraction") s.cold_fraction = as_dbl();
            else if (key == "seed") s.seed = as_u64();
            else if (key == "pref_dim") s.pref_dim = static_cast<std::uint32_t>(as_u64());
            else if (key == "temp") s.temp = as_dbl();
            else if (key == "cf_noise") s.cf_noise = as_dbl();
            else if (key == "missing_txt_frac") s.missing_txt_frac = as_dbl();
            else if (key == "missing_vis_frac") s.missing_vis_frac = as_dbl();
            else if (key == "missing_aud_frac") s.missing_aud_frac = as_dbl();
            else
                fail(Errc::validation, "synthetic spec: unknown key '" + key + "'");
        } catch (const Error&) {
            throw;
        } catch (...) {
            fail(Errc::validation, "synthetic spec: bad value in '" + pair + "'");
        }
    };
    for (char c : kv) {
        if (c == ',' || c == ';') {
            apply(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    apply(cur);
    s.validate();
    return s;
}

void generate_synthetic(const SyntheticSpec& spec, const ModelConfig& cfg,
                        const std::string& out_dir) {
    spec.validate();
    check(cfg.d >= spec.pref_dim, Errc::validation, "synthetic: cfg.d must be >= pref_dim");
    check(cfg.d_t >= spec.pref_dim && cfg.d_vis >= spec.pref_dim && cfg.d_aud >= spec.pref_dim,
          Errc::validation, "synthetic: modality dims must be >= pref_dim");
    fs::create_directories(out_dir);
    const fs::path root(out_dir);
    const std::uint32_t g = spec.pref_dim;
    const std::size_t n_items = static_cast<std::size_t>(spec.n_items);
    const std::size_t n_users = static_cast<std::size_t>(spec.n_users);
    const std::size_t n_events = static_cast<std::size_t>(spec.n_interactions);

    // Latent vectors.
    Rng rng_items(mix_seed(spec.seed, 1));
    std::vector<Vec> q(n_items);
    for (auto& v : q) v = sample_latent(rng_items, g);
    Rng rng_users(mix_seed(spec.seed, 2));
    std::vector<Vec> p(n_users);
    for (auto& v : p) v = sample_latent(rng_users, g);

    // Cold set: seeded shuffle, first chunk is cold.
    std::vector<std::size_t> perm(n_items);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng_cold(mix_seed(spec.seed, 3));
    for (std::size_t i = n_items; i > 1; --i)
        std::swap(perm[i - 1], perm[rng_cold.uniform_int(i)]);
    const std::size_t n_cold = static_cast<std::size_t>(std::llround(spec.cold_fraction * n_items));
    std::vector<bool> is_cold(n_items, false);
    for (std::size_t i = 0; i < n_cold; ++i) is_cold[perm[i]] = true;

    // CF features: warm = lifted latent + small noise, cold = pure noise.
    Rng rng_cf(mix_seed(spec.seed, 4));
    std::vector<FeatureRecord> cf_recs(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
        Vec v;
        if (is_cold[i]) {
            v.assign(cfg.d, 0.0);
            const double s = 1.0 / std::sqrt(static_cast<double>(g));
            for (auto& x : v) x = rng_cf.normal() * s;
        } else {
            v = lift(q[i], cfg.d);
            const double s = spec.cf_noise / std::sqrt(static_cast<double>(cfg.d));
            for (auto& x : v) x += rng_cf.normal() * s;
        }
        cf_recs[i] = {static_cast<std::uint64_t>(i), std::move(v)};
    }
    std::vector<FeatureRecord> user_recs(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        Vec v = lift(p[u], cfg.d);
        const double s = spec.cf_noise / std::sqrt(static_cast<double>(cfg.d));
        for (auto& x : v) x += rng_cf.normal() * s;
        user_recs[u] = {static_cast<std::uint64_t>(u), std::move(v)};
    }

    // Side modalities.
    struct SideSpec {
        const char* file;
        std::uint32_t dim;
        double missing_frac;
        std::uint64_t salt;
    };
    const SideSpec sides[] = {{"features_txt.bin", cfg.d_t, spec.missing_txt_frac, 5},
                              {"features_vis.bin", cfg.d_vis, spec.missing_vis_frac, 6},
                              {"features_aud.bin", cfg.d_aud, spec.missing_aud_frac, 7}};
    for (const auto& side : sides) {
        Rng rng_side(mix_seed(spec.seed, side.salt));
        std::vector<FeatureRecord> recs;
        recs.reserve(n_items);
        for (std::size_t i = 0; i < n_items; ++i) {
            const bool missing = rng_side.uniform() < side.missing_frac;
            Vec v = lift(q[i], side.dim);
            const double s = (1.0 - spec.modality_dependence) / std::sqrt(static_cast<double>(side.dim));
            for (auto& x : v) x += rng_side.normal() * s;
            if (missing) continue;  // draws above keep the stream aligned regardless of masks
            recs.push_back({static_cast<std::uint64_t>(i), std::move(v)});
        }
        write_feature_file((root / side.file).string(), recs);
    }

    // Attributes: token per signed latent coordinate; items carry their two
    // strongest coordinates.
    const std::size_t n_attrs = 2 * g;
    {
        std::ofstream f(root / "attributes.tsv", std::ios::trunc);
        for (std::size_t a = 0; a < n_attrs; ++a)
            f << a << "\t" << "f" << (a / 2) << (a % 2 == 0 ? "+" : "-") << "\n";
    }
    {
        std::ofstream f(root / "item_attrs.tsv", std::ios::trunc);
        for (std::size_t i = 0; i < n_items; ++i) {
            std::vector<std::size_t> idx(g);
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                if (std::fabs(q[i][a]) != std::fabs(q[i][b]))
                    return std::fabs(q[i][a]) > std::fabs(q[i][b]);
                return a < b;
            });
            const std::size_t a0 = 2 * idx[0] + (q[i][idx[0]] < 0 ? 1 : 0);
            const std::size_t a1 = 2 * idx[1] + (q[i][idx[1]] < 0 ? 1 : 0);
            f << i << "\t" << a0 << "," << a1 << "\n";
        }
    }

    // Top-10 latent-space neighbor lists for the evidence-dependence path.
    std::vector<std::vector<std::size_t>> nbrs;
    if (spec.evidence_dependence > 0.0) {
        nbrs.resize(n_items);
        for (std::size_t i = 0; i < n_items; ++i) {
            std::vector<std::pair<double, std::size_t>> sims;
            sims.reserve(n_items - 1);
            for (std::size_t j = 0; j < n_items; ++j) {
                if (j == i || is_cold[j]) continue;
                sims.emplace_back(cosine(q[i], q[j]), j);
            }
            const std::size_t keep = std::min<std::size_t>(10, sims.size());
            std::partial_sort(sims.begin(), sims.begin() + keep, sims.end(),
                              [](const auto& a, const auto& b) {
                                  if (a.first != b.first) return a.first > b.first;
                                  return a.second < b.second;
                              });
            for (std::size_t t = 0; t < keep; ++t) nbrs[i].push_back(sims[t].second);
        }
    }

    // Interactions. Cold items only become available in the final 10% of
    // the event sequence, where they receive a dedicated sampling share.
    Rng rng_ev(mix_seed(spec.seed, 8));
    const std::size_t onset = static_cast<std::size_t>(spec.drift_onset_frac * n_events);
    const std::size_t cold_start_at = n_events - n_events / 10;
    const double angle = spec.drift_angle_deg * M_PI / 180.0;
    std::vector<Vec> p_rot(n_users);
    if (onset < n_events)
        for (std::size_t u = 0; u < n_users; ++u) p_rot[u] = rotate_planes(p[u], angle);
    std::vector<std::size_t> last_item(n_users, SIZE_MAX);
    std::vector<std::size_t> warm_ids, cold_ids;
    for (std::size_t i = 0; i < n_items; ++i) (is_cold[i] ? cold_ids : warm_ids).push_back(i);

    std::ofstream f(root / "interactions.tsv", std::ios::trunc);
    std::vector<double> logits;
    for (std::size_t e = 0; e < n_events; ++e) {
        const std::size_t u = static_cast<std::size_t>(rng_ev.uniform_int(n_users));
        const Vec& pref = (e >= onset && onset < n_events) ? p_rot[u] : p[u];
        std::size_t item;
        const bool via_evidence = spec.evidence_dependence > 0.0 && last_item[u] != SIZE_MAX &&
                                  !nbrs[last_item[u]].empty() &&
                                  rng_ev.uniform() < spec.evidence_dependence;
        if (via_evidence) {
            const auto& cand = nbrs[last_item[u]];
            item = cand[rng_ev.uniform_int(cand.size())];
        } else {
            const bool pick_cold =
                !cold_ids.empty() && e >= cold_start_at && rng_ev.uniform() < 0.4;
            const auto& pool = pick_cold ? cold_ids : warm_ids;
            logits.assign(pool.size(), 0.0);
            for (std::size_t t = 0; t < pool.size(); ++t)
                logits[t] = dot(q[pool[t]], pref) / spec.temp;
            item = pool[sample_softmax(logits, rng_ev)];
        }
        last_item[u] = item;
        f << u << "\t" << item << "\t" << (e + 1) << "\n";
    }
    f.close();

    write_feature_file((root / "features_cf.bin").string(), cf_recs);
    write_feature_file((root / "features_user_cf.bin").string(), user_recs);

    Manifest mf;
    mf.users = spec.n_users;
    mf.items = spec.n_items;
    mf.interactions = spec.n_interactions;
    mf.dim_cf = cfg.d;
    mf.dim_txt = cfg.d_t;
    mf.dim_vis = cfg.d_vis;
    mf.dim_aud = cfg.d_aud;
    mf.attributes = n_attrs;
    std::ofstream mfo(root / "manifest.txt", std::ios::trunc);
    mfo << mf.to_text();
}

Dataset generate_and_load(const SyntheticSpec& spec, const ModelConfig& cfg,
                          const std::string& out_dir) {
    generate_synthetic(spec, cfg, out_dir);
    return ingest(out_dir, true);
}

}  // namespace dynmm
