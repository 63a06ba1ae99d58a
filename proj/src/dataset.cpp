// SPDX-License-Identifier: Apache-2.0
#include "dynmm/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace dynmm {

namespace {

std::uint64_t parse_u64(const std::string& tok, const std::string& where) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(tok, &pos);
        check(pos == tok.size(), Errc::validation, where + ": malformed integer '" + tok + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail(Errc::validation, where + ": malformed integer '" + tok + "'");
    }
}

std::int64_t parse_i64(const std::string& tok, const std::string& where) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(tok, &pos);
        check(pos == tok.size(), Errc::validation, where + ": malformed integer '" + tok + "'");
        return v;
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail(Errc::validation, where + ": malformed integer '" + tok + "'");
    }
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string Manifest::to_text() const {
    std::ostringstream os;
    os << "users = " << users << "\n";
    os << "items = " << items << "\n";
    os << "interactions = " << interactions << "\n";
    os << "dim_cf = " << dim_cf << "\n";
    os << "dim_txt = " << dim_txt << "\n";
    os << "dim_vis = " << dim_vis << "\n";
    os << "dim_aud = " << dim_aud << "\n";
    os << "attributes = " << attributes << "\n";
    return os.str();
}

Manifest Manifest::from_text(const std::string& text, const std::string& where) {
    Manifest m;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        const std::string loc = where + ":" + std::to_string(lineno);
        check(eq != std::string::npos, Errc::validation, loc + ": expected key = value");
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto strip = [](std::string s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
            return s;
        };
        key = strip(key);
        val = strip(val);
        if (key == "users") m.users = parse_u64(val, loc);
        else if (key == "items") m.items = parse_u64(val, loc);
        else if (key == "interactions") m.interactions = parse_u64(val, loc);
        else if (key == "dim_cf") m.dim_cf = static_cast<std::uint32_t>(parse_u64(val, loc));
        else if (key == "dim_txt") m.dim_txt = static_cast<std::uint32_t>(parse_u64(val, loc));
        else if (key == "dim_vis") m.dim_vis = static_cast<std::uint32_t>(parse_u64(val, loc));
        else if (key == "dim_aud") m.dim_aud = static_cast<std::uint32_t>(parse_u64(val, loc));
        else if (key == "attributes") m.attributes = parse_u64(val, loc);
        else
            fail(Errc::validation, loc + ": unknown manifest key '" + key + "'");
    }
    return m;
}

void write_feature_file(const std::string& path, const std::vector<FeatureRecord>& recs) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    check(f.good(), Errc::io, "feature file: cannot open '" + path + "' for writing");
    for (const auto& r : recs) {
        const std::uint32_t dim = static_cast<std::uint32_t>(r.values.size());
        f.write(reinterpret_cast<const char*>(&r.id), sizeof(r.id));
        f.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
        f.write(reinterpret_cast<const char*>(r.values.data()),
                static_cast<std::streamsize>(dim * sizeof(double)));
    }
    check(f.good(), Errc::io, "feature file: write failed for '" + path + "'");
}

std::vector<FeatureRecord> read_feature_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    check(f.good(), Errc::io, "feature file: cannot open '" + path + "'");
    std::vector<FeatureRecord> recs;
    std::size_t recno = 0;
    while (true) {
        std::uint64_t id;
        f.read(reinterpret_cast<char*>(&id), sizeof(id));
        if (f.eof() && f.gcount() == 0) break;
        ++recno;
        const std::string loc = path + " record " + std::to_string(recno);
        check(f.gcount() == sizeof(id), Errc::validation, loc + ": truncated record header");
        std::uint32_t dim;
        f.read(reinterpret_cast<char*>(&dim), sizeof(dim));
        check(f.gcount() == sizeof(dim), Errc::validation, loc + ": truncated record header");
        check(dim > 0 && dim < (1u << 24), Errc::validation, loc + ": implausible dim");
        FeatureRecord r;
        r.id = id;
        r.values.resize(dim);
        f.read(reinterpret_cast<char*>(r.values.data()),
               static_cast<std::streamsize>(dim * sizeof(double)));
        check(static_cast<std::size_t>(f.gcount()) == dim * sizeof(double), Errc::validation,
              loc + ": truncated payload");
        check(all_finite(r.values), Errc::validation, loc + ": non-finite feature value");
        recs.push_back(std::move(r));
    }
    return recs;
}

std::size_t Dataset::item_of(std::uint64_t external_id) const {
    auto it = item_index.find(external_id);
    check(it != item_index.end(), Errc::validation,
          "dangling id: unknown item " + std::to_string(external_id));
    return it->second;
}

std::size_t Dataset::user_of(std::uint64_t external_id) const {
    auto it = user_index.find(external_id);
    check(it != user_index.end(), Errc::validation,
          "dangling id: unknown user " + std::to_string(external_id));
    return it->second;
}

std::uint64_t Dataset::fingerprint() const {
    std::uint64_t h = fnv1a("dynmm-dataset", 13);
    h = fnv1a(&manifest.users, sizeof(manifest.users), h);
    h = fnv1a(&manifest.items, sizeof(manifest.items), h);
    h = fnv1a(&manifest.interactions, sizeof(manifest.interactions), h);
    for (const auto& it : items) {
        h = fnv1a(&it.id, sizeof(it.id), h);
        for (const auto& fvec : it.features)
            if (!fvec.empty()) h = fnv1a(fvec.data(), fvec.size() * sizeof(double), h);
    }
    for (const auto& u : users) {
        h = fnv1a(&u.id, sizeof(u.id), h);
        h = fnv1a(u.cf_embedding.data(), u.cf_embedding.size() * sizeof(double), h);
    }
    for (const auto& e : interactions) h = fnv1a(&e, sizeof(e), h);
    return h;
}

Dataset ingest(const std::string& dir, bool streaming) {
    Dataset ds;
    const fs::path root(dir);
    check(fs::is_directory(root), Errc::io, "ingest: '" + dir + "' is not a directory");

    {
        std::ifstream f(root / "manifest.txt");
        check(f.good(), Errc::io, "ingest: missing manifest.txt in '" + dir + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        ds.manifest = Manifest::from_text(ss.str(), (root / "manifest.txt").string());
    }
    const Manifest& mf = ds.manifest;

    // Item CF features define the item set.
    {
        auto recs = read_feature_file((root / "features_cf.bin").string());
        check(recs.size() == mf.items, Errc::validation,
              "ingest: manifest items = " + std::to_string(mf.items) + " but features_cf.bin has " +
                  std::to_string(recs.size()) + " records");
        ds.items.reserve(recs.size());
        for (auto& r : recs) {
            check(r.values.size() == mf.dim_cf, Errc::validation,
                  "dim mismatch: features_cf.bin item " + std::to_string(r.id) + " has dim " +
                      std::to_string(r.values.size()) + ", manifest says " + std::to_string(mf.dim_cf));
            check(ds.item_index.emplace(r.id, ds.items.size()).second, Errc::validation,
                  "ingest: duplicate item id " + std::to_string(r.id));
            ItemRecord rec;
            rec.id = r.id;
            rec.feature(Modality::cf) = std::move(r.values);
            rec.mask.set(Modality::cf);
            ds.items.push_back(std::move(rec));
        }
    }
    {
        auto recs = read_feature_file((root / "features_user_cf.bin").string());
        check(recs.size() == mf.users, Errc::validation,
              "ingest: manifest users = " + std::to_string(mf.users) + " but features_user_cf.bin has " +
                  std::to_string(recs.size()) + " records");
        ds.users.reserve(recs.size());
        for (auto& r : recs) {
            check(r.values.size() == mf.dim_cf, Errc::validation,
                  "dim mismatch: features_user_cf.bin user " + std::to_string(r.id) + " has dim " +
                      std::to_string(r.values.size()) + ", manifest says " + std::to_string(mf.dim_cf));
            check(ds.user_index.emplace(r.id, ds.users.size()).second, Errc::validation,
                  "ingest: duplicate user id " + std::to_string(r.id));
            UserRecord rec;
            rec.id = r.id;
            rec.cf_embedding = std::move(r.values);
            ds.users.push_back(std::move(rec));
        }
    }

    struct Side {
        Modality m;
        const char* file;
        std::uint32_t dim;
    };
    const Side sides[] = {{Modality::txt, "features_txt.bin", mf.dim_txt},
                          {Modality::vis, "features_vis.bin", mf.dim_vis},
                          {Modality::aud, "features_aud.bin", mf.dim_aud}};
    for (const auto& s : sides) {
        const fs::path p = root / s.file;
        if (!fs::exists(p)) continue;
        for (auto& r : read_feature_file(p.string())) {
            auto it = ds.item_index.find(r.id);
            check(it != ds.item_index.end(), Errc::validation,
                  std::string("dangling id: ") + s.file + " references unknown item " +
                      std::to_string(r.id));
            check(r.values.size() == s.dim, Errc::validation,
                  std::string("dim mismatch: ") + s.file + " item " + std::to_string(r.id) +
                      " has dim " + std::to_string(r.values.size()) + ", manifest says " +
                      std::to_string(s.dim));
            ds.items[it->second].feature(s.m) = std::move(r.values);
            ds.items[it->second].mask.set(s.m);
        }
    }

    // Attribute vocabulary and per-item attribute lists (optional).
    if (fs::exists(root / "attributes.tsv")) {
        std::ifstream f(root / "attributes.tsv");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string loc = "attributes.tsv:" + std::to_string(lineno);
            auto toks = split(line, '\t');
            check(toks.size() == 2, Errc::validation, loc + ": expected attr_id \\t name");
            const std::uint64_t id = parse_u64(toks[0], loc);
            check(id == ds.attr_names.size(), Errc::validation,
                  loc + ": attribute ids must be dense and ascending from 0");
            ds.attr_names.push_back(toks[1]);
        }
        check(ds.attr_names.size() == mf.attributes, Errc::validation,
              "ingest: manifest attributes = " + std::to_string(mf.attributes) +
                  " but attributes.tsv has " + std::to_string(ds.attr_names.size()));
    } else {
        check(mf.attributes == 0, Errc::validation,
              "ingest: manifest declares attributes but attributes.tsv is missing");
    }
    if (fs::exists(root / "item_attrs.tsv")) {
        std::ifstream f(root / "item_attrs.tsv");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string loc = "item_attrs.tsv:" + std::to_string(lineno);
            auto toks = split(line, '\t');
            check(toks.size() == 2, Errc::validation, loc + ": expected item \\t attr list");
            const std::size_t idx = [&] {
                auto it = ds.item_index.find(parse_u64(toks[0], loc));
                check(it != ds.item_index.end(), Errc::validation,
                      loc + ": dangling id: unknown item " + toks[0]);
                return it->second;
            }();
            for (const auto& a : split(toks[1], ',')) {
                const std::uint64_t attr = parse_u64(a, loc);
                check(attr < ds.attr_names.size(), Errc::validation,
                      loc + ": attribute id " + a + " out of range");
                ds.items[idx].attributes.push_back(static_cast<std::uint32_t>(attr));
            }
        }
    }

    // Interactions.
    {
        std::ifstream f(root / "interactions.tsv");
        check(f.good(), Errc::io, "ingest: missing interactions.tsv in '" + dir + "'");
        std::string line;
        std::size_t lineno = 0;
        Timestamp prev_ts = 0;
        bool first = true;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            const std::string loc = "interactions.tsv:" + std::to_string(lineno);
            auto toks = split(line, '\t');
            check(toks.size() == 3, Errc::validation, loc + ": expected user \\t item \\t timestamp");
            const std::uint64_t uid = parse_u64(toks[0], loc);
            const std::uint64_t iid = parse_u64(toks[1], loc);
            const Timestamp ts = parse_i64(toks[2], loc);
            auto uit = ds.user_index.find(uid);
            check(uit != ds.user_index.end(), Errc::validation,
                  loc + ": dangling id: unknown user " + toks[0]);
            auto iit = ds.item_index.find(iid);
            check(iit != ds.item_index.end(), Errc::validation,
                  loc + ": dangling id: unknown item " + toks[1]);
            if (streaming && !first)
                check(ts >= prev_ts, Errc::validation,
                      loc + ": non-monotone timestamp in streaming mode");
            prev_ts = ts;
            first = false;
            ds.interactions.push_back({uit->second, iit->second, ts});
        }
        check(ds.interactions.size() == mf.interactions, Errc::validation,
              "ingest: manifest interactions = " + std::to_string(mf.interactions) +
                  " but interactions.tsv has " + std::to_string(ds.interactions.size()));
    }

    // Per-user histories, time-ordered (stable for equal timestamps).
    {
        std::vector<std::size_t> order(ds.interactions.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return ds.interactions[a].ts < ds.interactions[b].ts;
        });
        for (std::size_t i : order) {
            const auto& e = ds.interactions[i];
            ds.users[e.user].history.emplace_back(e.item, e.ts);
        }
    }
    return ds;
}

}  // namespace dynmm
