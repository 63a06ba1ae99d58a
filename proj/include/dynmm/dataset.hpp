// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "dynmm/types.hpp"

namespace dynmm {

// On-disk layout of a dataset directory:
//   manifest.txt            key=value counts and dims
//   interactions.tsv        user \t item \t unix_timestamp (UTF-8, one per line)
//   features_user_cf.bin    binary (id u64, dim u32, dim x f64) records
//   features_cf.bin         item CF features (defines the item set)
//   features_txt.bin        optional side modalities; membership in a file
//   features_vis.bin        materializes the item's modality mask
//   features_aud.bin
//   attributes.tsv          optional: attr_id \t name
//   item_attrs.tsv          optional: item \t attr_id[,attr_id...]
// Ids are unsigned 64-bit decimal integers in text files and raw u64 in
// binary files.

struct Manifest {
    std::uint64_t users = 0;
    std::uint64_t items = 0;
    std::uint64_t interactions = 0;
    std::uint32_t dim_cf = 0;
    std::uint32_t dim_txt = 0;
    std::uint32_t dim_vis = 0;
    std::uint32_t dim_aud = 0;
    std::uint64_t attributes = 0;

    std::string to_text() const;
    static Manifest from_text(const std::string& text, const std::string& where);
};

struct FeatureRecord {
    std::uint64_t id = 0;
    Vec values;
};

void write_feature_file(const std::string& path, const std::vector<FeatureRecord>& recs);
std::vector<FeatureRecord> read_feature_file(const std::string& path);

// Fully validated, densely indexed dataset. Interactions and histories use
// internal indices; external ids live on the records themselves.
struct Dataset {
    Manifest manifest;
    std::vector<ItemRecord> items;   // items[i].id = external id
    std::vector<UserRecord> users;
    std::vector<Interaction> interactions;  // user/item are internal indices
    std::vector<std::string> attr_names;

    std::unordered_map<std::uint64_t, std::size_t> item_index;
    std::unordered_map<std::uint64_t, std::size_t> user_index;

    std::size_t item_of(std::uint64_t external_id) const;
    std::size_t user_of(std::uint64_t external_id) const;

    std::uint64_t fingerprint() const;
};

// Loads and validates a dataset directory. streaming=true additionally
// requires globally non-decreasing interaction timestamps.
Dataset ingest(const std::string& dir, bool streaming = false);

}  // namespace dynmm
