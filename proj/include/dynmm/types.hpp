// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dynmm/common.hpp"
#include "dynmm/linalg.hpp"

namespace dynmm {

enum class Modality : int { cf = 0, txt = 1, vis = 2, aud = 3 };
constexpr std::array<Modality, 4> kModalities = {Modality::cf, Modality::txt, Modality::vis,
                                                 Modality::aud};
const char* modality_name(Modality m);

struct ModalityMask {
    std::array<bool, 4> has = {false, false, false, false};

    bool operator[](Modality m) const { return has[static_cast<int>(m)]; }
    void set(Modality m, bool v = true) { has[static_cast<int>(m)] = v; }
    bool operator==(const ModalityMask&) const = default;
};

struct ItemRecord {
    ItemId id = 0;
    // Indexed by Modality; a vector is present (non-empty) exactly for
    // modalities flagged in mask.
    std::array<Vec, 4> features;
    ModalityMask mask;
    std::vector<std::uint32_t> attributes;

    const Vec& feature(Modality m) const { return features[static_cast<int>(m)]; }
    Vec& feature(Modality m) { return features[static_cast<int>(m)]; }
};

struct Interaction {
    UserId user = 0;
    ItemId item = 0;
    Timestamp ts = 0;
};

struct UserRecord {
    UserId id = 0;
    Vec cf_embedding;
    std::vector<std::pair<ItemId, Timestamp>> history;  // timestamps non-decreasing
};

enum class LatentKind { base, dynamic };

struct JointLatent {
    Vec v;
    LatentKind kind = LatentKind::base;
};

}  // namespace dynmm
