// SPDX-License-Identifier: Apache-2.0
#include "dynmm/types.hpp"

namespace dynmm {

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::cf: return "cf";
        case Modality::txt: return "txt";
        case Modality::vis: return "vis";
        case Modality::aud: return "aud";
    }
    return "?";
}

}  // namespace dynmm
