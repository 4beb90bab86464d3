// Copyright 2026-present the cloudann project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cloudann {

using VecId = std::uint32_t;
using Bytes = std::vector<std::uint8_t>;

enum class ElemType : std::uint8_t { f32 = 0, i8 = 1 };

inline std::size_t elem_size(ElemType t) {
    return t == ElemType::f32 ? sizeof(float) : sizeof(std::int8_t);
}

inline const char*
elem_name(ElemType t) {
    return t == ElemType::f32 ? "float32" : "int8";
}

inline ElemType
elem_from_name(const std::string& name) {
    if (name == "float32" || name == "f32") {
        return ElemType::f32;
    }
    if (name == "int8" || name == "i8") {
        return ElemType::i8;
    }
    throw std::invalid_argument("unknown element type: " + name);
}

// (exact squared distance, id) with ascending-id tie break; the one ranking
// rule used everywhere so every top-k output is deterministic.
struct ScoredId {
    double dist;
    VecId id;

    friend bool
    operator<(const ScoredId& a, const ScoredId& b) {
        if (a.dist != b.dist) {
            return a.dist < b.dist;
        }
        return a.id < b.id;
    }
};

struct SearchResult {
    std::vector<VecId> ids;
    std::vector<double> dists;
};

}  // namespace cloudann
