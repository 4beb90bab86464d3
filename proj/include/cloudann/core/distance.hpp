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

#include <cstdint>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace cloudann {

// Squared L2 over float rows, single-precision accumulation.
inline double
squared_l2(const float* a, const float* b, std::size_t dim) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < dim; ++i) {
        float d = a[i] - b[i];
        acc += d * d;
    }
    return static_cast<double>(acc);
}

// Squared L2 over int8 rows; operands widen to 32-bit, accumulator 64-bit,
// so the result is exact (and exactly representable in double at any
// realistic dimension).
inline double
squared_l2(const std::int8_t* a, const std::int8_t* b, std::size_t dim) {
    std::int64_t acc = 0;
    for (std::size_t i = 0; i < dim; ++i) {
        std::int32_t d = static_cast<std::int32_t>(a[i]) - static_cast<std::int32_t>(b[i]);
        acc += static_cast<std::int64_t>(d) * d;
    }
    return static_cast<double>(acc);
}

template <typename T>
double
squared_l2(std::span<const T> a, std::span<const T> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("squared_l2: dimension mismatch");
    }
    return squared_l2(a.data(), b.data(), a.size());
}

}  // namespace cloudann
