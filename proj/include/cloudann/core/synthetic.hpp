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

#include <cmath>
#include <random>

#include "dataset.hpp"

namespace cloudann {

// Seeded Gaussian-blob generator. Rows are emitted blob by blob, so vector
// ids carry spatial locality. clusters=0 gives uniform data in [-1,1]^dim.
// int8 datasets are the float sample scaled to roughly [-110, 110] and
// rounded, saturating at the type bounds.
inline VectorDataset
make_synthetic_dataset(std::uint32_t count, std::uint32_t dim, std::uint32_t clusters,
                       double cluster_stddev, ElemType elem, std::uint64_t seed) {
    if (dim == 0) {
        throw std::invalid_argument("make_synthetic_dataset: dim must be positive");
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, cluster_stddev);

    std::vector<float> centers;
    if (clusters > 0) {
        centers.resize(static_cast<std::size_t>(clusters) * dim);
        for (auto& c : centers) {
            c = static_cast<float>(uni(rng));
        }
    }

    VectorDataset ds;
    ds.count = count;
    ds.dim = dim;
    ds.elem = elem;
    std::vector<float> rows(static_cast<std::size_t>(count) * dim);
    for (std::uint32_t i = 0; i < count; ++i) {
        float* row = rows.data() + static_cast<std::size_t>(i) * dim;
        if (clusters > 0) {
            // Even split across blobs, consecutive ids share a blob.
            std::uint32_t blob = static_cast<std::uint32_t>(
                (static_cast<std::uint64_t>(i) * clusters) / std::max<std::uint32_t>(count, 1));
            const float* c = centers.data() + static_cast<std::size_t>(blob) * dim;
            for (std::uint32_t d = 0; d < dim; ++d) {
                row[d] = c[d] + static_cast<float>(gauss(rng));
            }
        } else {
            for (std::uint32_t d = 0; d < dim; ++d) {
                row[d] = static_cast<float>(uni(rng));
            }
        }
    }
    if (elem == ElemType::f32) {
        ds.f32 = std::move(rows);
    } else {
        ds.i8.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double v = std::round(rows[i] * 110.0);
            v = std::min(127.0, std::max(-128.0, v));
            ds.i8[i] = static_cast<std::int8_t>(v);
        }
    }
    ds.check();
    return ds;
}

// Query set drawn as perturbed base rows: each query copies a random row of
// `base` and adds Gaussian noise of the given stddev (in base units).
inline VectorDataset
make_query_set(const VectorDataset& base, std::uint32_t query_count, double noise_stddev,
               std::uint64_t seed) {
    if (base.count == 0) {
        throw std::invalid_argument("make_query_set: empty base dataset");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> pick(0, base.count - 1);
    std::normal_distribution<double> gauss(0.0, noise_stddev);

    VectorDataset qs;
    qs.count = query_count;
    qs.dim = base.dim;
    qs.elem = base.elem;
    if (base.elem == ElemType::f32) {
        qs.f32.resize(static_cast<std::size_t>(query_count) * base.dim);
        for (std::uint32_t q = 0; q < query_count; ++q) {
            const float* src = base.row_f32(pick(rng));
            float* dst = qs.f32.data() + static_cast<std::size_t>(q) * base.dim;
            for (std::uint32_t d = 0; d < base.dim; ++d) {
                dst[d] = src[d] + static_cast<float>(gauss(rng));
            }
        }
    } else {
        qs.i8.resize(static_cast<std::size_t>(query_count) * base.dim);
        for (std::uint32_t q = 0; q < query_count; ++q) {
            const std::int8_t* src = base.row_i8(pick(rng));
            std::int8_t* dst = qs.i8.data() + static_cast<std::size_t>(q) * base.dim;
            for (std::uint32_t d = 0; d < base.dim; ++d) {
                double v = std::round(static_cast<double>(src[d]) + gauss(rng) * 110.0);
                v = std::min(127.0, std::max(-128.0, v));
                dst[d] = static_cast<std::int8_t>(v);
            }
        }
    }
    qs.check();
    return qs;
}

}  // namespace cloudann
