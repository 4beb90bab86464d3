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

#include <random>

#include "../core/serial.hpp"
#include "../core/types.hpp"
#include "kmeans.hpp"

namespace cloudann {

// Product quantizer: the dimension range is split into `chunks` contiguous
// sub-ranges (floor/ceil split, remainder on the leading chunks), each with
// 256 k-means centers. Codes are one byte per chunk per vector and stay in
// memory to guide graph traversal.
class PQCodebook {
public:
    static constexpr std::uint32_t kCenters = 256;

    PQCodebook() = default;

    std::uint32_t
    dim() const {
        return dim_;
    }

    std::uint32_t
    chunks() const {
        return chunks_;
    }

    std::uint32_t
    chunk_begin(std::uint32_t c) const {
        return offsets_[c];
    }

    std::uint32_t
    chunk_dim(std::uint32_t c) const {
        return offsets_[c + 1] - offsets_[c];
    }

    // Trains per-chunk centers on (a sample of) the widened float matrix and
    // returns one code row per input vector.
    std::vector<std::uint8_t>
    train(const float* data, std::size_t n, std::uint32_t dim, std::uint32_t chunks,
          std::uint64_t seed, std::size_t sample_cap = 100000, std::uint32_t iters = 25) {
        if (chunks == 0 || chunks > dim) {
            throw std::invalid_argument("pq: chunk count must be in [1, dim]");
        }
        if (n == 0) {
            throw std::invalid_argument("pq: empty training set");
        }
        dim_ = dim;
        chunks_ = chunks;
        offsets_.resize(chunks + 1);
        std::uint32_t base = dim / chunks;
        std::uint32_t rem = dim % chunks;
        offsets_[0] = 0;
        for (std::uint32_t c = 0; c < chunks; ++c) {
            offsets_[c + 1] = offsets_[c] + base + (c < rem ? 1 : 0);
        }
        centers_.assign(static_cast<std::size_t>(kCenters) * dim, 0.0f);

        std::mt19937_64 rng(seed);
        std::vector<std::size_t> sample(n);
        for (std::size_t i = 0; i < n; ++i) {
            sample[i] = i;
        }
        if (n > sample_cap) {
            std::shuffle(sample.begin(), sample.end(), rng);
            sample.resize(sample_cap);
        }

        std::vector<std::uint8_t> codes(n * chunks);
        for (std::uint32_t c = 0; c < chunks; ++c) {
            std::uint32_t cd = chunk_dim(c);
            std::vector<float> train_rows(sample.size() * cd);
            for (std::size_t i = 0; i < sample.size(); ++i) {
                std::copy_n(data + sample[i] * dim + offsets_[c], cd,
                            train_rows.data() + i * cd);
            }
            auto km = kmeans(train_rows.data(), sample.size(), cd, kCenters, iters, rng);
            for (std::uint32_t k = 0; k < kCenters; ++k) {
                std::copy_n(km.centers.data() + static_cast<std::size_t>(k) * cd, cd,
                            center_ptr(c, k));
            }
            // Encode all vectors (not just the sample) against the centers.
            for (std::size_t i = 0; i < n; ++i) {
                codes[i * chunks + c] = encode_chunk(data + i * dim, c);
            }
        }
        return codes;
    }

    std::uint8_t
    encode_chunk(const float* row, std::uint32_t c) const {
        std::uint32_t cd = chunk_dim(c);
        double best = std::numeric_limits<double>::max();
        std::uint32_t best_k = 0;
        for (std::uint32_t k = 0; k < kCenters; ++k) {
            double d = squared_l2(row + offsets_[c], center_ptr(c, k), cd);
            if (d < best) {
                best = d;
                best_k = k;
            }
        }
        return static_cast<std::uint8_t>(best_k);
    }

    std::vector<std::uint8_t>
    encode(const float* row) const {
        std::vector<std::uint8_t> code(chunks_);
        for (std::uint32_t c = 0; c < chunks_; ++c) {
            code[c] = encode_chunk(row, c);
        }
        return code;
    }

    // Asymmetric distance table: table[c*256 + k] is the squared distance
    // between the query's chunk c and center k of that chunk.
    std::vector<float>
    lookup_table(const float* query) const {
        std::vector<float> table(static_cast<std::size_t>(chunks_) * kCenters);
        for (std::uint32_t c = 0; c < chunks_; ++c) {
            std::uint32_t cd = chunk_dim(c);
            for (std::uint32_t k = 0; k < kCenters; ++k) {
                table[static_cast<std::size_t>(c) * kCenters + k] = static_cast<float>(
                    squared_l2(query + offsets_[c], center_ptr(c, k), cd));
            }
        }
        return table;
    }

    static double
    distance(const std::vector<float>& table, const std::uint8_t* code, std::uint32_t chunks) {
        double d = 0.0;
        for (std::uint32_t c = 0; c < chunks; ++c) {
            d += table[static_cast<std::size_t>(c) * kCenters + code[c]];
        }
        return d;
    }

    // Decoded approximation of a coded vector, for fidelity checks.
    std::vector<float>
    reconstruct(const std::uint8_t* code) const {
        std::vector<float> out(dim_);
        for (std::uint32_t c = 0; c < chunks_; ++c) {
            std::copy_n(center_ptr(c, code[c]), chunk_dim(c), out.data() + offsets_[c]);
        }
        return out;
    }

    void
    save(BinWriter& w) const {
        w.u32(dim_);
        w.u32(chunks_);
        w.vec(offsets_);
        w.vec(centers_);
    }

    void
    load(BinReader& r) {
        dim_ = r.u32();
        chunks_ = r.u32();
        offsets_ = r.vec<std::uint32_t>();
        centers_ = r.vec<float>();
    }

private:
    const float*
    center_ptr(std::uint32_t c, std::uint32_t k) const {
        return centers_.data() + static_cast<std::size_t>(offsets_[c]) * kCenters +
               static_cast<std::size_t>(k) * chunk_dim(c);
    }

    float*
    center_ptr(std::uint32_t c, std::uint32_t k) {
        return centers_.data() + static_cast<std::size_t>(offsets_[c]) * kCenters +
               static_cast<std::size_t>(k) * chunk_dim(c);
    }

    std::uint32_t dim_ = 0;
    std::uint32_t chunks_ = 0;
    std::vector<std::uint32_t> offsets_;
    std::vector<float> centers_;  // per chunk: 256 x chunk_dim, chunk-major
};

// Default chunk count: dim/8 but at least 48, clamped to dim.
inline std::uint32_t
default_pq_chunks(std::uint32_t dim) {
    return std::min(dim, std::max<std::uint32_t>(dim / 8, 48));
}

}  // namespace cloudann
