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

#include <algorithm>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "../core/distance.hpp"

namespace cloudann {

struct KMeansResult {
    std::uint32_t k = 0;
    std::vector<float> centers;        // k x dim
    std::vector<std::uint32_t> assign; // n
};

// Lloyd k-means with k-means++ seeding. When the input has at most k
// distinct rows the centers are exactly those rows (zero quantization
// error), which matters for product-quantizer training on small or
// low-entropy chunks. Empty clusters are reseeded to the point farthest
// from its current center. Deterministic for a given rng state.
inline KMeansResult
kmeans(const float* data, std::size_t n, std::size_t dim, std::uint32_t k, std::uint32_t iters,
       std::mt19937_64& rng) {
    if (n == 0 || k == 0) {
        throw std::invalid_argument("kmeans: empty input or k == 0");
    }
    KMeansResult res;
    res.k = k;
    res.centers.assign(static_cast<std::size_t>(k) * dim, 0.0f);
    res.assign.assign(n, 0);

    auto row = [&](std::size_t i) { return data + i * dim; };
    auto center = [&](std::uint32_t c) { return res.centers.data() + static_cast<std::size_t>(c) * dim; };

    // Distinct-rows shortcut.
    {
        std::map<std::vector<float>, std::uint32_t> distinct;
        for (std::size_t i = 0; i < n && distinct.size() <= k; ++i) {
            distinct.emplace(std::vector<float>(row(i), row(i) + dim), 0u);
        }
        if (distinct.size() <= k) {
            std::uint32_t c = 0;
            for (auto& [vec, id] : distinct) {
                id = c;
                std::copy(vec.begin(), vec.end(), center(c));
                ++c;
            }
            // Duplicate the first center into unused slots.
            for (; c < k; ++c) {
                std::copy(center(0), center(0) + dim, center(c));
            }
            for (std::size_t i = 0; i < n; ++i) {
                res.assign[i] =
                    distinct.at(std::vector<float>(row(i), row(i) + dim));
            }
            return res;
        }
    }

    // k-means++ seeding.
    std::vector<double> min_dist(n, std::numeric_limits<double>::max());
    {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::size_t first = pick(rng);
        std::copy(row(first), row(first) + dim, center(0));
        for (std::uint32_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = squared_l2(row(i), center(c - 1), dim);
                min_dist[i] = std::min(min_dist[i], d);
                total += min_dist[i];
            }
            std::size_t chosen = 0;
            if (total > 0.0) {
                std::uniform_real_distribution<double> uni(0.0, total);
                double target = uni(rng);
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += min_dist[i];
                    if (acc >= target) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = pick(rng);
            }
            std::copy(row(chosen), row(chosen) + dim, center(c));
        }
    }

    std::vector<std::uint32_t> counts(k, 0);
    std::vector<double> sums(static_cast<std::size_t>(k) * dim, 0.0);
    for (std::uint32_t iter = 0; iter < iters; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            std::uint32_t best_c = 0;
            for (std::uint32_t c = 0; c < k; ++c) {
                double d = squared_l2(row(i), center(c), dim);
                if (d < best) {
                    best = d;
                    best_c = c;
                }
            }
            if (res.assign[i] != best_c) {
                res.assign[i] = best_c;
                changed = true;
            }
        }
        if (!changed && iter > 0) {
            break;
        }
        std::fill(counts.begin(), counts.end(), 0u);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t c = res.assign[i];
            ++counts[c];
            const float* r = row(i);
            double* s = sums.data() + static_cast<std::size_t>(c) * dim;
            for (std::size_t d = 0; d < dim; ++d) {
                s[d] += r[d];
            }
        }
        for (std::uint32_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // Reseed to the point farthest from its own center.
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = squared_l2(row(i), center(res.assign[i]), dim);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                std::copy(row(far), row(far) + dim, center(c));
                continue;
            }
            double* s = sums.data() + static_cast<std::size_t>(c) * dim;
            float* ctr = center(c);
            for (std::size_t d = 0; d < dim; ++d) {
                ctr[d] = static_cast<float>(s[d] / counts[c]);
            }
        }
    }

    // Final assignment against the last centers.
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::max();
        std::uint32_t best_c = 0;
        for (std::uint32_t c = 0; c < k; ++c) {
            double d = squared_l2(row(i), center(c), dim);
            if (d < best) {
                best = d;
                best_c = c;
            }
        }
        res.assign[i] = best_c;
    }
    return res;
}

}  // namespace cloudann
