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

#include <functional>
#include <queue>

#include "../core/serial.hpp"
#include "../core/types.hpp"
#include "kmeans.hpp"

namespace cloudann {

// Balanced k-means tree over the centroid set, kept in memory and used to
// pick the top-nprobe posting lists without scanning all n centroids.
class BktTree {
public:
    struct Node {
        std::vector<float> center;           // mean of the node's centroids
        std::vector<std::uint32_t> children; // node ids; empty for leaves
        std::vector<VecId> items;            // centroid ids; empty for internal
    };

    BktTree() = default;

    void
    build(const float* centroids, std::uint32_t n, std::uint32_t dim, std::uint32_t fanout,
          std::uint32_t leaf_size, std::uint32_t kmeans_iters, std::mt19937_64& rng) {
        if (fanout < 2 || leaf_size == 0) {
            throw std::invalid_argument("bkt: fanout must be >= 2 and leaf size positive");
        }
        dim_ = dim;
        n_ = n;
        nodes_.clear();
        std::vector<VecId> all(n);
        for (VecId i = 0; i < n; ++i) {
            all[i] = i;
        }
        build_node(centroids, all, fanout, leaf_size, kmeans_iters, rng);
    }

    // Best-first traversal on node-center distance; leaves score their
    // centroids exactly via `exact_score`. Scoring continues past the first
    // nprobe centroids until the nearest unexplored node is farther than the
    // current nprobe-th best centroid, then the exact top-nprobe among all
    // scored centroids is returned in ascending distance order.
    std::vector<ScoredId>
    select(const float* query, std::uint32_t nprobe,
           const std::function<double(VecId)>& exact_score, std::uint64_t* work_dims) const {
        if (nprobe == 0 || nprobe > n_) {
            throw std::invalid_argument("bkt select: nprobe out of range");
        }
        std::uint64_t work = 0;
        struct Visit {
            double dist;
            std::uint32_t node;
            bool
            operator>(const Visit& o) const {
                if (dist != o.dist) {
                    return dist > o.dist;
                }
                return node > o.node;
            }
        };
        std::priority_queue<Visit, std::vector<Visit>, std::greater<>> frontier;
        frontier.push({node_dist(0, query, work), 0});

        // Max-heap of the best nprobe scored centroids. Node centers are
        // means, not bounds, so exploration continues until the nearest
        // unexplored node is well past the current nprobe-th best centroid.
        constexpr double kExploreSlack = 2.0;  // on squared distance
        std::vector<ScoredId> best;
        best.reserve(nprobe + 1);
        auto cmp = [](const ScoredId& a, const ScoredId& b) { return a < b; };
        while (!frontier.empty()) {
            if (best.size() == nprobe && frontier.top().dist > kExploreSlack * best.front().dist) {
                break;
            }
            Visit v = frontier.top();
            frontier.pop();
            const Node& node = nodes_[v.node];
            if (node.children.empty()) {
                for (VecId item : node.items) {
                    double d = exact_score(item);
                    work += dim_;
                    ScoredId s{d, item};
                    if (best.size() < nprobe) {
                        best.push_back(s);
                        std::push_heap(best.begin(), best.end(), cmp);
                    } else if (s < best.front()) {
                        std::pop_heap(best.begin(), best.end(), cmp);
                        best.back() = s;
                        std::push_heap(best.begin(), best.end(), cmp);
                    }
                }
            } else {
                for (std::uint32_t child : node.children) {
                    frontier.push({node_dist(child, query, work), child});
                }
            }
        }
        std::sort(best.begin(), best.end());
        if (work_dims != nullptr) {
            *work_dims += work;
        }
        return best;
    }

    std::uint32_t
    node_count() const {
        return static_cast<std::uint32_t>(nodes_.size());
    }

    void
    save(BinWriter& w) const {
        w.u32(dim_);
        w.u32(n_);
        w.u32(static_cast<std::uint32_t>(nodes_.size()));
        for (const auto& node : nodes_) {
            w.vec(node.center);
            w.vec(node.children);
            w.vec(node.items);
        }
    }

    void
    load(BinReader& r) {
        dim_ = r.u32();
        n_ = r.u32();
        std::uint32_t count = r.u32();
        nodes_.resize(count);
        for (auto& node : nodes_) {
            node.center = r.vec<float>();
            node.children = r.vec<std::uint32_t>();
            node.items = r.vec<VecId>();
        }
    }

private:
    double
    node_dist(std::uint32_t node, const float* query, std::uint64_t& work) const {
        work += dim_;
        return squared_l2(query, nodes_[node].center.data(), dim_);
    }

    std::uint32_t
    build_node(const float* centroids, const std::vector<VecId>& items, std::uint32_t fanout,
               std::uint32_t leaf_size, std::uint32_t kmeans_iters, std::mt19937_64& rng) {
        std::uint32_t id = static_cast<std::uint32_t>(nodes_.size());
        nodes_.emplace_back();
        {
            Node& node = nodes_[id];
            node.center.assign(dim_, 0.0f);
            std::vector<double> mean(dim_, 0.0);
            for (VecId item : items) {
                const float* row = centroids + static_cast<std::size_t>(item) * dim_;
                for (std::uint32_t d = 0; d < dim_; ++d) {
                    mean[d] += row[d];
                }
            }
            for (std::uint32_t d = 0; d < dim_; ++d) {
                node.center[d] = static_cast<float>(mean[d] / static_cast<double>(items.size()));
            }
        }
        if (items.size() <= leaf_size) {
            nodes_[id].items = items;
            return id;
        }

        // Cluster this node's centroids into fanout children.
        std::vector<float> subset(items.size() * dim_);
        for (std::size_t i = 0; i < items.size(); ++i) {
            std::copy_n(centroids + static_cast<std::size_t>(items[i]) * dim_, dim_,
                        subset.data() + i * dim_);
        }
        auto km = kmeans(subset.data(), items.size(), dim_,
                         std::min<std::uint32_t>(fanout, static_cast<std::uint32_t>(items.size())),
                         kmeans_iters, rng);
        std::vector<std::vector<VecId>> parts(km.k);
        for (std::size_t i = 0; i < items.size(); ++i) {
            parts[km.assign[i]].push_back(items[i]);
        }
        bool degenerate = false;
        for (const auto& p : parts) {
            if (p.size() == items.size()) {
                degenerate = true;
            }
        }
        if (degenerate) {
            // All points identical to k-means: split round-robin so the
            // recursion always makes progress.
            for (auto& p : parts) {
                p.clear();
            }
            for (std::size_t i = 0; i < items.size(); ++i) {
                parts[i % parts.size()].push_back(items[i]);
            }
        }
        std::vector<std::uint32_t> children;
        for (const auto& p : parts) {
            if (p.empty()) {
                continue;
            }
            children.push_back(build_node(centroids, p, fanout, leaf_size, kmeans_iters, rng));
        }
        nodes_[id].children = std::move(children);
        return id;
    }

    std::uint32_t dim_ = 0;
    std::uint32_t n_ = 0;
    std::vector<Node> nodes_;
};

}  // namespace cloudann
