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
#include <unordered_set>

#include "../core/distance.hpp"
#include "../core/types.hpp"

namespace cloudann {

// Two-pass Vamana construction over an in-memory float matrix: random
// regular init, per-point greedy search from the medoid followed by a
// robust prune (pass 1 at alpha=1, pass 2 at the configured alpha), reverse
// edges pruned back to the degree bound, then a reachability fix-up from
// the medoid.
class VamanaBuilder {
public:
    VamanaBuilder(const float* data, std::uint32_t count, std::uint32_t dim)
        : data_(data), count_(count), dim_(dim) {
    }

    struct Graph {
        std::vector<std::vector<VecId>> adjacency;
        VecId medoid = 0;
    };

    Graph
    build(std::uint32_t max_degree, std::uint32_t build_search_len, double alpha,
          std::uint64_t seed) {
        if (count_ == 0) {
            throw std::invalid_argument("vamana: empty dataset");
        }
        if (max_degree == 0 || build_search_len < max_degree) {
            throw std::invalid_argument("vamana: need max_degree >= 1 and L >= R");
        }
        std::mt19937_64 rng(seed);
        Graph g;
        g.adjacency.assign(count_, {});
        g.medoid = find_medoid();

        // Degree bound admits the complete graph: build it outright.
        if (count_ <= max_degree + 1) {
            for (VecId v = 0; v < count_; ++v) {
                for (VecId u = 0; u < count_; ++u) {
                    if (u != v) {
                        g.adjacency[v].push_back(u);
                    }
                }
            }
            return g;
        }

        // Random regular init.
        if (count_ > 1) {
            std::uniform_int_distribution<VecId> pick(0, count_ - 1);
            for (VecId v = 0; v < count_; ++v) {
                std::unordered_set<VecId> chosen;
                std::uint32_t want = std::min<std::uint32_t>(max_degree, count_ - 1);
                while (chosen.size() < want) {
                    VecId u = pick(rng);
                    if (u != v) {
                        chosen.insert(u);
                    }
                }
                g.adjacency[v].assign(chosen.begin(), chosen.end());
                std::sort(g.adjacency[v].begin(), g.adjacency[v].end());
            }
        }

        std::vector<VecId> order(count_);
        for (VecId v = 0; v < count_; ++v) {
            order[v] = v;
        }
        for (double pass_alpha : {1.0, alpha}) {
            std::shuffle(order.begin(), order.end(), rng);
            for (VecId v : order) {
                auto visited = greedy_search(g, g.medoid, row(v), build_search_len);
                std::vector<ScoredId> pool;
                pool.reserve(visited.size() + g.adjacency[v].size());
                for (const auto& s : visited) {
                    if (s.id != v) {
                        pool.push_back(s);
                    }
                }
                for (VecId u : g.adjacency[v]) {
                    if (u != v) {
                        pool.push_back({dist(v, u), u});
                    }
                }
                g.adjacency[v] = robust_prune(v, std::move(pool), pass_alpha, max_degree);
                for (VecId u : g.adjacency[v]) {
                    auto& back = g.adjacency[u];
                    if (std::find(back.begin(), back.end(), v) == back.end()) {
                        back.push_back(v);
                        if (back.size() > max_degree) {
                            std::vector<ScoredId> bpool;
                            bpool.reserve(back.size());
                            for (VecId w : back) {
                                bpool.push_back({dist(u, w), w});
                            }
                            g.adjacency[u] = robust_prune(u, std::move(bpool), pass_alpha,
                                                          max_degree);
                        }
                    }
                }
            }
        }

        connect_unreachable(g, max_degree);
        return g;
    }

private:
    const float*
    row(VecId v) const {
        return data_ + static_cast<std::size_t>(v) * dim_;
    }

    double
    dist(VecId a, VecId b) const {
        return squared_l2(row(a), row(b), dim_);
    }

    double
    dist_to(const float* q, VecId b) const {
        return squared_l2(q, row(b), dim_);
    }

    VecId
    find_medoid() const {
        std::vector<double> mean(dim_, 0.0);
        for (VecId v = 0; v < count_; ++v) {
            const float* r = row(v);
            for (std::uint32_t d = 0; d < dim_; ++d) {
                mean[d] += r[d];
            }
        }
        std::vector<float> meanf(dim_);
        for (std::uint32_t d = 0; d < dim_; ++d) {
            meanf[d] = static_cast<float>(mean[d] / count_);
        }
        VecId best = 0;
        double best_d = std::numeric_limits<double>::max();
        for (VecId v = 0; v < count_; ++v) {
            double d = squared_l2(meanf.data(), row(v), dim_);
            if (d < best_d) {
                best_d = d;
                best = v;
            }
        }
        return best;
    }

    // Best-first traversal with a candidate list bounded by L; returns all
    // visited nodes scored by exact distance.
    std::vector<ScoredId>
    greedy_search(const Graph& g, VecId start, const float* query, std::uint32_t L) const {
        std::vector<ScoredId> candidates;  // sorted ascending, <= L entries
        std::vector<bool> in_list(count_, false);
        std::vector<bool> expanded(count_, false);
        std::vector<ScoredId> visited;

        auto insert_candidate = [&](ScoredId s) {
            if (in_list[s.id]) {
                return;
            }
            auto pos = std::lower_bound(candidates.begin(), candidates.end(), s);
            if (candidates.size() >= L && pos == candidates.end()) {
                return;
            }
            in_list[s.id] = true;
            candidates.insert(pos, s);
            if (candidates.size() > L) {
                candidates.pop_back();
            }
        };

        insert_candidate({dist_to(query, start), start});
        while (true) {
            VecId next = count_;
            for (const auto& s : candidates) {
                if (!expanded[s.id]) {
                    next = s.id;
                    break;
                }
            }
            if (next == count_) {
                break;
            }
            expanded[next] = true;
            visited.push_back({dist_to(query, next), next});
            for (VecId u : g.adjacency[next]) {
                insert_candidate({dist_to(query, u), u});
            }
        }
        return visited;
    }

    // Keeps at most max_degree pool members, closest first, dropping any
    // candidate that is alpha-occluded by an already-kept neighbor.
    std::vector<VecId>
    robust_prune(VecId v, std::vector<ScoredId> pool, double alpha, std::uint32_t max_degree) const {
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end(),
                               [](const ScoredId& a, const ScoredId& b) { return a.id == b.id; }),
                   pool.end());
        std::vector<VecId> kept;
        std::vector<bool> dropped(pool.size(), false);
        for (std::size_t i = 0; i < pool.size() && kept.size() < max_degree; ++i) {
            if (dropped[i]) {
                continue;
            }
            VecId u = pool[i].id;
            kept.push_back(u);
            for (std::size_t j = i + 1; j < pool.size(); ++j) {
                if (dropped[j]) {
                    continue;
                }
                if (alpha * dist(u, pool[j].id) <= pool[j].dist) {
                    dropped[j] = true;
                }
            }
        }
        (void)v;
        return kept;
    }

    // Any node unreachable from the medoid gets an incoming edge from its
    // nearest reachable node, evicting that node's worst edge when full.
    void
    connect_unreachable(Graph& g, std::uint32_t max_degree) const {
        while (true) {
            std::vector<bool> reachable(count_, false);
            std::vector<VecId> stack = {g.medoid};
            reachable[g.medoid] = true;
            while (!stack.empty()) {
                VecId v = stack.back();
                stack.pop_back();
                for (VecId u : g.adjacency[v]) {
                    if (!reachable[u]) {
                        reachable[u] = true;
                        stack.push_back(u);
                    }
                }
            }
            VecId orphan = count_;
            for (VecId v = 0; v < count_; ++v) {
                if (!reachable[v]) {
                    orphan = v;
                    break;
                }
            }
            if (orphan == count_) {
                return;
            }
            VecId host = count_;
            double best = std::numeric_limits<double>::max();
            for (VecId v = 0; v < count_; ++v) {
                if (!reachable[v] || v == orphan) {
                    continue;
                }
                double d = dist(orphan, v);
                if (d < best) {
                    best = d;
                    host = v;
                }
            }
            auto& edges = g.adjacency[host];
            if (edges.size() >= max_degree) {
                std::size_t worst = 0;
                double worst_d = -1.0;
                for (std::size_t i = 0; i < edges.size(); ++i) {
                    double d = dist(host, edges[i]);
                    if (d > worst_d) {
                        worst_d = d;
                        worst = i;
                    }
                }
                edges[worst] = orphan;
            } else {
                edges.push_back(orphan);
            }
        }
    }

    const float* data_;
    std::uint32_t count_;
    std::uint32_t dim_;
};

}  // namespace cloudann
