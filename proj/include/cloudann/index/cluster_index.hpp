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
#include <fstream>
#include <unordered_set>

#include "../core/dataset.hpp"
#include "../core/serial.hpp"
#include "../engine/search_cursor.hpp"
#include "bkt.hpp"
#include "kmeans.hpp"

namespace cloudann {

struct ClusterBuildParams {
    double centroid_pct = 16.0;    // centroids as % of dataset size
    std::uint32_t num_replica = 8; // max posting lists a vector may join
    double epsilon = 0.15;         // closure slack on the centroid distance ratio
    std::uint32_t bkt_fanout = 8;
    std::uint32_t bkt_leaf = 32;
    std::uint32_t kmeans_iters = 10;
    std::uint64_t seed = 1;

    void
    check() const {
        if (centroid_pct <= 0.0 || centroid_pct >= 100.0) {
            throw std::invalid_argument("centroid_pct must be in (0,100)");
        }
        if (num_replica == 0 || epsilon < 0.0 || kmeans_iters == 0) {
            throw std::invalid_argument("bad cluster build params");
        }
    }
};

struct PostingMeta {
    std::string object_key;
    std::uint64_t bytes = 0;
    std::uint32_t count = 0;
};

struct ClusterIndexStats {
    std::uint32_t n = 0;
    double mean_list_bytes = 0.0;
    std::uint64_t max_list_bytes = 0;
    std::uint64_t total_bytes = 0;
    double replication_ratio = 0.0;  // total assignments / dataset count
};

// SPANN-style cluster index: k-means centroids snapped to data points,
// boundary vectors replicated into up to num_replica closest lists, an
// in-memory BKT over the centroids, and posting lists laid out as
// independently fetchable objects ("<index_id>/pl/<i>").
class ClusterIndex {
public:
    struct Built;

    // Serialized posting record layout: u32 vector id + raw vector bytes.
    static constexpr std::uint32_t kPostingHeaderBytes = 4;

    static Built
    build(const VectorDataset& data, const ClusterBuildParams& params, std::string index_id);

    const std::string&
    index_id() const {
        return index_id_;
    }

    std::uint32_t
    centroid_count() const {
        return centroids_.count;
    }

    std::uint32_t
    dataset_count() const {
        return dataset_count_;
    }

    std::uint32_t
    dim() const {
        return centroids_.dim;
    }

    ElemType
    elem() const {
        return centroids_.elem;
    }

    const ClusterBuildParams&
    params() const {
        return params_;
    }

    const std::vector<PostingMeta>&
    postings() const {
        return postings_;
    }

    // Top-nprobe centroid ids in ascending centroid distance.
    std::vector<ScoredId>
    bkt_select(const void* query, std::uint32_t nprobe, std::uint64_t* work_dims) const {
        if (nprobe == 0 || nprobe > centroids_.count) {
            throw std::invalid_argument("nprobe out of range");
        }
        const float* qf;
        std::vector<float> widened;
        if (centroids_.elem == ElemType::f32) {
            qf = static_cast<const float*>(query);
        } else {
            const auto* qi = static_cast<const std::int8_t*>(query);
            widened.assign(qi, qi + centroids_.dim);
            qf = widened.data();
        }
        return bkt_.select(
            qf, nprobe, [&](VecId c) { return raw_row_distance(query, centroids_, c); },
            work_dims);
    }

    std::unique_ptr<SearchCursor>
    make_cursor(const VectorDataset& queries, std::uint32_t query_index, std::uint32_t nprobe,
                std::uint32_t k) const;

    ClusterIndexStats
    stats() const {
        ClusterIndexStats s;
        s.n = centroids_.count;
        std::uint64_t assignments = 0;
        for (const auto& p : postings_) {
            s.total_bytes += p.bytes;
            s.max_list_bytes = std::max(s.max_list_bytes, p.bytes);
            assignments += p.count;
        }
        if (!postings_.empty()) {
            s.mean_list_bytes =
                static_cast<double>(s.total_bytes) / static_cast<double>(postings_.size());
        }
        if (dataset_count_ > 0) {
            s.replication_ratio =
                static_cast<double>(assignments) / static_cast<double>(dataset_count_);
        }
        return s;
    }

    // Human-readable manifest plus binary metadata blob (centroids + BKT +
    // posting table); the blob is what the harness pins in memory.
    void
    save(const std::string& manifest_path, const std::string& meta_path) const {
        std::ofstream mf(manifest_path, std::ios::trunc);
        if (!mf) {
            throw std::runtime_error("cannot write manifest: " + manifest_path);
        }
        mf << "index.family=cluster\n";
        mf << "index.id=" << index_id_ << "\n";
        mf << "index.count=" << dataset_count_ << "\n";
        mf << "index.dim=" << centroids_.dim << "\n";
        mf << "index.elem=" << elem_name(centroids_.elem) << "\n";
        mf << "cluster.n=" << centroids_.count << "\n";
        mf << "cluster.centroid_pct=" << params_.centroid_pct << "\n";
        mf << "cluster.num_replica=" << params_.num_replica << "\n";
        mf << "cluster.epsilon=" << params_.epsilon << "\n";
        mf << "cluster.seed=" << params_.seed << "\n";
        for (std::size_t i = 0; i < postings_.size(); ++i) {
            mf << "posting." << i << ".key=" << postings_[i].object_key << "\n";
            mf << "posting." << i << ".bytes=" << postings_[i].bytes << "\n";
            mf << "posting." << i << ".count=" << postings_[i].count << "\n";
        }

        std::ofstream bf(meta_path, std::ios::binary | std::ios::trunc);
        if (!bf) {
            throw std::runtime_error("cannot write metadata blob: " + meta_path);
        }
        BinWriter w{bf};
        write_magic(w, "CANNCLU1");
        w.str(index_id_);
        w.u32(dataset_count_);
        w.u32(centroids_.count);
        w.u32(centroids_.dim);
        w.u32(static_cast<std::uint32_t>(centroids_.elem));
        w.f64(params_.centroid_pct);
        w.u32(params_.num_replica);
        w.f64(params_.epsilon);
        w.u32(params_.bkt_fanout);
        w.u32(params_.bkt_leaf);
        w.u32(params_.kmeans_iters);
        w.u64(params_.seed);
        if (centroids_.elem == ElemType::f32) {
            w.vec(centroids_.f32);
        } else {
            w.vec(centroids_.i8);
        }
        bkt_.save(w);
        w.u32(static_cast<std::uint32_t>(postings_.size()));
        for (const auto& p : postings_) {
            w.str(p.object_key);
            w.u64(p.bytes);
            w.u32(p.count);
        }
    }

    static ClusterIndex
    load(const std::string& meta_path) {
        std::ifstream bf(meta_path, std::ios::binary);
        if (!bf) {
            throw std::runtime_error("cannot open metadata blob: " + meta_path);
        }
        BinReader r{bf};
        expect_magic(r, "CANNCLU1");
        ClusterIndex idx;
        idx.index_id_ = r.str();
        idx.dataset_count_ = r.u32();
        idx.centroids_.count = r.u32();
        idx.centroids_.dim = r.u32();
        idx.centroids_.elem = static_cast<ElemType>(r.u32());
        idx.params_.centroid_pct = r.f64();
        idx.params_.num_replica = r.u32();
        idx.params_.epsilon = r.f64();
        idx.params_.bkt_fanout = r.u32();
        idx.params_.bkt_leaf = r.u32();
        idx.params_.kmeans_iters = r.u32();
        idx.params_.seed = r.u64();
        if (idx.centroids_.elem == ElemType::f32) {
            idx.centroids_.f32 = r.vec<float>();
        } else {
            idx.centroids_.i8 = r.vec<std::int8_t>();
        }
        idx.bkt_.load(r);
        std::uint32_t lists = r.u32();
        idx.postings_.resize(lists);
        for (auto& p : idx.postings_) {
            p.object_key = r.str();
            p.bytes = r.u64();
            p.count = r.u32();
        }
        return idx;
    }

private:
    friend class ClusterSearchCursor;

    std::string index_id_;
    std::uint32_t dataset_count_ = 0;
    ClusterBuildParams params_;
    VectorDataset centroids_;
    BktTree bkt_;
    std::vector<PostingMeta> postings_;
};

struct ClusterIndex::Built {
    ClusterIndex index;
    std::vector<std::pair<std::string, Bytes>> segments;  // posting list objects
};

inline ClusterIndex::Built
ClusterIndex::build(const VectorDataset& data, const ClusterBuildParams& params,
                    std::string index_id) {
    params.check();
    data.check();
    if (data.count == 0) {
        throw std::invalid_argument("cluster build: empty dataset");
    }
    std::uint32_t n = static_cast<std::uint32_t>(
        std::lround(params.centroid_pct / 100.0 * static_cast<double>(data.count)));
    n = std::max<std::uint32_t>(n, 1);
    if (n > data.count) {
        throw std::invalid_argument("cluster build: centroid count exceeds dataset size");
    }

    std::mt19937_64 rng(params.seed);
    auto fmat = to_float_matrix(data);
    auto km = kmeans(fmat.data(), data.count, data.dim, n, params.kmeans_iters, rng);

    // Snap each k-means center to its nearest distinct dataset point so the
    // centroid set is made of real vectors (head selection).
    std::vector<VecId> head(n);
    {
        std::unordered_set<VecId> used;
        for (std::uint32_t c = 0; c < n; ++c) {
            const float* ctr = km.centers.data() + static_cast<std::size_t>(c) * data.dim;
            double best = std::numeric_limits<double>::max();
            VecId best_id = 0;
            for (VecId i = 0; i < data.count; ++i) {
                if (used.count(i)) {
                    continue;
                }
                double d = squared_l2(ctr, fmat.data() + static_cast<std::size_t>(i) * data.dim,
                                      data.dim);
                if (d < best) {
                    best = d;
                    best_id = i;
                }
            }
            head[c] = best_id;
            used.insert(best_id);
        }
    }

    Built out;
    ClusterIndex& idx = out.index;
    idx.index_id_ = std::move(index_id);
    idx.dataset_count_ = data.count;
    idx.params_ = params;
    idx.centroids_.count = n;
    idx.centroids_.dim = data.dim;
    idx.centroids_.elem = data.elem;
    if (data.elem == ElemType::f32) {
        idx.centroids_.f32.resize(static_cast<std::size_t>(n) * data.dim);
        for (std::uint32_t c = 0; c < n; ++c) {
            std::copy_n(data.row_f32(head[c]), data.dim,
                        idx.centroids_.f32.data() + static_cast<std::size_t>(c) * data.dim);
        }
    } else {
        idx.centroids_.i8.resize(static_cast<std::size_t>(n) * data.dim);
        for (std::uint32_t c = 0; c < n; ++c) {
            std::copy_n(data.row_i8(head[c]), data.dim,
                        idx.centroids_.i8.data() + static_cast<std::size_t>(c) * data.dim);
        }
    }

    // Assignment with boundary replication: nearest centroid always, plus
    // any centroid whose distance is within a (1+epsilon) factor of the
    // nearest (epsilon is a ratio on true distance; distances here are
    // squared, hence the squared factor), nearest-first, capped at
    // num_replica. Head vectors have distance zero to themselves and only
    // replicate under exact ties.
    auto centroid_floats = to_float_matrix(idx.centroids_);
    std::vector<std::vector<VecId>> lists(n);
    std::vector<ScoredId> close;
    std::vector<double> dist_to(n);
    for (VecId i = 0; i < data.count; ++i) {
        const float* row = fmat.data() + static_cast<std::size_t>(i) * data.dim;
        double dmin = std::numeric_limits<double>::max();
        for (std::uint32_t c = 0; c < n; ++c) {
            dist_to[c] = squared_l2(
                row, centroid_floats.data() + static_cast<std::size_t>(c) * data.dim, data.dim);
            dmin = std::min(dmin, dist_to[c]);
        }
        double bound = (1.0 + params.epsilon) * (1.0 + params.epsilon) * dmin;
        close.clear();
        for (std::uint32_t c = 0; c < n; ++c) {
            if (dist_to[c] <= bound) {
                close.push_back({dist_to[c], c});
            }
        }
        std::sort(close.begin(), close.end());
        std::size_t take = std::min<std::size_t>(close.size(), params.num_replica);
        for (std::size_t j = 0; j < take; ++j) {
            lists[close[j].id].push_back(i);
        }
    }

    // Serialize posting lists, one object each.
    std::size_t row_bytes = data.row_bytes();
    idx.postings_.resize(n);
    out.segments.reserve(n);
    for (std::uint32_t c = 0; c < n; ++c) {
        Bytes seg(4 + lists[c].size() * (4 + row_bytes));
        std::uint32_t count = static_cast<std::uint32_t>(lists[c].size());
        std::memcpy(seg.data(), &count, 4);
        std::size_t off = 4;
        for (VecId id : lists[c]) {
            std::memcpy(seg.data() + off, &id, 4);
            off += 4;
            std::memcpy(seg.data() + off, data.row_ptr(id), row_bytes);
            off += row_bytes;
        }
        PostingMeta& meta = idx.postings_[c];
        meta.object_key = idx.index_id_ + "/pl/" + std::to_string(c);
        meta.bytes = seg.size();
        meta.count = count;
        out.segments.emplace_back(meta.object_key, std::move(seg));
    }

    std::mt19937_64 bkt_rng(params.seed + 0x9e37);
    idx.bkt_.build(centroid_floats.data(), n, data.dim, params.bkt_fanout, params.bkt_leaf,
                   params.kmeans_iters, bkt_rng);
    return out;
}

// Cluster search: one BKT selection step, then a single concurrent wave of
// posting-list fetches, then an exact scan with id-level deduplication.
class ClusterSearchCursor : public SearchCursor {
public:
    ClusterSearchCursor(const ClusterIndex& index, const void* query, std::uint32_t nprobe,
                        std::uint32_t k)
        : index_(index), query_(query), nprobe_(nprobe), k_(k) {
    }

    bool
    next_round(std::vector<FetchUnit>& out) override {
        out.clear();
        if (phase_ != 0) {
            return false;
        }
        phase_ = 1;
        auto selected = index_.bkt_select(query_, nprobe_, &work_dims_);
        out.reserve(selected.size());
        for (const auto& s : selected) {
            const PostingMeta& meta = index_.postings_[s.id];
            FetchUnit u;
            u.key = SegmentKey{index_.index_id_, s.id};
            u.request = ReadRequest{meta.object_key, 0, meta.bytes, 0};
            out.push_back(std::move(u));
        }
        return true;
    }

    void
    deliver(std::span<const SegmentCache::BytesPtr> data) override {
        std::size_t row_bytes = index_.centroids_.dim * elem_size(index_.centroids_.elem);
        std::unordered_set<VecId> seen;
        auto cmp = [](const ScoredId& a, const ScoredId& b) { return a < b; };
        for (const auto& seg : data) {
            const Bytes& bytes = *seg;
            if (bytes.size() < 4) {
                throw std::runtime_error("posting list shorter than its header");
            }
            std::uint32_t count = 0;
            std::memcpy(&count, bytes.data(), 4);
            if (bytes.size() != 4 + static_cast<std::size_t>(count) * (4 + row_bytes)) {
                throw std::runtime_error("posting list length mismatch");
            }
            records_fetched_ += count;
            std::size_t off = 4;
            for (std::uint32_t r = 0; r < count; ++r) {
                VecId id = 0;
                std::memcpy(&id, bytes.data() + off, 4);
                off += 4;
                const void* vec = bytes.data() + off;
                off += row_bytes;
                if (!seen.insert(id).second) {
                    continue;  // replicated record already scored
                }
                double d;
                if (index_.centroids_.elem == ElemType::f32) {
                    d = squared_l2(static_cast<const float*>(query_),
                                   reinterpret_cast<const float*>(vec), index_.centroids_.dim);
                } else {
                    d = squared_l2(static_cast<const std::int8_t*>(query_),
                                   reinterpret_cast<const std::int8_t*>(vec),
                                   index_.centroids_.dim);
                }
                work_dims_ += index_.centroids_.dim;
                ScoredId s{d, id};
                if (top_.size() < k_) {
                    top_.push_back(s);
                    std::push_heap(top_.begin(), top_.end(), cmp);
                } else if (s < top_.front()) {
                    std::pop_heap(top_.begin(), top_.end(), cmp);
                    top_.back() = s;
                    std::push_heap(top_.begin(), top_.end(), cmp);
                }
            }
        }
    }

    SearchResult
    result() const override {
        std::vector<ScoredId> sorted = top_;
        std::sort(sorted.begin(), sorted.end());
        SearchResult res;
        res.ids.reserve(sorted.size());
        res.dists.reserve(sorted.size());
        for (const auto& s : sorted) {
            res.ids.push_back(s.id);
            res.dists.push_back(s.dist);
        }
        return res;
    }

    std::uint64_t
    drain_work_dims() override {
        std::uint64_t w = work_dims_;
        work_dims_ = 0;
        return w;
    }

    void
    fill_stats(QueryStats& stats) const override {
        stats.posting_lists_visited = nprobe_;
        stats.records_fetched = records_fetched_;
    }

private:
    const ClusterIndex& index_;
    const void* query_;
    std::uint32_t nprobe_;
    std::uint32_t k_;
    int phase_ = 0;
    std::uint64_t work_dims_ = 0;
    std::uint64_t records_fetched_ = 0;
    std::vector<ScoredId> top_;
};

inline std::unique_ptr<SearchCursor>
ClusterIndex::make_cursor(const VectorDataset& queries, std::uint32_t query_index,
                          std::uint32_t nprobe, std::uint32_t k) const {
    if (queries.dim != centroids_.dim || queries.elem != centroids_.elem) {
        throw std::invalid_argument("query set does not match index dim/elem");
    }
    if (nprobe == 0 || nprobe > centroids_.count) {
        throw std::invalid_argument("nprobe out of range");
    }
    return std::make_unique<ClusterSearchCursor>(*this, queries.row_ptr(query_index), nprobe, k);
}

}  // namespace cloudann
