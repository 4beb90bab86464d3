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

#include <fstream>
#include <unordered_map>

#include "../core/dataset.hpp"
#include "../core/serial.hpp"
#include "../engine/search_cursor.hpp"
#include "pq.hpp"
#include "vamana.hpp"

namespace cloudann {

struct GraphBuildParams {
    std::uint32_t max_degree = 64;        // R
    std::uint32_t build_search_len = 128; // L during construction
    double alpha = 1.2;                   // prune slack (on squared distance)
    std::uint32_t sector_len = 4096;
    std::uint32_t pq_chunks = 0;          // 0 = min(dim, max(dim/8, 48))
    std::uint64_t seed = 1;

    void
    check() const {
        if (max_degree == 0 || build_search_len < max_degree || alpha < 1.0 || sector_len == 0) {
            throw std::invalid_argument("bad graph build params");
        }
    }
};

// On-storage placement of fixed-size node records. Records never straddle a
// fetch-unit boundary: either floor(sector/record) records pack into one
// sector, or one record spans a whole number of sectors.
struct GraphLayout {
    std::uint32_t record_bytes = 0;
    std::uint32_t sector_len = 0;
    std::uint32_t nodes_per_sector = 1;  // >1 only when record <= sector
    std::uint32_t sectors_per_node = 1;  // >1 only when record > sector

    static GraphLayout
    compute(std::uint32_t record_bytes, std::uint32_t sector_len) {
        GraphLayout l;
        l.record_bytes = record_bytes;
        l.sector_len = sector_len;
        if (record_bytes <= sector_len) {
            l.nodes_per_sector = sector_len / record_bytes;
            l.sectors_per_node = 1;
        } else {
            l.nodes_per_sector = 1;
            l.sectors_per_node = (record_bytes + sector_len - 1) / sector_len;
        }
        return l;
    }

    std::uint64_t
    unit_bytes() const {
        return static_cast<std::uint64_t>(sectors_per_node) * sector_len;
    }

    std::uint64_t
    unit_of(VecId node) const {
        return node / nodes_per_sector;
    }

    std::uint64_t
    unit_count(std::uint32_t node_count) const {
        return (static_cast<std::uint64_t>(node_count) + nodes_per_sector - 1) / nodes_per_sector;
    }

    std::uint64_t
    file_bytes(std::uint32_t node_count) const {
        return unit_count(node_count) * unit_bytes();
    }

    std::size_t
    offset_in_unit(VecId node) const {
        return static_cast<std::size_t>(node % nodes_per_sector) * record_bytes;
    }
};

struct GraphIndexStats {
    std::uint64_t total_bytes = 0;
    std::uint32_t record_bytes = 0;
    std::uint64_t fetch_unit_bytes = 0;
    std::vector<std::uint32_t> degree_histogram;  // index = out-degree
};

// DiskANN-style graph index: Vamana adjacency and full vectors packed into
// a sector-aligned object ("<index_id>/graph.dat"), with the PQ codebook
// and per-node codes pinned in memory to order traversal candidates.
class GraphIndex {
public:
    struct Built;

    static Built
    build(const VectorDataset& data, const GraphBuildParams& params, std::string index_id);

    const std::string&
    index_id() const {
        return index_id_;
    }

    std::uint32_t
    node_count() const {
        return count_;
    }

    std::uint32_t
    dim() const {
        return dim_;
    }

    ElemType
    elem() const {
        return elem_;
    }

    VecId
    entry_point() const {
        return entry_;
    }

    const GraphBuildParams&
    params() const {
        return params_;
    }

    const GraphLayout&
    layout() const {
        return layout_;
    }

    const std::string&
    data_key() const {
        return data_key_;
    }

    const PQCodebook&
    codebook() const {
        return pq_;
    }

    const std::uint8_t*
    code(VecId v) const {
        return codes_.data() + static_cast<std::size_t>(v) * pq_.chunks();
    }

    GraphIndexStats
    stats() const {
        GraphIndexStats s;
        s.total_bytes = layout_.file_bytes(count_);
        s.record_bytes = layout_.record_bytes;
        s.fetch_unit_bytes = layout_.unit_bytes();
        s.degree_histogram = degree_histogram_;
        return s;
    }

    std::unique_ptr<SearchCursor>
    make_cursor(const VectorDataset& queries, std::uint32_t query_index,
                std::uint32_t search_len, std::uint32_t beam_width, std::uint32_t k) const;

    void
    save(const std::string& manifest_path, const std::string& meta_path) const {
        std::ofstream mf(manifest_path, std::ios::trunc);
        if (!mf) {
            throw std::runtime_error("cannot write manifest: " + manifest_path);
        }
        mf << "index.family=graph\n";
        mf << "index.id=" << index_id_ << "\n";
        mf << "index.count=" << count_ << "\n";
        mf << "index.dim=" << dim_ << "\n";
        mf << "index.elem=" << elem_name(elem_) << "\n";
        mf << "graph.max_degree=" << params_.max_degree << "\n";
        mf << "graph.build_search_len=" << params_.build_search_len << "\n";
        mf << "graph.alpha=" << params_.alpha << "\n";
        mf << "graph.sector_len=" << params_.sector_len << "\n";
        mf << "graph.pq_chunks=" << pq_.chunks() << "\n";
        mf << "graph.seed=" << params_.seed << "\n";
        mf << "graph.entry_point=" << entry_ << "\n";
        mf << "graph.record_bytes=" << layout_.record_bytes << "\n";
        mf << "graph.nodes_per_sector=" << layout_.nodes_per_sector << "\n";
        mf << "graph.sectors_per_node=" << layout_.sectors_per_node << "\n";
        mf << "graph.data_key=" << data_key_ << "\n";
        mf << "graph.data_bytes=" << layout_.file_bytes(count_) << "\n";

        std::ofstream bf(meta_path, std::ios::binary | std::ios::trunc);
        if (!bf) {
            throw std::runtime_error("cannot write metadata blob: " + meta_path);
        }
        BinWriter w{bf};
        write_magic(w, "CANNGRF1");
        w.str(index_id_);
        w.u32(count_);
        w.u32(dim_);
        w.u32(static_cast<std::uint32_t>(elem_));
        w.u32(params_.max_degree);
        w.u32(params_.build_search_len);
        w.f64(params_.alpha);
        w.u32(params_.sector_len);
        w.u32(params_.pq_chunks);
        w.u64(params_.seed);
        w.u32(entry_);
        w.str(data_key_);
        w.u32(layout_.record_bytes);
        w.u32(layout_.nodes_per_sector);
        w.u32(layout_.sectors_per_node);
        pq_.save(w);
        w.vec(codes_);
        w.vec(degree_histogram_);
    }

    static GraphIndex
    load(const std::string& meta_path) {
        std::ifstream bf(meta_path, std::ios::binary);
        if (!bf) {
            throw std::runtime_error("cannot open metadata blob: " + meta_path);
        }
        BinReader r{bf};
        expect_magic(r, "CANNGRF1");
        GraphIndex idx;
        idx.index_id_ = r.str();
        idx.count_ = r.u32();
        idx.dim_ = r.u32();
        idx.elem_ = static_cast<ElemType>(r.u32());
        idx.params_.max_degree = r.u32();
        idx.params_.build_search_len = r.u32();
        idx.params_.alpha = r.f64();
        idx.params_.sector_len = r.u32();
        idx.params_.pq_chunks = r.u32();
        idx.params_.seed = r.u64();
        idx.entry_ = r.u32();
        idx.data_key_ = r.str();
        idx.layout_.record_bytes = r.u32();
        idx.layout_.nodes_per_sector = r.u32();
        idx.layout_.sectors_per_node = r.u32();
        idx.layout_.sector_len = idx.params_.sector_len;
        idx.pq_.load(r);
        idx.codes_ = r.vec<std::uint8_t>();
        idx.degree_histogram_ = r.vec<std::uint32_t>();
        return idx;
    }

private:
    friend class GraphSearchCursor;

    std::string index_id_;
    std::uint32_t count_ = 0;
    std::uint32_t dim_ = 0;
    ElemType elem_ = ElemType::f32;
    GraphBuildParams params_;
    GraphLayout layout_;
    VecId entry_ = 0;
    std::string data_key_;
    PQCodebook pq_;
    std::vector<std::uint8_t> codes_;
    std::vector<std::uint32_t> degree_histogram_;
};

struct GraphIndex::Built {
    GraphIndex index;
    std::vector<std::pair<std::string, Bytes>> segments;  // the sector file
};

inline GraphIndex::Built
GraphIndex::build(const VectorDataset& data, const GraphBuildParams& params,
                  std::string index_id) {
    params.check();
    data.check();
    if (data.count == 0) {
        throw std::invalid_argument("graph build: empty dataset");
    }
    auto fmat = to_float_matrix(data);
    VamanaBuilder builder(fmat.data(), data.count, data.dim);
    auto graph = builder.build(params.max_degree, params.build_search_len, params.alpha,
                               params.seed);

    Built out;
    GraphIndex& idx = out.index;
    idx.index_id_ = std::move(index_id);
    idx.count_ = data.count;
    idx.dim_ = data.dim;
    idx.elem_ = data.elem;
    idx.params_ = params;
    idx.entry_ = graph.medoid;
    idx.data_key_ = idx.index_id_ + "/graph.dat";

    std::uint32_t chunks = params.pq_chunks != 0 ? params.pq_chunks : default_pq_chunks(data.dim);
    idx.codes_ = idx.pq_.train(fmat.data(), data.count, data.dim, chunks, params.seed + 17);

    std::size_t row_bytes = data.row_bytes();
    std::uint32_t record =
        static_cast<std::uint32_t>(row_bytes + 4 + static_cast<std::size_t>(params.max_degree) * 4);
    idx.layout_ = GraphLayout::compute(record, params.sector_len);

    Bytes file(idx.layout_.file_bytes(data.count), 0);
    idx.degree_histogram_.assign(params.max_degree + 1, 0);
    for (VecId v = 0; v < data.count; ++v) {
        std::size_t base = idx.layout_.unit_of(v) * idx.layout_.unit_bytes() +
                           idx.layout_.offset_in_unit(v);
        std::memcpy(file.data() + base, data.row_ptr(v), row_bytes);
        const auto& nbrs = graph.adjacency[v];
        std::uint32_t degree = static_cast<std::uint32_t>(nbrs.size());
        ++idx.degree_histogram_[degree];
        std::memcpy(file.data() + base + row_bytes, &degree, 4);
        std::memcpy(file.data() + base + row_bytes + 4, nbrs.data(),
                    static_cast<std::size_t>(degree) * 4);
    }
    out.segments.emplace_back(idx.data_key_, std::move(file));
    return out;
}

// Beam search: candidates ordered by PQ distance, up to beam_width unvisited
// candidates fetched per round as one batch, fetched nodes re-ranked by
// exact distance. Terminates when no unvisited candidate remains within the
// bounded candidate list (rank search_len inclusive).
class GraphSearchCursor : public SearchCursor {
public:
    GraphSearchCursor(const GraphIndex& index, const void* query, std::uint32_t search_len,
                      std::uint32_t beam_width, std::uint32_t k)
        : index_(index),
          query_(query),
          search_len_(search_len),
          beam_width_(beam_width),
          k_(k),
          seen_(index.node_count(), 0) {
        const float* qf;
        if (index_.elem_ == ElemType::f32) {
            qf = static_cast<const float*>(query);
        } else {
            const auto* qi = static_cast<const std::int8_t*>(query);
            widened_.assign(qi, qi + index_.dim_);
            qf = widened_.data();
        }
        table_ = index_.pq_.lookup_table(qf);
        work_dims_ += static_cast<std::uint64_t>(PQCodebook::kCenters) * index_.dim_;
        VecId entry = index_.entry_;
        seen_[entry] = 1;
        candidates_.push_back({pq_dist(entry), entry});
        visited_.assign(index_.node_count(), 0);
    }

    // Records the k-th best exact distance after every round (tests).
    void
    enable_round_trace() {
        trace_enabled_ = true;
    }

    const std::vector<double>&
    round_trace() const {
        return trace_;
    }

    bool
    next_round(std::vector<FetchUnit>& out) override {
        out.clear();
        beam_.clear();
        for (const auto& c : candidates_) {
            if (!visited_[c.id]) {
                beam_.push_back(c.id);
                visited_[c.id] = 1;
                if (beam_.size() == beam_width_) {
                    break;
                }
            }
        }
        if (beam_.empty()) {
            return false;
        }
        ++rounds_;
        // Unique fetch units in first-use order; beam members may share one.
        round_units_.clear();
        for (VecId v : beam_) {
            std::uint64_t unit = index_.layout_.unit_of(v);
            if (std::find(round_units_.begin(), round_units_.end(), unit) == round_units_.end()) {
                round_units_.push_back(unit);
            }
        }
        for (std::uint64_t unit : round_units_) {
            FetchUnit u;
            u.key = SegmentKey{index_.index_id_, unit};
            u.request = ReadRequest{index_.data_key_, unit * index_.layout_.unit_bytes(),
                                    index_.layout_.unit_bytes(), 0};
            out.push_back(std::move(u));
        }
        return true;
    }

    void
    deliver(std::span<const SegmentCache::BytesPtr> data) override {
        std::size_t row_bytes = index_.dim_ * elem_size(index_.elem_);
        for (VecId v : beam_) {
            std::uint64_t unit = index_.layout_.unit_of(v);
            std::size_t slot =
                std::find(round_units_.begin(), round_units_.end(), unit) - round_units_.begin();
            const Bytes& bytes = *data[slot];
            const std::uint8_t* record = bytes.data() + index_.layout_.offset_in_unit(v);
            double exact;
            if (index_.elem_ == ElemType::f32) {
                exact = squared_l2(static_cast<const float*>(query_),
                                   reinterpret_cast<const float*>(record), index_.dim_);
            } else {
                exact = squared_l2(static_cast<const std::int8_t*>(query_),
                                   reinterpret_cast<const std::int8_t*>(record), index_.dim_);
            }
            work_dims_ += index_.dim_;
            pool_.push_back({exact, v});

            std::uint32_t degree = 0;
            std::memcpy(&degree, record + row_bytes, 4);
            if (degree > index_.params_.max_degree) {
                throw std::runtime_error("corrupt node record: degree above bound");
            }
            for (std::uint32_t j = 0; j < degree; ++j) {
                VecId u = 0;
                std::memcpy(&u, record + row_bytes + 4 + static_cast<std::size_t>(j) * 4, 4);
                if (u >= index_.count_ || seen_[u]) {
                    continue;
                }
                seen_[u] = 1;
                double d = pq_dist(u);
                work_dims_ += index_.pq_.chunks();
                insert_candidate({d, u});
            }
        }
        if (trace_enabled_) {
            trace_.push_back(kth_exact());
        }
    }

    SearchResult
    result() const override {
        std::vector<ScoredId> sorted = pool_;
        std::sort(sorted.begin(), sorted.end());
        SearchResult res;
        std::size_t take = std::min<std::size_t>(k_, sorted.size());
        for (std::size_t i = 0; i < take; ++i) {
            res.ids.push_back(sorted[i].id);
            res.dists.push_back(sorted[i].dist);
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
        stats.expansions = rounds_;
        stats.records_fetched = pool_.size();
    }

private:
    double
    pq_dist(VecId v) const {
        return PQCodebook::distance(table_, index_.code(v), index_.pq_.chunks());
    }

    void
    insert_candidate(ScoredId s) {
        auto pos = std::lower_bound(candidates_.begin(), candidates_.end(), s);
        if (candidates_.size() >= search_len_ && pos == candidates_.end()) {
            return;
        }
        candidates_.insert(pos, s);
        if (candidates_.size() > search_len_) {
            candidates_.pop_back();
        }
    }

    double
    kth_exact() const {
        if (pool_.size() < k_) {
            return std::numeric_limits<double>::max();
        }
        std::vector<double> d;
        d.reserve(pool_.size());
        for (const auto& s : pool_) {
            d.push_back(s.dist);
        }
        std::nth_element(d.begin(), d.begin() + (k_ - 1), d.end());
        return d[k_ - 1];
    }

    const GraphIndex& index_;
    const void* query_;
    std::uint32_t search_len_;
    std::uint32_t beam_width_;
    std::uint32_t k_;

    std::vector<float> widened_;
    std::vector<float> table_;
    std::vector<ScoredId> candidates_;  // sorted ascending by (pq dist, id)
    std::vector<std::uint8_t> seen_;    // inserted into candidates at least once
    std::vector<std::uint8_t> visited_; // expanded (fetched) already
    std::vector<ScoredId> pool_;        // exact-scored fetched nodes
    std::vector<VecId> beam_;
    std::vector<std::uint64_t> round_units_;
    std::uint32_t rounds_ = 0;
    std::uint64_t work_dims_ = 0;
    bool trace_enabled_ = false;
    std::vector<double> trace_;
};

inline std::unique_ptr<SearchCursor>
GraphIndex::make_cursor(const VectorDataset& queries, std::uint32_t query_index,
                        std::uint32_t search_len, std::uint32_t beam_width,
                        std::uint32_t k) const {
    if (queries.dim != dim_ || queries.elem != elem_) {
        throw std::invalid_argument("query set does not match index dim/elem");
    }
    if (search_len < k || beam_width == 0) {
        throw std::invalid_argument("beam search needs search_len >= k and beam width >= 1");
    }
    return std::make_unique<GraphSearchCursor>(*this, queries.row_ptr(query_index), search_len,
                                               beam_width, k);
}

}  // namespace cloudann
