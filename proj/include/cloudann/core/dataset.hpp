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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "distance.hpp"
#include "types.hpp"

namespace cloudann {

// Row-major vector matrix, immutable after load. Exactly one of the two
// payload vectors is populated, matching `elem`.
struct VectorDataset {
    std::uint32_t count = 0;
    std::uint32_t dim = 0;
    ElemType elem = ElemType::f32;
    std::vector<float> f32;
    std::vector<std::int8_t> i8;

    const float*
    row_f32(VecId i) const {
        return f32.data() + static_cast<std::size_t>(i) * dim;
    }

    const std::int8_t*
    row_i8(VecId i) const {
        return i8.data() + static_cast<std::size_t>(i) * dim;
    }

    const void*
    row_ptr(VecId i) const {
        return elem == ElemType::f32 ? static_cast<const void*>(row_f32(i))
                                     : static_cast<const void*>(row_i8(i));
    }

    std::size_t
    row_bytes() const {
        return static_cast<std::size_t>(dim) * elem_size(elem);
    }

    void
    check() const {
        if (dim == 0) {
            throw std::invalid_argument("dataset dim must be positive");
        }
        std::size_t want = static_cast<std::size_t>(count) * dim;
        std::size_t have = elem == ElemType::f32 ? f32.size() : i8.size();
        if (want != have) {
            throw std::invalid_argument("dataset payload size does not match count*dim");
        }
    }
};

// Distance between row i of `a` and row j of `b`; element types must match.
inline double
row_distance(const VectorDataset& a, VecId i, const VectorDataset& b, VecId j) {
    if (a.dim != b.dim || a.elem != b.elem) {
        throw std::invalid_argument("row_distance: dimension or element type mismatch");
    }
    if (a.elem == ElemType::f32) {
        return squared_l2(a.row_f32(i), b.row_f32(j), a.dim);
    }
    return squared_l2(a.row_i8(i), b.row_i8(j), a.dim);
}

// Distance between a raw row pointer (elem-typed) and a dataset row.
inline double
raw_row_distance(const void* q, const VectorDataset& ds, VecId j) {
    if (ds.elem == ElemType::f32) {
        return squared_l2(static_cast<const float*>(q), ds.row_f32(j), ds.dim);
    }
    return squared_l2(static_cast<const std::int8_t*>(q), ds.row_i8(j), ds.dim);
}

// Widened float copy of the whole matrix; identity for float datasets.
inline std::vector<float>
to_float_matrix(const VectorDataset& ds) {
    if (ds.elem == ElemType::f32) {
        return ds.f32;
    }
    std::vector<float> out(ds.i8.size());
    for (std::size_t i = 0; i < ds.i8.size(); ++i) {
        out[i] = static_cast<float>(ds.i8[i]);
    }
    return out;
}

enum class VectorFileFormat { fvecs, bvecs, fbin, i8bin };

inline ElemType
format_elem(VectorFileFormat f) {
    return (f == VectorFileFormat::fvecs || f == VectorFileFormat::fbin) ? ElemType::f32
                                                                         : ElemType::i8;
}

inline VectorFileFormat
format_from_name(const std::string& name) {
    if (name == "fvecs") return VectorFileFormat::fvecs;
    if (name == "bvecs") return VectorFileFormat::bvecs;
    if (name == "fbin") return VectorFileFormat::fbin;
    if (name == "i8bin") return VectorFileFormat::i8bin;
    throw std::invalid_argument("unknown vector file format: " + name);
}

// Infers the format from a path suffix.
inline VectorFileFormat
format_from_path(const std::string& path) {
    auto dot = path.rfind('.');
    if (dot == std::string::npos) {
        throw std::invalid_argument("cannot infer vector format from path: " + path);
    }
    return format_from_name(path.substr(dot + 1));
}

namespace detail {

inline void
read_exact(std::istream& in, void* dst, std::size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw std::runtime_error(std::string("truncated vector file while reading ") + what);
    }
}

inline std::int32_t
read_i32(std::istream& in, const char* what) {
    std::int32_t v = 0;
    read_exact(in, &v, sizeof(v), what);
    return v;
}

inline void
write_i32(std::ostream& out, std::int32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace detail

// Loads fvecs/bvecs (per-vector leading 32-bit dim) or fbin/i8bin
// ((count, dim) header) files. All formats little-endian.
inline VectorDataset
load_vectors(const std::string& path, VectorFileFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open vector file: " + path);
    }
    VectorDataset ds;
    ds.elem = format_elem(format);
    std::size_t esz = elem_size(ds.elem);

    if (format == VectorFileFormat::fbin || format == VectorFileFormat::i8bin) {
        std::int32_t count = detail::read_i32(in, "count header");
        std::int32_t dim = detail::read_i32(in, "dim header");
        if (count < 0) {
            throw std::runtime_error("negative count in bin header: " + path);
        }
        if (dim <= 0) {
            throw std::runtime_error("non-positive dim in bin header: " + path);
        }
        ds.count = static_cast<std::uint32_t>(count);
        ds.dim = static_cast<std::uint32_t>(dim);
        std::size_t elems = static_cast<std::size_t>(ds.count) * ds.dim;
        if (ds.elem == ElemType::f32) {
            ds.f32.resize(elems);
            if (elems > 0) detail::read_exact(in, ds.f32.data(), elems * esz, "payload");
        } else {
            ds.i8.resize(elems);
            if (elems > 0) detail::read_exact(in, ds.i8.data(), elems * esz, "payload");
        }
    } else {
        // fvecs/bvecs: repeated [dim][row] records until EOF.
        std::uint32_t dim = 0;
        std::size_t rows = 0;
        while (true) {
            std::int32_t row_dim = 0;
            in.read(reinterpret_cast<char*>(&row_dim), sizeof(row_dim));
            if (in.gcount() == 0 && in.eof()) {
                break;
            }
            if (static_cast<std::size_t>(in.gcount()) != sizeof(row_dim)) {
                throw std::runtime_error("truncated per-vector header in " + path);
            }
            if (row_dim <= 0) {
                throw std::runtime_error("non-positive per-vector dim in " + path);
            }
            if (rows == 0) {
                dim = static_cast<std::uint32_t>(row_dim);
            } else if (static_cast<std::uint32_t>(row_dim) != dim) {
                throw std::runtime_error("inconsistent per-vector dim in " + path);
            }
            std::size_t row_elems = static_cast<std::size_t>(row_dim);
            if (ds.elem == ElemType::f32) {
                ds.f32.resize(ds.f32.size() + row_elems);
                detail::read_exact(in, ds.f32.data() + rows * row_elems, row_elems * esz, "row");
            } else {
                ds.i8.resize(ds.i8.size() + row_elems);
                detail::read_exact(in, ds.i8.data() + rows * row_elems, row_elems * esz, "row");
            }
            ++rows;
        }
        if (rows == 0) {
            throw std::runtime_error("empty fvecs/bvecs file (dim unrecoverable): " + path);
        }
        ds.count = static_cast<std::uint32_t>(rows);
        ds.dim = dim;
    }
    ds.check();
    return ds;
}

inline void
write_vectors(const VectorDataset& ds, const std::string& path, VectorFileFormat format) {
    if (format_elem(format) != ds.elem) {
        throw std::invalid_argument("write_vectors: format element type does not match dataset");
    }
    ds.check();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open vector file for write: " + path);
    }
    std::size_t esz = elem_size(ds.elem);
    const char* payload = ds.elem == ElemType::f32 ? reinterpret_cast<const char*>(ds.f32.data())
                                                   : reinterpret_cast<const char*>(ds.i8.data());
    if (format == VectorFileFormat::fbin || format == VectorFileFormat::i8bin) {
        detail::write_i32(out, static_cast<std::int32_t>(ds.count));
        detail::write_i32(out, static_cast<std::int32_t>(ds.dim));
        out.write(payload, static_cast<std::streamsize>(static_cast<std::size_t>(ds.count) * ds.dim * esz));
    } else {
        // fvecs/bvecs carry no count header; an empty dataset writes an empty
        // file, which load_vectors rejects because dim is unrecoverable.
        for (std::uint32_t i = 0; i < ds.count; ++i) {
            detail::write_i32(out, static_cast<std::int32_t>(ds.dim));
            out.write(payload + static_cast<std::size_t>(i) * ds.dim * esz,
                      static_cast<std::streamsize>(static_cast<std::size_t>(ds.dim) * esz));
        }
    }
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

// Exact k-nearest ids and distances per query, rows sorted ascending.
struct GroundTruth {
    std::uint32_t query_count = 0;
    std::uint32_t k = 0;
    std::vector<VecId> ids;     // query_count x k
    std::vector<float> dists;   // query_count x k

    std::span<const VecId>
    ids_row(std::uint32_t q) const {
        return {ids.data() + static_cast<std::size_t>(q) * k, k};
    }

    std::span<const float>
    dists_row(std::uint32_t q) const {
        return {dists.data() + static_cast<std::size_t>(q) * k, k};
    }
};

// Exhaustive scan oracle. Ties broken by ascending id.
inline GroundTruth
brute_force_topk(const VectorDataset& data, const VectorDataset& queries, std::uint32_t k) {
    if (k == 0 || k > data.count) {
        throw std::invalid_argument("brute_force_topk: k out of range");
    }
    if (data.dim != queries.dim || data.elem != queries.elem) {
        throw std::invalid_argument("brute_force_topk: query/data mismatch");
    }
    GroundTruth gt;
    gt.query_count = queries.count;
    gt.k = k;
    gt.ids.resize(static_cast<std::size_t>(queries.count) * k);
    gt.dists.resize(static_cast<std::size_t>(queries.count) * k);

    std::vector<ScoredId> heap;  // max-heap on (dist, id): worst of the best k on top
    heap.reserve(k + 1);
    auto worse = [](const ScoredId& a, const ScoredId& b) { return a < b; };
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        heap.clear();
        for (VecId i = 0; i < data.count; ++i) {
            ScoredId s{row_distance(queries, q, data, i), i};
            if (heap.size() < k) {
                heap.push_back(s);
                std::push_heap(heap.begin(), heap.end(), worse);
            } else if (s < heap.front()) {
                std::pop_heap(heap.begin(), heap.end(), worse);
                heap.back() = s;
                std::push_heap(heap.begin(), heap.end(), worse);
            }
        }
        std::sort_heap(heap.begin(), heap.end(), worse);
        for (std::uint32_t j = 0; j < k; ++j) {
            gt.ids[static_cast<std::size_t>(q) * k + j] = heap[j].id;
            gt.dists[static_cast<std::size_t>(q) * k + j] = static_cast<float>(heap[j].dist);
        }
    }
    return gt;
}

// |result ∩ first k of truth| / k. Short result lists count missing slots
// as misses.
inline double
recall_at_k(std::span<const VecId> result_ids, std::span<const VecId> truth_row, std::uint32_t k) {
    if (truth_row.size() < k) {
        throw std::invalid_argument("recall_at_k: truth row shorter than k");
    }
    std::vector<VecId> truth(truth_row.begin(), truth_row.begin() + k);
    std::sort(truth.begin(), truth.end());
    std::size_t hit = 0;
    std::size_t upto = std::min(result_ids.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < upto; ++i) {
        if (std::binary_search(truth.begin(), truth.end(), result_ids[i])) {
            ++hit;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(k);
}

// Ground truth file: (query_count, k) header, then 32-bit ids, then
// float32 distances.
inline void
write_ground_truth(const GroundTruth& gt, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open ground truth file for write: " + path);
    }
    detail::write_i32(out, static_cast<std::int32_t>(gt.query_count));
    detail::write_i32(out, static_cast<std::int32_t>(gt.k));
    out.write(reinterpret_cast<const char*>(gt.ids.data()),
              static_cast<std::streamsize>(gt.ids.size() * sizeof(VecId)));
    out.write(reinterpret_cast<const char*>(gt.dists.data()),
              static_cast<std::streamsize>(gt.dists.size() * sizeof(float)));
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

inline GroundTruth
load_ground_truth(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open ground truth file: " + path);
    }
    GroundTruth gt;
    std::int32_t qc = detail::read_i32(in, "query_count");
    std::int32_t k = detail::read_i32(in, "k");
    if (qc < 0 || k <= 0) {
        throw std::runtime_error("bad ground truth header: " + path);
    }
    gt.query_count = static_cast<std::uint32_t>(qc);
    gt.k = static_cast<std::uint32_t>(k);
    std::size_t cells = static_cast<std::size_t>(gt.query_count) * gt.k;
    gt.ids.resize(cells);
    gt.dists.resize(cells);
    if (cells > 0) {
        detail::read_exact(in, gt.ids.data(), cells * sizeof(VecId), "ids");
        detail::read_exact(in, gt.dists.data(), cells * sizeof(float), "dists");
    }
    return gt;
}

}  // namespace cloudann
