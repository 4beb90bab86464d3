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

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cloudann/core/dataset.hpp"
#include "cloudann/core/synthetic.hpp"

using namespace cloudann;

namespace {

std::filesystem::path
temp_file(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "cloudann_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

VectorDataset
random_f32(std::uint32_t count, std::uint32_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uni(-10.0f, 10.0f);
    VectorDataset ds;
    ds.count = count;
    ds.dim = dim;
    ds.elem = ElemType::f32;
    ds.f32.resize(static_cast<std::size_t>(count) * dim);
    for (auto& v : ds.f32) {
        v = uni(rng);
    }
    return ds;
}

std::uint64_t
fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h = (h ^ p[i]) * 1099511628211ULL;
    }
    return h;
}

}  // namespace

TEST_CASE("fvecs hand-built bytes parse to the expected matrix") {
    // Two 4-dim vectors, per-vector leading dim, little-endian.
    auto path = temp_file("hand.fvecs");
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        std::int32_t dim = 4;
        float row0[4] = {1.0f, 2.0f, 3.0f, 4.0f};
        float row1[4] = {-1.5f, 0.0f, 2.5f, 7.0f};
        out.write(reinterpret_cast<char*>(&dim), 4);
        out.write(reinterpret_cast<char*>(row0), 16);
        out.write(reinterpret_cast<char*>(&dim), 4);
        out.write(reinterpret_cast<char*>(row1), 16);
    }
    auto ds = load_vectors(path.string(), VectorFileFormat::fvecs);
    REQUIRE(ds.count == 2);
    REQUIRE(ds.dim == 4);
    REQUIRE(ds.elem == ElemType::f32);
    CHECK(ds.row_f32(0)[0] == 1.0f);
    CHECK(ds.row_f32(1)[3] == 7.0f);
}

TEST_CASE("vector file round trips are element-wise identical") {
    auto f32 = random_f32(100, 16, 7);
    for (auto fmt : {VectorFileFormat::fvecs, VectorFileFormat::fbin}) {
        auto path = temp_file("rt_f32.bin");
        write_vectors(f32, path.string(), fmt);
        auto back = load_vectors(path.string(), fmt);
        REQUIRE(back.count == f32.count);
        REQUIRE(back.dim == f32.dim);
        CHECK(back.f32 == f32.f32);
    }
    auto i8 = make_synthetic_dataset(60, 12, 4, 0.1, ElemType::i8, 3);
    for (auto fmt : {VectorFileFormat::bvecs, VectorFileFormat::i8bin}) {
        auto path = temp_file("rt_i8.bin");
        write_vectors(i8, path.string(), fmt);
        auto back = load_vectors(path.string(), fmt);
        REQUIRE(back.count == i8.count);
        CHECK(back.i8 == i8.i8);
    }
}

TEST_CASE("empty dataset writes a header-only bin file and reloads") {
    VectorDataset ds;
    ds.count = 0;
    ds.dim = 5;
    ds.elem = ElemType::f32;
    auto path = temp_file("empty.fbin");
    write_vectors(ds, path.string(), VectorFileFormat::fbin);
    CHECK(std::filesystem::file_size(path) == 8);
    auto back = load_vectors(path.string(), VectorFileFormat::fbin);
    CHECK(back.count == 0);
    CHECK(back.dim == 5);
}

TEST_CASE("one-by-one int8 dataset round trips through i8bin") {
    VectorDataset ds;
    ds.count = 1;
    ds.dim = 1;
    ds.elem = ElemType::i8;
    ds.i8 = {7};
    auto path = temp_file("one.i8bin");
    write_vectors(ds, path.string(), VectorFileFormat::i8bin);
    auto back = load_vectors(path.string(), VectorFileFormat::i8bin);
    REQUIRE(back.count == 1);
    CHECK(back.i8[0] == 7);
}

TEST_CASE("loader rejects malformed files") {
    SECTION("truncated payload") {
        auto path = temp_file("trunc.fbin");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        std::int32_t count = 3, dim = 4;
        out.write(reinterpret_cast<char*>(&count), 4);
        out.write(reinterpret_cast<char*>(&dim), 4);
        float partial[5] = {};
        out.write(reinterpret_cast<char*>(partial), sizeof(partial));
        out.close();
        CHECK_THROWS_AS(load_vectors(path.string(), VectorFileFormat::fbin), std::runtime_error);
    }
    SECTION("inconsistent per-vector dim") {
        auto path = temp_file("baddim.fvecs");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        std::int32_t d0 = 2, d1 = 3;
        float row[3] = {};
        out.write(reinterpret_cast<char*>(&d0), 4);
        out.write(reinterpret_cast<char*>(row), 8);
        out.write(reinterpret_cast<char*>(&d1), 4);
        out.write(reinterpret_cast<char*>(row), 12);
        out.close();
        CHECK_THROWS_AS(load_vectors(path.string(), VectorFileFormat::fvecs), std::runtime_error);
    }
    SECTION("non-positive dim") {
        auto path = temp_file("zerodim.fbin");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        std::int32_t count = 1, dim = 0;
        out.write(reinterpret_cast<char*>(&count), 4);
        out.write(reinterpret_cast<char*>(&dim), 4);
        out.close();
        CHECK_THROWS_AS(load_vectors(path.string(), VectorFileFormat::fbin), std::runtime_error);
    }
    SECTION("write with mismatched format element type") {
        auto ds = random_f32(2, 2, 1);
        CHECK_THROWS_AS(write_vectors(ds, temp_file("x.i8bin").string(), VectorFileFormat::i8bin),
                        std::invalid_argument);
    }
}

TEST_CASE("synthetic 10000x32 file matches an independent byte-level reader") {
    auto ds = make_synthetic_dataset(10000, 32, 64, 0.05, ElemType::f32, 11);
    auto path = temp_file("synth10k.fbin");
    write_vectors(ds, path.string(), VectorFileFormat::fbin);
    auto loaded = load_vectors(path.string(), VectorFileFormat::fbin);
    REQUIRE(loaded.count == 10000);
    REQUIRE(loaded.dim == 32);

    // Independent reader: raw byte slurp, header decoded by hand.
    std::ifstream in(path, std::ios::binary);
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(raw.size() == 8 + 10000ull * 32 * 4);
    std::int32_t count = 0, dim = 0;
    std::memcpy(&count, raw.data(), 4);
    std::memcpy(&dim, raw.data() + 4, 4);
    CHECK(count == 10000);
    CHECK(dim == 32);
    std::uint64_t file_sum = fnv1a(raw.data() + 8, raw.size() - 8);
    std::uint64_t mem_sum = fnv1a(loaded.f32.data(), loaded.f32.size() * sizeof(float));
    CHECK(file_sum == mem_sum);
}

TEST_CASE("squared_l2 basics and double-precision oracle") {
    std::vector<float> a = {0.0f, 0.0f};
    std::vector<float> b = {3.0f, 4.0f};
    CHECK(squared_l2(a.data(), a.data(), 2) == 0.0);
    CHECK(squared_l2(a.data(), b.data(), 2) == 25.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
    std::vector<float> x(64), y(64);
    for (std::size_t i = 0; i < 64; ++i) {
        x[i] = uni(rng);
        y[i] = uni(rng);
    }
    double ref = 0.0;
    for (std::size_t i = 0; i < 64; ++i) {
        double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        ref += d * d;
    }
    double got = squared_l2(x.data(), y.data(), 64);
    CHECK(std::abs(got - ref) <= 1e-5 * ref);

    std::span<const float> sa(x.data(), 64), sb(y.data(), 32);
    CHECK_THROWS_AS(squared_l2(sa, sb), std::invalid_argument);
}

TEST_CASE("int8 squared_l2 is exact") {
    std::vector<std::int8_t> a = {-128, 127, 0, 50};
    std::vector<std::int8_t> b = {127, -128, 1, -50};
    // (255^2 + 255^2 + 1 + 100^2) exactly
    CHECK(squared_l2(a.data(), b.data(), 4) == 255.0 * 255.0 * 2 + 1 + 10000);
}

TEST_CASE("brute force oracle: exhaustive, self-match, and second implementation") {
    auto data = random_f32(1000, 16, 21);
    auto queries = random_f32(20, 16, 22);

    SECTION("k = count returns all ids sorted by distance") {
        VectorDataset tiny = random_f32(8, 4, 1);
        VectorDataset q = random_f32(1, 4, 2);
        auto gt = brute_force_topk(tiny, q, 8);
        auto row = gt.ids_row(0);
        std::vector<VecId> sorted_ids(row.begin(), row.end());
        std::sort(sorted_ids.begin(), sorted_ids.end());
        for (VecId i = 0; i < 8; ++i) {
            CHECK(sorted_ids[i] == i);
        }
        auto dr = gt.dists_row(0);
        CHECK(std::is_sorted(dr.begin(), dr.end()));
    }

    SECTION("query equal to a row finds that row first at distance zero") {
        VectorDataset q;
        q.count = 1;
        q.dim = data.dim;
        q.elem = data.elem;
        q.f32.assign(data.row_f32(123), data.row_f32(123) + data.dim);
        auto gt = brute_force_topk(data, q, 3);
        CHECK(gt.ids_row(0)[0] == 123);
        CHECK(gt.dists_row(0)[0] == 0.0f);
    }

    SECTION("agrees with an independently coded O(N*k) selection oracle") {
        const std::uint32_t k = 10;
        auto gt = brute_force_topk(data, queries, k);
        for (std::uint32_t q = 0; q < queries.count; ++q) {
            // Insertion-based selection, no heap.
            std::vector<ScoredId> best;
            for (VecId i = 0; i < data.count; ++i) {
                ScoredId s{row_distance(queries, q, data, i), i};
                auto pos = std::upper_bound(best.begin(), best.end(), s);
                if (best.size() < k) {
                    best.insert(pos, s);
                } else if (pos != best.end()) {
                    best.insert(pos, s);
                    best.pop_back();
                }
            }
            for (std::uint32_t j = 0; j < k; ++j) {
                CHECK(gt.ids_row(q)[j] == best[j].id);
            }
        }
    }

    SECTION("permutation invariance") {
        const std::uint32_t k = 5;
        auto gt = brute_force_topk(data, queries, k);
        // Reverse the dataset rows; ids should map through the permutation.
        VectorDataset rev = data;
        for (VecId i = 0; i < data.count; ++i) {
            std::copy(data.row_f32(data.count - 1 - i), data.row_f32(data.count - 1 - i) + data.dim,
                      rev.f32.data() + static_cast<std::size_t>(i) * data.dim);
        }
        auto gtr = brute_force_topk(rev, queries, k);
        for (std::uint32_t q = 0; q < queries.count; ++q) {
            for (std::uint32_t j = 0; j < k; ++j) {
                // Distinct random rows, so ties cannot flip the mapping.
                CHECK(gtr.ids_row(q)[j] == data.count - 1 - gt.ids_row(q)[j]);
            }
        }
    }

    SECTION("k > count is rejected") {
        CHECK_THROWS_AS(brute_force_topk(data, queries, data.count + 1), std::invalid_argument);
    }
}

TEST_CASE("recall_at_k definition") {
    std::vector<VecId> truth = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(recall_at_k(truth, truth, 10) == 1.0);
    std::vector<VecId> disjoint = {11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
    CHECK(recall_at_k(disjoint, truth, 10) == 0.0);
    std::vector<VecId> seven = {1, 2, 3, 4, 5, 6, 7, 18, 19, 20};
    CHECK(recall_at_k(seven, truth, 10) == 0.7);
    // Short result lists: missing slots count as misses.
    std::vector<VecId> half = {1, 2, 3, 4, 5};
    CHECK(recall_at_k(half, truth, 10) == 0.5);
}

TEST_CASE("recall of the brute force result against itself is 1.0") {
    auto data = make_synthetic_dataset(500, 8, 10, 0.1, ElemType::f32, 9);
    auto queries = make_query_set(data, 25, 0.05, 10);
    auto gt = brute_force_topk(data, queries, 10);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        auto row = gt.ids_row(q);
        CHECK(recall_at_k(row, row, 10) == 1.0);
    }
}

TEST_CASE("ground truth file round trip") {
    auto data = random_f32(64, 8, 31);
    auto queries = random_f32(4, 8, 32);
    auto gt = brute_force_topk(data, queries, 6);
    auto path = temp_file("gt.bin");
    write_ground_truth(gt, path.string());
    auto back = load_ground_truth(path.string());
    CHECK(back.query_count == gt.query_count);
    CHECK(back.k == gt.k);
    CHECK(back.ids == gt.ids);
    CHECK(back.dists == gt.dists);
}
