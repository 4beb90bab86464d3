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

#include <filesystem>
#include <random>

#include "cloudann/core/synthetic.hpp"
#include "cloudann/engine/executor.hpp"
#include "cloudann/index/graph_index.hpp"

using namespace cloudann;

namespace {

struct TestRig {
    EventEngine engine;
    MemoryStore store;
    SegmentCache cache;
    RunContext ctx;

    explicit TestRig(std::uint64_t cache_bytes = 0)
        : cache({.capacity_bytes = cache_bytes}),
          ctx{engine, store, cache, ComputeModel{ComputeModel::Mode::none, 0.0}, {}} {
    }

    void
    load(const GraphIndex::Built& built) {
        for (const auto& [key, bytes] : built.segments) {
            store.put(key, bytes);
        }
    }
};

}  // namespace

TEST_CASE("layout arithmetic matches hand calculations") {
    // R=4, dim=4 float: record = 16 + 4 + 16 = 36 bytes, 113 per 4K sector.
    auto small = GraphLayout::compute(36, 4096);
    CHECK(small.nodes_per_sector == 113);
    CHECK(small.sectors_per_node == 1);
    CHECK(small.unit_bytes() == 4096);

    // dim=960 float, R=64: record = 3840 + 4 + 256 = 4100 > 4096, so two
    // sectors per node and an 8192-byte fetch unit.
    auto big = GraphLayout::compute(3840 + 4 + 256, 4096);
    CHECK(big.sectors_per_node == 2);
    CHECK(big.nodes_per_sector == 1);
    CHECK(big.unit_bytes() == 8192);
    CHECK(big.unit_of(7) == 7);
}

TEST_CASE("tiny dataset builds a complete graph and finds the exact neighbor") {
    auto data = make_synthetic_dataset(9, 8, 2, 0.2, ElemType::f32, 71);
    GraphBuildParams params;
    params.max_degree = 8;  // N <= R+1 forces completeness
    params.build_search_len = 16;
    auto built = GraphIndex::build(data, params, "g1");
    const auto& idx = built.index;

    auto st = idx.stats();
    CHECK(st.degree_histogram.at(8) == 9);  // every node links to all others

    auto queries = make_query_set(data, 8, 0.02, 72);
    auto gt = brute_force_topk(data, queries, 1);
    TestRig rig;
    rig.load(built);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        GraphSearchCursor cursor(idx, queries.row_ptr(q), 9, 4, 1);
        cursor.enable_round_trace();
        auto out = run_query(rig.ctx, cursor);
        CHECK(out.result.ids[0] == gt.ids_row(q)[0]);
        // The nine distinct points quantize exactly, so the second round's
        // beam is ordered by true distance: the nearest neighbor is in the
        // rerank pool within two rounds.
        REQUIRE(cursor.round_trace().size() >= 2);
        CHECK(cursor.round_trace()[1] == static_cast<double>(gt.dists_row(q)[0]));
    }
}

TEST_CASE("out-degree never exceeds the bound") {
    auto data = make_synthetic_dataset(1200, 12, 16, 0.15, ElemType::f32, 73);
    GraphBuildParams params;
    params.max_degree = 16;
    params.build_search_len = 32;
    auto built = GraphIndex::build(data, params, "g2");
    auto st = built.index.stats();
    CHECK(st.degree_histogram.size() == 17);
    std::uint64_t total = 0;
    for (auto c : st.degree_histogram) {
        total += c;
    }
    CHECK(total == data.count);
}

TEST_CASE("pq with one chunk per coordinate quantizes each dimension") {
    auto data = make_synthetic_dataset(2000, 8, 8, 0.2, ElemType::f32, 74);
    PQCodebook pq;
    auto codes = pq.train(data.f32.data(), data.count, data.dim, data.dim, 7);
    CHECK(pq.chunks() == data.dim);
    for (std::uint32_t c = 0; c < pq.chunks(); ++c) {
        CHECK(pq.chunk_dim(c) == 1);
    }
    // 256 centers on scalar data: tiny reconstruction error vs data scale.
    double err = 0.0, scale = 0.0;
    for (VecId v = 0; v < data.count; ++v) {
        auto rec = pq.reconstruct(codes.data() + static_cast<std::size_t>(v) * pq.chunks());
        err += squared_l2(rec.data(), data.row_f32(v), data.dim);
        scale += squared_l2(data.row_f32(v), data.row_f32((v + 1) % data.count), data.dim);
    }
    CHECK(err < 1e-3 * scale);
}

TEST_CASE("pq reaches zero error on a dataset with few distinct vectors") {
    // 100 distinct rows repeated to 1000: every chunk has <= 256 distinct
    // sub-vectors, so training places centers exactly on them.
    auto base = make_synthetic_dataset(100, 16, 10, 0.2, ElemType::f32, 75);
    VectorDataset data;
    data.count = 1000;
    data.dim = 16;
    data.elem = ElemType::f32;
    data.f32.resize(16000);
    for (VecId v = 0; v < 1000; ++v) {
        std::copy_n(base.row_f32(v % 100), 16, data.f32.data() + static_cast<std::size_t>(v) * 16);
    }
    PQCodebook pq;
    auto codes = pq.train(data.f32.data(), data.count, data.dim, 4, 8);
    for (VecId v = 0; v < data.count; ++v) {
        auto rec = pq.reconstruct(codes.data() + static_cast<std::size_t>(v) * pq.chunks());
        CHECK(squared_l2(rec.data(), data.row_f32(v), data.dim) == 0.0);
    }
    // A query equal to a coded vector has pq distance exactly zero.
    auto table = pq.lookup_table(data.row_f32(0));
    CHECK(PQCodebook::distance(table, codes.data(), pq.chunks()) == 0.0);
}

TEST_CASE("pq fidelity improves with more chunks and correlates with exact distance") {
    auto data = make_synthetic_dataset(5000, 64, 32, 0.2, ElemType::f32, 76);
    auto rel_error = [&](std::uint32_t chunks) {
        PQCodebook pq;
        auto codes = pq.train(data.f32.data(), data.count, data.dim, chunks, 9);
        std::mt19937_64 rng(10);
        std::uniform_int_distribution<VecId> pick(0, data.count - 1);
        double err = 0.0;
        for (int i = 0; i < 1000; ++i) {
            VecId a = pick(rng), b = pick(rng);
            if (a == b) {
                continue;
            }
            auto table = pq.lookup_table(data.row_f32(a));
            double approx = PQCodebook::distance(
                table, codes.data() + static_cast<std::size_t>(b) * pq.chunks(), pq.chunks());
            double exact = squared_l2(data.row_f32(a), data.row_f32(b), data.dim);
            err += std::abs(approx - exact) / std::max(exact, 1e-12);
        }
        return err / 1000.0;
    };
    CHECK(rel_error(8) < rel_error(4));

    PQCodebook pq;
    auto codes = pq.train(data.f32.data(), data.count, data.dim, 8, 9);
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<VecId> pick(0, data.count - 1);
    std::vector<double> xs, ys;
    for (int i = 0; i < 1000; ++i) {
        VecId a = pick(rng), b = pick(rng);
        auto table = pq.lookup_table(data.row_f32(a));
        xs.push_back(PQCodebook::distance(
            table, codes.data() + static_cast<std::size_t>(b) * pq.chunks(), pq.chunks()));
        ys.push_back(squared_l2(data.row_f32(a), data.row_f32(b), data.dim));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    CHECK(sxy / std::sqrt(sxx * syy) > 0.9);

    // Table recomputation is bit-identical.
    auto t1 = pq.lookup_table(data.row_f32(42));
    auto t2 = pq.lookup_table(data.row_f32(42));
    CHECK(t1 == t2);
}

TEST_CASE("pq rejects more chunks than dimensions") {
    auto data = make_synthetic_dataset(100, 8, 4, 0.2, ElemType::f32, 77);
    PQCodebook pq;
    CHECK_THROWS_AS(pq.train(data.f32.data(), data.count, data.dim, 9, 1),
                    std::invalid_argument);
}

TEST_CASE("beam width one is greedy best-first with one fetch per round") {
    auto data = make_synthetic_dataset(1500, 12, 12, 0.15, ElemType::f32, 78);
    GraphBuildParams params;
    params.max_degree = 16;
    params.build_search_len = 32;
    auto built = GraphIndex::build(data, params, "g3");
    TestRig rig;
    rig.load(built);
    auto queries = make_query_set(data, 10, 0.08, 79);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        auto out = run_query(rig.ctx, built.index.make_cursor(queries, q, 32, 1, 5));
        CHECK(out.stats.roundtrips == out.stats.expansions);
        CHECK(out.stats.requests == out.stats.expansions);  // one unit per round
        CHECK(out.stats.records_fetched == out.stats.expansions);
    }
}

TEST_CASE("10k synthetic set reaches recall 0.95 at search_len 128") {
    auto data = make_synthetic_dataset(10000, 32, 64, 0.12, ElemType::f32, 80);
    auto queries = make_query_set(data, 100, 0.06, 81);
    auto gt = brute_force_topk(data, queries, 10);
    GraphBuildParams params;
    params.max_degree = 32;
    params.build_search_len = 64;
    auto built = GraphIndex::build(data, params, "g4");
    TestRig rig;
    rig.load(built);
    double recall = 0.0;
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        auto out = run_query(rig.ctx, built.index.make_cursor(queries, q, 128, 4, 10));
        recall += recall_at_k(out.result.ids, gt.ids_row(q), 10);
    }
    recall /= queries.count;
    CHECK(recall >= 0.95);
}

TEST_CASE("search_len = N on the fixed-up graph yields exact recall") {
    auto data = make_synthetic_dataset(2000, 16, 16, 0.15, ElemType::f32, 82);
    auto queries = make_query_set(data, 20, 0.08, 83);
    auto gt = brute_force_topk(data, queries, 10);
    GraphBuildParams params;
    params.max_degree = 16;
    params.build_search_len = 32;
    auto built = GraphIndex::build(data, params, "g5");
    TestRig rig;
    rig.load(built);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        auto out = run_query(rig.ctx, built.index.make_cursor(queries, q, data.count, 8, 10));
        CHECK(recall_at_k(out.result.ids, gt.ids_row(q), 10) == 1.0);
    }
}

TEST_CASE("rerank pool quality is monotone round over round") {
    auto data = make_synthetic_dataset(1500, 12, 10, 0.15, ElemType::f32, 84);
    GraphBuildParams params;
    params.max_degree = 16;
    params.build_search_len = 32;
    auto built = GraphIndex::build(data, params, "g6");
    TestRig rig;
    rig.load(built);
    auto queries = make_query_set(data, 10, 0.08, 85);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        GraphSearchCursor cursor(built.index, queries.row_ptr(q), 64, 4, 10);
        cursor.enable_round_trace();
        run_query(rig.ctx, cursor);
        const auto& trace = cursor.round_trace();
        REQUIRE(!trace.empty());
        for (std::size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1]);
        }
    }
}

TEST_CASE("higher beam width lowers roundtrips at fixed search_len") {
    auto data = make_synthetic_dataset(4000, 16, 24, 0.12, ElemType::f32, 86);
    GraphBuildParams params;
    params.max_degree = 24;
    params.build_search_len = 48;
    auto built = GraphIndex::build(data, params, "g7");
    TestRig rig;
    rig.load(built);
    auto queries = make_query_set(data, 30, 0.06, 87);
    auto mean_rt = [&](std::uint32_t w) {
        double rt = 0.0;
        for (std::uint32_t q = 0; q < queries.count; ++q) {
            auto out = run_query(rig.ctx, built.index.make_cursor(queries, q, 64, w, 10));
            rt += out.stats.roundtrips;
        }
        return rt / queries.count;
    };
    CHECK(mean_rt(8) < mean_rt(2));
}

TEST_CASE("denser and wider records increase index bytes") {
    auto data = make_synthetic_dataset(500, 16, 8, 0.2, ElemType::f32, 88);
    GraphBuildParams params;
    params.max_degree = 8;
    params.build_search_len = 16;
    auto a = GraphIndex::build(data, params, "ga");
    params.max_degree = 32;
    params.build_search_len = 64;
    auto b = GraphIndex::build(data, params, "gb");
    CHECK(b.index.stats().total_bytes > a.index.stats().total_bytes);
    CHECK(b.index.stats().record_bytes > a.index.stats().record_bytes);
}

TEST_CASE("identical seeds build identical graphs and traversals") {
    auto data = make_synthetic_dataset(800, 12, 8, 0.2, ElemType::f32, 89);
    GraphBuildParams params;
    params.max_degree = 12;
    params.build_search_len = 24;
    params.seed = 5;
    auto a = GraphIndex::build(data, params, "same");
    auto b = GraphIndex::build(data, params, "same");
    REQUIRE(a.segments.size() == 1);
    CHECK(a.segments[0].second == b.segments[0].second);
    CHECK(a.index.entry_point() == b.index.entry_point());

    auto queries = make_query_set(data, 5, 0.1, 90);
    TestRig rig1, rig2;
    rig1.load(a);
    rig2.load(b);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        auto ra = run_query(rig1.ctx, a.index.make_cursor(queries, q, 32, 4, 5));
        auto rb = run_query(rig2.ctx, b.index.make_cursor(queries, q, 32, 4, 5));
        CHECK(ra.result.ids == rb.result.ids);
        CHECK(ra.stats.roundtrips == rb.stats.roundtrips);
        CHECK(ra.stats.requests == rb.stats.requests);
    }
}

TEST_CASE("graph meta blob round trips and the loaded index answers identically") {
    auto data = make_synthetic_dataset(600, 12, 8, 0.2, ElemType::i8, 91);
    GraphBuildParams params;
    params.max_degree = 12;
    params.build_search_len = 24;
    auto built = GraphIndex::build(data, params, "gi8");
    auto dir = std::filesystem::temp_directory_path() / "cloudann_graph_meta";
    std::filesystem::create_directories(dir);
    built.index.save((dir / "gi8.manifest").string(), (dir / "gi8.meta").string());
    auto loaded = GraphIndex::load((dir / "gi8.meta").string());
    CHECK(loaded.node_count() == built.index.node_count());
    CHECK(loaded.entry_point() == built.index.entry_point());
    CHECK(loaded.elem() == ElemType::i8);
    CHECK(loaded.layout().record_bytes == built.index.layout().record_bytes);

    auto queries = make_query_set(data, 5, 0.05, 92);
    TestRig rig;
    rig.load(built);
    for (std::uint32_t q = 0; q < queries.count; ++q) {
        auto x = run_query(rig.ctx, built.index.make_cursor(queries, q, 24, 4, 5));
        auto y = run_query(rig.ctx, loaded.make_cursor(queries, q, 24, 4, 5));
        CHECK(x.result.ids == y.result.ids);
    }
}

TEST_CASE("pre-warming exactly one round's sectors saves exactly that roundtrip") {
    // One record per sector so rounds touch disjoint sector sets.
    auto data = make_synthetic_dataset(1000, 16, 8, 0.15, ElemType::f32, 93);
    GraphBuildParams params;
    params.max_degree = 8;
    params.build_search_len = 16;
    params.sector_len = 128;  // record = 64 + 4 + 32 = 100 -> 1 per sector
    auto built = GraphIndex::build(data, params, "gw");
    REQUIRE(built.index.layout().nodes_per_sector == 1);
    auto queries = make_query_set(data, 6, 0.08, 94);

    for (std::uint32_t q = 0; q < queries.count; ++q) {
        TestRig cold;
        cold.load(built);
        GraphSearchCursor probe(built.index, queries.row_ptr(q), 32, 4, 5);
        auto base = run_query(cold.ctx, probe);
        REQUIRE(base.stats.rounds.size() >= 3);
        std::uint32_t target_round = 1;  // second round of the traversal

        // Reconstruct the units the target round requested by replaying the
        // identical traversal and warming exactly those sectors.
        TestRig warm(1 << 26);
        warm.load(built);
        {
            GraphSearchCursor replay(built.index, queries.row_ptr(q), 32, 4, 5);
            std::vector<FetchUnit> units;
            std::uint32_t round = 0;
            while (replay.next_round(units)) {
                std::vector<SegmentCache::BytesPtr> data_ptrs;
                for (const auto& u : units) {
                    auto res = warm.store.get(u.request);
                    auto ptr = std::make_shared<const Bytes>(std::move(res.data));
                    if (round == target_round) {
                        warm.cache.insert(u.key, ptr);
                    }
                    data_ptrs.push_back(std::move(ptr));
                }
                replay.deliver(data_ptrs);
                ++round;
            }
        }
        warm.store.reset_metrics();
        GraphSearchCursor warmed(built.index, queries.row_ptr(q), 32, 4, 5);
        auto out = run_query(warm.ctx, warmed);
        CHECK(out.stats.roundtrips == base.stats.roundtrips - 1);
        CHECK(out.stats.expansions == base.stats.expansions);
        REQUIRE(out.stats.rounds.size() == base.stats.rounds.size());
        for (std::size_t r = 0; r < out.stats.rounds.size(); ++r) {
            if (r == target_round) {
                CHECK(out.stats.rounds[r].all_hit);
            } else {
                CHECK(out.stats.rounds[r].hits == 0);
            }
        }
    }
}
