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

#include <random>

#include "cloudann/cache/segment_cache.hpp"
#include "cloudann/storage/storage.hpp"

using namespace cloudann;

namespace {

SegmentCache::BytesPtr
blob(std::size_t n, std::uint8_t fill = 0xab) {
    return std::make_shared<const Bytes>(n, fill);
}

SegmentKey
key(std::uint64_t id) {
    return SegmentKey{"idx", id};
}

}  // namespace

TEST_CASE("empty cache misses") {
    SegmentCache cache({.capacity_bytes = 100});
    CHECK(cache.lookup(key(1)) == nullptr);
    auto m = cache.metrics();
    CHECK(m.lookups == 1);
    CHECK(m.misses == 1);
}

TEST_CASE("a hit promotes the entry to the protected list") {
    SegmentCache cache({.capacity_bytes = 100});
    cache.insert(key(1), blob(10));
    CHECK(!cache.is_protected(key(1)));
    CHECK(cache.lookup(key(1)) != nullptr);
    CHECK(cache.is_protected(key(1)));
}

TEST_CASE("SLRU hand trace: protected entry survives one-touch churn") {
    // Capacity two unit segments. A is hit once (protected); B, C, D stream
    // through probationary.
    SegmentCache cache({.capacity_bytes = 2});
    cache.insert(key('A'), blob(1));
    REQUIRE(cache.lookup(key('A')) != nullptr);
    std::vector<SegmentKey> evicted;
    cache.insert(key('B'), blob(1), &evicted);
    cache.insert(key('C'), blob(1), &evicted);
    cache.insert(key('D'), blob(1), &evicted);
    CHECK(cache.contains(key('A')));
    CHECK(cache.is_protected(key('A')));
    CHECK(!cache.contains(key('B')));
    CHECK(!cache.contains(key('C')));
    CHECK(cache.contains(key('D')));
    REQUIRE(evicted.size() == 2);
    CHECK(evicted[0] == key('B'));
    CHECK(evicted[1] == key('C'));
}

TEST_CASE("segment of exactly capacity bytes is resident alone") {
    SegmentCache cache({.capacity_bytes = 64});
    CHECK(cache.insert(key(1), blob(64)) == SegmentCache::InsertOutcome::inserted);
    CHECK(cache.occupancy_bytes() == 64);
    cache.insert(key(2), blob(64));
    CHECK(!cache.contains(key(1)));
    CHECK(cache.contains(key(2)));
    CHECK(cache.occupancy_bytes() == 64);
}

TEST_CASE("oversized segments bypass the cache unchanged") {
    SegmentCache cache({.capacity_bytes = 64});
    cache.insert(key(1), blob(10));
    CHECK(cache.insert(key(2), blob(65)) == SegmentCache::InsertOutcome::bypassed);
    CHECK(!cache.contains(key(2)));
    CHECK(cache.contains(key(1)));
    CHECK(cache.occupancy_bytes() == 10);
    CHECK(cache.metrics().bypasses == 1);
}

TEST_CASE("occupancy invariants hold across a random 1000-op trace") {
    SegmentCache cache({.capacity_bytes = 256, .protected_fraction = 0.8});
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<std::uint64_t> which(0, 63);
    std::uniform_int_distribution<std::size_t> size(1, 48);
    std::uniform_int_distribution<int> op(0, 2);
    for (int i = 0; i < 1000; ++i) {
        if (op(rng) == 0) {
            cache.insert(key(which(rng)), blob(size(rng)));
        } else {
            cache.lookup(key(which(rng)));
        }
        CHECK(cache.occupancy_bytes() <= 256);
        CHECK(cache.protected_bytes() <= static_cast<std::uint64_t>(0.8 * 256));
    }
    auto m = cache.metrics();
    CHECK(m.hits + m.misses == m.lookups);
}

TEST_CASE("read_through serves warmed keys without touching storage") {
    MemoryStore store;
    store.put("idx/pl/5", Bytes(100, 0x5a));
    SegmentCache cache({.capacity_bytes = 1 << 20});
    auto fetch = [&] {
        auto res = store.get({"idx/pl/5", 0, 100, 0});
        return std::make_shared<const Bytes>(std::move(res.data));
    };

    auto [cold, hit1] = cache.read_through(key(5), fetch);
    CHECK(!hit1);
    CHECK(store.snapshot_metrics().total_gets == 1);
    auto [warm, hit2] = cache.read_through(key(5), fetch);
    CHECK(hit2);
    CHECK(store.snapshot_metrics().total_gets == 1);  // unchanged
    CHECK(*warm == *cold);
}

TEST_CASE("fetch failures propagate and nothing is inserted") {
    SegmentCache cache({.capacity_bytes = 100});
    CHECK_THROWS_AS(
        cache.read_through(key(9), []() -> SegmentCache::BytesPtr {
            throw std::runtime_error("fetch failed");
        }),
        std::runtime_error);
    CHECK(!cache.contains(key(9)));
}

TEST_CASE("second pass over a fully resident trace hits every time") {
    MemoryStore store;
    SegmentCache cache({.capacity_bytes = 1 << 20});
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::uint64_t> which(0, 99);
    for (std::uint64_t i = 0; i < 100; ++i) {
        store.put("idx/pl/" + std::to_string(i), Bytes(128, static_cast<std::uint8_t>(i)));
    }
    std::vector<std::uint64_t> trace(100);
    for (auto& t : trace) {
        t = which(rng);
    }
    auto pass = [&] {
        for (auto t : trace) {
            cache.read_through(key(t), [&] {
                auto res = store.get({"idx/pl/" + std::to_string(t), 0, 128, 0});
                return std::make_shared<const Bytes>(std::move(res.data));
            });
        }
    };
    pass();
    store.reset_metrics();
    cache.reset_metrics();
    pass();
    CHECK(store.snapshot_metrics().total_gets == 0);
    CHECK(cache.metrics().hit_rate() == 1.0);
}

TEST_CASE("scan resistance: protected entries survive a one-touch scan") {
    // 100-byte cache, 0.8 protected share. Entry P (20 bytes) is hit once,
    // then a scan of distinct one-touch segments totalling exactly the
    // probationary share (20 bytes) passes through.
    SegmentCache cache({.capacity_bytes = 100, .protected_fraction = 0.8});
    cache.insert(key(0), blob(20));
    REQUIRE(cache.lookup(key(0)) != nullptr);
    for (std::uint64_t i = 1; i <= 4; ++i) {
        cache.insert(key(i), blob(5));
    }
    CHECK(cache.contains(key(0)));
    CHECK(cache.is_protected(key(0)));
}

TEST_CASE("disabled cache misses everything and bypasses inserts") {
    SegmentCache cache({.capacity_bytes = 100, .protected_fraction = 0.8, .enabled = false});
    CHECK(cache.insert(key(1), blob(1)) == SegmentCache::InsertOutcome::bypassed);
    CHECK(cache.lookup(key(1)) == nullptr);
}
