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
#include <list>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "../core/types.hpp"

namespace cloudann {

struct SegmentKey {
    std::string index_id;
    std::uint64_t segment_id = 0;

    bool
    operator==(const SegmentKey& o) const = default;
};

struct SegmentKeyHash {
    std::size_t
    operator()(const SegmentKey& k) const {
        std::size_t h = std::hash<std::string>()(k.index_id);
        return h ^ (std::hash<std::uint64_t>()(k.segment_id) + 0x9e3779b97f4a7c15ULL + (h << 6) +
                    (h >> 2));
    }
};

struct CacheMetrics {
    std::uint64_t lookups = 0;
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t insertions = 0;
    std::uint64_t evictions = 0;
    std::uint64_t bypasses = 0;
    std::uint64_t bytes_from_cache = 0;
    std::uint64_t occupancy_bytes = 0;
    std::uint64_t protected_bytes = 0;

    double
    hit_rate() const {
        return lookups ? static_cast<double>(hits) / static_cast<double>(lookups) : 0.0;
    }
};

// Byte-capacity segment cache with scan-resistant (segmented) LRU eviction.
// New entries enter the probationary list; a hit promotes to the protected
// list, whose size is bounded by protected_fraction of capacity (overflow
// demotes back to the probationary head). Eviction takes the probationary
// LRU tail first, then the protected tail if the probationary list is empty.
// Safe for concurrent read_through from all query workers.
class SegmentCache {
public:
    struct Config {
        std::uint64_t capacity_bytes = 0;
        double protected_fraction = 0.8;
        bool enabled = true;
        bool single_flight = false;  // advisory; honored by the query executor

        void
        check() const {
            if (protected_fraction <= 0.0 || protected_fraction >= 1.0) {
                throw std::invalid_argument("cache protected_fraction must be in (0,1)");
            }
        }
    };

    using BytesPtr = std::shared_ptr<const Bytes>;
    enum class InsertOutcome { inserted, bypassed };

    explicit SegmentCache(Config cfg) : cfg_(cfg) {
        cfg_.check();
    }

    const Config&
    config() const {
        return cfg_;
    }

    bool
    enabled() const {
        return cfg_.enabled && cfg_.capacity_bytes > 0;
    }

    // nullptr on miss; recency state is only touched on hits.
    BytesPtr
    lookup(const SegmentKey& key) {
        std::lock_guard lock(mu_);
        ++metrics_.lookups;
        if (!enabled()) {
            ++metrics_.misses;
            return nullptr;
        }
        auto it = map_.find(key);
        if (it == map_.end()) {
            ++metrics_.misses;
            return nullptr;
        }
        ++metrics_.hits;
        Entry& e = *it->second;
        metrics_.bytes_from_cache += e.data->size();
        promote(it->second);
        return it->second->data;
    }

    InsertOutcome
    insert(const SegmentKey& key, BytesPtr data, std::vector<SegmentKey>* evicted = nullptr) {
        std::lock_guard lock(mu_);
        std::uint64_t size = data->size();
        if (!enabled() || size > cfg_.capacity_bytes) {
            ++metrics_.bypasses;
            return InsertOutcome::bypassed;
        }
        auto it = map_.find(key);
        if (it != map_.end()) {
            // Concurrent misses may both fetch; only one copy is retained.
            remove(it->second);
        }
        probationary_.push_front(Entry{key, std::move(data), size});
        probationary_.begin()->in_protected = false;
        map_[key] = probationary_.begin();
        occupancy_ += size;
        ++metrics_.insertions;
        while (occupancy_ > cfg_.capacity_bytes) {
            auto victim = !probationary_.empty() ? std::prev(probationary_.end())
                                                 : std::prev(protected_.end());
            if (evicted != nullptr) {
                evicted->push_back(victim->key);
            }
            ++metrics_.evictions;
            remove(victim);
        }
        return InsertOutcome::inserted;
    }

    // Returns (bytes, hit flag). On miss the fetcher supplies the segment,
    // which is inserted before returning; fetch failures propagate and
    // nothing is inserted.
    std::pair<BytesPtr, bool>
    read_through(const SegmentKey& key, const std::function<BytesPtr()>& fetch) {
        if (auto hit = lookup(key)) {
            return {hit, true};
        }
        BytesPtr data = fetch();
        insert(key, data);
        return {data, false};
    }

    bool
    contains(const SegmentKey& key) const {
        std::lock_guard lock(mu_);
        return map_.count(key) > 0;
    }

    bool
    is_protected(const SegmentKey& key) const {
        std::lock_guard lock(mu_);
        auto it = map_.find(key);
        return it != map_.end() && it->second->in_protected;
    }

    std::uint64_t
    occupancy_bytes() const {
        std::lock_guard lock(mu_);
        return occupancy_;
    }

    std::uint64_t
    protected_bytes() const {
        std::lock_guard lock(mu_);
        return protected_bytes_;
    }

    CacheMetrics
    metrics() const {
        std::lock_guard lock(mu_);
        CacheMetrics m = metrics_;
        m.occupancy_bytes = occupancy_;
        m.protected_bytes = protected_bytes_;
        return m;
    }

    void
    reset_metrics() {
        std::lock_guard lock(mu_);
        metrics_ = CacheMetrics{};
    }

    void
    clear() {
        std::lock_guard lock(mu_);
        probationary_.clear();
        protected_.clear();
        map_.clear();
        occupancy_ = 0;
        protected_bytes_ = 0;
    }

private:
    struct Entry {
        SegmentKey key;
        BytesPtr data;
        std::uint64_t size = 0;
        bool in_protected = false;
    };
    using List = std::list<Entry>;

    std::uint64_t
    protected_capacity() const {
        return static_cast<std::uint64_t>(cfg_.protected_fraction *
                                          static_cast<double>(cfg_.capacity_bytes));
    }

    void
    promote(List::iterator it) {
        if (it->in_protected) {
            protected_.splice(protected_.begin(), protected_, it);
            return;
        }
        it->in_protected = true;
        protected_bytes_ += it->size;
        protected_.splice(protected_.begin(), probationary_, it);
        // Demote protected overflow back to the probationary head; total
        // occupancy is unchanged.
        while (protected_bytes_ > protected_capacity() && !protected_.empty()) {
            auto victim = std::prev(protected_.end());
            victim->in_protected = false;
            protected_bytes_ -= victim->size;
            probationary_.splice(probationary_.begin(), probationary_, victim);
        }
    }

    void
    remove(List::iterator it) {
        occupancy_ -= it->size;
        if (it->in_protected) {
            protected_bytes_ -= it->size;
            map_.erase(it->key);
            protected_.erase(it);
        } else {
            map_.erase(it->key);
            probationary_.erase(it);
        }
    }

    Config cfg_;
    mutable std::mutex mu_;
    List probationary_;
    List protected_;
    std::unordered_map<SegmentKey, List::iterator, SegmentKeyHash> map_;
    std::uint64_t occupancy_ = 0;
    std::uint64_t protected_bytes_ = 0;
    CacheMetrics metrics_;
};

}  // namespace cloudann
