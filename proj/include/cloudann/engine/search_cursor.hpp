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

#include <memory>
#include <span>
#include <vector>

#include "../cache/segment_cache.hpp"
#include "../core/types.hpp"
#include "../storage/storage.hpp"
#include "query_stats.hpp"

namespace cloudann {

// One cacheable fetch: the cache identity of the segment plus the storage
// read that materializes it on a miss.
struct FetchUnit {
    SegmentKey key;
    ReadRequest request;
};

// A search decomposed into expansion rounds so the executor can interleave
// many queries over the shared cache, storage model, and virtual clock.
// Per round the executor calls next_round, resolves the units through
// cache and storage, then hands the bytes back via deliver.
class SearchCursor {
public:
    virtual ~SearchCursor() = default;

    // Emits the next round's fetch units. Returning false ends the query;
    // `out` is left empty in that case.
    virtual bool
    next_round(std::vector<FetchUnit>& out) = 0;

    // Bytes for the last round's units, in emission order.
    virtual void
    deliver(std::span<const SegmentCache::BytesPtr> data) = 0;

    // Exact-distance top-k after traversal ends.
    virtual SearchResult
    result() const = 0;

    // Scalar dimension operations accrued since the last drain; the
    // executor converts these into modeled compute time.
    virtual std::uint64_t
    drain_work_dims() = 0;

    // Index-specific stats fields (expansions, lists visited, records).
    virtual void
    fill_stats(QueryStats& stats) const = 0;
};

}  // namespace cloudann
