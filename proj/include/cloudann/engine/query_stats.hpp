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

#include <cstdint>
#include <vector>

namespace cloudann {

// One roundtrip-eligible fetch wave. A round that was fully served from
// cache issued no storage batch and saved its roundtrip.
struct RoundRecord {
    std::uint32_t units = 0;     // segments the round asked for
    std::uint32_t hits = 0;      // served from cache
    bool all_hit = false;        // saved the roundtrip
};

struct QueryStats {
    double latency = 0.0;    // admission to completion (virtual or wall)
    double io_wait = 0.0;    // summed batch roundtrip waits
    double compute = 0.0;    // summed injected compute delays
    std::uint32_t roundtrips = 0;             // storage batches issued (rt)
    std::uint32_t requests = 0;               // storage GETs (cache misses)
    std::uint64_t bytes_read = 0;             // fetched from storage only
    std::uint32_t expansions = 0;             // graph rounds, incl. cache-saved
    std::uint32_t posting_lists_visited = 0;  // cluster nprobe
    std::uint64_t records_fetched = 0;        // vectors (cluster) or nodes (graph)
    std::uint32_t cache_hits = 0;
    std::uint32_t cache_misses = 0;
    std::uint64_t work_dims = 0;  // scalar dimension ops charged to compute
    std::vector<RoundRecord> rounds;
};

}  // namespace cloudann
