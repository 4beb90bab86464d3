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

#include <chrono>
#include <unordered_map>

#include "../cache/segment_cache.hpp"
#include "../sim/event_engine.hpp"
#include "../storage/storage.hpp"
#include "search_cursor.hpp"

namespace cloudann {

// How per-step compute is charged to the virtual clock. The fixed model
// converts the cursor's dimension-op counts with a constant coefficient and
// keeps virtual runs reproducible; the measured model injects the step's
// actual wall time instead (realistic, but not replayable bit-for-bit).
struct ComputeModel {
    enum class Mode { none, fixed, measured };

    Mode mode = Mode::fixed;
    double seconds_per_dim = 1e-9;

    static Mode
    mode_from_name(const std::string& name) {
        if (name == "none") return Mode::none;
        if (name == "fixed") return Mode::fixed;
        if (name == "measured") return Mode::measured;
        throw std::invalid_argument("unknown compute model: " + name);
    }

    double
    delay(std::uint64_t dims, double measured_wall) const {
        switch (mode) {
            case Mode::none:
                return 0.0;
            case Mode::fixed:
                return static_cast<double>(dims) * seconds_per_dim;
            case Mode::measured:
                return measured_wall;
        }
        return 0.0;
    }
};

// Resolves duplicate in-flight fetches of one segment when the cache's
// single_flight option is on: later queries wait on the first fetch instead
// of issuing their own GET.
class PendingFetches {
public:
    using Waiter = std::function<void(SegmentCache::BytesPtr)>;

    // True if the key is now owned by this caller (it must fetch and later
    // resolve); false if a fetch is already in flight and `w` was queued.
    bool
    claim_or_wait(const SegmentKey& key, Waiter w) {
        auto it = waiting_.find(key);
        if (it == waiting_.end()) {
            waiting_.emplace(key, std::vector<Waiter>{});
            return true;
        }
        it->second.push_back(std::move(w));
        return false;
    }

    void
    resolve(const SegmentKey& key, const SegmentCache::BytesPtr& data) {
        auto it = waiting_.find(key);
        if (it == waiting_.end()) {
            return;
        }
        auto waiters = std::move(it->second);
        waiting_.erase(it);
        for (auto& w : waiters) {
            w(data);
        }
    }

    void
    clear() {
        waiting_.clear();
    }

private:
    std::unordered_map<SegmentKey, std::vector<Waiter>, SegmentKeyHash> waiting_;
};

// Shared per-run context: one virtual clock, one storage backend, one
// segment cache, one compute model.
struct RunContext {
    EventEngine& engine;
    ObjectStore& store;
    SegmentCache& cache;
    ComputeModel compute;
    PendingFetches pending;
};

// Drives a single search cursor to completion: alternating compute steps
// (charged to the virtual clock via the compute model) and fetch rounds
// resolved through cache then storage. A round whose units all hit the
// cache issues no storage batch and therefore saves its roundtrip.
class QueryRun {
public:
    using DoneFn = std::function<void(SearchResult, QueryStats)>;

    // The cursor must outlive the run; callers keep ownership.
    QueryRun(RunContext& ctx, SearchCursor& cursor, DoneFn done)
        : ctx_(ctx), cursor_(cursor), done_(std::move(done)) {
    }

    void
    start() {
        admit_time_ = ctx_.engine.now();
        step();
    }

private:
    using Clock = std::chrono::steady_clock;

    void
    step() {
        auto wall0 = Clock::now();
        units_.clear();
        bool more = cursor_.next_round(units_);
        std::uint64_t dims = cursor_.drain_work_dims();
        double wall = std::chrono::duration<double>(Clock::now() - wall0).count() + carry_wall_;
        carry_wall_ = 0.0;
        double delay = ctx_.compute.delay(dims, wall);
        stats_.compute += delay;
        stats_.work_dims += dims;
        if (!more) {
            ctx_.engine.schedule_after(delay, [this] { finish(); });
            return;
        }
        ctx_.engine.schedule_after(delay, [this] { issue(); });
    }

    void
    issue() {
        round_data_.assign(units_.size(), nullptr);
        round_record_ = RoundRecord{};
        round_record_.units = static_cast<std::uint32_t>(units_.size());

        std::vector<std::size_t> missing;
        for (std::size_t i = 0; i < units_.size(); ++i) {
            if (auto hit = ctx_.cache.lookup(units_[i].key)) {
                round_data_[i] = std::move(hit);
                ++round_record_.hits;
                ++stats_.cache_hits;
            } else {
                ++stats_.cache_misses;
                missing.push_back(i);
            }
        }

        if (missing.empty()) {
            round_record_.all_hit = true;
            stats_.rounds.push_back(round_record_);
            continue_with_data();
            return;
        }

        // The record is final before any I/O: later rounds may start from
        // inline storage completions and must append after this one.
        stats_.rounds.push_back(round_record_);
        io_start_ = ctx_.engine.now();
        outstanding_ = 0;

        std::vector<std::size_t> to_fetch;
        bool single_flight = ctx_.cache.config().single_flight && ctx_.cache.enabled();
        for (std::size_t slot : missing) {
            if (single_flight) {
                bool owned = ctx_.pending.claim_or_wait(
                    units_[slot].key, [this, slot](SegmentCache::BytesPtr data) {
                        round_data_[slot] = std::move(data);
                        resolve_one();
                    });
                if (!owned) {
                    ++outstanding_;
                    continue;
                }
            }
            to_fetch.push_back(slot);
        }

        if (!to_fetch.empty()) {
            ++outstanding_;
            ++stats_.roundtrips;
            stats_.requests += static_cast<std::uint32_t>(to_fetch.size());
            std::vector<ReadRequest> reqs;
            reqs.reserve(to_fetch.size());
            for (std::size_t slot : to_fetch) {
                reqs.push_back(units_[slot].request);
            }
            fetch_slots_ = std::move(to_fetch);
            ctx_.store.submit_batch(std::move(reqs), [this](std::vector<ReadResult> results) {
                for (std::size_t j = 0; j < results.size(); ++j) {
                    std::size_t slot = fetch_slots_[j];
                    stats_.bytes_read += results[j].stats.bytes;
                    auto data =
                        std::make_shared<const Bytes>(std::move(results[j].data));
                    ctx_.cache.insert(units_[slot].key, data);
                    ctx_.pending.resolve(units_[slot].key, data);
                    round_data_[slot] = std::move(data);
                }
                resolve_one();
            });
        }
    }

    void
    resolve_one() {
        if (--outstanding_ > 0) {
            return;
        }
        stats_.io_wait += ctx_.engine.now() - io_start_;
        continue_with_data();
    }

    void
    continue_with_data() {
        auto wall0 = Clock::now();
        cursor_.deliver(round_data_);
        carry_wall_ = std::chrono::duration<double>(Clock::now() - wall0).count();
        step();
    }

    void
    finish() {
        stats_.latency = ctx_.engine.now() - admit_time_;
        cursor_.fill_stats(stats_);
        done_(cursor_.result(), std::move(stats_));
    }

    RunContext& ctx_;
    SearchCursor& cursor_;
    DoneFn done_;

    double admit_time_ = 0.0;
    double io_start_ = 0.0;
    double carry_wall_ = 0.0;
    int outstanding_ = 0;
    std::vector<FetchUnit> units_;
    std::vector<SegmentCache::BytesPtr> round_data_;
    std::vector<std::size_t> fetch_slots_;
    RoundRecord round_record_;
    QueryStats stats_;
};

struct QueryOutcome {
    SearchResult result;
    QueryStats stats;
};

// Runs one query to completion on the context's engine.
inline QueryOutcome
run_query(RunContext& ctx, SearchCursor& cursor) {
    QueryOutcome out;
    bool done = false;
    QueryRun run(ctx, cursor, [&](SearchResult res, QueryStats stats) {
        out.result = std::move(res);
        out.stats = std::move(stats);
        done = true;
    });
    run.start();
    ctx.engine.run_until([&] { return done; });
    return out;
}

inline QueryOutcome
run_query(RunContext& ctx, std::unique_ptr<SearchCursor> cursor) {
    return run_query(ctx, *cursor);
}

}  // namespace cloudann
