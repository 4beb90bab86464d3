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
#include <cmath>
#include <memory>
#include <random>

#include "../sim/event_engine.hpp"
#include "storage.hpp"

namespace cloudann {

// Deterministic discrete-event model of a remote object store.
//
// A request passes through three stages:
//   1. token grant  — GET-rate token bucket (refill get_rate_limit/sec,
//                     capacity token_burst, balance may go negative so
//                     grant order is FIFO);
//   2. TTFB         — constant ttfb_p50, or lognormal with that median when
//                     dispersion > 0, drawn in submission order;
//   3. transfer     — processor sharing: all in-flight transfers split
//                     bandwidth equally at every instant.
//
// Everything runs on the owning EventEngine, so outcomes depend only on the
// profile, the seed, and the submission schedule.
class SimulatedStore : public ObjectStore {
public:
    SimulatedStore(EventEngine& engine, StorageProfile profile)
        : engine_(engine), profile_(profile), ttfb_rng_(profile.seed) {
        profile_.check();
        tokens_ = static_cast<double>(profile_.token_burst);
        token_time_ = engine_.now();
        pipe_time_ = engine_.now();
        reset_time_ = engine_.now();
    }

    const StorageProfile&
    profile() const {
        return profile_;
    }

    EventEngine&
    engine() {
        return engine_;
    }

    void
    put(const std::string& key, Bytes data) override {
        objects_[key] = std::move(data);
    }

    bool
    has(const std::string& key) const override {
        return objects_.count(key) > 0;
    }

    std::uint64_t
    object_size(const std::string& key) const override {
        auto it = objects_.find(key);
        if (it == objects_.end()) {
            throw std::out_of_range("unknown object key: " + key);
        }
        return it->second.size();
    }

    // Admits one request now; `done` fires on the engine when the transfer
    // completes. Unknown keys and bad ranges throw immediately.
    void
    submit(const ReadRequest& req, std::function<void(ReadResult)> done) {
        auto it = objects_.find(req.object_key);
        if (it == objects_.end()) {
            throw std::out_of_range("unknown object key: " + req.object_key);
        }
        detail::check_range(it->second.size(), req);

        double now = engine_.now();
        double grant = grant_time(now);
        double ttfb = draw_ttfb();

        auto tr = std::make_shared<Transfer>();
        tr->src = &it->second;
        tr->req = req;
        tr->remaining = static_cast<double>(req.length);
        tr->stats.bytes = req.length;
        tr->stats.queue_wait = grant - now;
        tr->stats.ttfb = ttfb;
        tr->done = std::move(done);

        engine_.schedule_at(grant, [this, tr] {
            ++total_gets_;
            if (trace_enabled_) {
                grant_trace_.push_back(engine_.now());
            }
            engine_.schedule_after(tr->stats.ttfb, [this, tr] { pipe_join(tr); });
        });
    }

    void
    submit_batch(std::vector<ReadRequest> reqs, BatchCallback cb) override {
        if (reqs.empty()) {
            throw std::invalid_argument("submit_batch: empty request list");
        }
        std::uint64_t batch = next_batch_id_++;
        auto results = std::make_shared<std::vector<ReadResult>>(reqs.size());
        auto remaining = std::make_shared<std::size_t>(reqs.size());
        auto shared_cb = std::make_shared<BatchCallback>(std::move(cb));
        for (std::size_t i = 0; i < reqs.size(); ++i) {
            reqs[i].batch_id = batch;
            submit(reqs[i], [results, remaining, shared_cb, i](ReadResult r) {
                (*results)[i] = std::move(r);
                if (--(*remaining) == 0) {
                    (*shared_cb)(std::move(*results));
                }
            });
        }
    }

    ReadResult
    get(const ReadRequest& req) override {
        ReadResult out;
        bool done = false;
        submit(req, [&](ReadResult r) {
            out = std::move(r);
            done = true;
        });
        engine_.run_until([&] { return done; });
        return out;
    }

    std::vector<ReadResult>
    get_batch(std::span<const ReadRequest> reqs) override {
        std::vector<ReadResult> out;
        bool done = false;
        submit_batch(std::vector<ReadRequest>(reqs.begin(), reqs.end()),
                     [&](std::vector<ReadResult> r) {
                         out = std::move(r);
                         done = true;
                     });
        engine_.run_until([&] { return done; });
        return out;
    }

    double
    advance_to_idle() override {
        return engine_.run_until_idle();
    }

    StorageMetrics
    snapshot_metrics() const override {
        StorageMetrics m;
        m.total_gets = total_gets_;
        m.total_bytes = total_bytes_;
        m.elapsed = engine_.now() - reset_time_;
        if (completed_ > 0) {
            m.mean_io_latency = latency_sum_ / static_cast<double>(completed_);
            m.mean_io_latency_excl_queue =
                latency_excl_queue_sum_ / static_cast<double>(completed_);
        }
        if (m.elapsed > 0) {
            m.get_rate = static_cast<double>(m.total_gets) / m.elapsed;
            m.achieved_bandwidth = static_cast<double>(m.total_bytes) / m.elapsed;
        }
        return m;
    }

    void
    reset_metrics() override {
        total_gets_ = 0;
        total_bytes_ = 0;
        completed_ = 0;
        latency_sum_ = 0;
        latency_excl_queue_sum_ = 0;
        reset_time_ = engine_.now();
        grant_trace_.clear();
        transfer_trace_.clear();
    }

    // Test instrumentation: (virtual time, cumulative transferred bytes)
    // samples at every pipe update, and token-grant timestamps.
    void
    enable_trace(bool on) {
        trace_enabled_ = on;
    }

    const std::vector<std::pair<double, double>>&
    transfer_trace() const {
        return transfer_trace_;
    }

    const std::vector<double>&
    grant_trace() const {
        return grant_trace_;
    }

    std::size_t
    in_flight_transfers() const {
        return pipe_.size();
    }

private:
    struct Transfer {
        const Bytes* src = nullptr;
        ReadRequest req;
        double remaining = 0;  // bytes
        double join_time = 0;
        ReadStats stats;
        std::function<void(ReadResult)> done;
    };
    using TransferPtr = std::shared_ptr<Transfer>;

    // Token bucket with a continuous balance that may go negative: the
    // grant is delayed until the refill covers the deficit. FIFO by
    // construction since submissions are processed in event order.
    double
    grant_time(double now) {
        tokens_ = std::min(static_cast<double>(profile_.token_burst),
                           tokens_ + (now - token_time_) * profile_.get_rate_limit);
        token_time_ = now;
        tokens_ -= 1.0;
        if (tokens_ >= 0.0) {
            return now;
        }
        return now + (-tokens_) / profile_.get_rate_limit;
    }

    double
    draw_ttfb() {
        if (profile_.ttfb_dispersion == 0.0) {
            return profile_.ttfb_p50;
        }
        std::normal_distribution<double> z(0.0, 1.0);
        return profile_.ttfb_p50 * std::exp(profile_.ttfb_dispersion * z(ttfb_rng_));
    }

    // Advances every in-flight transfer by the equal bandwidth share earned
    // since the last pipe event.
    void
    pipe_progress() {
        double now = engine_.now();
        double dt = now - pipe_time_;
        pipe_time_ = now;
        if (dt <= 0 || pipe_.empty()) {
            return;
        }
        double share = profile_.bandwidth_bytes_per_sec * dt / static_cast<double>(pipe_.size());
        for (auto& tr : pipe_) {
            tr->remaining -= share;
        }
        if (trace_enabled_) {
            traced_bytes_ += profile_.bandwidth_bytes_per_sec * dt;
            transfer_trace_.emplace_back(now, traced_bytes_);
        }
    }

    void
    pipe_join(const TransferPtr& tr) {
        pipe_progress();
        tr->join_time = engine_.now();
        pipe_.push_back(tr);
        reschedule_completion();
    }

    void
    reschedule_completion() {
        ++pipe_epoch_;
        if (pipe_.empty()) {
            return;
        }
        double min_remaining = pipe_.front()->remaining;
        for (const auto& tr : pipe_) {
            min_remaining = std::min(min_remaining, tr->remaining);
        }
        double finish = engine_.now() + std::max(0.0, min_remaining) *
                                            static_cast<double>(pipe_.size()) /
                                            profile_.bandwidth_bytes_per_sec;
        std::uint64_t epoch = pipe_epoch_;
        engine_.schedule_at(finish, [this, epoch] {
            if (epoch != pipe_epoch_) {
                return;  // superseded by a join/leave since scheduling
            }
            pipe_tick();
        });
    }

    void
    pipe_tick() {
        pipe_progress();
        // Sub-byte residue from float progress accounting counts as done.
        constexpr double kEps = 1e-3;
        std::vector<TransferPtr> finished;
        for (std::size_t i = 0; i < pipe_.size();) {
            if (pipe_[i]->remaining <= kEps) {
                finished.push_back(pipe_[i]);
                pipe_.erase(pipe_.begin() + static_cast<std::ptrdiff_t>(i));
            } else {
                ++i;
            }
        }
        reschedule_completion();
        for (auto& tr : finished) {
            tr->stats.transfer = engine_.now() - tr->join_time;
            ReadResult res;
            res.stats = tr->stats;
            res.data.assign(
                tr->src->begin() + static_cast<std::ptrdiff_t>(tr->req.offset),
                tr->src->begin() + static_cast<std::ptrdiff_t>(tr->req.offset + tr->req.length));
            total_bytes_ += tr->stats.bytes;
            ++completed_;
            latency_sum_ += tr->stats.total();
            latency_excl_queue_sum_ += tr->stats.ttfb + tr->stats.transfer;
            tr->done(std::move(res));
        }
    }

    EventEngine& engine_;
    StorageProfile profile_;
    std::unordered_map<std::string, Bytes> objects_;
    std::mt19937_64 ttfb_rng_;

    double tokens_ = 0;
    double token_time_ = 0;

    std::vector<TransferPtr> pipe_;
    double pipe_time_ = 0;
    std::uint64_t pipe_epoch_ = 0;
    std::uint64_t next_batch_id_ = 1;

    std::uint64_t total_gets_ = 0;
    std::uint64_t total_bytes_ = 0;
    std::uint64_t completed_ = 0;
    double latency_sum_ = 0;
    double latency_excl_queue_sum_ = 0;
    double reset_time_ = 0;

    bool trace_enabled_ = false;
    double traced_bytes_ = 0;
    std::vector<std::pair<double, double>> transfer_trace_;
    std::vector<double> grant_trace_;
};

}  // namespace cloudann
