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
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "../core/types.hpp"

namespace cloudann {

// Remote-storage constraints: TTFB distribution, shared download bandwidth,
// and a GET-rate token bucket. Defaults follow a 5 Gbps external-network
// object store with 20k GET/s per prefix and 31 ms median read latency.
struct StorageProfile {
    double ttfb_p50 = 0.031;                  // seconds
    double ttfb_dispersion = 0.0;             // lognormal shape; 0 = constant
    double bandwidth_bytes_per_sec = 625e6;   // 5 Gbps
    double get_rate_limit = 20000.0;          // requests/sec
    std::uint32_t token_burst = 100;
    std::uint64_t seed = 1;

    void
    check() const {
        if (ttfb_p50 <= 0 || bandwidth_bytes_per_sec <= 0 || get_rate_limit <= 0 ||
            token_burst == 0) {
            throw std::invalid_argument("storage profile: rates and durations must be positive");
        }
        if (ttfb_dispersion < 0) {
            throw std::invalid_argument("storage profile: dispersion must be >= 0");
        }
    }
};

struct ReadRequest {
    std::string object_key;
    std::uint64_t offset = 0;
    std::uint64_t length = 0;
    std::uint64_t batch_id = 0;  // groups requests issued in one roundtrip; 0 = unbatched
};

struct ReadStats {
    double queue_wait = 0.0;  // waiting for a rate-limit token
    double ttfb = 0.0;
    double transfer = 0.0;
    std::uint64_t bytes = 0;

    double
    total() const {
        return queue_wait + ttfb + transfer;
    }
};

struct ReadResult {
    Bytes data;
    ReadStats stats;
};

struct StorageMetrics {
    std::uint64_t total_gets = 0;
    std::uint64_t total_bytes = 0;
    double elapsed = 0.0;                    // since last reset
    double mean_io_latency = 0.0;            // queue_wait + ttfb + transfer
    double mean_io_latency_excl_queue = 0.0; // ttfb + transfer only
    double get_rate = 0.0;                   // total_gets / elapsed
    double achieved_bandwidth = 0.0;         // total_bytes / elapsed
};

// Uniform read interface over index bytes. Objects are immutable once put.
// Keys are "<index_id>/<segment_name>" strings.
class ObjectStore {
public:
    using BatchCallback = std::function<void(std::vector<ReadResult>)>;

    virtual ~ObjectStore() = default;

    virtual void
    put(const std::string& key, Bytes data) = 0;

    virtual bool
    has(const std::string& key) const = 0;

    virtual std::uint64_t
    object_size(const std::string& key) const = 0;

    virtual ReadResult
    get(const ReadRequest& req) = 0;

    // One logical roundtrip: every member consumes a rate-limit token, the
    // batch completes when its slowest member does.
    virtual std::vector<ReadResult>
    get_batch(std::span<const ReadRequest> reqs) = 0;

    // Asynchronous form used by the workload engine. Backends without
    // modeled latency complete inline.
    virtual void
    submit_batch(std::vector<ReadRequest> reqs, BatchCallback cb) = 0;

    virtual double
    advance_to_idle() {
        throw std::logic_error("advance_to_idle: backend is not simulated");
    }

    virtual StorageMetrics
    snapshot_metrics() const = 0;

    virtual void
    reset_metrics() = 0;
};

namespace detail {

inline void
check_range(std::uint64_t size, const ReadRequest& req) {
    if (req.length == 0) {
        throw std::invalid_argument("read request length must be > 0");
    }
    if (req.offset + req.length > size) {
        throw std::out_of_range("read past end of object: " + req.object_key);
    }
}

// Shared bookkeeping for the instant (mem/file) backends; elapsed is wall
// time because there is no modeled clock to report against.
struct InstantMetrics {
    std::uint64_t gets = 0;
    std::uint64_t bytes = 0;
    double latency_sum = 0;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void
    record(const ReadStats& st) {
        ++gets;
        bytes += st.bytes;
        latency_sum += st.total();
    }

    StorageMetrics
    snapshot() const {
        StorageMetrics m;
        m.total_gets = gets;
        m.total_bytes = bytes;
        m.elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (gets > 0) {
            m.mean_io_latency = latency_sum / static_cast<double>(gets);
            m.mean_io_latency_excl_queue = m.mean_io_latency;
        }
        if (m.elapsed > 0) {
            m.get_rate = static_cast<double>(gets) / m.elapsed;
            m.achieved_bandwidth = static_cast<double>(bytes) / m.elapsed;
        }
        return m;
    }

    void
    reset() {
        gets = 0;
        bytes = 0;
        latency_sum = 0;
        start = std::chrono::steady_clock::now();
    }
};

}  // namespace detail

// In-memory backend: modeled queue_wait and ttfb are zero, the transfer
// field records measured wall time of the copy.
class MemoryStore : public ObjectStore {
public:
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

    ReadResult
    get(const ReadRequest& req) override {
        auto it = objects_.find(req.object_key);
        if (it == objects_.end()) {
            throw std::out_of_range("unknown object key: " + req.object_key);
        }
        detail::check_range(it->second.size(), req);
        auto t0 = std::chrono::steady_clock::now();
        ReadResult out;
        out.data.assign(it->second.begin() + static_cast<std::ptrdiff_t>(req.offset),
                        it->second.begin() + static_cast<std::ptrdiff_t>(req.offset + req.length));
        out.stats.bytes = req.length;
        out.stats.transfer =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics_.record(out.stats);
        return out;
    }

    std::vector<ReadResult>
    get_batch(std::span<const ReadRequest> reqs) override {
        if (reqs.empty()) {
            throw std::invalid_argument("get_batch: empty request list");
        }
        std::vector<ReadResult> out;
        out.reserve(reqs.size());
        for (const auto& r : reqs) {
            out.push_back(get(r));
        }
        return out;
    }

    void
    submit_batch(std::vector<ReadRequest> reqs, BatchCallback cb) override {
        cb(get_batch(reqs));
    }

    StorageMetrics
    snapshot_metrics() const override {
        return metrics_.snapshot();
    }

    void
    reset_metrics() override {
        metrics_.reset();
    }

private:
    std::unordered_map<std::string, Bytes> objects_;
    detail::InstantMetrics metrics_;
};

// Local-file backend: keys map to files under a root directory.
class FileStore : public ObjectStore {
public:
    explicit FileStore(std::filesystem::path root) : root_(std::move(root)) {
        std::filesystem::create_directories(root_);
    }

    const std::filesystem::path&
    root() const {
        return root_;
    }

    void
    put(const std::string& key, Bytes data) override {
        auto path = root_ / key;
        std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write object file: " + path.string());
        }
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size()));
        if (!out) {
            throw std::runtime_error("short write to object file: " + path.string());
        }
    }

    bool
    has(const std::string& key) const override {
        return std::filesystem::exists(root_ / key);
    }

    std::uint64_t
    object_size(const std::string& key) const override {
        auto path = root_ / key;
        std::error_code ec;
        auto sz = std::filesystem::file_size(path, ec);
        if (ec) {
            throw std::out_of_range("unknown object key: " + key);
        }
        return sz;
    }

    ReadResult
    get(const ReadRequest& req) override {
        detail::check_range(object_size(req.object_key), req);
        auto t0 = std::chrono::steady_clock::now();
        std::ifstream in(root_ / req.object_key, std::ios::binary);
        if (!in) {
            throw std::out_of_range("unknown object key: " + req.object_key);
        }
        in.seekg(static_cast<std::streamoff>(req.offset));
        ReadResult out;
        out.data.resize(req.length);
        in.read(reinterpret_cast<char*>(out.data.data()),
                static_cast<std::streamsize>(req.length));
        if (static_cast<std::uint64_t>(in.gcount()) != req.length) {
            throw std::runtime_error("short read from object file: " + req.object_key);
        }
        out.stats.bytes = req.length;
        out.stats.transfer =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics_.record(out.stats);
        return out;
    }

    std::vector<ReadResult>
    get_batch(std::span<const ReadRequest> reqs) override {
        if (reqs.empty()) {
            throw std::invalid_argument("get_batch: empty request list");
        }
        std::vector<ReadResult> out;
        out.reserve(reqs.size());
        for (const auto& r : reqs) {
            out.push_back(get(r));
        }
        return out;
    }

    void
    submit_batch(std::vector<ReadRequest> reqs, BatchCallback cb) override {
        cb(get_batch(reqs));
    }

    StorageMetrics
    snapshot_metrics() const override {
        return metrics_.snapshot();
    }

    void
    reset_metrics() override {
        metrics_.reset();
    }

private:
    std::filesystem::path root_;
    detail::InstantMetrics metrics_;
};

}  // namespace cloudann
