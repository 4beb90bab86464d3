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
#include <functional>
#include <queue>
#include <stdexcept>
#include <thread>
#include <vector>

namespace cloudann {

// Single-threaded discrete-event engine over a virtual clock. Events fire in
// (time, insertion sequence) order, so runs are deterministic given the same
// schedule. In realtime mode the clock advance between events is realized as
// a sleep, turning the same schedule into a wall-clock run.
class EventEngine {
public:
    using Fn = std::function<void()>;

    double
    now() const {
        return now_;
    }

    void
    schedule_at(double t, Fn fn) {
        if (t < now_) {
            t = now_;
        }
        heap_.push(Event{t, seq_++, std::move(fn)});
    }

    void
    schedule_after(double delay, Fn fn) {
        schedule_at(now_ + delay, std::move(fn));
    }

    bool
    empty() const {
        return heap_.empty();
    }

    // Executes the next event; returns false when no event is pending.
    bool
    step() {
        if (heap_.empty()) {
            return false;
        }
        Event ev = heap_.top();
        heap_.pop();
        advance_clock(ev.time);
        ev.fn();
        return true;
    }

    // Drains all pending events; returns the virtual time that elapsed.
    double
    run_until_idle() {
        double start = now_;
        while (step()) {
        }
        return now_ - start;
    }

    template <typename Pred>
    void
    run_until(Pred done) {
        while (!done()) {
            if (!step()) {
                throw std::logic_error("event engine drained before completion condition held");
            }
        }
    }

    void
    set_realtime(bool on) {
        realtime_ = on;
    }

    bool
    realtime() const {
        return realtime_;
    }

private:
    void
    advance_clock(double t) {
        if (t <= now_) {
            return;
        }
        if (realtime_) {
            std::this_thread::sleep_for(std::chrono::duration<double>(t - now_));
        }
        now_ = t;
    }

    struct Event {
        double time;
        std::uint64_t seq;
        Fn fn;
    };
    struct Later {
        bool
        operator()(const Event& a, const Event& b) const {
            if (a.time != b.time) {
                return a.time > b.time;
            }
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    double now_ = 0.0;
    std::uint64_t seq_ = 0;
    bool realtime_ = false;
};

}  // namespace cloudann
