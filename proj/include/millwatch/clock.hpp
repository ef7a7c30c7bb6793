#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>

namespace millwatch {

/// Integer nanoseconds since the Unix epoch.
using TimestampNs = int64_t;

constexpr TimestampNs ns_per_s = 1'000'000'000;

constexpr TimestampNs ns_from_s(double s) {
    return static_cast<TimestampNs>(s * 1e9 + (s >= 0 ? 0.5 : -0.5));
}

constexpr double s_from_ns(TimestampNs ns) { return static_cast<double>(ns) / 1e9; }

/// Monotonic non-decreasing clock, nanosecond resolution.
class Clock {
public:
    virtual ~Clock() = default;
    virtual TimestampNs now() = 0;
    virtual bool simulated() const { return false; }
};

/// Wall clock, pinned monotonic: never returns less than a previous reading.
class WallClock final : public Clock {
public:
    TimestampNs now() override {
        auto t = std::chrono::duration_cast<std::chrono::nanoseconds>(
                     std::chrono::system_clock::now().time_since_epoch())
                     .count();
        TimestampNs prev = last_.load(std::memory_order_relaxed);
        while (t > prev && !last_.compare_exchange_weak(prev, t, std::memory_order_relaxed)) {
        }
        return std::max(t, last_.load(std::memory_order_relaxed));
    }

private:
    std::atomic<TimestampNs> last_{0};
};

/// Test clock: advances only when told to.
class SimClock final : public Clock {
public:
    explicit SimClock(TimestampNs start = 0) : now_(start) {}
    TimestampNs now() override { return now_.load(std::memory_order_relaxed); }
    bool simulated() const override { return true; }

    void advance(TimestampNs delta) { now_.fetch_add(delta, std::memory_order_relaxed); }
    void set(TimestampNs t) { now_.store(t, std::memory_order_relaxed); }

private:
    std::atomic<TimestampNs> now_;
};

}  // namespace millwatch
