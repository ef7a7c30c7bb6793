#pragma once

#include <atomic>
#include <mutex>
#include <optional>

#include "millwatch/types.hpp"

namespace millwatch {

/// Last-write-wins snapshot bus: one writer, many readers, reads never block
/// writes beyond the swap. Out-of-order publishes are dropped and counted.
class SignalBus {
public:
    explicit SignalBus(double staleness_limit_s = 5.0)
        : staleness_limit_ns_(ns_from_s(staleness_limit_s)) {}

    void publish(const ProcessSignals& signals);

    struct Reading {
        ProcessSignals signals;
        bool stale = false;
        bool ever_published = false;
    };
    Reading read(TimestampNs now) const;

    uint64_t stale_publish_count() const { return stale_publishes_.load(); }

private:
    mutable std::mutex mutex_;
    ProcessSignals latest_;
    bool published_ = false;
    TimestampNs staleness_limit_ns_;
    std::atomic<uint64_t> stale_publishes_{0};
};

enum class GateMode { Active, Paused };
enum class GateReason { None, MillIdle, GhostRolling, NoMaterial };

inline const char* to_string(GateReason r) {
    switch (r) {
        case GateReason::None: return "None";
        case GateReason::MillIdle: return "MillIdle";
        case GateReason::GhostRolling: return "GhostRolling";
        case GateReason::NoMaterial: return "NoMaterial";
    }
    return "None";
}

struct GateState {
    GateMode mode = GateMode::Active;
    GateReason reason = GateReason::None;
    TimestampNs since = 0;
};

/// Priority: GhostRolling > MillIdle > NoMaterial. Stale or never-published
/// signals fail safe to Paused(MillIdle).
GateState evaluate_gate(const SignalBus::Reading& reading, TimestampNs now);
GateState evaluate_gate(const ProcessSignals& signals, TimestampNs now = 0);

struct GatedOutput {
    std::vector<AnomalyEvent> events;       // empty while paused
    std::vector<MetricPoint> metrics;       // always flow; tagged gate=paused
    uint64_t gated_event_count = 0;
};

/// When paused, anomaly events are discarded (counted) and metric points pass
/// through with a gate=paused tag.
GatedOutput apply_gate(const GateState& gate, std::vector<AnomalyEvent> events,
                       std::vector<MetricPoint> metrics);

enum class SuppressDecision { Pass, Suppressed };

struct SuppressConfig {
    bool enabled = true;
    double grace_s = 2.0;  // absorbs latency skew between signal and video paths
};

/// Billet-length kinds (ShortMetal, AbnormalBilletDuration) are suppressed
/// while a dividing cut is active and until grace_s past its end; every other
/// kind passes.
SuppressDecision suppress_dividing_cut(const AnomalyEvent& event, const ProcessSignals& signals,
                                       const SuppressConfig& cfg = {});

}  // namespace millwatch
