#include "millwatch/fusion.hpp"

namespace millwatch {

void SignalBus::publish(const ProcessSignals& signals) {
    std::lock_guard lock(mutex_);
    if (published_ && signals.signal_ts < latest_.signal_ts) {
        stale_publishes_.fetch_add(1, std::memory_order_relaxed);
        return;
    }
    latest_ = signals;
    published_ = true;
}

SignalBus::Reading SignalBus::read(TimestampNs now) const {
    std::lock_guard lock(mutex_);
    Reading r;
    r.signals = latest_;
    r.ever_published = published_;
    r.stale = !published_ || (now - latest_.signal_ts > staleness_limit_ns_);
    return r;
}

GateState evaluate_gate(const SignalBus::Reading& reading, TimestampNs now) {
    if (reading.stale || !reading.ever_published)
        return {GateMode::Paused, GateReason::MillIdle, now};  // fail-safe on signal loss
    return evaluate_gate(reading.signals, now);
}

GateState evaluate_gate(const ProcessSignals& s, TimestampNs now) {
    if (s.ghost_rolling) return {GateMode::Paused, GateReason::GhostRolling, now};
    if (!s.mill_running) return {GateMode::Paused, GateReason::MillIdle, now};
    if (!s.material_present) return {GateMode::Paused, GateReason::NoMaterial, now};
    return {GateMode::Active, GateReason::None, now};
}

GatedOutput apply_gate(const GateState& gate, std::vector<AnomalyEvent> events,
                       std::vector<MetricPoint> metrics) {
    GatedOutput out;
    if (gate.mode == GateMode::Paused) {
        out.gated_event_count = events.size();
        for (auto& m : metrics) m.tags["gate"] = "paused";
    } else {
        out.events = std::move(events);
    }
    out.metrics = std::move(metrics);
    return out;
}

SuppressDecision suppress_dividing_cut(const AnomalyEvent& event, const ProcessSignals& signals,
                                       const SuppressConfig& cfg) {
    if (!cfg.enabled) return SuppressDecision::Pass;
    if (event.kind != AnomalyKind::ShortMetal && event.kind != AnomalyKind::AbnormalBilletDuration)
        return SuppressDecision::Pass;
    if (!signals.dividing_cut_active) return SuppressDecision::Pass;
    if (event.ts <= signals.dividing_cut_until + ns_from_s(cfg.grace_s))
        return SuppressDecision::Suppressed;
    return SuppressDecision::Pass;
}

}  // namespace millwatch
