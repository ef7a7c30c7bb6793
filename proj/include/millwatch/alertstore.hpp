#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

#include "millwatch/simsource.hpp"
#include "millwatch/types.hpp"

namespace millwatch {

struct DebounceRule {
    double window_s = 10.0;  // keyed by (kind, camera_id)
};

struct NewAlert {
    Alert alert;
};
struct Coalesced {
    uint64_t alert_id;
};
using RaiseResult = std::variant<NewAlert, Coalesced>;

/// Debounced alert engine. Events within window_s of the last event with the
/// same (kind, camera_id) key coalesce into the open alert; suppressed events
/// are persisted record-only and never coalesce or surface.
class AlertEngine {
public:
    explicit AlertEngine(DebounceRule rule = {}) : rule_(rule) {}

    RaiseResult raise_alert(const AnomalyEvent& event, bool suppressed = false);

    std::vector<Alert> all_alerts() const;
    std::vector<Alert> surfaced_alerts() const;
    uint64_t surfaced_count() const;

private:
    DebounceRule rule_;
    mutable std::mutex mutex_;
    std::vector<Alert> alerts_;
    uint64_t next_id_ = 1;
    struct OpenSlot {
        size_t index;                // into alerts_
        TimestampNs last_event_ts;
    };
    std::map<std::pair<AnomalyKind, std::string>, OpenSlot> open_;
};

/// Appends one record per MetricPoint in the line text format:
///   <measurement>,<tag>=<v>,... <field>=<f>,... <ts_ns>
/// tags and fields sorted by key, reals with up to 9 significant digits.
std::string format_line(const MetricPoint& p);

/// Inverse of format_line; used by the round-trip property tests and the
/// replay tooling.
MetricPoint parse_line(const std::string& line);

struct SinkOverhead {
    double mean_ms = 0;
    double p99_ms = 0;
    size_t writes = 0;
};

/// Line-format sink over any ostream. Appends serialize internally; per-write
/// wall latency is recorded for the overhead report. I/O failures are counted
/// and never thrown past the write call.
class LineProtocolSink {
public:
    explicit LineProtocolSink(std::ostream& out) : out_(&out) {}

    void write_point(const MetricPoint& point);

    /// Requires at least 100 recorded writes.
    SinkOverhead sink_overhead() const;

    uint64_t write_count() const;
    uint64_t error_count() const;

private:
    std::ostream* out_;
    mutable std::mutex mutex_;
    std::vector<double> latencies_ms_;
    uint64_t errors_ = 0;
};

/// One scripted anomaly occurrence, the unit recall is scored against.
struct GroundTruthEvent {
    AnomalyKind kind = AnomalyKind::Vibration;
    TimestampNs ts_start = 0;
    TimestampNs ts_end = 0;
};

nlohmann::json to_json(const GroundTruthEvent& e);
GroundTruthEvent truth_event_from_json(const nlohmann::json& j);

/// Scripted VibrationBurst / FlapperDrift / DiverterShift windows mapped to
/// the anomaly kinds they must produce.
std::vector<GroundTruthEvent> truth_events_from_scenario(const Scenario& sc,
                                                         TimestampNs start_ts = 0);

struct KindScore {
    size_t tp = 0, fp = 0, fn = 0;
    double recall = 1.0;
    double precision = 1.0;
};

struct EvalReport {
    std::map<AnomalyKind, KindScore> per_kind;
    size_t tp = 0, fp = 0, fn = 0;
    double false_alarm_rate = 0;  // FP/(FP+TP) over surfaced alerts
    double presence_accuracy = 1.0;
    bool no_truth_events = false;  // recall conventionally 1.0 with FN=0
};

nlohmann::json to_json(const EvalReport& r);

/// Greedy one-to-one time-ordered matching: a surfaced alert is TP when a
/// same-kind scripted window overlaps [alert.ts - w, alert.ts + w]. Both
/// inputs must be time-ordered.
EvalReport evaluate(const std::vector<Alert>& alerts,
                    const std::vector<GroundTruthEvent>& truth, double match_window_s = 3.0);

/// Fraction of frames where the decided presence matches ground truth.
double presence_accuracy(const std::vector<bool>& decided, const std::vector<bool>& truth);

}  // namespace millwatch
