#include "millwatch/alertstore.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include "millwatch/json_io.hpp"

namespace millwatch {

RaiseResult AlertEngine::raise_alert(const AnomalyEvent& event, bool suppressed) {
    std::lock_guard lock(mutex_);
    if (!suppressed) {
        auto key = std::make_pair(event.kind, event.camera_id);
        auto it = open_.find(key);
        if (it != open_.end() &&
            event.ts - it->second.last_event_ts <= ns_from_s(rule_.window_s)) {
            Alert& open = alerts_[it->second.index];
            open.coalesced_count += 1;
            it->second.last_event_ts = event.ts;
            return Coalesced{open.alert_id};
        }
    }
    Alert a;
    a.event = event;
    a.alert_id = next_id_++;
    a.raised_ts = event.ts;
    a.suppressed = suppressed;
    a.coalesced_count = 1;
    alerts_.push_back(a);
    if (!suppressed)
        open_[{event.kind, event.camera_id}] = {alerts_.size() - 1, event.ts};
    return NewAlert{a};
}

std::vector<Alert> AlertEngine::all_alerts() const {
    std::lock_guard lock(mutex_);
    return alerts_;
}

std::vector<Alert> AlertEngine::surfaced_alerts() const {
    std::lock_guard lock(mutex_);
    std::vector<Alert> out;
    for (const auto& a : alerts_)
        if (!a.suppressed) out.push_back(a);
    return out;
}

uint64_t AlertEngine::surfaced_count() const {
    std::lock_guard lock(mutex_);
    uint64_t n = 0;
    for (const auto& a : alerts_)
        if (!a.suppressed) ++n;
    return n;
}

static std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string format_line(const MetricPoint& p) {
    std::string line = p.measurement;
    for (const auto& [k, v] : p.tags) {  // std::map iterates key-sorted
        line += ',';
        line += k;
        line += '=';
        line += v;
    }
    line += ' ';
    bool first = true;
    for (const auto& [k, v] : p.fields) {
        if (!first) line += ',';
        first = false;
        line += k;
        line += '=';
        line += format_real(v);
    }
    line += ' ';
    line += std::to_string(p.ts);
    return line;
}

MetricPoint parse_line(const std::string& line) {
    size_t sp1 = line.find(' ');
    size_t sp2 = line.rfind(' ');
    if (sp1 == std::string::npos || sp2 == sp1)
        throw std::invalid_argument("line format: expected three space-separated sections");
    std::string head = line.substr(0, sp1);
    std::string fieldstr = line.substr(sp1 + 1, sp2 - sp1 - 1);
    std::string tsstr = line.substr(sp2 + 1);

    std::map<std::string, std::string> tags;
    size_t comma = head.find(',');
    std::string measurement = head.substr(0, comma);
    while (comma != std::string::npos) {
        size_t next = head.find(',', comma + 1);
        std::string kv = head.substr(comma + 1, next == std::string::npos ? next : next - comma - 1);
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("line format: tag without '='");
        tags[kv.substr(0, eq)] = kv.substr(eq + 1);
        comma = next;
    }

    std::map<std::string, double> fields;
    size_t pos = 0;
    while (pos < fieldstr.size()) {
        size_t next = fieldstr.find(',', pos);
        std::string kv = fieldstr.substr(pos, next == std::string::npos ? next : next - pos);
        size_t eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("line format: field without '='");
        fields[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        pos = next == std::string::npos ? fieldstr.size() : next + 1;
    }
    return make_metric_point(measurement, std::move(tags), std::move(fields),
                             std::stoll(tsstr));
}

void LineProtocolSink::write_point(const MetricPoint& point) {
    std::string line = format_line(point);
    auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    {
        std::lock_guard lock(mutex_);
        *out_ << line << '\n';
        ok = out_->good();
        if (!ok) {
            ++errors_;
            out_->clear();
        }
    }
    auto t1 = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    std::lock_guard lock(mutex_);
    latencies_ms_.push_back(ms);
}

SinkOverhead LineProtocolSink::sink_overhead() const {
    std::lock_guard lock(mutex_);
    if (latencies_ms_.size() < 100)
        throw std::runtime_error("sink_overhead: insufficient samples (" +
                                 std::to_string(latencies_ms_.size()) + " < 100)");
    std::vector<double> sorted = latencies_ms_;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0;
    for (double v : sorted) sum += v;
    SinkOverhead o;
    o.writes = sorted.size();
    o.mean_ms = sum / double(sorted.size());
    o.p99_ms = sorted[size_t(std::ceil(0.99 * double(sorted.size()))) - 1];
    return o;
}

uint64_t LineProtocolSink::write_count() const {
    std::lock_guard lock(mutex_);
    return latencies_ms_.size();
}

uint64_t LineProtocolSink::error_count() const {
    std::lock_guard lock(mutex_);
    return errors_;
}

nlohmann::json to_json(const GroundTruthEvent& e) {
    return nlohmann::json{
        {"kind", to_string(e.kind)}, {"ts_start", e.ts_start}, {"ts_end", e.ts_end}};
}

GroundTruthEvent truth_event_from_json(const nlohmann::json& j) {
    GroundTruthEvent e;
    e.kind = anomaly_kind_from_string(j.at("kind").get<std::string>());
    e.ts_start = j.at("ts_start").get<TimestampNs>();
    e.ts_end = j.at("ts_end").get<TimestampNs>();
    return e;
}

std::vector<GroundTruthEvent> truth_events_from_scenario(const Scenario& sc, TimestampNs start_ts) {
    std::vector<GroundTruthEvent> out;
    for (const auto& e : sc.events) {
        std::optional<AnomalyKind> kind;
        switch (e.kind) {
            case ScriptEventKind::VibrationBurst: kind = AnomalyKind::Vibration; break;
            case ScriptEventKind::FlapperDrift: kind = AnomalyKind::FlapperDeviation; break;
            case ScriptEventKind::DiverterShift: kind = AnomalyKind::DiverterShift; break;
            default: break;
        }
        if (kind)
            out.push_back({*kind, start_ts + ns_from_s(e.t_start_s), start_ts + ns_from_s(e.t_end_s)});
    }
    return out;
}

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per_kind = nlohmann::json::object();
    for (const auto& [kind, s] : r.per_kind)
        per_kind[to_string(kind)] = {{"tp", s.tp},
                                     {"fp", s.fp},
                                     {"fn", s.fn},
                                     {"recall", s.recall},
                                     {"precision", s.precision}};
    return nlohmann::json{{"per_kind", per_kind},
                          {"tp", r.tp},
                          {"fp", r.fp},
                          {"fn", r.fn},
                          {"false_alarm_rate", r.false_alarm_rate},
                          {"presence_accuracy", r.presence_accuracy},
                          {"no_truth_events", r.no_truth_events}};
}

EvalReport evaluate(const std::vector<Alert>& alerts, const std::vector<GroundTruthEvent>& truth,
                    double match_window_s) {
    TimestampNs w = ns_from_s(match_window_s);
    EvalReport r;
    std::vector<bool> truth_matched(truth.size(), false);

    for (const auto& a : alerts) {
        if (a.suppressed) continue;  // never surfaced, excluded from the math
        auto kind = a.event.kind;
        r.per_kind.try_emplace(kind);
        // Earliest-deadline choice among overlapping unmatched windows; with
        // alerts in time order this greedy matching is maximum-cardinality.
        size_t best = truth.size();
        for (size_t i = 0; i < truth.size(); ++i) {
            if (truth_matched[i] || truth[i].kind != kind) continue;
            // interval overlap with [ts - w, ts + w]
            if (truth[i].ts_start <= a.event.ts + w && truth[i].ts_end >= a.event.ts - w &&
                (best == truth.size() || truth[i].ts_end < truth[best].ts_end))
                best = i;
        }
        bool matched = best != truth.size();
        if (matched) truth_matched[best] = true;
        auto& s = r.per_kind[kind];
        if (matched)
            ++s.tp;
        else
            ++s.fp;
    }
    for (size_t i = 0; i < truth.size(); ++i) {
        r.per_kind.try_emplace(truth[i].kind);
        if (!truth_matched[i]) ++r.per_kind[truth[i].kind].fn;
    }
    for (auto& [kind, s] : r.per_kind) {
        s.recall = (s.tp + s.fn) ? double(s.tp) / double(s.tp + s.fn) : 1.0;
        s.precision = (s.tp + s.fp) ? double(s.tp) / double(s.tp + s.fp) : 1.0;
        r.tp += s.tp;
        r.fp += s.fp;
        r.fn += s.fn;
    }
    r.false_alarm_rate = (r.fp + r.tp) ? double(r.fp) / double(r.fp + r.tp) : 0.0;
    r.no_truth_events = truth.empty();
    return r;
}

double presence_accuracy(const std::vector<bool>& decided, const std::vector<bool>& truth) {
    if (decided.size() != truth.size())
        throw std::invalid_argument("presence_accuracy: size mismatch");
    if (decided.empty()) return 1.0;
    size_t ok = 0;
    for (size_t i = 0; i < decided.size(); ++i)
        if (decided[i] == truth[i]) ++ok;
    return double(ok) / double(decided.size());
}

}  // namespace millwatch
