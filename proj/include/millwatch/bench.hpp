#pragma once

#include "millwatch/pipeline.hpp"

namespace millwatch {

struct LatencyReport {
    size_t frames = 0;
    double mean_ms = 0, p50_ms = 0, p95_ms = 0, p99_ms = 0;
    double sustained_fps = 0;
    double mean_detect_ms = 0, mean_analytics_ms = 0, mean_alert_ms = 0;
    uint64_t dropped = 0;
    size_t warmup_frames = 0;  // excluded from the stats above
    std::optional<SinkOverhead> sink_overhead;
    bool failed = false;
    std::string failure;
};

nlohmann::json to_json(const LatencyReport& r);

struct BenchOptions {
    OracleNoise noise;
    DetectorRegistry registry;  // supplies latency_model_ms when nonempty
    std::string metrics_path;   // sink under measurement; empty = in-memory only
    size_t queue_capacity = 128;
    QueuePolicy detect_policy = QueuePolicy::DropOldest;
    size_t warmup_frames = 100;
    std::shared_ptr<Detector> detector_override;
    bool null_analytics = false;
};

/// Full-pipeline wall-clock measurement over the scenario, resized to exactly
/// n_frames. Requires n_frames >= 1000 for percentile validity.
LatencyReport measure(Scenario scenario, size_t n_frames, const BenchOptions& opts = {});

}  // namespace millwatch
