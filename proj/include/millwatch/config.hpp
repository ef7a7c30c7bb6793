#pragma once

#include <optional>
#include <string>
#include <vector>

#include "millwatch/pipeline.hpp"

namespace millwatch {

struct CameraConfig {
    std::string camera_id;
    std::string source;  // "synth:<scenario.json>" or "replay:<file.ndjson>"
    int profile_mm = 12;
    bool render = false;
    double vibration_std_px = 15.0;
    double flapper_px = 20.0;
    double diverter_mm = 5.0;
    double mm_per_px = 0.5;
    double reference_x = 600.0;
    double flapper_x = 400.0;
    double flapper_y = 300.0;
    size_t window = 30;
    size_t gap_tolerance = 5;
    size_t n_on = 3;
    size_t n_off = 5;
    double nominal_duration_s = 9.0;
    double short_factor = 0.8;
    double long_factor = 1.25;
};

struct DetectorConfig {
    std::string name;
    std::vector<int> profiles;
    double latency_model_ms = 0;
};

struct SignalFeedConfig {
    std::string type = "scenario";  // scenario | ndjson | tcp
    std::string path;               // ndjson
    int port = 0;                   // tcp
};

struct HttpConfig {
    std::string bind = "127.0.0.1";
    int port = 8080;
};

struct RunConfig {
    uint64_t seed = 0;
    bool wall_clock = false;
    double clip_len_s = 120.0;
    std::string clip_root;
    std::string metrics_path = "metrics.lp";
    std::string alerts_path = "alerts.ndjson";
    size_t queue_capacity = 128;
    QueuePolicy detect_policy = QueuePolicy::DropOldest;
    QueuePolicy storage_policy = QueuePolicy::Block;
    double debounce_window_s = 10.0;
    bool suppression_enabled = true;
    double suppress_grace_s = 2.0;
    double staleness_limit_s = 5.0;
    double match_window_s = 3.0;
    SignalFeedConfig signal_feed;
    std::optional<HttpConfig> http;
    OracleNoise noise;
    std::vector<DetectorConfig> detectors;
    std::vector<CameraConfig> cameras;
};

/// Strict load: unknown keys rejected by name, all missing required keys
/// reported in one pass, every invariant violation names the offending key.
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");

nlohmann::json to_json(const RunConfig& c);

bool operator==(const RunConfig& a, const RunConfig& b);

/// Materializes camera setups (loading scenario/replay files) and pipeline
/// options from a validated config.
std::pair<std::vector<CameraSetup>, PipelineOptions> build_pipeline(const RunConfig& cfg);

/// NDJSON signal file, one ProcessSignals object per line.
std::vector<ProcessSignals> read_signals_ndjson(const std::string& path);

}  // namespace millwatch
