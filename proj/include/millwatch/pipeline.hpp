#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <thread>

#include "millwatch/alertstore.hpp"
#include "millwatch/analytics.hpp"
#include "millwatch/clip.hpp"
#include "millwatch/clock.hpp"
#include "millwatch/detect.hpp"
#include "millwatch/fusion.hpp"
#include "millwatch/queue.hpp"
#include "millwatch/simsource.hpp"

namespace millwatch {

struct StageTiming {
    uint64_t seq = 0;
    TimestampNs t_acquire = 0;
    TimestampNs t_detect_done = 0;
    TimestampNs t_analytics_done = 0;
    TimestampNs t_alert_done = 0;

    TimestampNs end_to_end_ns() const { return t_alert_done - t_acquire; }
    bool monotonic() const {
        return t_acquire <= t_detect_done && t_detect_done <= t_analytics_done &&
               t_analytics_done <= t_alert_done;
    }
};

struct LatencyStats {
    double mean_ms = 0, p50_ms = 0, p95_ms = 0, p99_ms = 0;
    size_t n = 0;
};

/// Exact percentiles by sort; desk-scale sample counts.
LatencyStats latency_stats(std::vector<double> samples_ms);

struct RunReport {
    bool failed = false;
    std::string failure;
    uint64_t frames_acquired = 0;
    uint64_t frames_processed = 0;
    uint64_t frames_dropped = 0;
    uint64_t invalid_frames = 0;
    uint64_t records_stored = 0;
    uint64_t clip_files = 0;
    uint64_t sink_errors = 0;
    uint64_t alerts_surfaced = 0;
    uint64_t alerts_suppressed = 0;
    uint64_t events_gated = 0;
    uint64_t stale_publishes = 0;
    uint64_t reconnects = 0;
    LatencyStats latency;
    double sustained_fps = 0;
    double mean_detect_ms = 0, mean_analytics_ms = 0, mean_alert_ms = 0;
    std::optional<SinkOverhead> sink_overhead;
    bool queue_conservation_ok = true;
    bool timing_monotonic_ok = true;
};

nlohmann::json to_json(const RunReport& r);

/// Everything one camera's pipeline instance needs.
struct CameraSetup {
    std::string camera_id = "cam1";
    Scenario scenario;
    std::vector<SimRecord> replay;  // used instead of scenario when set
    bool use_replay = false;
    bool render = false;
    SceneGeometry geometry;
    RodTrackConfig track;
    VibrationCheckConfig vibration;
    FlapperBaseline flapper;
    DiverterCalibration diverter;
    BilletConfig billet;
};

enum class SignalFeedKind { FromScenario, Preloaded, External };

struct PipelineOptions {
    size_t queue_capacity = 128;
    QueuePolicy detect_policy = QueuePolicy::DropOldest;  // freshness over completeness
    QueuePolicy storage_policy = QueuePolicy::Block;      // storage loses nothing
    std::filesystem::path clip_root;                      // empty: storage disabled
    double clip_len_s = 120.0;
    std::string metrics_path;  // empty: in-memory only
    std::string alerts_path;
    OracleNoise noise;
    DetectorRegistry registry;
    double debounce_window_s = 10.0;
    SuppressConfig suppress;
    double staleness_limit_s = 5.0;
    SignalFeedKind signal_feed = SignalFeedKind::FromScenario;
    std::vector<ProcessSignals> preloaded_signals;
    bool wall_clock = false;  // threaded, paced run; otherwise deterministic sync run
    TimestampNs start_ts = 0;
    size_t warmup_frames = 0;  // excluded from latency stats
    TimestampNs storage_delay_ns = 0;         // test hook: slow storage consumer
    std::shared_ptr<Detector> detector_override;
    bool null_analytics = false;  // test hook: measure harness floor
};

struct CameraRunResult {
    std::string camera_id;
    std::vector<StageTiming> timings;
    std::vector<std::pair<TimestampNs, bool>> gt_presence;  // (ts, rod_present)
    std::vector<BilletInterval> billet_intervals;
    std::optional<BilletInterval> open_billet;  // entered but not exited at EOF
    uint64_t frames_acquired = 0;
    uint64_t frames_processed = 0;
};

/// Frame's ts is "present" iff it falls inside a completed (or the open)
/// billet interval; scored against ground truth per frame.
double interval_presence_accuracy(const CameraRunResult& cam);

/// Snapshot of the newest processed frame for the HTTP stream.
struct LatestView {
    bool valid = false;
    Frame frame;
    std::vector<Detection> detections;
    GateState gate;
};

class PipelineRunner {
public:
    PipelineRunner(std::vector<CameraSetup> cameras, PipelineOptions options, Clock& clock);
    ~PipelineRunner();

    /// Blocking; returns when every source is exhausted and sinks are flushed.
    RunReport run();

    // Live state, safe to call concurrently with run().
    LatestView latest(const std::string& camera_id) const;
    std::vector<std::string> camera_ids() const;
    std::vector<Alert> surfaced_alerts(size_t limit) const;
    AlertEngine& alert_engine() { return engine_; }
    SignalBus& signal_bus() { return bus_; }
    RunReport snapshot_report() const;
    std::map<std::string, bool> stage_liveness() const;
    bool running() const { return running_.load(); }

    const std::vector<CameraRunResult>& camera_results() const { return results_; }
    const std::vector<MetricPoint>& metric_points() const { return memory_metrics_; }

private:
    struct CameraState;
    struct WorkItem;

    void run_sync();
    void run_threaded();
    void process_frame(CameraState& cam, const SimRecord& rec, StageTiming timing,
                       const std::vector<Detection>& detections);
    std::vector<Detection> run_detect(CameraState& cam, const SimRecord& rec);
    void store_record(const SimRecord& rec);
    void publish_due_signals(TimestampNs upto);
    void finalize_report();
    void emit_metric(const MetricPoint& p);
    void write_alerts_file();

    std::vector<CameraSetup> setups_;
    PipelineOptions opts_;
    Clock& clock_;
    AlertEngine engine_;
    SignalBus bus_;
    std::vector<ProcessSignals> signal_schedule_;
    size_t signals_published_ = 0;
    std::unique_ptr<ClipSegmenter> segmenter_;
    std::unique_ptr<std::ofstream> metrics_file_;
    std::unique_ptr<LineProtocolSink> sink_;
    std::vector<MetricPoint> memory_metrics_;
    std::mutex metrics_mutex_;
    std::vector<std::unique_ptr<CameraState>> cameras_;
    std::vector<CameraRunResult> results_;
    RunReport report_;
    mutable std::mutex report_mutex_;
    std::atomic<bool> running_{false};
    std::map<std::string, std::shared_ptr<std::atomic<bool>>> liveness_;
};

class NullDetector final : public Detector {
public:
    std::vector<Detection> detect(const Frame&, const GroundTruthRecord&) override { return {}; }
};

}  // namespace millwatch
