#include "millwatch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "millwatch/json_io.hpp"

namespace millwatch {

LatencyStats latency_stats(std::vector<double> samples_ms) {
    LatencyStats s;
    s.n = samples_ms.size();
    if (samples_ms.empty()) return s;
    std::sort(samples_ms.begin(), samples_ms.end());
    double sum = 0;
    for (double v : samples_ms) sum += v;
    s.mean_ms = sum / double(samples_ms.size());
    auto pct = [&](double q) {
        size_t idx = size_t(std::ceil(q * double(samples_ms.size())));
        return samples_ms[std::min(samples_ms.size() - 1, idx == 0 ? 0 : idx - 1)];
    };
    s.p50_ms = pct(0.50);
    s.p95_ms = pct(0.95);
    s.p99_ms = pct(0.99);
    return s;
}

nlohmann::json to_json(const RunReport& r) {
    nlohmann::json j{{"failed", r.failed},
                     {"failure", r.failure},
                     {"frames_acquired", r.frames_acquired},
                     {"frames_processed", r.frames_processed},
                     {"frames_dropped", r.frames_dropped},
                     {"invalid_frames", r.invalid_frames},
                     {"records_stored", r.records_stored},
                     {"clip_files", r.clip_files},
                     {"sink_errors", r.sink_errors},
                     {"alerts_surfaced", r.alerts_surfaced},
                     {"alerts_suppressed", r.alerts_suppressed},
                     {"events_gated", r.events_gated},
                     {"stale_publishes", r.stale_publishes},
                     {"reconnects", r.reconnects},
                     {"latency",
                      {{"mean_ms", r.latency.mean_ms},
                       {"p50_ms", r.latency.p50_ms},
                       {"p95_ms", r.latency.p95_ms},
                       {"p99_ms", r.latency.p99_ms},
                       {"n", r.latency.n}}},
                     {"sustained_fps", r.sustained_fps},
                     {"stage_mean_ms",
                      {{"detect", r.mean_detect_ms},
                       {"analytics", r.mean_analytics_ms},
                       {"alert", r.mean_alert_ms}}},
                     {"queue_conservation_ok", r.queue_conservation_ok},
                     {"timing_monotonic_ok", r.timing_monotonic_ok}};
    if (r.sink_overhead)
        j["sink_overhead"] = {{"mean_ms", r.sink_overhead->mean_ms},
                              {"p99_ms", r.sink_overhead->p99_ms},
                              {"writes", r.sink_overhead->writes}};
    return j;
}

double interval_presence_accuracy(const CameraRunResult& cam) {
    if (cam.gt_presence.empty()) return 1.0;
    std::vector<BilletInterval> intervals = cam.billet_intervals;
    if (cam.open_billet) intervals.push_back(*cam.open_billet);
    size_t ok = 0;
    for (const auto& [ts, truth] : cam.gt_presence) {
        bool decided = false;
        for (const auto& iv : intervals)
            if (ts >= iv.entry_ts && ts <= iv.exit_ts) {
                decided = true;
                break;
            }
        if (decided == truth) ++ok;
    }
    return double(ok) / double(cam.gt_presence.size());
}

namespace {

/// Replay records served through the FrameSource interface.
class VectorSource final : public FrameSource {
public:
    explicit VectorSource(std::vector<SimRecord> records) : records_(std::move(records)) {}
    std::optional<SimRecord> next() override {
        if (index_ >= records_.size()) return std::nullopt;
        return records_[index_++];
    }

private:
    std::vector<SimRecord> records_;
    size_t index_ = 0;
};

}  // namespace

struct PipelineRunner::WorkItem {
    SimRecord rec;
    StageTiming timing;
    std::vector<Detection> detections;
};

struct PipelineRunner::CameraState {
    CameraSetup setup;
    std::unique_ptr<FrameSource> source;
    std::shared_ptr<Detector> detector;
    double detector_latency_ms = 0;
    RodTrack track;
    VibrationMonitor vibration;
    BilletTracker billet;
    CameraRunResult result;
    LatestView latest;
    mutable std::mutex latest_mutex;
    std::unique_ptr<BoundedQueue<WorkItem>> detect_q;
    std::unique_ptr<BoundedQueue<WorkItem>> analytics_q;
    std::optional<SimRecord> pending;  // sync-mode lookahead
    std::atomic<uint64_t> dropped{0};
    std::atomic<uint64_t> invalid{0};
    TimestampNs last_second_metric = std::numeric_limits<TimestampNs>::min();
};

PipelineRunner::PipelineRunner(std::vector<CameraSetup> cameras, PipelineOptions options,
                               Clock& clock)
    : setups_(std::move(cameras)), opts_(std::move(options)), clock_(clock),
      engine_(DebounceRule{opts_.debounce_window_s}), bus_(opts_.staleness_limit_s) {
    if (setups_.empty()) throw std::invalid_argument("pipeline: no cameras configured");

    for (auto& setup : setups_) {
        auto cam = std::make_unique<CameraState>();
        cam->setup = setup;
        cam->track = RodTrack(setup.track);
        cam->vibration = VibrationMonitor(setup.vibration);
        cam->billet = BilletTracker(setup.billet);
        cam->result.camera_id = setup.camera_id;
        if (setup.use_replay) {
            cam->source = std::make_unique<VectorSource>(setup.replay);
        } else {
            SynthOptions so;
            so.camera_id = setup.camera_id;
            so.start_ts = opts_.start_ts;
            so.render = setup.render;
            so.geometry = setup.geometry;
            cam->source = std::make_unique<SynthSource>(setup.scenario, so);
        }
        if (opts_.detector_override) {
            cam->detector = opts_.detector_override;
        } else {
            OracleNoise noise = opts_.noise;
            cam->detector = std::make_shared<OracleDetector>(noise, setup.geometry);
        }
        if (!opts_.registry.empty()) {
            int profile = setup.use_replay ? (setup.replay.empty() ? 12 : setup.replay[0].frame.profile_mm)
                                           : setup.scenario.profile_mm;
            // Unsupported profiles must fail here, never mid-run.
            cam->detector_latency_ms = opts_.registry.select_model(profile).latency_model_ms;
        }
        cam->detect_q =
            std::make_unique<BoundedQueue<WorkItem>>(opts_.queue_capacity, opts_.detect_policy);
        cam->analytics_q =
            std::make_unique<BoundedQueue<WorkItem>>(opts_.queue_capacity, QueuePolicy::Block);
        cameras_.push_back(std::move(cam));
    }

    if (opts_.signal_feed == SignalFeedKind::FromScenario && !setups_[0].use_replay)
        signal_schedule_ = gen_signals(setups_[0].scenario, opts_.start_ts);
    else if (opts_.signal_feed == SignalFeedKind::Preloaded)
        signal_schedule_ = opts_.preloaded_signals;

    if (!opts_.clip_root.empty())
        segmenter_ = std::make_unique<ClipSegmenter>(opts_.clip_root, opts_.clip_len_s);

    if (!opts_.metrics_path.empty()) {
        metrics_file_ = std::make_unique<std::ofstream>(opts_.metrics_path);
        if (!*metrics_file_)
            throw std::runtime_error("cannot open metrics file: " + opts_.metrics_path);
        sink_ = std::make_unique<LineProtocolSink>(*metrics_file_);
    }

    for (const char* stage : {"acquisition", "detect", "analytics", "storage", "signals"})
        liveness_[stage] = std::make_shared<std::atomic<bool>>(false);
}

PipelineRunner::~PipelineRunner() = default;

void PipelineRunner::publish_due_signals(TimestampNs upto) {
    while (signals_published_ < signal_schedule_.size() &&
           signal_schedule_[signals_published_].signal_ts <= upto) {
        bus_.publish(signal_schedule_[signals_published_]);
        ++signals_published_;
    }
}

void PipelineRunner::emit_metric(const MetricPoint& p) {
    if (sink_) sink_->write_point(p);
    std::lock_guard lock(metrics_mutex_);
    memory_metrics_.push_back(p);
}

void PipelineRunner::store_record(const SimRecord& rec) {
    if (!segmenter_) return;
    nlohmann::json j{{"frame", to_json(rec.frame)}, {"ground_truth", to_json(rec.gt)}};
    segmenter_->record(j.dump(), rec.frame.ts_acquire, rec.frame.profile_mm, rec.frame.camera_id);
}

std::vector<Detection> PipelineRunner::run_detect(CameraState& cam, const SimRecord& rec) {
    try {
        validate_format(rec.frame);
    } catch (const std::exception&) {
        cam.invalid.fetch_add(1);
        return {};
    }
    const Frame* frame = &rec.frame;
    Frame converted;
    if (frame->pixel_format == PixelFormat::BayerRG8 && frame->has_pixels()) {
        converted = demosaic_rg8(*frame);
        frame = &converted;
    }
    return cam.detector->detect(*frame, rec.gt);
}

void PipelineRunner::process_frame(CameraState& cam, const SimRecord& rec, StageTiming timing,
                                   const std::vector<Detection>& detections) {
    const Frame& frame = rec.frame;
    const TimestampNs ts = frame.ts_acquire;
    std::string profile_tag = std::to_string(frame.profile_mm) + "mm";

    std::vector<AnomalyEvent> events;
    std::vector<MetricPoint> metrics;

    if (!opts_.null_analytics) {
        cam.track.update(frame.seq, detections);
        if (auto ev = cam.vibration.check(cam.track, frame.camera_id, frame.seq, ts))
            events.push_back(*ev);
        if (auto stats = cam.track.stats()) {
            metrics.push_back(make_metric_point(
                "rod_alignment", {{"camera_id", frame.camera_id}, {"profile", profile_tag}},
                {{"mean", stats->mean},
                 {"std", stats->std_dev},
                 {"min", stats->min},
                 {"max", stats->max},
                 {"n", double(stats->n)}},
                ts));
        }

        const Detection* flapper = nullptr;
        const Detection* diverter = nullptr;
        for (const auto& d : detections) {
            if (d.object_class == ObjectClass::Flapper &&
                (!flapper || d.confidence > flapper->confidence))
                flapper = &d;
            if (d.object_class == ObjectClass::Diverter &&
                (!diverter || d.confidence > diverter->confidence))
                diverter = &d;
        }
        if (flapper) {
            auto [disp, ev] = flapper_deviation(*flapper, cam.setup.flapper, frame.camera_id, ts);
            if (ev) events.push_back(*ev);
            metrics.push_back(make_metric_point(
                "flapper", {{"camera_id", frame.camera_id}, {"profile", profile_tag}},
                {{"displacement_px", disp}}, ts));
        }
        if (diverter) {
            auto [shift, ev] = diverter_shift_mm(*diverter, cam.setup.diverter, frame.camera_id, ts);
            if (ev) events.push_back(*ev);
            metrics.push_back(make_metric_point(
                "diverter", {{"camera_id", frame.camera_id}, {"profile", profile_tag}},
                {{"shift_mm", shift}}, ts));
        }

        bool rod_present = false;
        for (const auto& d : detections)
            if (d.object_class == ObjectClass::Rod && d.confidence >= 0.5) rod_present = true;
        auto billet = cam.billet.update(rod_present, frame.seq, ts, frame.camera_id);
        if (billet.event) events.push_back(*billet.event);
        if (billet.completed) {
            cam.result.billet_intervals.push_back(*billet.completed);
            metrics.push_back(make_metric_point(
                "billet", {{"camera_id", frame.camera_id}, {"profile", profile_tag}},
                {{"duration_s", billet.completed->duration_s()}}, ts));
        }

        // Synthetic operating temperature, once per simulated second.
        if (ts - cam.last_second_metric >= ns_per_s) {
            cam.last_second_metric = ts;
            double temp = 45.0 + 5.0 * std::sin(s_from_ns(ts) / 60.0);
            metrics.push_back(make_metric_point(
                "camera_health", {{"camera_id", frame.camera_id}, {"profile", profile_tag}},
                {{"temperature_c", temp}}, ts));
        }
        cam.result.gt_presence.emplace_back(ts, rec.gt.rod_present);
    }
    timing.t_analytics_done = clock_.now();

    auto reading = bus_.read(clock_.now());
    GateState gate = evaluate_gate(reading, ts);
    GatedOutput gated = apply_gate(gate, std::move(events), std::move(metrics));
    {
        std::lock_guard lock(report_mutex_);
        report_.events_gated += gated.gated_event_count;
    }
    for (const auto& ev : gated.events) {
        bool suppressed =
            suppress_dividing_cut(ev, reading.signals, opts_.suppress) == SuppressDecision::Suppressed;
        engine_.raise_alert(ev, suppressed);
    }
    for (const auto& m : gated.metrics) emit_metric(m);
    timing.t_alert_done = clock_.now();

    {
        std::lock_guard lock(cam.latest_mutex);
        cam.latest.valid = true;
        cam.latest.frame = frame;
        cam.latest.detections = detections;
        cam.latest.gate = gate;
    }
    cam.result.timings.push_back(timing);
    ++cam.result.frames_processed;
}

void PipelineRunner::run_sync() {
    auto* sim = dynamic_cast<SimClock*>(&clock_);
    for (auto& cam : cameras_) cam->pending = cam->source->next();
    for (auto& [name, alive] : liveness_) alive->store(true);
    while (true) {
        CameraState* next_cam = nullptr;
        for (auto& cam : cameras_) {
            if (!cam->pending) continue;
            if (!next_cam || cam->pending->frame.ts_acquire < next_cam->pending->frame.ts_acquire ||
                (cam->pending->frame.ts_acquire == next_cam->pending->frame.ts_acquire &&
                 cam->setup.camera_id < next_cam->setup.camera_id))
                next_cam = cam.get();
        }
        if (!next_cam) break;
        SimRecord rec = std::move(*next_cam->pending);
        next_cam->pending = next_cam->source->next();

        if (sim && rec.frame.ts_acquire > sim->now()) sim->set(rec.frame.ts_acquire);
        publish_due_signals(rec.frame.ts_acquire);

        ++next_cam->result.frames_acquired;
        StageTiming timing;
        timing.seq = rec.frame.seq;
        timing.t_acquire = clock_.now();
        store_record(rec);
        auto detections = run_detect(*next_cam, rec);
        timing.t_detect_done = clock_.now();
        process_frame(*next_cam, rec, timing, detections);
    }
    for (auto& [name, alive] : liveness_) alive->store(false);
}

void PipelineRunner::run_threaded() {
    BoundedQueue<SimRecord> storage_q(opts_.queue_capacity, opts_.storage_policy);
    std::atomic<size_t> acq_remaining{cameras_.size()};
    std::atomic<size_t> detect_remaining{cameras_.size()};

    std::vector<std::thread> threads;

    liveness_["signals"]->store(true);
    threads.emplace_back([&] {
        for (const auto& s : signal_schedule_) {
            TimestampNs wait = s.signal_ts - clock_.now();
            if (wait > 0) std::this_thread::sleep_for(std::chrono::nanoseconds(wait));
            if (!running_.load()) break;
            bus_.publish(s);
        }
        liveness_["signals"]->store(false);
    });

    liveness_["acquisition"]->store(true);
    liveness_["detect"]->store(true);
    liveness_["analytics"]->store(true);
    for (auto& cam_ptr : cameras_) {
        CameraState* cam = cam_ptr.get();
        threads.emplace_back([&, cam] {  // acquisition: pace and fan out
            while (auto rec = cam->source->next()) {
                TimestampNs wait = rec->frame.ts_acquire - clock_.now();
                if (wait > 0) std::this_thread::sleep_for(std::chrono::nanoseconds(wait));
                StageTiming timing;
                timing.seq = rec->frame.seq;
                timing.t_acquire = clock_.now();
                ++cam->result.frames_acquired;
                if (segmenter_) storage_q.enqueue(*rec, rec->frame.seq);
                auto res = cam->detect_q->enqueue(WorkItem{std::move(*rec), timing, {}},
                                                  timing.seq);
                if (res.dropped_seq) cam->dropped.fetch_add(1);
            }
            cam->detect_q->close();
            if (acq_remaining.fetch_sub(1) == 1) {
                liveness_["acquisition"]->store(false);
                if (!segmenter_) storage_q.close();
            }
        });
        threads.emplace_back([&, cam] {  // detect
            while (auto item = cam->detect_q->dequeue()) {
                item->detections = run_detect(*cam, item->rec);
                if (cam->detector_latency_ms > 0)
                    std::this_thread::sleep_for(
                        std::chrono::duration<double, std::milli>(cam->detector_latency_ms));
                item->timing.t_detect_done = clock_.now();
                uint64_t seq = item->timing.seq;
                cam->analytics_q->enqueue(std::move(*item), seq);
            }
            cam->analytics_q->close();
            if (detect_remaining.fetch_sub(1) == 1) liveness_["detect"]->store(false);
        });
        threads.emplace_back([&, cam] {  // analytics + alerting
            while (auto item = cam->analytics_q->dequeue())
                process_frame(*cam, item->rec, item->timing, item->detections);
        });
    }

    std::thread storage_thread;
    if (segmenter_) {
        liveness_["storage"]->store(true);
        storage_thread = std::thread([&] {
            while (auto rec = storage_q.dequeue()) {
                if (opts_.storage_delay_ns > 0)
                    std::this_thread::sleep_for(std::chrono::nanoseconds(opts_.storage_delay_ns));
                store_record(*rec);
            }
            liveness_["storage"]->store(false);
        });
    }

    // Acquisition threads finish first; closing queues cascades shutdown.
    for (auto& t : threads) t.join();
    liveness_["analytics"]->store(false);
    if (segmenter_) {
        storage_q.close();
        storage_thread.join();
    }
    if (!storage_q.conservation_holds()) report_.queue_conservation_ok = false;
}

RunReport PipelineRunner::run() {
    running_.store(true);
    try {
        if (opts_.wall_clock)
            run_threaded();
        else
            run_sync();
    } catch (const std::exception& e) {
        report_.failed = true;
        report_.failure = e.what();
    }
    finalize_report();
    running_.store(false);
    return snapshot_report();
}

void PipelineRunner::finalize_report() {
    std::lock_guard lock(report_mutex_);
    results_.clear();
    std::vector<double> e2e_ms;
    double sum_detect = 0, sum_analytics = 0, sum_alert = 0;
    size_t n_timed = 0;
    TimestampNs first_acquire = std::numeric_limits<TimestampNs>::max();
    TimestampNs last_done = std::numeric_limits<TimestampNs>::min();

    for (auto& cam : cameras_) {
        report_.frames_acquired += cam->result.frames_acquired;
        report_.frames_processed += cam->result.frames_processed;
        report_.frames_dropped += cam->dropped.load();
        report_.invalid_frames += cam->invalid.load();
        report_.reconnects += cam->source->reconnect_log().size();
        if (!cam->detect_q->conservation_holds() || !cam->analytics_q->conservation_holds())
            report_.queue_conservation_ok = false;
        size_t skip = std::min(opts_.warmup_frames, cam->result.timings.size());
        for (size_t i = 0; i < cam->result.timings.size(); ++i) {
            const auto& t = cam->result.timings[i];
            if (!t.monotonic()) report_.timing_monotonic_ok = false;
            first_acquire = std::min(first_acquire, t.t_acquire);
            last_done = std::max(last_done, t.t_alert_done);
            if (i < skip) continue;
            e2e_ms.push_back(double(t.end_to_end_ns()) / 1e6);
            sum_detect += double(t.t_detect_done - t.t_acquire) / 1e6;
            sum_analytics += double(t.t_analytics_done - t.t_detect_done) / 1e6;
            sum_alert += double(t.t_alert_done - t.t_analytics_done) / 1e6;
            ++n_timed;
        }
        cam->result.open_billet = cam->billet.open_interval();
        results_.push_back(std::move(cam->result));
    }

    report_.latency = latency_stats(std::move(e2e_ms));
    if (n_timed > 0) {
        report_.mean_detect_ms = sum_detect / double(n_timed);
        report_.mean_analytics_ms = sum_analytics / double(n_timed);
        report_.mean_alert_ms = sum_alert / double(n_timed);
    }
    if (last_done > first_acquire)
        report_.sustained_fps =
            double(report_.frames_processed) / s_from_ns(last_done - first_acquire);

    report_.alerts_surfaced = 0;
    report_.alerts_suppressed = 0;
    for (const auto& a : engine_.all_alerts())
        (a.suppressed ? report_.alerts_suppressed : report_.alerts_surfaced) += 1;
    report_.stale_publishes = bus_.stale_publish_count();
    if (segmenter_) {
        segmenter_->close();
        report_.records_stored = segmenter_->records_written();
        report_.clip_files = segmenter_->files().size();
        report_.sink_errors += segmenter_->io_errors();
    }
    if (sink_) {
        report_.sink_errors += sink_->error_count();
        if (sink_->write_count() >= 100) report_.sink_overhead = sink_->sink_overhead();
    }
    if (metrics_file_) metrics_file_->flush();
    write_alerts_file();
}

void PipelineRunner::write_alerts_file() {
    if (opts_.alerts_path.empty()) return;
    std::ofstream out(opts_.alerts_path);
    if (!out) {
        ++report_.sink_errors;
        return;
    }
    for (const auto& a : engine_.all_alerts()) out << to_json(a).dump() << '\n';
}

LatestView PipelineRunner::latest(const std::string& camera_id) const {
    for (const auto& cam : cameras_) {
        if (cam->setup.camera_id != camera_id) continue;
        std::lock_guard lock(cam->latest_mutex);
        return cam->latest;
    }
    return {};
}

std::vector<std::string> PipelineRunner::camera_ids() const {
    std::vector<std::string> out;
    for (const auto& cam : cameras_) out.push_back(cam->setup.camera_id);
    return out;
}

std::vector<Alert> PipelineRunner::surfaced_alerts(size_t limit) const {
    auto all = engine_.surfaced_alerts();
    if (all.size() > limit) all.erase(all.begin(), all.end() - ptrdiff_t(limit));
    return all;
}

RunReport PipelineRunner::snapshot_report() const {
    std::lock_guard lock(report_mutex_);
    return report_;
}

std::map<std::string, bool> PipelineRunner::stage_liveness() const {
    std::map<std::string, bool> out;
    for (const auto& [name, alive] : liveness_) out[name] = alive->load();
    return out;
}

}  // namespace millwatch
