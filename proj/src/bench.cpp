#include "millwatch/bench.hpp"

namespace millwatch {

nlohmann::json to_json(const LatencyReport& r) {
    nlohmann::json j{{"frames", r.frames},
                     {"mean_ms", r.mean_ms},
                     {"p50_ms", r.p50_ms},
                     {"p95_ms", r.p95_ms},
                     {"p99_ms", r.p99_ms},
                     {"sustained_fps", r.sustained_fps},
                     {"stage_mean_ms",
                      {{"detect", r.mean_detect_ms},
                       {"analytics", r.mean_analytics_ms},
                       {"alert", r.mean_alert_ms}}},
                     {"dropped", r.dropped},
                     {"warmup_frames", r.warmup_frames},
                     {"failed", r.failed},
                     {"failure", r.failure}};
    if (r.sink_overhead)
        j["sink_overhead"] = {{"mean_ms", r.sink_overhead->mean_ms},
                              {"p99_ms", r.sink_overhead->p99_ms},
                              {"writes", r.sink_overhead->writes}};
    return j;
}

LatencyReport measure(Scenario scenario, size_t n_frames, const BenchOptions& opts) {
    if (n_frames < 1000)
        throw std::invalid_argument("bench: insufficient samples (n_frames " +
                                    std::to_string(n_frames) + " < 1000)");
    scenario.duration_s = double(n_frames) / scenario.fps;
    validate_scenario(scenario);

    CameraSetup setup;
    setup.camera_id = "bench";
    setup.scenario = scenario;

    PipelineOptions popts;
    popts.queue_capacity = opts.queue_capacity;
    popts.detect_policy = opts.detect_policy;
    popts.metrics_path = opts.metrics_path;
    popts.noise = opts.noise;
    popts.registry = opts.registry;
    popts.wall_clock = true;
    popts.warmup_frames = std::min(opts.warmup_frames, n_frames - 1);
    popts.detector_override = opts.detector_override;
    popts.null_analytics = opts.null_analytics;

    WallClock clock;
    popts.start_ts = clock.now() + 50'000'000;  // let the stages spin up

    PipelineRunner runner({std::move(setup)}, std::move(popts), clock);
    RunReport rr = runner.run();

    LatencyReport r;
    r.frames = rr.latency.n;  // measured frames, warmup excluded
    r.mean_ms = rr.latency.mean_ms;
    r.p50_ms = rr.latency.p50_ms;
    r.p95_ms = rr.latency.p95_ms;
    r.p99_ms = rr.latency.p99_ms;
    r.sustained_fps = rr.sustained_fps;
    r.mean_detect_ms = rr.mean_detect_ms;
    r.mean_analytics_ms = rr.mean_analytics_ms;
    r.mean_alert_ms = rr.mean_alert_ms;
    r.dropped = rr.frames_dropped;
    r.warmup_frames = opts.warmup_frames;
    r.sink_overhead = rr.sink_overhead;
    r.failed = rr.failed;
    r.failure = rr.failure;
    return r;
}

}  // namespace millwatch
