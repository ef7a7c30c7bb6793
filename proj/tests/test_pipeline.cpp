#include <doctest.h>

#include <filesystem>
#include <set>

#include "millwatch/pipeline.hpp"

using namespace millwatch;
namespace fs = std::filesystem;

namespace {

Scenario burst_scenario() {
    Scenario sc;
    sc.fps = 30;
    sc.duration_s = 4;
    sc.events = {{ScriptEventKind::VibrationBurst, 0.5, 3.5, {{"amplitude_px", 30.0}}}};
    return sc;
}

CameraSetup cam_with(Scenario sc, const std::string& id = "cam1") {
    CameraSetup cam;
    cam.camera_id = id;
    cam.scenario = std::move(sc);
    return cam;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("latency_stats exact percentiles") {
    std::vector<double> v;
    for (int i = 100; i >= 1; --i) v.push_back(double(i));  // unsorted on purpose
    auto s = latency_stats(v);
    CHECK(s.n == 100);
    CHECK(s.mean_ms == doctest::Approx(50.5));
    CHECK(s.p50_ms == 50);
    CHECK(s.p95_ms == 95);
    CHECK(s.p99_ms == 99);

    auto empty = latency_stats({});
    CHECK(empty.n == 0);
    CHECK(empty.mean_ms == 0);

    auto one = latency_stats({7.0});
    CHECK(one.p50_ms == 7.0);
    CHECK(one.p99_ms == 7.0);
}

TEST_CASE("sync run conserves every frame of a 90-frame scenario") {
    Scenario sc;
    sc.fps = 45;
    sc.duration_s = 2;
    SimClock clk;
    PipelineRunner runner({cam_with(sc)}, {}, clk);
    auto report = runner.run();
    CHECK(!report.failed);
    CHECK(report.frames_acquired == 90);
    CHECK(report.frames_processed == 90);
    CHECK(report.frames_dropped == 0);
    CHECK(report.invalid_frames == 0);
    CHECK(report.queue_conservation_ok);
    CHECK(report.timing_monotonic_ok);
    REQUIRE(runner.camera_results().size() == 1);
    CHECK(runner.camera_results()[0].timings.size() == 90);
}

TEST_CASE("sync runs are bit-identical for the same scenario and seed") {
    auto run_once = [] {
        auto sc = burst_scenario();
        PipelineOptions opts;
        opts.noise.center_noise_px = 2.0;
        opts.noise.miss_rate = 0.05;
        opts.noise.fp_rate = 0.05;
        opts.noise.seed = 77;
        SimClock clk;
        PipelineRunner runner({cam_with(sc)}, opts, clk);
        runner.run();
        std::vector<std::string> lines;
        for (const auto& p : runner.metric_points()) lines.push_back(format_line(p));
        std::vector<std::pair<TimestampNs, AnomalyKind>> alerts;
        for (const auto& a : runner.alert_engine().all_alerts())
            alerts.emplace_back(a.event.ts, a.event.kind);
        return std::make_pair(lines, alerts);
    };
    auto a = run_once();
    auto b = run_once();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
    CHECK(!a.first.empty());
}

TEST_CASE("a scripted vibration burst surfaces a Vibration alert") {
    SimClock clk;
    PipelineRunner runner({cam_with(burst_scenario())}, {}, clk);
    auto report = runner.run();
    CHECK(report.alerts_surfaced >= 1);
    bool vibration = false;
    for (const auto& a : runner.alert_engine().surfaced_alerts())
        if (a.event.kind == AnomalyKind::Vibration) vibration = true;
    CHECK(vibration);
    CHECK(report.events_gated == 0);
}

TEST_CASE("clip file count matches an independent boundary enumeration") {
    TempDir dir("millwatch_pipe_clips");
    Scenario sc;
    sc.fps = 10;
    sc.duration_s = 5;
    PipelineOptions opts;
    opts.clip_root = dir.path;
    opts.clip_len_s = 2.0;
    opts.start_ts = ns_from_s(1700000000.0);
    SimClock clk;
    PipelineRunner runner({cam_with(sc)}, opts, clk);
    auto report = runner.run();
    CHECK(!report.failed);
    CHECK(report.records_stored == 50);
    CHECK(report.sink_errors == 0);

    // independent oracle: distinct 2-second buckets covered by the frame times
    TimestampNs period = ns_from_s(1.0 / sc.fps);
    std::set<int64_t> buckets;
    for (int i = 0; i < 50; ++i) {
        int64_t sec = (opts.start_ts + i * period) / ns_per_s;
        buckets.insert(sec - sec % 2);
    }
    CHECK(report.clip_files == buckets.size());

    size_t on_disk = 0;
    for (auto it = fs::recursive_directory_iterator(dir.path);
         it != fs::recursive_directory_iterator(); ++it)
        if (it->is_regular_file()) ++on_disk;
    CHECK(on_disk == buckets.size());
}

TEST_CASE("unwritable clip root degrades to counted errors") {
    Scenario sc;
    sc.fps = 10;
    sc.duration_s = 1;
    PipelineOptions opts;
    opts.clip_root = "/proc/millwatch_cannot_write";
    SimClock clk;
    PipelineRunner runner({cam_with(sc)}, opts, clk);
    auto report = runner.run();
    CHECK(!report.failed);
    CHECK(report.records_stored == 0);
    CHECK(report.sink_errors > 0);
    CHECK(report.frames_processed == 10);
}

TEST_CASE("idle plant signals gate all events but metrics keep flowing") {
    PipelineOptions opts;
    opts.signal_feed = SignalFeedKind::Preloaded;
    ProcessSignals idle;
    idle.mill_running = false;
    idle.signal_ts = 0;
    opts.preloaded_signals = {idle};
    SimClock clk;
    PipelineRunner runner({cam_with(burst_scenario())}, opts, clk);
    auto report = runner.run();
    CHECK(report.alerts_surfaced == 0);
    CHECK(report.events_gated >= 1);
    bool tagged = false;
    for (const auto& p : runner.metric_points()) {
        auto it = p.tags.find("gate");
        if (it != p.tags.end() && it->second == "paused") tagged = true;
    }
    CHECK(tagged);
    CHECK(!runner.metric_points().empty());
}

TEST_CASE("unsupported profile fails at construction, not mid-run") {
    Scenario sc;
    sc.fps = 10;
    sc.duration_s = 1;
    sc.profile_mm = 12;
    PipelineOptions opts;
    opts.registry.add({"A", {16, 20, 40}, 0});
    SimClock clk;
    CHECK_THROWS_AS(PipelineRunner({cam_with(sc)}, opts, clk), std::invalid_argument);
}

TEST_CASE("interval presence accuracy scores frames against intervals") {
    CameraRunResult cam;
    cam.billet_intervals = {{ns_from_s(1), ns_from_s(3)}};
    for (int t = 0; t < 5; ++t)
        cam.gt_presence.emplace_back(ns_from_s(double(t)), t >= 1 && t <= 3);
    CHECK(interval_presence_accuracy(cam) == doctest::Approx(1.0));

    cam.gt_presence.emplace_back(ns_from_s(4.5), true);  // missed by the tracker
    CHECK(interval_presence_accuracy(cam) == doctest::Approx(5.0 / 6.0));

    CameraRunResult open_case;
    open_case.open_billet = BilletInterval{ns_from_s(0), ns_from_s(2)};
    open_case.gt_presence = {{ns_from_s(1), true}, {ns_from_s(3), false}};
    CHECK(interval_presence_accuracy(open_case) == doctest::Approx(1.0));

    CameraRunResult empty;
    CHECK(interval_presence_accuracy(empty) == 1.0);
}

TEST_CASE("threaded wall-clock run drains cleanly across two cameras") {
    Scenario sc;
    sc.fps = 200;
    sc.duration_s = 1;
    PipelineOptions opts;
    opts.wall_clock = true;
    WallClock clk;
    opts.start_ts = clk.now() + ns_from_s(0.05);
    PipelineRunner runner({cam_with(sc, "cam1"), cam_with(sc, "cam2")}, opts, clk);
    auto report = runner.run();
    CHECK(!report.failed);
    CHECK(report.frames_acquired == 400);
    CHECK(report.frames_processed + report.frames_dropped == report.frames_acquired);
    CHECK(report.queue_conservation_ok);
    CHECK(report.timing_monotonic_ok);
    CHECK(report.sustained_fps > 0);
    CHECK(!runner.running());
}

TEST_CASE("a slow storage consumer never loses records with a blocking queue") {
    TempDir dir("millwatch_pipe_slow_store");
    Scenario sc;
    sc.fps = 100;
    sc.duration_s = 0.5;
    PipelineOptions opts;
    opts.wall_clock = true;
    opts.clip_root = dir.path;
    opts.queue_capacity = 8;
    opts.storage_policy = QueuePolicy::Block;
    opts.storage_delay_ns = ns_from_s(0.002);  // 2 ms per record, slower than 10 ms worth of frames
    WallClock clk;
    opts.start_ts = clk.now() + ns_from_s(0.02);
    PipelineRunner runner({cam_with(sc)}, opts, clk);
    auto report = runner.run();
    CHECK(!report.failed);
    CHECK(report.records_stored == report.frames_acquired);
    CHECK(report.queue_conservation_ok);
}

TEST_CASE("latest view reflects the last processed frame and gate") {
    SimClock clk;
    Scenario sc;
    sc.fps = 10;
    sc.duration_s = 2;
    PipelineRunner runner({cam_with(sc)}, {}, clk);
    CHECK(!runner.latest("cam1").valid);
    runner.run();
    auto view = runner.latest("cam1");
    REQUIRE(view.valid);
    CHECK(view.frame.seq == 19);
    CHECK(view.gate.mode == GateMode::Active);
    CHECK(!runner.latest("nope").valid);
    CHECK(runner.camera_ids() == std::vector<std::string>{"cam1"});
}

TEST_CASE("camera dropout shows up as a reconnect in the report") {
    Scenario sc;
    sc.fps = 10;
    sc.duration_s = 3;
    sc.events = {{ScriptEventKind::CameraDropout, 1.0, 1.5, {}}};
    SimClock clk;
    PipelineRunner runner({cam_with(sc)}, {}, clk);
    auto report = runner.run();
    CHECK(report.reconnects == 1);
    CHECK(report.frames_acquired == 25);
}
