#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "millwatch/bench.hpp"
#include "millwatch/config.hpp"
#include "millwatch/json_io.hpp"
#include "millwatch/serve.hpp"

using namespace millwatch;

namespace {

void emit(const nlohmann::json& j, const std::string& report_path) {
    if (report_path.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream out(report_path);
        if (!out) throw std::runtime_error("cannot write report to " + report_path);
        out << j.dump(2) << "\n";
    }
}

int cmd_run(const std::string& config_path, const std::string& report_path,
            const std::string& truth_out, bool serve) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    auto [setups, opts] = build_pipeline(cfg);

    SimClock sim;
    WallClock wall;
    Clock& clock = cfg.wall_clock ? static_cast<Clock&>(wall) : sim;
    if (cfg.wall_clock) opts.start_ts = wall.now() + 50'000'000;

    PipelineRunner runner(std::move(setups), std::move(opts), clock);

    std::unique_ptr<TcpSignalFeed> feed;
    if (cfg.signal_feed.type == "tcp") {
        feed = std::make_unique<TcpSignalFeed>(runner.signal_bus(), cfg.signal_feed.port);
        if (!feed->start()) {
            std::cerr << "error: cannot bind signal feed on port " << cfg.signal_feed.port << "\n";
            return 2;
        }
    }
    std::unique_ptr<MillServer> server;
    if (serve && cfg.http) {
        server = std::make_unique<MillServer>(ServeState{&runner}, cfg.http->bind, cfg.http->port);
        if (!server->start()) {
            std::cerr << "error: cannot bind http server on " << cfg.http->bind << ":"
                      << cfg.http->port << "\n";
            return 2;
        }
        std::cerr << "serving on http://" << cfg.http->bind << ":" << server->port() << "\n";
    }

    RunReport report = runner.run();
    if (!truth_out.empty()) {
        std::ofstream out(truth_out);
        for (const auto& cam : cfg.cameras) {
            if (cam.source.rfind("synth:", 0) != 0) continue;
            Scenario sc = load_scenario(cam.source.substr(6));
            for (const auto& ev : truth_events_from_scenario(sc)) out << to_json(ev).dump() << "\n";
        }
    }
    emit(to_json(report), report_path);
    return report.failed ? 2 : 0;
}

int cmd_replay(const std::string& input, const std::string& report_path) {
    std::vector<SimRecord> records;
    try {
        records = read_replay(input);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    CameraSetup setup;
    setup.camera_id = records.empty() ? "replay" : records[0].frame.camera_id;
    setup.use_replay = true;
    setup.replay = std::move(records);
    PipelineOptions opts;
    opts.signal_feed = SignalFeedKind::External;  // replay has no signal track
    opts.preloaded_signals = {};
    // With no signals the gate would fail safe; score the stream ungated.
    ProcessSignals always_on;
    always_on.signal_ts = 0;
    opts.signal_feed = SignalFeedKind::Preloaded;
    if (!setup.replay.empty()) {
        for (TimestampNs t = setup.replay.front().frame.ts_acquire;
             t <= setup.replay.back().frame.ts_acquire; t += ns_per_s) {
            always_on.signal_ts = t;
            opts.preloaded_signals.push_back(always_on);
        }
    }
    SimClock sim;
    PipelineRunner runner({std::move(setup)}, std::move(opts), sim);
    RunReport report = runner.run();
    emit(to_json(report), report_path);
    return report.failed ? 2 : 0;
}

int cmd_bench(const std::string& scenario_path, size_t frames, const std::string& metrics_path,
              const std::string& report_path) {
    Scenario sc;
    try {
        sc = load_scenario(scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    BenchOptions opts;
    opts.metrics_path = metrics_path;
    try {
        LatencyReport report = measure(sc, frames, opts);
        emit(to_json(report), report_path);
        return report.failed ? 2 : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int cmd_evaluate(const std::string& alerts_path, const std::string& truth_path,
                 double match_window_s, const std::string& report_path) {
    std::vector<Alert> alerts;
    std::vector<GroundTruthEvent> truth;
    try {
        std::ifstream in(alerts_path);
        if (!in) throw std::runtime_error("cannot open alerts file: " + alerts_path);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                alerts.push_back(alert_from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw std::runtime_error(alerts_path + ": line " + std::to_string(lineno) + ": " +
                                         e.what());
            }
        }
        std::ifstream tin(truth_path);
        if (!tin) throw std::runtime_error("cannot open truth file: " + truth_path);
        lineno = 0;
        while (std::getline(tin, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                truth.push_back(truth_event_from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw std::runtime_error(truth_path + ": line " + std::to_string(lineno) + ": " +
                                         e.what());
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::sort(alerts.begin(), alerts.end(),
              [](const Alert& a, const Alert& b) { return a.event.ts < b.event.ts; });
    std::sort(truth.begin(), truth.end(),
              [](const GroundTruthEvent& a, const GroundTruthEvent& b) {
                  return a.ts_start < b.ts_start;
              });
    emit(to_json(evaluate(alerts, truth, match_window_s)), report_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"millwatch: rolling-mill anomaly-detection pipeline"};
    app.require_subcommand(1);

    std::string config_path, report_path, truth_out, input, scenario_path, metrics_path;
    std::string alerts_path, truth_path;
    size_t frames = 5000;
    double match_window_s = 3.0;
    bool serve = false;

    auto* run = app.add_subcommand("run", "Execute the live pipeline from a config file");
    auto* copt = run->add_option("--config", config_path, "Run config JSON");
    if (const char* env = std::getenv("MILLWATCH_CONFIG"); env && *env)
        copt->default_val(std::string(env));
    else
        copt->required();
    run->add_option("--report", report_path, "Write the run report here instead of stdout");
    run->add_option("--truth-out", truth_out, "Write scripted ground-truth events (NDJSON)");
    run->add_flag("--serve", serve, "Start the HTTP endpoints while running");

    auto* replay = app.add_subcommand("replay", "Re-score a recorded NDJSON stream");
    replay->add_option("--input", input, "Replay NDJSON file")->required();
    replay->add_option("--report", report_path, "Report path");

    auto* bench = app.add_subcommand("bench", "Latency/throughput measurement on synthetic load");
    bench->add_option("--scenario", scenario_path, "Scenario JSON")->required();
    bench->add_option("--frames", frames, "Frames to process (>= 1000)");
    bench->add_option("--metrics", metrics_path, "Metrics sink under measurement");
    bench->add_option("--report", report_path, "Report path");

    auto* evaluate = app.add_subcommand("evaluate", "Score alerts against ground truth");
    evaluate->add_option("--alerts", alerts_path, "alerts.ndjson")->required();
    evaluate->add_option("--truth", truth_path, "Ground-truth events NDJSON")->required();
    evaluate->add_option("--match-window", match_window_s, "Match window, seconds");
    evaluate->add_option("--report", report_path, "Report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(config_path, report_path, truth_out, serve);
        if (replay->parsed()) return cmd_replay(input, report_path);
        if (bench->parsed()) return cmd_bench(scenario_path, frames, metrics_path, report_path);
        if (evaluate->parsed())
            return cmd_evaluate(alerts_path, truth_path, match_window_s, report_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
