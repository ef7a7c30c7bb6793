#include "millwatch/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "millwatch/json_io.hpp"

namespace millwatch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void check_keys(const json& j, const std::string& ctx, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw std::invalid_argument("config: unknown key '" + ctx + key + "'");
}

QueuePolicy policy_from_string(const std::string& s, const std::string& key) {
    if (s == "block") return QueuePolicy::Block;
    if (s == "drop_oldest") return QueuePolicy::DropOldest;
    throw std::invalid_argument("config: " + key + " must be 'block' or 'drop_oldest', got '" + s +
                                "'");
}

const char* to_string(QueuePolicy p) {
    return p == QueuePolicy::Block ? "block" : "drop_oldest";
}

void require_positive(double v, const std::string& key) {
    if (!(v > 0)) throw std::invalid_argument("config: " + key + " must be positive");
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_dir) / p).string();
}

}  // namespace

RunConfig config_from_json(const json& j, const std::string& base_dir) {
    check_keys(j, "",
               {"seed", "clock", "clip_len_s", "clip_root", "metrics_path", "alerts_path", "queue",
                "debounce_window_s", "suppression", "staleness_limit_s", "match_window_s",
                "signal_feed", "http", "oracle_noise", "detectors", "cameras"});

    std::vector<std::string> missing;
    if (!j.contains("cameras")) missing.push_back("cameras");

    RunConfig c;
    c.seed = j.value("seed", uint64_t{0});
    if (j.contains("clock")) {
        std::string clock = j.at("clock").get<std::string>();
        if (clock != "simulated" && clock != "wall")
            throw std::invalid_argument("config: clock must be 'simulated' or 'wall'");
        c.wall_clock = clock == "wall";
    }
    c.clip_len_s = j.value("clip_len_s", 120.0);
    require_positive(c.clip_len_s, "clip_len_s");
    c.clip_root = j.value("clip_root", std::string{});
    c.metrics_path = j.value("metrics_path", std::string{"metrics.lp"});
    c.alerts_path = j.value("alerts_path", std::string{"alerts.ndjson"});

    if (j.contains("queue")) {
        const auto& q = j.at("queue");
        check_keys(q, "queue.", {"capacity", "detect_policy", "storage_policy"});
        c.queue_capacity = q.value("capacity", size_t{128});
        if (c.queue_capacity == 0)
            throw std::invalid_argument("config: queue.capacity must be positive");
        if (q.contains("detect_policy"))
            c.detect_policy =
                policy_from_string(q.at("detect_policy").get<std::string>(), "queue.detect_policy");
        if (q.contains("storage_policy"))
            c.storage_policy = policy_from_string(q.at("storage_policy").get<std::string>(),
                                                  "queue.storage_policy");
    }
    c.debounce_window_s = j.value("debounce_window_s", 10.0);
    require_positive(c.debounce_window_s, "debounce_window_s");
    if (j.contains("suppression")) {
        const auto& s = j.at("suppression");
        check_keys(s, "suppression.", {"enabled", "grace_s"});
        c.suppression_enabled = s.value("enabled", true);
        c.suppress_grace_s = s.value("grace_s", 2.0);
        if (c.suppress_grace_s < 0)
            throw std::invalid_argument("config: suppression.grace_s must be >= 0");
    }
    c.staleness_limit_s = j.value("staleness_limit_s", 5.0);
    require_positive(c.staleness_limit_s, "staleness_limit_s");
    c.match_window_s = j.value("match_window_s", 3.0);
    require_positive(c.match_window_s, "match_window_s");

    if (j.contains("signal_feed")) {
        const auto& s = j.at("signal_feed");
        check_keys(s, "signal_feed.", {"type", "path", "port"});
        c.signal_feed.type = s.value("type", std::string{"scenario"});
        if (c.signal_feed.type == "ndjson") {
            if (!s.contains("path")) missing.push_back("signal_feed.path");
            else c.signal_feed.path = resolve(base_dir, s.at("path").get<std::string>());
        } else if (c.signal_feed.type == "tcp") {
            if (!s.contains("port")) missing.push_back("signal_feed.port");
            else c.signal_feed.port = s.at("port").get<int>();
        } else if (c.signal_feed.type != "scenario") {
            throw std::invalid_argument("config: signal_feed.type must be scenario, ndjson or tcp");
        }
    }
    if (j.contains("http")) {
        const auto& h = j.at("http");
        check_keys(h, "http.", {"bind", "port"});
        HttpConfig hc;
        hc.bind = h.value("bind", std::string{"127.0.0.1"});
        hc.port = h.value("port", 8080);
        c.http = hc;
    }
    if (j.contains("oracle_noise")) {
        const auto& n = j.at("oracle_noise");
        check_keys(n, "oracle_noise.", {"center_noise_px", "miss_rate", "fp_rate"});
        c.noise.center_noise_px = n.value("center_noise_px", 0.0);
        c.noise.miss_rate = n.value("miss_rate", 0.0);
        c.noise.fp_rate = n.value("fp_rate", 0.0);
        validate_noise(c.noise);
    }
    for (const auto& jd : j.value("detectors", json::array())) {
        check_keys(jd, "detectors[].", {"name", "profiles", "latency_model_ms"});
        DetectorConfig d;
        if (!jd.contains("name")) missing.push_back("detectors[].name");
        else d.name = jd.at("name").get<std::string>();
        if (!jd.contains("profiles")) missing.push_back("detectors[].profiles");
        else d.profiles = jd.at("profiles").get<std::vector<int>>();
        d.latency_model_ms = jd.value("latency_model_ms", 0.0);
        if (d.profiles.empty() && jd.contains("profiles"))
            throw std::invalid_argument("config: detectors[].profiles must be nonempty for '" +
                                        d.name + "'");
        c.detectors.push_back(std::move(d));
    }

    std::set<std::string> seen_ids;
    for (const auto& jc : j.value("cameras", json::array())) {
        check_keys(jc, "cameras[].",
                   {"camera_id", "source", "profile_mm", "render", "thresholds", "calibration",
                    "flapper_baseline", "analytics"});
        CameraConfig cam;
        if (!jc.contains("camera_id")) missing.push_back("cameras[].camera_id");
        else cam.camera_id = jc.at("camera_id").get<std::string>();
        if (!jc.contains("source")) missing.push_back("cameras[].source");
        else cam.source = jc.at("source").get<std::string>();
        if (!jc.contains("profile_mm")) missing.push_back("cameras[].profile_mm");
        else cam.profile_mm = jc.at("profile_mm").get<int>();
        cam.render = jc.value("render", false);

        if (!cam.camera_id.empty()) {
            if (seen_ids.count(cam.camera_id))
                throw std::invalid_argument("config: duplicate camera_id '" + cam.camera_id + "'");
            seen_ids.insert(cam.camera_id);
        }
        if (jc.contains("profile_mm") && !valid_profile_mm(cam.profile_mm))
            throw std::invalid_argument("config: cameras[].profile_mm invalid for '" +
                                        cam.camera_id + "'");
        if (jc.contains("thresholds")) {
            const auto& t = jc.at("thresholds");
            check_keys(t, "cameras[].thresholds.", {"vibration_std_px", "flapper_px", "diverter_mm"});
            cam.vibration_std_px = t.value("vibration_std_px", 15.0);
            cam.flapper_px = t.value("flapper_px", 20.0);
            cam.diverter_mm = t.value("diverter_mm", 5.0);
            require_positive(cam.vibration_std_px, "cameras[].thresholds.vibration_std_px");
            require_positive(cam.flapper_px, "cameras[].thresholds.flapper_px");
            require_positive(cam.diverter_mm, "cameras[].thresholds.diverter_mm");
        }
        if (jc.contains("calibration")) {
            const auto& t = jc.at("calibration");
            check_keys(t, "cameras[].calibration.", {"mm_per_px", "reference_x"});
            cam.mm_per_px = t.value("mm_per_px", 0.5);
            cam.reference_x = t.value("reference_x", 600.0);
            require_positive(cam.mm_per_px, "cameras[].calibration.mm_per_px");
        }
        if (jc.contains("flapper_baseline")) {
            const auto& t = jc.at("flapper_baseline");
            check_keys(t, "cameras[].flapper_baseline.", {"x", "y"});
            cam.flapper_x = t.value("x", 400.0);
            cam.flapper_y = t.value("y", 300.0);
        }
        if (jc.contains("analytics")) {
            const auto& t = jc.at("analytics");
            check_keys(t, "cameras[].analytics.",
                       {"window", "gap_tolerance", "n_on", "n_off", "nominal_duration_s",
                        "short_factor", "long_factor"});
            cam.window = t.value("window", size_t{30});
            cam.gap_tolerance = t.value("gap_tolerance", size_t{5});
            cam.n_on = t.value("n_on", size_t{3});
            cam.n_off = t.value("n_off", size_t{5});
            cam.nominal_duration_s = t.value("nominal_duration_s", 9.0);
            cam.short_factor = t.value("short_factor", 0.8);
            cam.long_factor = t.value("long_factor", 1.25);
            if (cam.window < 2) throw std::invalid_argument("config: cameras[].analytics.window < 2");
            if (cam.n_on == 0 || cam.n_off == 0)
                throw std::invalid_argument("config: cameras[].analytics.n_on/n_off must be >= 1");
            require_positive(cam.nominal_duration_s, "cameras[].analytics.nominal_duration_s");
            if (!(cam.short_factor > 0 && cam.short_factor < 1))
                throw std::invalid_argument("config: cameras[].analytics.short_factor not in (0,1)");
            if (!(cam.long_factor > 1))
                throw std::invalid_argument("config: cameras[].analytics.long_factor must be > 1");
        }

        if (!cam.source.empty()) {
            auto colon = cam.source.find(':');
            std::string scheme = cam.source.substr(0, colon);
            if (colon == std::string::npos || (scheme != "synth" && scheme != "replay"))
                throw std::invalid_argument(
                    "config: cameras[].source must be synth:<file> or replay:<file>, got '" +
                    cam.source + "'");
            std::string file = resolve(base_dir, cam.source.substr(colon + 1));
            if (!fs::exists(file))
                throw std::invalid_argument("config: cameras[].source file does not exist: " + file);
            cam.source = scheme + ":" + file;
        }
        c.cameras.push_back(std::move(cam));
    }
    if (j.contains("cameras") && c.cameras.empty())
        throw std::invalid_argument("config: cameras must be nonempty");

    if (!missing.empty()) {
        std::string msg = "config: missing required keys:";
        for (const auto& k : missing) msg += " " + k;
        throw std::invalid_argument(msg);
    }

    // Profile coverage is a startup error, never a mid-run one.
    if (!c.detectors.empty()) {
        for (const auto& cam : c.cameras) {
            bool covered = false;
            for (const auto& d : c.detectors)
                for (int p : d.profiles)
                    if (p == cam.profile_mm) covered = true;
            if (!covered)
                throw std::invalid_argument("config: no detector supports profile " +
                                            std::to_string(cam.profile_mm) + "mm (camera '" +
                                            cam.camera_id + "')");
        }
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument("config " + path + ": " + e.what());
    }
    return config_from_json(j, fs::path(path).parent_path().string());
}

json to_json(const RunConfig& c) {
    json cameras = json::array();
    for (const auto& cam : c.cameras) {
        cameras.push_back(json{
            {"camera_id", cam.camera_id},
            {"source", cam.source},
            {"profile_mm", cam.profile_mm},
            {"render", cam.render},
            {"thresholds",
             {{"vibration_std_px", cam.vibration_std_px},
              {"flapper_px", cam.flapper_px},
              {"diverter_mm", cam.diverter_mm}}},
            {"calibration", {{"mm_per_px", cam.mm_per_px}, {"reference_x", cam.reference_x}}},
            {"flapper_baseline", {{"x", cam.flapper_x}, {"y", cam.flapper_y}}},
            {"analytics",
             {{"window", cam.window},
              {"gap_tolerance", cam.gap_tolerance},
              {"n_on", cam.n_on},
              {"n_off", cam.n_off},
              {"nominal_duration_s", cam.nominal_duration_s},
              {"short_factor", cam.short_factor},
              {"long_factor", cam.long_factor}}}});
    }
    json detectors = json::array();
    for (const auto& d : c.detectors)
        detectors.push_back(json{
            {"name", d.name}, {"profiles", d.profiles}, {"latency_model_ms", d.latency_model_ms}});
    json signal_feed{{"type", c.signal_feed.type}};
    if (c.signal_feed.type == "ndjson") signal_feed["path"] = c.signal_feed.path;
    if (c.signal_feed.type == "tcp") signal_feed["port"] = c.signal_feed.port;
    json out{{"seed", c.seed},
             {"clock", c.wall_clock ? "wall" : "simulated"},
             {"clip_len_s", c.clip_len_s},
             {"clip_root", c.clip_root},
             {"metrics_path", c.metrics_path},
             {"alerts_path", c.alerts_path},
             {"queue",
              {{"capacity", c.queue_capacity},
               {"detect_policy", to_string(c.detect_policy)},
               {"storage_policy", to_string(c.storage_policy)}}},
             {"debounce_window_s", c.debounce_window_s},
             {"suppression", {{"enabled", c.suppression_enabled}, {"grace_s", c.suppress_grace_s}}},
             {"staleness_limit_s", c.staleness_limit_s},
             {"match_window_s", c.match_window_s},
             {"signal_feed", signal_feed},
             {"oracle_noise",
              {{"center_noise_px", c.noise.center_noise_px},
               {"miss_rate", c.noise.miss_rate},
               {"fp_rate", c.noise.fp_rate}}},
             {"detectors", detectors},
             {"cameras", cameras}};
    if (c.http) out["http"] = {{"bind", c.http->bind}, {"port", c.http->port}};
    return out;
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return to_json(a) == to_json(b);
}

std::vector<ProcessSignals> read_signals_ndjson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open signals file: " + path);
    std::vector<ProcessSignals> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(signals_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::pair<std::vector<CameraSetup>, PipelineOptions> build_pipeline(const RunConfig& cfg) {
    std::vector<CameraSetup> setups;
    for (const auto& cam : cfg.cameras) {
        CameraSetup s;
        s.camera_id = cam.camera_id;
        s.render = cam.render;
        auto colon = cam.source.find(':');
        std::string scheme = cam.source.substr(0, colon);
        std::string file = cam.source.substr(colon + 1);
        if (scheme == "synth") {
            s.scenario = load_scenario(file);
            s.scenario.profile_mm = cam.profile_mm;
        } else {
            s.use_replay = true;
            s.replay = read_replay(file);
        }
        s.track = {cam.window, cam.gap_tolerance};
        s.vibration = {cam.vibration_std_px, cam.window};
        s.flapper = {{cam.flapper_x, cam.flapper_y}, cam.flapper_px};
        s.diverter = {cam.mm_per_px, cam.reference_x, cam.diverter_mm};
        s.billet = {cam.n_on, cam.n_off, cam.nominal_duration_s, cam.short_factor,
                    cam.long_factor};
        setups.push_back(std::move(s));
    }

    PipelineOptions opts;
    opts.queue_capacity = cfg.queue_capacity;
    opts.detect_policy = cfg.detect_policy;
    opts.storage_policy = cfg.storage_policy;
    opts.clip_root = cfg.clip_root;
    opts.clip_len_s = cfg.clip_len_s;
    opts.metrics_path = cfg.metrics_path;
    opts.alerts_path = cfg.alerts_path;
    opts.noise = cfg.noise;
    opts.noise.seed = cfg.seed;
    for (const auto& d : cfg.detectors)
        opts.registry.add({d.name, std::set<int>(d.profiles.begin(), d.profiles.end()),
                           d.latency_model_ms});
    opts.debounce_window_s = cfg.debounce_window_s;
    opts.suppress = {cfg.suppression_enabled, cfg.suppress_grace_s};
    opts.staleness_limit_s = cfg.staleness_limit_s;
    opts.wall_clock = cfg.wall_clock;
    if (cfg.signal_feed.type == "ndjson") {
        opts.signal_feed = SignalFeedKind::Preloaded;
        opts.preloaded_signals = read_signals_ndjson(cfg.signal_feed.path);
    } else if (cfg.signal_feed.type == "tcp") {
        opts.signal_feed = SignalFeedKind::External;
    }
    return {std::move(setups), std::move(opts)};
}

}  // namespace millwatch
