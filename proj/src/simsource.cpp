#include "millwatch/simsource.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "millwatch/json_io.hpp"

namespace millwatch {

using nlohmann::json;

const char* to_string(ScriptEventKind k) {
    switch (k) {
        case ScriptEventKind::BilletPass: return "BilletPass";
        case ScriptEventKind::VibrationBurst: return "VibrationBurst";
        case ScriptEventKind::FlapperDrift: return "FlapperDrift";
        case ScriptEventKind::DiverterShift: return "DiverterShift";
        case ScriptEventKind::IdleWindow: return "IdleWindow";
        case ScriptEventKind::GhostRolling: return "GhostRolling";
        case ScriptEventKind::DividingCut: return "DividingCut";
        case ScriptEventKind::CameraDropout: return "CameraDropout";
    }
    return "BilletPass";
}

ScriptEventKind script_event_kind_from_string(const std::string& s) {
    static const std::map<std::string, ScriptEventKind> table = {
        {"BilletPass", ScriptEventKind::BilletPass},
        {"VibrationBurst", ScriptEventKind::VibrationBurst},
        {"FlapperDrift", ScriptEventKind::FlapperDrift},
        {"DiverterShift", ScriptEventKind::DiverterShift},
        {"IdleWindow", ScriptEventKind::IdleWindow},
        {"GhostRolling", ScriptEventKind::GhostRolling},
        {"DividingCut", ScriptEventKind::DividingCut},
        {"CameraDropout", ScriptEventKind::CameraDropout},
    };
    auto it = table.find(s);
    if (it == table.end()) throw std::invalid_argument("unknown script event kind '" + s + "'");
    return it->second;
}

void validate_scenario(const Scenario& sc) {
    if (!(sc.fps > 0)) throw std::invalid_argument("scenario: fps must be > 0");
    if (!(sc.duration_s > 0)) throw std::invalid_argument("scenario: duration_s must be > 0");
    if (!valid_profile_mm(sc.profile_mm))
        throw std::invalid_argument("scenario: invalid profile_mm " + std::to_string(sc.profile_mm));
    double prev_start = -1;
    for (const auto& e : sc.events) {
        if (!(e.t_start_s < e.t_end_s))
            throw std::invalid_argument(std::string("scenario: event ") + to_string(e.kind) +
                                        " has t_start_s >= t_end_s");
        if (e.t_start_s < 0 || e.t_end_s > sc.duration_s)
            throw std::invalid_argument(std::string("scenario: event ") + to_string(e.kind) +
                                        " window outside [0, duration_s]");
        if (e.t_start_s < prev_start)
            throw std::invalid_argument("scenario: events not sorted by start time");
        prev_start = e.t_start_s;
    }
}

Scenario scenario_from_json(const json& j) {
    Scenario sc;
    sc.seed = j.value("seed", uint64_t{0});
    sc.fps = j.value("fps", 45.0);
    sc.duration_s = j.at("duration_s").get<double>();
    sc.profile_mm = j.value("profile_mm", 12);
    for (const auto& je : j.value("events", json::array())) {
        ScriptEvent e;
        e.kind = script_event_kind_from_string(je.at("kind").get<std::string>());
        e.t_start_s = je.at("t_start_s").get<double>();
        e.t_end_s = je.at("t_end_s").get<double>();
        if (je.contains("params")) e.params = je.at("params").get<std::map<std::string, double>>();
        sc.events.push_back(std::move(e));
    }
    validate_scenario(sc);
    return sc;
}

json to_json(const Scenario& sc) {
    json events = json::array();
    for (const auto& e : sc.events)
        events.push_back(json{{"kind", to_string(e.kind)},
                              {"t_start_s", e.t_start_s},
                              {"t_end_s", e.t_end_s},
                              {"params", e.params}});
    return json{{"seed", sc.seed},
                {"fps", sc.fps},
                {"duration_s", sc.duration_s},
                {"profile_mm", sc.profile_mm},
                {"events", events}};
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("scenario " + path + ": " + e.what());
    }
    return scenario_from_json(j);
}

json to_json(const GroundTruthRecord& g) {
    json kinds = json::array();
    for (auto k : g.active_event_kinds) kinds.push_back(to_string(k));
    json j{{"frame_seq", g.frame_seq},
           {"rod_present", g.rod_present},
           {"flapper_pos", {g.flapper_pos.x, g.flapper_pos.y}},
           {"diverter_x", g.diverter_x},
           {"active_event_kinds", kinds}};
    if (g.rod_center)
        j["rod_center"] = {g.rod_center->x, g.rod_center->y};
    else
        j["rod_center"] = nullptr;
    return j;
}

GroundTruthRecord ground_truth_from_json(const json& j) {
    GroundTruthRecord g;
    g.frame_seq = j.at("frame_seq").get<uint64_t>();
    g.rod_present = j.at("rod_present").get<bool>();
    if (!j.at("rod_center").is_null()) {
        auto c = j.at("rod_center");
        g.rod_center = Point{c.at(0).get<double>(), c.at(1).get<double>()};
    }
    if (g.rod_present != g.rod_center.has_value())
        throw std::invalid_argument("ground truth: rod_center present iff rod_present");
    auto f = j.at("flapper_pos");
    g.flapper_pos = Point{f.at(0).get<double>(), f.at(1).get<double>()};
    g.diverter_x = j.at("diverter_x").get<double>();
    for (const auto& k : j.at("active_event_kinds"))
        g.active_event_kinds.insert(script_event_kind_from_string(k.get<std::string>()));
    return g;
}

GroundTruthRecord ground_truth_at(const Scenario& sc, size_t frame_index, const SceneGeometry& geo) {
    double t = static_cast<double>(frame_index) / sc.fps;
    GroundTruthRecord g;
    g.frame_seq = frame_index;
    g.flapper_pos = {geo.flapper_x, geo.flapper_y};
    g.diverter_x = geo.diverter_x;
    double rod_cy = geo.rod_baseline_cy;
    for (const auto& e : sc.events) {
        if (!e.active_at(t)) continue;
        g.active_event_kinds.insert(e.kind);
        switch (e.kind) {
            case ScriptEventKind::BilletPass:
                g.rod_present = true;
                break;
            case ScriptEventKind::VibrationBurst: {
                // cy(t) = baseline + A*sin(2*pi*f*(t - t_start)); a burst
                // implies material under the camera.
                g.rod_present = true;
                double amp = e.param("amplitude_px", 20.0);
                double freq = e.param("freq_hz", 5.0);
                rod_cy += amp * std::sin(2.0 * std::numbers::pi * freq * (t - e.t_start_s));
                break;
            }
            case ScriptEventKind::FlapperDrift:
                g.flapper_pos.x += e.param("shift_px", 30.0);
                break;
            case ScriptEventKind::DiverterShift:
                g.diverter_x += e.param("shift_px", 16.0);
                break;
            default:
                break;  // signal-side events leave the scene untouched
        }
    }
    if (g.rod_present) g.rod_center = Point{geo.rod_cx, rod_cy};
    return g;
}

bool frame_dropped(const Scenario& sc, size_t frame_index) {
    double t = static_cast<double>(frame_index) / sc.fps;
    for (const auto& e : sc.events)
        if (e.kind == ScriptEventKind::CameraDropout && e.active_at(t))
            return true;
    return false;
}

SynthSource::SynthSource(Scenario scenario, SynthOptions opts)
    : scenario_(std::move(scenario)), opts_(std::move(opts)) {
    validate_scenario(scenario_);
}

std::optional<SimRecord> SynthSource::next() {
    size_t n = scenario_.frame_count();
    TimestampNs period = scenario_.frame_period_ns();
    while (index_ < n && frame_dropped(scenario_, index_)) {
        // Count the whole gap once, logging the reconnect at the first frame
        // past the dropout window.
        uint64_t lost = 0;
        while (index_ < n && frame_dropped(scenario_, index_)) {
            ++lost;
            ++index_;
        }
        reconnects_.push_back(
            {opts_.camera_id, opts_.start_ts + TimestampNs(index_) * period, lost});
    }
    if (index_ >= n) return std::nullopt;

    size_t i = index_++;
    SimRecord rec;
    rec.gt = ground_truth_at(scenario_, i, opts_.geometry);
    rec.frame = make_frame(opts_.camera_id, i, opts_.start_ts + TimestampNs(i) * period,
                           opts_.geometry.width, opts_.geometry.height, PixelFormat::RGB8, {},
                           scenario_.profile_mm);
    if (opts_.render) rec.frame = render_frame(rec.frame, rec.gt, opts_.geometry);
    return rec;
}

std::vector<SimRecord> gen_stream(const Scenario& sc, SynthOptions opts) {
    SynthSource src(sc, std::move(opts));
    std::vector<SimRecord> out;
    while (auto rec = src.next()) out.push_back(std::move(*rec));
    return out;
}

std::vector<ProcessSignals> gen_signals(const Scenario& sc, TimestampNs start_ts) {
    validate_scenario(sc);
    std::vector<ProcessSignals> out;
    for (int64_t t = 0; t < static_cast<int64_t>(sc.duration_s); ++t) {
        ProcessSignals s;
        s.signal_ts = start_ts + t * ns_per_s;
        double td = static_cast<double>(t);
        for (const auto& e : sc.events) {
            if (!e.active_at(td)) continue;
            switch (e.kind) {
                case ScriptEventKind::IdleWindow: s.mill_running = false; break;
                case ScriptEventKind::GhostRolling: s.ghost_rolling = true; break;
                case ScriptEventKind::DividingCut:
                    s.dividing_cut_active = true;
                    s.dividing_cut_until = start_ts + ns_from_s(e.t_end_s);
                    break;
                default: break;
            }
        }
        out.push_back(s);
    }
    return out;
}

std::vector<SimRecord> simulate_dropout(const std::vector<SimRecord>& stream,
                                        const ScriptEvent& event, double fps, TimestampNs start_ts,
                                        std::vector<ReconnectEvent>* log) {
    if (event.kind != ScriptEventKind::CameraDropout) return stream;
    std::vector<SimRecord> out;
    uint64_t lost = 0;
    std::string camera_id;
    for (const auto& rec : stream) {
        double t = static_cast<double>(rec.frame.seq) / fps;
        camera_id = rec.frame.camera_id;
        if (event.active_at(t)) {
            ++lost;
            continue;
        }
        out.push_back(rec);
    }
    if (log && lost > 0) {
        TimestampNs reconnect_ts = start_ts + ns_from_s(event.t_end_s);
        log->push_back({camera_id, reconnect_ts, lost});
    }
    return out;
}

std::vector<SimRecord> read_replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open replay file: " + path);
    std::vector<SimRecord> out;
    std::map<std::string, uint64_t> last_seq;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        SimRecord rec;
        try {
            json j = json::parse(line);
            rec.frame = frame_from_json(j.at("frame"));
            rec.gt = ground_truth_from_json(j.at("ground_truth"));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + ": " + e.what());
        }
        auto it = last_seq.find(rec.frame.camera_id);
        if (it != last_seq.end() && rec.frame.seq <= it->second)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": sequence regression (seq " + std::to_string(rec.frame.seq) +
                                     " after " + std::to_string(it->second) + ")");
        last_seq[rec.frame.camera_id] = rec.frame.seq;
        out.push_back(std::move(rec));
    }
    return out;
}

void write_replay(const std::string& path, const std::vector<SimRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open replay file for writing: " + path);
    for (const auto& rec : records) {
        json j{{"frame", to_json(rec.frame)}, {"ground_truth", to_json(rec.gt)}};
        out << j.dump() << '\n';
    }
}

ReplaySource::ReplaySource(const std::string& path) : records_(read_replay(path)) {}

std::optional<SimRecord> ReplaySource::next() {
    if (index_ >= records_.size()) return std::nullopt;
    return records_[index_++];
}

static void fill_rect(std::vector<uint8_t>& rgb, uint32_t w, uint32_t h, double x0, double y0,
                      double x1, double y1, uint8_t r, uint8_t g, uint8_t b) {
    int xa = std::clamp<int>(int(x0), 0, int(w));
    int xb = std::clamp<int>(int(x1), 0, int(w));
    int ya = std::clamp<int>(int(y0), 0, int(h));
    int yb = std::clamp<int>(int(y1), 0, int(h));
    for (int y = ya; y < yb; ++y)
        for (int x = xa; x < xb; ++x) {
            size_t off = (size_t(y) * w + x) * 3;
            rgb[off] = r;
            rgb[off + 1] = g;
            rgb[off + 2] = b;
        }
}

Frame render_frame(const Frame& descriptor, const GroundTruthRecord& gt, const SceneGeometry& geo) {
    std::vector<uint8_t> rgb(size_t(geo.width) * geo.height * 3, 24);
    if (gt.rod_present && gt.rod_center) {
        fill_rect(rgb, geo.width, geo.height, gt.rod_center->x - geo.rod_half_w,
                  gt.rod_center->y - geo.rod_half_h, gt.rod_center->x + geo.rod_half_w,
                  gt.rod_center->y + geo.rod_half_h, 230, 120, 40);
    }
    fill_rect(rgb, geo.width, geo.height, gt.flapper_pos.x - geo.flapper_half,
              gt.flapper_pos.y - geo.flapper_half, gt.flapper_pos.x + geo.flapper_half,
              gt.flapper_pos.y + geo.flapper_half, 90, 160, 220);
    fill_rect(rgb, geo.width, geo.height, gt.diverter_x - geo.diverter_half,
              geo.diverter_y - geo.diverter_half, gt.diverter_x + geo.diverter_half,
              geo.diverter_y + geo.diverter_half, 120, 220, 120);
    return make_frame(descriptor.camera_id, descriptor.seq, descriptor.ts_acquire, geo.width,
                      geo.height, PixelFormat::RGB8, std::move(rgb), descriptor.profile_mm);
}

}  // namespace millwatch
