#pragma once

#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "millwatch/types.hpp"

namespace millwatch {

enum class ScriptEventKind {
    BilletPass,
    VibrationBurst,
    FlapperDrift,
    DiverterShift,
    IdleWindow,
    GhostRolling,
    DividingCut,
    CameraDropout,
};

const char* to_string(ScriptEventKind k);
ScriptEventKind script_event_kind_from_string(const std::string& s);

struct ScriptEvent {
    ScriptEventKind kind = ScriptEventKind::BilletPass;
    double t_start_s = 0;
    double t_end_s = 0;
    std::map<std::string, double> params;  // amplitude_px, freq_hz, shift_px, ...

    bool active_at(double t) const { return t >= t_start_s && t < t_end_s; }
    double param(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

struct Scenario {
    uint64_t seed = 0;
    double fps = 45.0;
    double duration_s = 0;
    int profile_mm = 12;
    std::vector<ScriptEvent> events;

    size_t frame_count() const { return static_cast<size_t>(fps * duration_s); }
    TimestampNs frame_period_ns() const { return ns_from_s(1.0 / fps); }
};

/// Throws std::invalid_argument describing the first violation.
void validate_scenario(const Scenario& sc);

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& sc);
Scenario load_scenario(const std::string& path);

/// Scene geometry the simulator draws ground truth from. Static per run.
struct SceneGeometry {
    uint32_t width = 1280;
    uint32_t height = 720;
    double rod_cx = 640, rod_baseline_cy = 360;
    double rod_half_w = 300, rod_half_h = 20;
    double flapper_x = 400, flapper_y = 300;
    double flapper_half = 30;
    double diverter_x = 600, diverter_y = 600;
    double diverter_half = 40;
};

struct GroundTruthRecord {
    uint64_t frame_seq = 0;
    bool rod_present = false;
    std::optional<Point> rod_center;  // present iff rod_present
    Point flapper_pos;
    double diverter_x = 0;
    std::set<ScriptEventKind> active_event_kinds;
};

nlohmann::json to_json(const GroundTruthRecord& g);
GroundTruthRecord ground_truth_from_json(const nlohmann::json& j);

struct SimRecord {
    Frame frame;
    GroundTruthRecord gt;
};

struct ReconnectEvent {
    std::string camera_id;
    TimestampNs ts = 0;
    uint64_t frames_lost = 0;
};

/// Pull interface shared by the synthetic generator and the replay reader.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<SimRecord> next() = 0;
    virtual const std::vector<ReconnectEvent>& reconnect_log() const {
        static const std::vector<ReconnectEvent> empty;
        return empty;
    }
};

struct SynthOptions {
    std::string camera_id = "cam1";
    TimestampNs start_ts = 0;
    bool render = false;  // emit RGB8 rasters instead of bare descriptors
    SceneGeometry geometry;
};

/// Scenario-scripted generator. Frames are spaced round(1e9/fps) ns apart on
/// the simulated timeline; CameraDropout windows are skipped with the seq gap
/// left visible and a reconnect record logged.
class SynthSource final : public FrameSource {
public:
    SynthSource(Scenario scenario, SynthOptions opts = {});
    std::optional<SimRecord> next() override;
    const std::vector<ReconnectEvent>& reconnect_log() const override { return reconnects_; }

    const Scenario& scenario() const { return scenario_; }
    const SynthOptions& options() const { return opts_; }

private:
    Scenario scenario_;
    SynthOptions opts_;
    size_t index_ = 0;
    std::vector<ReconnectEvent> reconnects_;
};

/// Ground truth for frame i of a scenario; pure function of its arguments.
GroundTruthRecord ground_truth_at(const Scenario& sc, size_t frame_index,
                                  const SceneGeometry& geo = {});

/// True when frame i falls inside a CameraDropout window.
bool frame_dropped(const Scenario& sc, size_t frame_index);

/// Whole stream in memory (descriptor mode); convenience for tests and small runs.
std::vector<SimRecord> gen_stream(const Scenario& sc, SynthOptions opts = {});

/// One snapshot per simulated second, t = 0 .. floor(duration_s)-1,
/// signal_ts = start_ts + t seconds.
std::vector<ProcessSignals> gen_signals(const Scenario& sc, TimestampNs start_ts = 0);

/// Drops every record whose scenario-relative time falls inside the event
/// window and logs one reconnect record. Identity when the event is not a
/// CameraDropout.
std::vector<SimRecord> simulate_dropout(const std::vector<SimRecord>& stream,
                                        const ScriptEvent& event, double fps,
                                        TimestampNs start_ts,
                                        std::vector<ReconnectEvent>* log);

/// NDJSON replay reader; validates per-camera seq monotonicity. Errors cite
/// the 1-based line number.
class ReplaySource final : public FrameSource {
public:
    explicit ReplaySource(const std::string& path);
    std::optional<SimRecord> next() override;

private:
    std::vector<SimRecord> records_;
    size_t index_ = 0;
};

std::vector<SimRecord> read_replay(const std::string& path);
void write_replay(const std::string& path, const std::vector<SimRecord>& records);

/// RGB8 raster with rod/flapper/diverter drawn as filled rectangles.
Frame render_frame(const Frame& descriptor, const GroundTruthRecord& gt, const SceneGeometry& geo);

}  // namespace millwatch
