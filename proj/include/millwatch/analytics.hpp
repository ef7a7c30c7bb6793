#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "millwatch/types.hpp"

namespace millwatch {

struct VibrationStats {
    double mean = 0, std_dev = 0, min = 0, max = 0;
    size_t n = 0;
};

/// Exact population stats over cy samples; empty result for n < 2.
std::optional<VibrationStats> vibration_stats(const std::vector<double>& cy_samples);

struct RodTrackConfig {
    size_t window = 30;            // W
    size_t gap_tolerance = 5;      // G consecutive rod-less frames before reset
    double min_confidence = 0.5;   // below this a Rod detection is ignored
};

/// Ring of the last W (seq, cy) rod-center samples for one camera.
class RodTrack {
public:
    explicit RodTrack(RodTrackConfig cfg = {}) : cfg_(cfg) {}

    /// Feeds one frame's detections. The highest-confidence Rod (ties broken
    /// by lowest cx) contributes a sample; a rod-less frame bumps the gap
    /// counter and clears the window once it exceeds the tolerance.
    void update(uint64_t frame_seq, const std::vector<Detection>& detections);

    std::optional<VibrationStats> stats() const;
    bool window_full() const { return samples_.size() == cfg_.window; }
    size_t size() const { return samples_.size(); }
    size_t gap_count() const { return gap_count_; }
    std::vector<double> cy_samples() const;

private:
    RodTrackConfig cfg_;
    std::deque<std::pair<uint64_t, double>> samples_;
    size_t gap_count_ = 0;
};

struct VibrationCheckConfig {
    double threshold_px_std = 15.0;
    size_t window = 30;
};

/// One event per excursion: fires when std exceeds the threshold on a full
/// window, re-arms only after std falls back below.
class VibrationMonitor {
public:
    explicit VibrationMonitor(VibrationCheckConfig cfg = {}) : cfg_(cfg) {}

    std::optional<AnomalyEvent> check(const RodTrack& track, const std::string& camera_id,
                                      uint64_t frame_seq, TimestampNs ts);

private:
    VibrationCheckConfig cfg_;
    bool armed_ = true;
};

struct FlapperBaseline {
    Point baseline{400, 300};
    double threshold_px = 20.0;
};

/// Euclidean displacement from the static baseline; event iff above threshold.
std::pair<double, std::optional<AnomalyEvent>> flapper_deviation(const Detection& detection,
                                                                 const FlapperBaseline& baseline,
                                                                 const std::string& camera_id,
                                                                 TimestampNs ts);

struct DiverterCalibration {
    double mm_per_px = 0.5;
    double reference_x = 600;
    double threshold_mm = 5.0;
};

/// |center.x - reference_x| * mm_per_px; event iff above threshold.
std::pair<double, std::optional<AnomalyEvent>> diverter_shift_mm(const Detection& detection,
                                                                 const DiverterCalibration& calib,
                                                                 const std::string& camera_id,
                                                                 TimestampNs ts);

struct BilletConfig {
    size_t n_on = 3;   // consecutive present frames to enter
    size_t n_off = 5;  // consecutive absent frames to exit
    double nominal_duration_s = 9.0;
    double short_factor = 0.8;
    double long_factor = 1.25;
};

enum class BilletPhase { Absent, Entering, Present, Exiting };

struct BilletInterval {
    TimestampNs entry_ts = 0;
    TimestampNs exit_ts = 0;
    double duration_s() const { return s_from_ns(exit_ts - entry_ts); }
};

struct BilletUpdate {
    std::optional<BilletInterval> completed;
    std::optional<AnomalyEvent> event;  // ShortMetal or AbnormalBilletDuration
};

/// Hysteresis presence machine segmenting billet durations. Entry timestamp
/// is backdated to the first frame of the qualifying on-run; exit to the last
/// present frame.
class BilletTracker {
public:
    explicit BilletTracker(BilletConfig cfg = {}) : cfg_(cfg) {}

    BilletUpdate update(bool rod_present, uint64_t frame_seq, TimestampNs ts,
                        const std::string& camera_id);

    BilletPhase phase() const { return phase_; }
    bool presence() const { return phase_ == BilletPhase::Present || phase_ == BilletPhase::Exiting; }
    const std::vector<BilletInterval>& completed_intervals() const { return intervals_; }

    /// Interval entered but not yet exited; absent while Absent or still
    /// inside the entry hysteresis.
    std::optional<BilletInterval> open_interval() const {
        if (!presence()) return std::nullopt;
        return BilletInterval{entry_ts_, last_present_ts_};
    }

private:
    BilletConfig cfg_;
    BilletPhase phase_ = BilletPhase::Absent;
    size_t on_count_ = 0, off_count_ = 0;
    TimestampNs entry_ts_ = 0;
    TimestampNs last_present_ts_ = 0;
    std::vector<BilletInterval> intervals_;
};

}  // namespace millwatch
