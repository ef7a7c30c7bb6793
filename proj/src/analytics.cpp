#include "millwatch/analytics.hpp"

#include <algorithm>
#include <cmath>

namespace millwatch {

std::optional<VibrationStats> vibration_stats(const std::vector<double>& cy) {
    if (cy.size() < 2) return std::nullopt;
    VibrationStats s;
    s.n = cy.size();
    s.min = *std::min_element(cy.begin(), cy.end());
    s.max = *std::max_element(cy.begin(), cy.end());
    double sum = 0;
    for (double v : cy) sum += v;
    s.mean = sum / double(s.n);
    double sq = 0;
    for (double v : cy) sq += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(sq / double(s.n));  // population std
    return s;
}

void RodTrack::update(uint64_t frame_seq, const std::vector<Detection>& detections) {
    const Detection* best = nullptr;
    for (const auto& d : detections) {
        if (d.object_class != ObjectClass::Rod || d.confidence < cfg_.min_confidence) continue;
        if (!best || d.confidence > best->confidence ||
            (d.confidence == best->confidence && d.center.x < best->center.x))
            best = &d;
    }
    if (best) {
        gap_count_ = 0;
        samples_.emplace_back(frame_seq, best->center.y);
        while (samples_.size() > cfg_.window) samples_.pop_front();
    } else {
        if (++gap_count_ > cfg_.gap_tolerance) samples_.clear();
    }
}

std::vector<double> RodTrack::cy_samples() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& [seq, cy] : samples_) out.push_back(cy);
    return out;
}

std::optional<VibrationStats> RodTrack::stats() const { return vibration_stats(cy_samples()); }

std::optional<AnomalyEvent> VibrationMonitor::check(const RodTrack& track,
                                                    const std::string& camera_id,
                                                    uint64_t frame_seq, TimestampNs ts) {
    auto stats = track.stats();
    if (!stats || stats->n < cfg_.window) {
        armed_ = true;  // partial window: a later excursion counts as new
        return std::nullopt;
    }
    if (stats->std_dev > cfg_.threshold_px_std) {
        if (!armed_) return std::nullopt;
        armed_ = false;
        AnomalyEvent e;
        e.kind = AnomalyKind::Vibration;
        e.camera_id = camera_id;
        e.frame_seq = frame_seq;
        e.ts = ts;
        e.magnitude = stats->std_dev;
        e.detail = "rod cy std " + std::to_string(stats->std_dev) + " px over window " +
                   std::to_string(stats->n);
        return e;
    }
    armed_ = true;
    return std::nullopt;
}

std::pair<double, std::optional<AnomalyEvent>> flapper_deviation(const Detection& detection,
                                                                 const FlapperBaseline& baseline,
                                                                 const std::string& camera_id,
                                                                 TimestampNs ts) {
    if (detection.object_class != ObjectClass::Flapper)
        throw std::invalid_argument("flapper_deviation: detection is not a Flapper");
    double dx = detection.center.x - baseline.baseline.x;
    double dy = detection.center.y - baseline.baseline.y;
    double disp = std::hypot(dx, dy);
    std::optional<AnomalyEvent> event;
    if (disp > baseline.threshold_px) {
        AnomalyEvent e;
        e.kind = AnomalyKind::FlapperDeviation;
        e.camera_id = camera_id;
        e.frame_seq = detection.frame_seq;
        e.ts = ts;
        e.magnitude = disp;
        e.detail = "flapper displaced " + std::to_string(disp) + " px from baseline";
        event = e;
    }
    return {disp, event};
}

std::pair<double, std::optional<AnomalyEvent>> diverter_shift_mm(const Detection& detection,
                                                                 const DiverterCalibration& calib,
                                                                 const std::string& camera_id,
                                                                 TimestampNs ts) {
    if (detection.object_class != ObjectClass::Diverter)
        throw std::invalid_argument("diverter_shift_mm: detection is not a Diverter");
    double shift = std::abs(detection.center.x - calib.reference_x) * calib.mm_per_px;
    std::optional<AnomalyEvent> event;
    if (shift > calib.threshold_mm) {
        AnomalyEvent e;
        e.kind = AnomalyKind::DiverterShift;
        e.camera_id = camera_id;
        e.frame_seq = detection.frame_seq;
        e.ts = ts;
        e.magnitude = shift;
        e.detail = "diverter shifted " + std::to_string(shift) + " mm from reference";
        event = e;
    }
    return {shift, event};
}

BilletUpdate BilletTracker::update(bool rod_present, uint64_t frame_seq, TimestampNs ts,
                                   const std::string& camera_id) {
    BilletUpdate result;
    switch (phase_) {
        case BilletPhase::Absent:
            if (rod_present) {
                phase_ = BilletPhase::Entering;
                on_count_ = 1;
                entry_ts_ = ts;
                last_present_ts_ = ts;
                if (on_count_ >= cfg_.n_on) phase_ = BilletPhase::Present;
            }
            break;
        case BilletPhase::Entering:
            if (rod_present) {
                ++on_count_;
                last_present_ts_ = ts;
                if (on_count_ >= cfg_.n_on) phase_ = BilletPhase::Present;
            } else {
                phase_ = BilletPhase::Absent;  // blip shorter than n_on
                on_count_ = 0;
            }
            break;
        case BilletPhase::Present:
            if (rod_present) {
                last_present_ts_ = ts;
            } else {
                phase_ = BilletPhase::Exiting;
                off_count_ = 1;
            }
            break;
        case BilletPhase::Exiting:
            if (rod_present) {
                phase_ = BilletPhase::Present;
                off_count_ = 0;
                last_present_ts_ = ts;
            } else if (++off_count_ >= cfg_.n_off) {
                phase_ = BilletPhase::Absent;
                on_count_ = 0;
                off_count_ = 0;
                BilletInterval iv{entry_ts_, last_present_ts_};
                intervals_.push_back(iv);
                result.completed = iv;
                double dur = iv.duration_s();
                if (dur < cfg_.short_factor * cfg_.nominal_duration_s) {
                    AnomalyEvent e;
                    e.kind = AnomalyKind::ShortMetal;
                    e.camera_id = camera_id;
                    e.frame_seq = frame_seq;
                    e.ts = ts;
                    e.magnitude = dur;
                    e.detail = "billet duration " + std::to_string(dur) + " s below " +
                               std::to_string(cfg_.short_factor * cfg_.nominal_duration_s) + " s";
                    result.event = e;
                } else if (dur > cfg_.long_factor * cfg_.nominal_duration_s) {
                    AnomalyEvent e;
                    e.kind = AnomalyKind::AbnormalBilletDuration;
                    e.camera_id = camera_id;
                    e.frame_seq = frame_seq;
                    e.ts = ts;
                    e.magnitude = dur;
                    e.detail = "billet duration " + std::to_string(dur) + " s above " +
                               std::to_string(cfg_.long_factor * cfg_.nominal_duration_s) + " s";
                    result.event = e;
                }
            }
            break;
    }
    return result;
}

}  // namespace millwatch
