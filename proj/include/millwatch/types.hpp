#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "millwatch/clock.hpp"

namespace millwatch {

enum class PixelFormat { BayerRG8, RGB8 };

inline const char* to_string(PixelFormat f) {
    return f == PixelFormat::BayerRG8 ? "BayerRG8" : "RGB8";
}

inline size_t bytes_per_pixel(PixelFormat f) { return f == PixelFormat::BayerRG8 ? 1 : 3; }

inline bool valid_profile_mm(int p) {
    return p == 10 || p == 12 || p == 16 || p == 20 || p == 40;
}

/// One timestamped, sequence-numbered image flowing through the pipeline.
/// `data` may be empty: a descriptor frame carries geometry ground truth only
/// and no pixels (the default simulator mode). When non-empty its length must
/// match width*height*bytes_per_pixel exactly.
struct Frame {
    std::string camera_id;
    uint64_t seq = 0;
    TimestampNs ts_acquire = 0;
    uint32_t width = 0;
    uint32_t height = 0;
    PixelFormat pixel_format = PixelFormat::RGB8;
    std::vector<uint8_t> data;
    int profile_mm = 12;

    bool has_pixels() const { return !data.empty(); }
};

/// Throws std::invalid_argument on any invariant violation.
Frame make_frame(std::string camera_id, uint64_t seq, TimestampNs ts_acquire, uint32_t width,
                 uint32_t height, PixelFormat fmt, std::vector<uint8_t> data, int profile_mm);

struct BBox {
    double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

enum class ObjectClass { Rod, Flapper, Diverter };

inline const char* to_string(ObjectClass c) {
    switch (c) {
        case ObjectClass::Rod: return "Rod";
        case ObjectClass::Flapper: return "Flapper";
        case ObjectClass::Diverter: return "Diverter";
    }
    return "Rod";
}

struct Point {
    double x = 0, y = 0;
};

/// cx=(x_min+x_max)/2, cy=(y_min+y_max)/2. Degenerate boxes rejected.
Point bbox_center(const BBox& b);

struct Detection {
    ObjectClass object_class = ObjectClass::Rod;
    BBox bbox;
    double confidence = 0;
    uint64_t frame_seq = 0;
    Point center;  // always the bbox midpoint
};

Detection make_detection(ObjectClass cls, BBox bbox, double confidence, uint64_t frame_seq);

/// Latest fused plant-state snapshot.
struct ProcessSignals {
    bool mill_running = true;
    bool ghost_rolling = false;
    bool material_present = true;
    bool dividing_cut_active = false;
    TimestampNs dividing_cut_until = 0;
    TimestampNs signal_ts = 0;
};

enum class AnomalyKind { Vibration, FlapperDeviation, DiverterShift, ShortMetal, AbnormalBilletDuration };

inline const char* to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::Vibration: return "Vibration";
        case AnomalyKind::FlapperDeviation: return "FlapperDeviation";
        case AnomalyKind::DiverterShift: return "DiverterShift";
        case AnomalyKind::ShortMetal: return "ShortMetal";
        case AnomalyKind::AbnormalBilletDuration: return "AbnormalBilletDuration";
    }
    return "Vibration";
}

/// Magnitude unit depends on kind: px std-dev for Vibration, px for
/// FlapperDeviation, mm for DiverterShift, seconds for the billet kinds.
struct AnomalyEvent {
    AnomalyKind kind = AnomalyKind::Vibration;
    std::string camera_id;
    uint64_t frame_seq = 0;
    TimestampNs ts = 0;
    double magnitude = 0;
    std::string detail;
};

struct Alert {
    AnomalyEvent event;
    uint64_t alert_id = 0;
    TimestampNs raised_ts = 0;
    bool suppressed = false;
    uint64_t coalesced_count = 1;
};

/// One time-series record bound for the line-format sink.
struct MetricPoint {
    std::string measurement;
    std::map<std::string, std::string> tags;
    std::map<std::string, double> fields;
    TimestampNs ts = 0;
};

/// Enforces line-format safety: nonempty whitespace-free measurement and tag
/// keys, at least one field.
MetricPoint make_metric_point(std::string measurement, std::map<std::string, std::string> tags,
                              std::map<std::string, double> fields, TimestampNs ts);

}  // namespace millwatch
