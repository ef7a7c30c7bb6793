#include "millwatch/types.hpp"

#include <cctype>

namespace millwatch {

Frame make_frame(std::string camera_id, uint64_t seq, TimestampNs ts_acquire, uint32_t width,
                 uint32_t height, PixelFormat fmt, std::vector<uint8_t> data, int profile_mm) {
    if (camera_id.empty()) throw std::invalid_argument("frame: empty camera_id");
    if (!valid_profile_mm(profile_mm))
        throw std::invalid_argument("frame: profile_mm must be one of {10,12,16,20,40}, got " +
                                    std::to_string(profile_mm));
    if (!data.empty()) {
        size_t expect = size_t(width) * height * bytes_per_pixel(fmt);
        if (data.size() != expect)
            throw std::invalid_argument("frame: data length " + std::to_string(data.size()) +
                                        " != expected " + std::to_string(expect));
    }
    Frame f;
    f.camera_id = std::move(camera_id);
    f.seq = seq;
    f.ts_acquire = ts_acquire;
    f.width = width;
    f.height = height;
    f.pixel_format = fmt;
    f.data = std::move(data);
    f.profile_mm = profile_mm;
    return f;
}

Point bbox_center(const BBox& b) {
    if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max))
        throw std::invalid_argument("bbox_center: degenerate bbox");
    return {(b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0};
}

Detection make_detection(ObjectClass cls, BBox bbox, double confidence, uint64_t frame_seq) {
    if (confidence < 0.0 || confidence > 1.0)
        throw std::invalid_argument("detection: confidence out of [0,1]");
    Detection d;
    d.object_class = cls;
    d.bbox = bbox;
    d.confidence = confidence;
    d.frame_seq = frame_seq;
    d.center = bbox_center(bbox);  // also validates the box
    return d;
}

static bool has_whitespace(const std::string& s) {
    for (unsigned char c : s)
        if (std::isspace(c)) return true;
    return false;
}

MetricPoint make_metric_point(std::string measurement, std::map<std::string, std::string> tags,
                              std::map<std::string, double> fields, TimestampNs ts) {
    if (measurement.empty() || has_whitespace(measurement))
        throw std::invalid_argument("metric point: bad measurement '" + measurement + "'");
    for (const auto& [k, v] : tags) {
        if (k.empty() || has_whitespace(k))
            throw std::invalid_argument("metric point: bad tag key '" + k + "'");
    }
    for (const auto& [k, v] : fields) {
        if (k.empty() || has_whitespace(k))
            throw std::invalid_argument("metric point: bad field key '" + k + "'");
    }
    if (fields.empty()) throw std::invalid_argument("metric point: at least one field required");
    MetricPoint p;
    p.measurement = std::move(measurement);
    p.tags = std::move(tags);
    p.fields = std::move(fields);
    p.ts = ts;
    return p;
}

}  // namespace millwatch
