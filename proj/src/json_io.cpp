#include "millwatch/json_io.hpp"

namespace millwatch {

using nlohmann::json;

static const char b64_chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<uint8_t>& data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 2 < data.size(); i += 3) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += b64_chars[(v >> 18) & 63];
        out += b64_chars[(v >> 12) & 63];
        out += b64_chars[(v >> 6) & 63];
        out += b64_chars[v & 63];
    }
    if (i + 1 == data.size()) {
        uint32_t v = data[i] << 16;
        out += b64_chars[(v >> 18) & 63];
        out += b64_chars[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == data.size()) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out += b64_chars[(v >> 18) & 63];
        out += b64_chars[(v >> 12) & 63];
        out += b64_chars[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<uint8_t> base64_decode(const std::string& s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    if (s.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
    std::vector<uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (size_t i = 0; i < s.size(); i += 4) {
        int n = 4;
        if (s[i + 3] == '=') n = 3;
        if (s[i + 2] == '=') n = 2;
        uint32_t v = 0;
        for (int k = 0; k < n; ++k) {
            int d = val(s[i + k]);
            if (d < 0) throw std::invalid_argument("base64: bad character");
            v |= uint32_t(d) << (18 - 6 * k);
        }
        if (n >= 2) out.push_back((v >> 16) & 0xff);
        if (n >= 3) out.push_back((v >> 8) & 0xff);
        if (n == 4) out.push_back(v & 0xff);
    }
    return out;
}

PixelFormat pixel_format_from_string(const std::string& s) {
    if (s == "BayerRG8") return PixelFormat::BayerRG8;
    if (s == "RGB8") return PixelFormat::RGB8;
    throw std::invalid_argument("unknown pixel_format '" + s + "'");
}

ObjectClass object_class_from_string(const std::string& s) {
    if (s == "Rod") return ObjectClass::Rod;
    if (s == "Flapper") return ObjectClass::Flapper;
    if (s == "Diverter") return ObjectClass::Diverter;
    throw std::invalid_argument("unknown object class '" + s + "'");
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "Vibration") return AnomalyKind::Vibration;
    if (s == "FlapperDeviation") return AnomalyKind::FlapperDeviation;
    if (s == "DiverterShift") return AnomalyKind::DiverterShift;
    if (s == "ShortMetal") return AnomalyKind::ShortMetal;
    if (s == "AbnormalBilletDuration") return AnomalyKind::AbnormalBilletDuration;
    throw std::invalid_argument("unknown anomaly kind '" + s + "'");
}

json to_json(const Frame& f) {
    return json{{"camera_id", f.camera_id},
                {"seq", f.seq},
                {"ts_acquire", f.ts_acquire},
                {"width", f.width},
                {"height", f.height},
                {"pixel_format", to_string(f.pixel_format)},
                {"data", base64_encode(f.data)},
                {"profile_mm", f.profile_mm}};
}

Frame frame_from_json(const json& j) {
    return make_frame(j.at("camera_id").get<std::string>(), j.at("seq").get<uint64_t>(),
                      j.at("ts_acquire").get<TimestampNs>(), j.at("width").get<uint32_t>(),
                      j.at("height").get<uint32_t>(),
                      pixel_format_from_string(j.at("pixel_format").get<std::string>()),
                      base64_decode(j.at("data").get<std::string>()), j.at("profile_mm").get<int>());
}

json to_json(const Detection& d) {
    return json{{"class", to_string(d.object_class)},
                {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                {"confidence", d.confidence},
                {"frame_seq", d.frame_seq},
                {"center", {d.center.x, d.center.y}}};
}

Detection detection_from_json(const json& j) {
    auto b = j.at("bbox");
    BBox box{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
             b.at(3).get<double>()};
    return make_detection(object_class_from_string(j.at("class").get<std::string>()), box,
                          j.at("confidence").get<double>(), j.at("frame_seq").get<uint64_t>());
}

json to_json(const ProcessSignals& s) {
    return json{{"mill_running", s.mill_running},
                {"ghost_rolling", s.ghost_rolling},
                {"material_present", s.material_present},
                {"dividing_cut_active", s.dividing_cut_active},
                {"dividing_cut_until", s.dividing_cut_until},
                {"signal_ts", s.signal_ts}};
}

ProcessSignals signals_from_json(const json& j) {
    ProcessSignals s;
    s.mill_running = j.at("mill_running").get<bool>();
    s.ghost_rolling = j.at("ghost_rolling").get<bool>();
    s.material_present = j.at("material_present").get<bool>();
    s.dividing_cut_active = j.at("dividing_cut_active").get<bool>();
    s.dividing_cut_until = j.at("dividing_cut_until").get<TimestampNs>();
    s.signal_ts = j.at("signal_ts").get<TimestampNs>();
    if (s.dividing_cut_active && s.dividing_cut_until < s.signal_ts)
        throw std::invalid_argument("signals: dividing_cut_until before signal_ts");
    return s;
}

json to_json(const AnomalyEvent& e) {
    return json{{"kind", to_string(e.kind)},     {"camera_id", e.camera_id},
                {"frame_seq", e.frame_seq},      {"ts", e.ts},
                {"magnitude", e.magnitude},      {"detail", e.detail}};
}

AnomalyEvent anomaly_from_json(const json& j) {
    AnomalyEvent e;
    e.kind = anomaly_kind_from_string(j.at("kind").get<std::string>());
    e.camera_id = j.at("camera_id").get<std::string>();
    e.frame_seq = j.at("frame_seq").get<uint64_t>();
    e.ts = j.at("ts").get<TimestampNs>();
    e.magnitude = j.at("magnitude").get<double>();
    e.detail = j.at("detail").get<std::string>();
    if (e.magnitude < 0) throw std::invalid_argument("anomaly: negative magnitude");
    return e;
}

json to_json(const Alert& a) {
    return json{{"event", to_json(a.event)},
                {"alert_id", a.alert_id},
                {"raised_ts", a.raised_ts},
                {"suppressed", a.suppressed},
                {"coalesced_count", a.coalesced_count}};
}

Alert alert_from_json(const json& j) {
    Alert a;
    a.event = anomaly_from_json(j.at("event"));
    a.alert_id = j.at("alert_id").get<uint64_t>();
    a.raised_ts = j.at("raised_ts").get<TimestampNs>();
    a.suppressed = j.at("suppressed").get<bool>();
    a.coalesced_count = j.at("coalesced_count").get<uint64_t>();
    if (a.coalesced_count < 1) throw std::invalid_argument("alert: coalesced_count < 1");
    return a;
}

json to_json(const MetricPoint& p) {
    return json{{"measurement", p.measurement}, {"tags", p.tags}, {"fields", p.fields}, {"ts", p.ts}};
}

MetricPoint metric_point_from_json(const json& j) {
    return make_metric_point(j.at("measurement").get<std::string>(),
                             j.at("tags").get<std::map<std::string, std::string>>(),
                             j.at("fields").get<std::map<std::string, double>>(),
                             j.at("ts").get<TimestampNs>());
}

}  // namespace millwatch
