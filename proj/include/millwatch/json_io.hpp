#pragma once

#include <json.hpp>

#include "millwatch/types.hpp"

// Canonical NDJSON form of the core types: one JSON object per line, field
// names matching the struct fields. Frame pixel data travels as base64.

namespace millwatch {

nlohmann::json to_json(const Frame& f);
Frame frame_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ProcessSignals& s);
ProcessSignals signals_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AnomalyEvent& e);
AnomalyEvent anomaly_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Alert& a);
Alert alert_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricPoint& p);
MetricPoint metric_point_from_json(const nlohmann::json& j);

std::string base64_encode(const std::vector<uint8_t>& data);
std::vector<uint8_t> base64_decode(const std::string& s);

PixelFormat pixel_format_from_string(const std::string& s);
ObjectClass object_class_from_string(const std::string& s);
AnomalyKind anomaly_kind_from_string(const std::string& s);

}  // namespace millwatch
