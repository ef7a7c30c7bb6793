#include "millwatch/clip.hpp"

#include <cinttypes>
#include <cstdio>
#include <ctime>

namespace millwatch {

std::filesystem::path clip_path(const std::filesystem::path& root, TimestampNs ts_acquire,
                                int profile_mm, const std::string& camera_id, double clip_len_s) {
    int64_t clip_len = int64_t(clip_len_s);
    time_t secs = time_t(ts_acquire / ns_per_s);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    int64_t sod = tm.tm_hour * 3600 + tm.tm_min * 60 + tm.tm_sec;
    int64_t boundary = sod - sod % clip_len;

    char date[16], dir_hour[4], stamp[8];
    std::snprintf(date, sizeof date, "%04d-%02d-%02d", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday);
    std::snprintf(dir_hour, sizeof dir_hour, "%02" PRId64, boundary / 3600);
    std::snprintf(stamp, sizeof stamp, "%02" PRId64 "%02" PRId64 "%02" PRId64, boundary / 3600,
                  (boundary / 60) % 60, boundary % 60);
    return root / date / dir_hour / (std::to_string(profile_mm) + "mm") /
           (camera_id + "_clip_" + stamp + ".ndjson");
}

ClipSegmenter::ClipSegmenter(std::filesystem::path root, double clip_len_s)
    : root_(std::move(root)), clip_len_s_(clip_len_s) {}

ClipSegmenter::~ClipSegmenter() { close(); }

void ClipSegmenter::record(const std::string& ndjson_line, TimestampNs ts_acquire, int profile_mm,
                           const std::string& camera_id) {
    auto path = clip_path(root_, ts_acquire, profile_mm, camera_id, clip_len_s_);
    if (path != current_path_) {
        if (current_.is_open()) current_.close();
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        current_.open(path, std::ios::app);
        current_path_ = path;
        if (current_) files_.insert(path);
    }
    if (!current_) {
        ++io_errors_;
        return;
    }
    current_ << ndjson_line << '\n';
    if (!current_) {
        ++io_errors_;
        current_.clear();
        return;
    }
    ++records_written_;
}

void ClipSegmenter::close() {
    if (current_.is_open()) current_.close();
    current_path_.clear();
}

}  // namespace millwatch
