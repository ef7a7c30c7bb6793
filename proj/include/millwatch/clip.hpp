#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "millwatch/clock.hpp"

namespace millwatch {

/// `<root>/<YYYY-MM-DD>/<HH>/<profile>mm/<camera_id>_clip_<HHMMSS>.ndjson`,
/// where HHMMSS is ts floored to the clip_len boundary within the day
/// (closed-left intervals). All calendar math in UTC.
std::filesystem::path clip_path(const std::filesystem::path& root, TimestampNs ts_acquire,
                                int profile_mm, const std::string& camera_id,
                                double clip_len_s = 120.0);

/// Appends NDJSON records to the clip selected by each record's timestamp,
/// rolling files at clip boundaries. I/O failures are counted, never thrown:
/// storage must not stall the real-time path.
class ClipSegmenter {
public:
    ClipSegmenter(std::filesystem::path root, double clip_len_s = 120.0);
    ~ClipSegmenter();

    void record(const std::string& ndjson_line, TimestampNs ts_acquire, int profile_mm,
                const std::string& camera_id);
    void close();

    uint64_t records_written() const { return records_written_; }
    uint64_t io_errors() const { return io_errors_; }
    const std::set<std::filesystem::path>& files() const { return files_; }

private:
    std::filesystem::path root_;
    double clip_len_s_;
    std::filesystem::path current_path_;
    std::ofstream current_;
    std::set<std::filesystem::path> files_;
    uint64_t records_written_ = 0;
    uint64_t io_errors_ = 0;
};

}  // namespace millwatch
