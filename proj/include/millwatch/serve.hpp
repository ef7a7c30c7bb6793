#pragma once

#include <functional>
#include <memory>
#include <string>

#include "millwatch/pipeline.hpp"

namespace millwatch {

/// Multipart boundary used by /video_feed.
inline constexpr const char* kStreamBoundary = "frame";

/// Annotated copy of a rendered frame: detection boxes outlined, a red PAUSED
/// banner across the top while the gate is paused.
Frame annotate_frame(const LatestView& view);

/// Binary PPM (P6) encoding; codec-free image transport for the stream.
std::string encode_ppm(const Frame& rgb);

struct ServeState {
    PipelineRunner* runner = nullptr;
    // Injectable for tests; default to the runner's own view.
    std::function<std::map<std::string, bool>()> liveness;
    std::function<bool()> running;
};

/// HTTP surface: /video_feed, /alerts, /metrics, /health. Never applies
/// backpressure to the pipeline: the stream serves the latest frame only.
class MillServer {
public:
    MillServer(ServeState state, std::string bind, int port);
    ~MillServer();

    bool start();  // spawns the listener thread; false if bind fails
    void stop();
    int port() const { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::string bind_;
    int port_;
};

/// Line-delimited NDJSON ProcessSignals feed over TCP, published straight
/// onto the pipeline's signal bus. The integration seam for plant systems.
class TcpSignalFeed {
public:
    TcpSignalFeed(SignalBus& bus, int port);
    ~TcpSignalFeed();

    bool start();
    void stop();
    int port() const { return port_; }
    uint64_t lines_published() const;
    uint64_t parse_errors() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_;
};

}  // namespace millwatch
