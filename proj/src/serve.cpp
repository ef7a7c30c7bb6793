#include "millwatch/serve.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <thread>

#include <httplib.h>

#include "millwatch/json_io.hpp"

namespace millwatch {

namespace {

void set_px(Frame& f, int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    if (x < 0 || y < 0 || x >= int(f.width) || y >= int(f.height)) return;
    size_t off = (size_t(y) * f.width + x) * 3;
    f.data[off] = r;
    f.data[off + 1] = g;
    f.data[off + 2] = b;
}

void draw_box(Frame& f, const BBox& box, uint8_t r, uint8_t g, uint8_t b) {
    int x0 = int(box.x_min), x1 = int(box.x_max);
    int y0 = int(box.y_min), y1 = int(box.y_max);
    for (int t = 0; t < 2; ++t) {
        for (int x = x0; x <= x1; ++x) {
            set_px(f, x, y0 + t, r, g, b);
            set_px(f, x, y1 - t, r, g, b);
        }
        for (int y = y0; y <= y1; ++y) {
            set_px(f, x0 + t, y, r, g, b);
            set_px(f, x1 - t, y, r, g, b);
        }
    }
}

}  // namespace

Frame annotate_frame(const LatestView& view) {
    Frame f = view.frame;
    if (!f.has_pixels()) return f;
    for (const auto& d : view.detections) {
        switch (d.object_class) {
            case ObjectClass::Rod: draw_box(f, d.bbox, 0, 255, 0); break;
            case ObjectClass::Flapper: draw_box(f, d.bbox, 255, 255, 0); break;
            case ObjectClass::Diverter: draw_box(f, d.bbox, 0, 255, 255); break;
        }
    }
    if (view.gate.mode == GateMode::Paused) {
        int rows = std::min<int>(24, int(f.height));
        for (int y = 0; y < rows; ++y)
            for (int x = 0; x < int(f.width); ++x) set_px(f, x, y, 220, 30, 30);
    }
    return f;
}

std::string encode_ppm(const Frame& rgb) {
    if (rgb.pixel_format != PixelFormat::RGB8 || !rgb.has_pixels())
        throw std::invalid_argument("encode_ppm: need an RGB8 raster");
    std::string out = "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data.data()), rgb.data.size());
    return out;
}

struct MillServer::Impl {
    ServeState state;
    httplib::Server server;
    std::thread thread;
};

MillServer::MillServer(ServeState state, std::string bind, int port)
    : impl_(std::make_unique<Impl>()), bind_(std::move(bind)), port_(port) {
    impl_->state = std::move(state);
    if (!impl_->state.liveness && impl_->state.runner)
        impl_->state.liveness = [r = impl_->state.runner] { return r->stage_liveness(); };
    if (!impl_->state.running && impl_->state.runner)
        impl_->state.running = [r = impl_->state.runner] { return r->running(); };

    auto* runner = impl_->state.runner;
    auto running = impl_->state.running;

    impl_->server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        auto stages = impl_->state.liveness ? impl_->state.liveness() : std::map<std::string, bool>{};
        bool is_running = impl_->state.running && impl_->state.running();
        nlohmann::json j{{"running", is_running}, {"stages", stages}};
        std::vector<std::string> halted;
        if (is_running)
            for (const auto& [name, alive] : stages)
                if (!alive) halted.push_back(name);
        if (!halted.empty()) {
            j["halted"] = halted;
            res.status = 503;
        }
        res.set_content(j.dump(), "application/json");
    });

    impl_->server.Get("/metrics", [runner](const httplib::Request&, httplib::Response& res) {
        res.set_content(to_json(runner->snapshot_report()).dump(), "application/json");
    });

    impl_->server.Get("/alerts", [runner](const httplib::Request& req, httplib::Response& res) {
        size_t limit = 50;
        if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
        std::string body;
        for (const auto& a : runner->surfaced_alerts(limit)) body += to_json(a).dump() + "\n";
        res.set_content(body, "application/x-ndjson");
    });

    impl_->server.Get("/video_feed", [runner, running](const httplib::Request& req,
                                                       httplib::Response& res) {
        std::string camera = req.get_param_value("camera");
        auto ids = runner->camera_ids();
        if (camera.empty() && ids.size() == 1) camera = ids[0];
        if (std::find(ids.begin(), ids.end(), camera) == ids.end()) {
            nlohmann::json j{{"error", "unknown camera '" + camera + "'"}, {"valid", ids}};
            res.status = 404;
            res.set_content(j.dump(), "application/json");
            return;
        }
        auto last_seq = std::make_shared<std::optional<uint64_t>>();
        res.set_chunked_content_provider(
            std::string("multipart/x-mixed-replace; boundary=") + kStreamBoundary,
            [runner, running, camera, last_seq](size_t, httplib::DataSink& sink) {
                auto view = runner->latest(camera);
                bool live = running && running();
                if (!view.valid || (*last_seq && view.frame.seq == **last_seq)) {
                    if (!live) {
                        sink.done();
                        return false;  // nothing new is coming
                    }
                    std::this_thread::sleep_for(std::chrono::milliseconds(5));
                    return true;
                }
                *last_seq = view.frame.seq;
                std::string payload, ctype;
                if (view.frame.has_pixels()) {
                    payload = encode_ppm(annotate_frame(view));
                    ctype = "image/x-portable-pixmap";
                } else {
                    nlohmann::json dets = nlohmann::json::array();
                    for (const auto& d : view.detections) dets.push_back(to_json(d));
                    payload = nlohmann::json{{"frame", to_json(view.frame)},
                                             {"detections", dets},
                                             {"gate_paused", view.gate.mode == GateMode::Paused}}
                                  .dump() +
                              "\n";
                    ctype = "application/x-ndjson";
                }
                std::string part = std::string("--") + kStreamBoundary + "\r\nContent-Type: " +
                                   ctype + "\r\nContent-Length: " + std::to_string(payload.size()) +
                                   "\r\n\r\n" + payload + "\r\n";
                return sink.write(part.data(), part.size());
            });
    });
}

MillServer::~MillServer() { stop(); }

bool MillServer::start() {
    if (port_ == 0) {
        port_ = impl_->server.bind_to_any_port(bind_);
        if (port_ < 0) return false;
    } else if (!impl_->server.bind_to_port(bind_, port_)) {
        return false;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return true;
}

void MillServer::stop() {
    if (impl_->thread.joinable()) {
        impl_->server.stop();
        impl_->thread.join();
    }
}

struct TcpSignalFeed::Impl {
    SignalBus* bus;
    int listen_fd = -1;
    std::thread thread;
    std::atomic<bool> stopping{false};
    std::atomic<uint64_t> published{0};
    std::atomic<uint64_t> errors{0};
};

TcpSignalFeed::TcpSignalFeed(SignalBus& bus, int port) : impl_(std::make_unique<Impl>()), port_(port) {
    impl_->bus = &bus;
}

TcpSignalFeed::~TcpSignalFeed() { stop(); }

bool TcpSignalFeed::start() {
    impl_->listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (impl_->listen_fd < 0) return false;
    int one = 1;
    ::setsockopt(impl_->listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(uint16_t(port_));
    if (::bind(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 ||
        ::listen(impl_->listen_fd, 4) < 0) {
        ::close(impl_->listen_fd);
        impl_->listen_fd = -1;
        return false;
    }
    socklen_t len = sizeof addr;
    ::getsockname(impl_->listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    impl_->thread = std::thread([impl = impl_.get()] {
        while (!impl->stopping.load()) {
            pollfd pfd{impl->listen_fd, POLLIN, 0};
            if (::poll(&pfd, 1, 100) <= 0) continue;
            int fd = ::accept(impl->listen_fd, nullptr, nullptr);
            if (fd < 0) continue;
            std::string buffer;
            char chunk[4096];
            while (!impl->stopping.load()) {
                pollfd cfd{fd, POLLIN, 0};
                if (::poll(&cfd, 1, 100) <= 0) continue;
                ssize_t n = ::read(fd, chunk, sizeof chunk);
                if (n <= 0) break;
                buffer.append(chunk, size_t(n));
                size_t nl;
                while ((nl = buffer.find('\n')) != std::string::npos) {
                    std::string line = buffer.substr(0, nl);
                    buffer.erase(0, nl + 1);
                    if (line.empty()) continue;
                    try {
                        impl->bus->publish(signals_from_json(nlohmann::json::parse(line)));
                        impl->published.fetch_add(1);
                    } catch (const std::exception&) {
                        impl->errors.fetch_add(1);
                    }
                }
            }
            ::close(fd);
        }
    });
    return true;
}

void TcpSignalFeed::stop() {
    if (impl_->thread.joinable()) {
        impl_->stopping.store(true);
        impl_->thread.join();
    }
    if (impl_->listen_fd >= 0) {
        ::close(impl_->listen_fd);
        impl_->listen_fd = -1;
    }
}

uint64_t TcpSignalFeed::lines_published() const { return impl_->published.load(); }
uint64_t TcpSignalFeed::parse_errors() const { return impl_->errors.load(); }

}  // namespace millwatch
