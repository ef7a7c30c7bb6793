#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cstring>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "millwatch/json_io.hpp"
#include "millwatch/serve.hpp"

using namespace millwatch;

namespace {

SceneGeometry small_scene() {
    SceneGeometry g;
    g.width = 64;
    g.height = 48;
    g.rod_cx = 32;
    g.rod_baseline_cy = 24;
    g.rod_half_w = 10;
    g.rod_half_h = 3;
    g.flapper_x = 10;
    g.flapper_y = 10;
    g.flapper_half = 3;
    g.diverter_x = 48;
    g.diverter_y = 40;
    g.diverter_half = 4;
    return g;
}

/// Completed run whose engine holds surfaced alerts and whose latest views
/// are valid rendered frames.
struct Fixture {
    SimClock clk;
    std::unique_ptr<PipelineRunner> runner;

    explicit Fixture(bool render = true) {
        Scenario sc;
        sc.fps = 30;
        sc.duration_s = 3;
        sc.events = {{ScriptEventKind::VibrationBurst, 0.5, 2.5, {{"amplitude_px", 10.0}}}};
        CameraSetup cam;
        cam.camera_id = "cam1";
        cam.scenario = sc;
        cam.render = render;
        cam.geometry = small_scene();
        cam.flapper.baseline = {10, 10};
        cam.diverter.reference_x = 48;
        runner = std::make_unique<PipelineRunner>(std::vector<CameraSetup>{cam},
                                                  PipelineOptions{}, clk);
        runner->run();
    }
};

ServeState state_for(PipelineRunner& r, bool running, std::map<std::string, bool> stages) {
    ServeState s;
    s.runner = &r;
    s.liveness = [stages] { return stages; };
    s.running = [running] { return running; };
    return s;
}

}  // namespace

TEST_CASE("health reports 200 when healthy and 503 naming dead stages") {
    Fixture fx(false);
    SUBCASE("running and all stages alive") {
        MillServer srv(state_for(*fx.runner, true, {{"detect", true}, {"storage", true}}),
                       "127.0.0.1", 0);
        REQUIRE(srv.start());
        httplib::Client cli("127.0.0.1", srv.port());
        auto res = cli.Get("/health");
        REQUIRE(res);
        CHECK(res->status == 200);
        auto j = nlohmann::json::parse(res->body);
        CHECK(j["running"] == true);
        CHECK(j["stages"]["detect"] == true);
    }
    SUBCASE("running with a dead stage") {
        MillServer srv(state_for(*fx.runner, true, {{"detect", false}, {"storage", true}}),
                       "127.0.0.1", 0);
        REQUIRE(srv.start());
        httplib::Client cli("127.0.0.1", srv.port());
        auto res = cli.Get("/health");
        REQUIRE(res);
        CHECK(res->status == 503);
        auto j = nlohmann::json::parse(res->body);
        REQUIRE(j.contains("halted"));
        CHECK(j["halted"][0] == "detect");
    }
    SUBCASE("finished run is healthy even with stages stopped") {
        MillServer srv(state_for(*fx.runner, false, {{"detect", false}}), "127.0.0.1", 0);
        REQUIRE(srv.start());
        httplib::Client cli("127.0.0.1", srv.port());
        auto res = cli.Get("/health");
        REQUIRE(res);
        CHECK(res->status == 200);
    }
}

TEST_CASE("alerts endpoint serves NDJSON with a limit") {
    Fixture fx(false);
    REQUIRE(fx.runner->alert_engine().surfaced_count() >= 1);
    MillServer srv(state_for(*fx.runner, false, {}), "127.0.0.1", 0);
    REQUIRE(srv.start());
    httplib::Client cli("127.0.0.1", srv.port());

    auto res = cli.Get("/alerts");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "application/x-ndjson");
    size_t lines = 0;
    std::istringstream in(res->body);
    std::string line;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);  // every line is standalone JSON
        CHECK(j.contains("alert_id"));
        ++lines;
    }
    CHECK(lines == fx.runner->alert_engine().surfaced_count());

    res = cli.Get("/alerts?limit=1");
    REQUIRE(res);
    std::istringstream in2(res->body);
    lines = 0;
    while (std::getline(in2, line)) ++lines;
    CHECK(lines == 1);
}

TEST_CASE("metrics endpoint returns the run report") {
    Fixture fx(false);
    MillServer srv(state_for(*fx.runner, false, {}), "127.0.0.1", 0);
    REQUIRE(srv.start());
    httplib::Client cli("127.0.0.1", srv.port());
    auto res = cli.Get("/metrics");
    REQUIRE(res);
    auto j = nlohmann::json::parse(res->body);
    CHECK(j["frames_processed"] == 90);
    CHECK(j["failed"] == false);
}

TEST_CASE("video_feed 404 names the valid camera ids") {
    Fixture fx(false);
    MillServer srv(state_for(*fx.runner, false, {}), "127.0.0.1", 0);
    REQUIRE(srv.start());
    httplib::Client cli("127.0.0.1", srv.port());
    auto res = cli.Get("/video_feed?camera=nope");
    REQUIRE(res);
    CHECK(res->status == 404);
    auto j = nlohmann::json::parse(res->body);
    CHECK(j["valid"][0] == "cam1");
}

TEST_CASE("video_feed streams a complete PPM part and ends after the run") {
    Fixture fx(true);
    MillServer srv(state_for(*fx.runner, false, {}), "127.0.0.1", 0);
    REQUIRE(srv.start());
    httplib::Client cli("127.0.0.1", srv.port());
    std::string body;
    auto res = cli.Get("/video_feed", [&](const char* data, size_t n) {
        body.append(data, n);
        return true;
    });
    REQUIRE(res);
    CHECK(res->get_header_value("Content-Type").find("multipart/x-mixed-replace") == 0);
    CHECK(res->get_header_value("Content-Type").find("boundary=frame") != std::string::npos);

    const std::string head = "--frame\r\nContent-Type: image/x-portable-pixmap\r\nContent-Length: ";
    REQUIRE(body.rfind(head, 0) == 0);
    size_t len_end = body.find("\r\n", head.size());
    size_t length = std::stoul(body.substr(head.size(), len_end - head.size()));
    std::string payload = body.substr(len_end + 4, length);
    REQUIRE(payload.size() == length);
    CHECK(payload.rfind("P6\n64 48\n255\n", 0) == 0);
    CHECK(length == strlen("P6\n64 48\n255\n") + 64 * 48 * 3);
}

TEST_CASE("descriptor runs stream NDJSON parts instead of images") {
    Fixture fx(false);
    MillServer srv(state_for(*fx.runner, false, {}), "127.0.0.1", 0);
    REQUIRE(srv.start());
    httplib::Client cli("127.0.0.1", srv.port());
    std::string body;
    auto res = cli.Get("/video_feed?camera=cam1", [&](const char* data, size_t n) {
        body.append(data, n);
        return true;
    });
    REQUIRE(res);
    REQUIRE(body.rfind("--frame\r\nContent-Type: application/x-ndjson", 0) == 0);
    size_t start = body.find("\r\n\r\n") + 4;
    size_t end = body.find('\n', start);
    auto j = nlohmann::json::parse(body.substr(start, end - start));
    CHECK(j["frame"]["camera_id"] == "cam1");
    CHECK(j["gate_paused"] == false);
    CHECK(j.contains("detections"));
}

TEST_CASE("annotate_frame outlines detections and paints the paused banner") {
    Frame f = make_frame("cam1", 0, 0, 64, 48, PixelFormat::RGB8,
                         std::vector<uint8_t>(64 * 48 * 3, 0), 12);
    LatestView view;
    view.valid = true;
    view.frame = f;
    view.detections = {make_detection(ObjectClass::Rod, {30, 30, 40, 40}, 0.9, 0)};
    view.gate.mode = GateMode::Paused;
    Frame out = annotate_frame(view);

    auto px = [&](int x, int y) {
        size_t off = (size_t(y) * out.width + x) * 3;
        return std::array<uint8_t, 3>{out.data[off], out.data[off + 1], out.data[off + 2]};
    };
    CHECK(px(0, 0) == std::array<uint8_t, 3>{220, 30, 30});   // banner
    CHECK(px(63, 23) == std::array<uint8_t, 3>{220, 30, 30});  // banner bottom row
    CHECK(px(35, 30) == std::array<uint8_t, 3>{0, 255, 0});    // rod box top edge
    CHECK(px(35, 35) == std::array<uint8_t, 3>{0, 0, 0});      // interior untouched

    view.gate.mode = GateMode::Active;
    Frame active = annotate_frame(view);
    CHECK(active.data[0] == 0);  // no banner when active

    Frame descriptor;
    LatestView dview;
    dview.frame = descriptor;
    CHECK(!annotate_frame(dview).has_pixels());
}

TEST_CASE("encode_ppm rejects non-raster frames") {
    CHECK_THROWS_AS(encode_ppm(Frame{}), std::invalid_argument);
    auto bayer = make_frame("c", 0, 0, 2, 2, PixelFormat::BayerRG8,
                            std::vector<uint8_t>(4, 0), 12);
    CHECK_THROWS_AS(encode_ppm(bayer), std::invalid_argument);
}

TEST_CASE("tcp signal feed publishes NDJSON lines onto the bus") {
    SignalBus bus;
    TcpSignalFeed feed(bus, 0);
    REQUIRE(feed.start());
    REQUIRE(feed.port() > 0);

    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(uint16_t(feed.port()));
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);

    ProcessSignals s;
    s.mill_running = false;
    s.ghost_rolling = true;
    s.signal_ts = ns_from_s(42);
    std::string msg = to_json(s).dump() + "\nthis is not json\n";
    REQUIRE(::write(fd, msg.data(), msg.size()) == ssize_t(msg.size()));

    for (int i = 0; i < 100 && feed.lines_published() + feed.parse_errors() < 2; ++i)
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    ::close(fd);
    feed.stop();

    CHECK(feed.lines_published() == 1);
    CHECK(feed.parse_errors() == 1);
    auto r = bus.read(ns_from_s(42));
    CHECK(r.ever_published);
    CHECK(!r.signals.mill_running);
    CHECK(r.signals.ghost_rolling);
}
