#include <doctest.h>

#include <cstdio>
#include <random>

#include "millwatch/simsource.hpp"

using namespace millwatch;

namespace {

Scenario basic(double fps, double duration, std::vector<ScriptEvent> events = {}) {
    Scenario sc;
    sc.fps = fps;
    sc.duration_s = duration;
    sc.events = std::move(events);
    return sc;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/millwatch_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("gen_stream frame count and seq numbering") {
    auto stream = gen_stream(basic(45, 2));
    REQUIRE(stream.size() == 90);
    CHECK(stream.front().frame.seq == 0);
    CHECK(stream.back().frame.seq == 89);
}

TEST_CASE("frame spacing is exactly round(1e9/fps)") {
    auto sc = basic(45, 1);
    auto stream = gen_stream(sc);
    TimestampNs period = ns_from_s(1.0 / 45.0);
    for (size_t i = 1; i < stream.size(); ++i)
        CHECK(stream[i].frame.ts_acquire - stream[i - 1].frame.ts_acquire == period);
}

TEST_CASE("billet pass maps to rod presence on exact frames") {
    auto stream = gen_stream(basic(10, 4, {{ScriptEventKind::BilletPass, 1.0, 3.0, {}}}));
    REQUIRE(stream.size() == 40);
    for (const auto& rec : stream) {
        bool expect = rec.frame.seq >= 10 && rec.frame.seq <= 29;
        CHECK(rec.gt.rod_present == expect);
        CHECK(rec.gt.rod_center.has_value() == expect);
    }
}

TEST_CASE("same scenario and seed give identical ground truth") {
    auto sc = basic(30, 3, {{ScriptEventKind::VibrationBurst, 0.5, 2.5, {{"amplitude_px", 25}}}});
    sc.seed = 7;
    auto a = gen_stream(sc);
    auto b = gen_stream(sc);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(to_json(a[i].gt).dump() == to_json(b[i].gt).dump());
}

TEST_CASE("vibration burst oscillates cy with the scripted amplitude") {
    double amp = 30;
    auto sc = basic(100, 4,
                    {{ScriptEventKind::VibrationBurst, 1.0, 3.0, {{"amplitude_px", amp}}}});
    auto stream = gen_stream(sc);
    SceneGeometry geo;
    double max_dev = 0;
    for (const auto& rec : stream) {
        if (!rec.gt.rod_center) continue;
        max_dev = std::max(max_dev, std::abs(rec.gt.rod_center->y - geo.rod_baseline_cy));
    }
    CHECK(max_dev == doctest::Approx(amp).epsilon(0.04));  // within 1 px of A
    CHECK(max_dev <= amp + 1e-9);
}

TEST_CASE("gen_signals window mapping") {
    SUBCASE("idle window") {
        auto sigs = gen_signals(basic(45, 10, {{ScriptEventKind::IdleWindow, 5, 8, {}}}));
        REQUIRE(sigs.size() == 10);
        for (int t = 0; t < 10; ++t)
            CHECK(sigs[t].mill_running == !(t >= 5 && t < 8));
    }
    SUBCASE("no events: all running") {
        for (const auto& s : gen_signals(basic(45, 5)))
            CHECK((s.mill_running && !s.ghost_rolling && !s.dividing_cut_active));
    }
    SUBCASE("dividing cut carries its end time") {
        auto sigs = gen_signals(basic(45, 15, {{ScriptEventKind::DividingCut, 10, 12, {}}}));
        CHECK(sigs[10].dividing_cut_active);
        CHECK(sigs[10].dividing_cut_until == ns_from_s(12.0));
        CHECK(!sigs[9].dividing_cut_active);
    }
}

TEST_CASE("camera dropout leaves a seq gap and a reconnect record") {
    SUBCASE("window in the middle") {
        Scenario sc = basic(10, 3, {{ScriptEventKind::CameraDropout, 1.0, 1.5, {}}});
        SynthSource src(sc);
        std::vector<uint64_t> seqs;
        while (auto rec = src.next()) seqs.push_back(rec->frame.seq);
        for (uint64_t s : seqs) CHECK((s < 10 || s >= 15));
        CHECK(std::find(seqs.begin(), seqs.end(), 15) != seqs.end());
        REQUIRE(src.reconnect_log().size() == 1);
        CHECK(src.reconnect_log()[0].frames_lost == 5);
    }
    SUBCASE("dropout covering the whole run") {
        Scenario sc = basic(10, 2, {{ScriptEventKind::CameraDropout, 0, 2, {}}});
        SynthSource src(sc);
        CHECK(!src.next().has_value());
        CHECK(src.reconnect_log().size() == 1);
    }
    SUBCASE("no dropout: identity") {
        Scenario sc = basic(10, 2);
        auto plain = gen_stream(sc);
        ScriptEvent other{ScriptEventKind::IdleWindow, 0.5, 1.0, {}};
        auto same = simulate_dropout(plain, other, sc.fps, 0, nullptr);
        CHECK(same.size() == plain.size());
    }
}

TEST_CASE("replay round-trips and validates") {
    auto sc = basic(20, 2, {{ScriptEventKind::BilletPass, 0.5, 1.5, {}}});
    auto stream = gen_stream(sc);

    TempFile f("replay.ndjson");
    write_replay(f.path, stream);
    auto back = read_replay(f.path);
    REQUIRE(back.size() == stream.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].frame.seq == stream[i].frame.seq);
        CHECK(to_json(back[i].gt).dump() == to_json(stream[i].gt).dump());
    }
}

TEST_CASE("replay property: random scenarios round-trip exactly") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        Scenario sc;
        sc.fps = 5 + double(rng() % 40);
        sc.duration_s = 2 + double(rng() % 3);
        double start = double(rng() % 100) / 100.0;
        sc.events.push_back({ScriptEventKind::BilletPass, start,
                             start + 0.2 + double(rng() % 50) / 100.0, {}});
        validate_scenario(sc);
        auto stream = gen_stream(sc);
        TempFile f("replay_prop.ndjson");
        write_replay(f.path, stream);
        auto back = read_replay(f.path);
        REQUIRE(back.size() == stream.size());
        for (size_t i = 0; i < back.size(); ++i) {
            CHECK(back[i].frame.ts_acquire == stream[i].frame.ts_acquire);
            CHECK(to_json(back[i].gt).dump() == to_json(stream[i].gt).dump());
        }
    }
}

TEST_CASE("replay reader errors cite the line") {
    TempFile f("replay_bad.ndjson");
    {
        auto stream = gen_stream(basic(10, 1));
        write_replay(f.path, stream);
        FILE* fp = std::fopen(f.path.c_str(), "a");
        std::fputs("{\"frame\": {\"camera_id\": \"cam1\"", fp);  // truncated
        std::fclose(fp);
    }
    try {
        read_replay(f.path);
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 11") != std::string::npos);
    }
}

TEST_CASE("replay reader rejects seq regression") {
    TempFile f("replay_seq.ndjson");
    auto stream = gen_stream(basic(10, 1));
    std::swap(stream[4], stream[5]);
    write_replay(f.path, stream);
    try {
        read_replay(f.path);
        FAIL("expected regression error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("regression") != std::string::npos);
    }
}

TEST_CASE("scenario validation rejects bad scripts") {
    CHECK_THROWS(validate_scenario(basic(0, 1)));
    CHECK_THROWS(validate_scenario(basic(10, 0)));
    CHECK_THROWS(validate_scenario(basic(10, 1, {{ScriptEventKind::BilletPass, 0.5, 0.5, {}}})));
    CHECK_THROWS(validate_scenario(basic(10, 1, {{ScriptEventKind::BilletPass, 0.5, 2.0, {}}})));
    CHECK_THROWS(validate_scenario(basic(10, 2,
                                         {{ScriptEventKind::BilletPass, 1.0, 1.5, {}},
                                          {ScriptEventKind::IdleWindow, 0.1, 0.5, {}}})));
}

TEST_CASE("render mode emits a valid RGB8 raster with the rod drawn") {
    Scenario sc = basic(10, 1, {{ScriptEventKind::BilletPass, 0, 1, {}}});
    SynthOptions opts;
    opts.render = true;
    auto stream = gen_stream(sc, opts);
    REQUIRE(!stream.empty());
    const Frame& f = stream[0].frame;
    CHECK(f.pixel_format == PixelFormat::RGB8);
    CHECK(f.data.size() == size_t(f.width) * f.height * 3);
    SceneGeometry geo;
    size_t off = (size_t(geo.rod_baseline_cy) * f.width + size_t(geo.rod_cx)) * 3;
    CHECK(f.data[off] == 230);  // rod fill color at its center
}
