#include <doctest.h>

#include <fstream>

#include "millwatch/config.hpp"

using namespace millwatch;
using nlohmann::json;

namespace {

struct TempScenario {
    std::string path = "/tmp/millwatch_cfg_scenario.json";
    TempScenario() {
        Scenario sc;
        sc.fps = 30;
        sc.duration_s = 2;
        std::ofstream(path) << to_json(sc).dump();
    }
    ~TempScenario() { std::remove(path.c_str()); }
};

json minimal(const std::string& scenario_path) {
    return json{{"cameras", json::array({json{{"camera_id", "cam1"},
                                              {"source", "synth:" + scenario_path},
                                              {"profile_mm", 12}}})}};
}

}  // namespace

TEST_CASE("minimal config fills documented defaults") {
    TempScenario sc;
    auto c = config_from_json(minimal(sc.path));
    CHECK(c.seed == 0);
    CHECK(!c.wall_clock);
    CHECK(c.clip_len_s == 120.0);
    CHECK(c.metrics_path == "metrics.lp");
    CHECK(c.alerts_path == "alerts.ndjson");
    CHECK(c.queue_capacity == 128);
    CHECK(c.detect_policy == QueuePolicy::DropOldest);
    CHECK(c.storage_policy == QueuePolicy::Block);
    CHECK(c.debounce_window_s == 10.0);
    CHECK(c.suppression_enabled);
    CHECK(c.suppress_grace_s == 2.0);
    CHECK(c.staleness_limit_s == 5.0);
    CHECK(c.match_window_s == 3.0);
    CHECK(c.signal_feed.type == "scenario");
    CHECK(!c.http);
    REQUIRE(c.cameras.size() == 1);
    CHECK(c.cameras[0].vibration_std_px == 15.0);
    CHECK(c.cameras[0].flapper_px == 20.0);
    CHECK(c.cameras[0].diverter_mm == 5.0);
    CHECK(c.cameras[0].mm_per_px == 0.5);
    CHECK(c.cameras[0].window == 30);
    CHECK(c.cameras[0].n_on == 3);
    CHECK(c.cameras[0].n_off == 5);
}

TEST_CASE("unknown keys are rejected by name") {
    TempScenario sc;
    auto j = minimal(sc.path);
    j["tpyo"] = 1;
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("tpyo") != std::string::npos);
    }

    j = minimal(sc.path);
    j["cameras"][0]["thresholds"] = {{"vibration_std", 10}};  // misspelled
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("vibration_std") != std::string::npos);
    }
}

TEST_CASE("all missing required keys are reported in one pass") {
    json j{{"cameras", json::array({json{{"render", false}}})}};
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("cameras[].camera_id") != std::string::npos);
        CHECK(msg.find("cameras[].source") != std::string::npos);
        CHECK(msg.find("cameras[].profile_mm") != std::string::npos);
    }

    try {
        config_from_json(json::object());
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("cameras") != std::string::npos);
    }
}

TEST_CASE("duplicate camera ids are rejected") {
    TempScenario sc;
    auto j = minimal(sc.path);
    j["cameras"].push_back(j["cameras"][0]);
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("cam1") != std::string::npos);
    }
}

TEST_CASE("invariant violations name the offending key") {
    TempScenario sc;
    auto j = minimal(sc.path);
    j["cameras"][0]["thresholds"] = {{"vibration_std_px", -1.0}};
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("vibration_std_px") != std::string::npos);
    }

    j = minimal(sc.path);
    j["cameras"][0]["profile_mm"] = 13;
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

    j = minimal(sc.path);
    j["clock"] = "lunar";
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

    j = minimal(sc.path);
    j["queue"] = {{"capacity", 0}};
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

    j = minimal(sc.path);
    j["cameras"][0]["source"] = "ftp://example";
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

    j = minimal(sc.path);
    j["cameras"][0]["source"] = "synth:/tmp/millwatch_no_such_file.json";
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("does not exist") != std::string::npos);
    }
}

TEST_CASE("profile coverage is a startup error") {
    TempScenario sc;
    auto j = minimal(sc.path);
    j["detectors"] = json::array({json{{"name", "A"}, {"profiles", {16, 20, 40}}}});
    try {
        config_from_json(j);
        FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("12") != std::string::npos);
        CHECK(msg.find("cam1") != std::string::npos);
    }
    // add a covering detector and it loads
    j["detectors"].push_back(json{{"name", "B"}, {"profiles", {10, 12}}});
    CHECK_NOTHROW(config_from_json(j));
}

TEST_CASE("config round-trips through its JSON form") {
    TempScenario sc;
    auto j = minimal(sc.path);
    j["seed"] = 42;
    j["clock"] = "wall";
    j["http"] = {{"port", 9090}};
    j["oracle_noise"] = {{"center_noise_px", 1.5}, {"miss_rate", 0.02}, {"fp_rate", 0.01}};
    j["detectors"] = json::array({json{{"name", "A"}, {"profiles", {10, 12}}, {"latency_model_ms", 4.0}}});
    auto c = config_from_json(j);
    auto back = config_from_json(to_json(c));
    CHECK(c == back);
    CHECK(back.http->port == 9090);
    CHECK(back.http->bind == "127.0.0.1");
}

TEST_CASE("load_config resolves relative paths against the config directory") {
    TempScenario sc;  // lives in /tmp
    std::string cfg_path = "/tmp/millwatch_cfg_test.json";
    auto j = minimal("millwatch_cfg_scenario.json");  // relative to /tmp
    std::ofstream(cfg_path) << j.dump();
    auto c = load_config(cfg_path);
    CHECK(c.cameras[0].source == "synth:/tmp/millwatch_cfg_scenario.json");
    std::remove(cfg_path.c_str());

    CHECK_THROWS_AS(load_config("/tmp/millwatch_no_such_config.json"), std::invalid_argument);

    std::ofstream(cfg_path) << "{not json";
    CHECK_THROWS_AS(load_config(cfg_path), std::invalid_argument);
    std::remove(cfg_path.c_str());
}

TEST_CASE("build_pipeline materializes setups and options") {
    TempScenario sc;
    auto j = minimal(sc.path);
    j["seed"] = 99;
    j["oracle_noise"] = {{"center_noise_px", 2.0}, {"miss_rate", 0.0}, {"fp_rate", 0.0}};
    auto c = config_from_json(j);
    auto [setups, opts] = build_pipeline(c);
    REQUIRE(setups.size() == 1);
    CHECK(setups[0].camera_id == "cam1");
    CHECK(setups[0].scenario.fps == 30);
    CHECK(setups[0].scenario.profile_mm == 12);
    CHECK(!setups[0].use_replay);
    CHECK(opts.noise.seed == 99);  // run seed feeds the oracle
    CHECK(opts.noise.center_noise_px == 2.0);
}
