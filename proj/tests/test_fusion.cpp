#include <doctest.h>

#include "millwatch/fusion.hpp"

using namespace millwatch;

namespace {

ProcessSignals sig(bool running, bool ghost, bool material, TimestampNs ts) {
    ProcessSignals s;
    s.mill_running = running;
    s.ghost_rolling = ghost;
    s.material_present = material;
    s.signal_ts = ts;
    return s;
}

AnomalyEvent ev(AnomalyKind kind, TimestampNs ts, const std::string& cam = "cam1") {
    AnomalyEvent e;
    e.kind = kind;
    e.camera_id = cam;
    e.ts = ts;
    e.magnitude = 1.0;
    return e;
}

}  // namespace

TEST_CASE("bus keeps the last write and counts out-of-order publishes") {
    SignalBus bus;
    bus.publish(sig(true, false, true, ns_from_s(1)));
    bus.publish(sig(false, false, true, ns_from_s(2)));
    auto r = bus.read(ns_from_s(2));
    CHECK(r.ever_published);
    CHECK(!r.stale);
    CHECK(!r.signals.mill_running);

    bus.publish(sig(true, true, true, ns_from_s(1)));  // older: dropped
    r = bus.read(ns_from_s(2));
    CHECK(!r.signals.ghost_rolling);
    CHECK(r.signals.signal_ts == ns_from_s(2));
    CHECK(bus.stale_publish_count() == 1);
}

TEST_CASE("bus staleness crosses the limit strictly") {
    SignalBus bus(5.0);
    bus.publish(sig(true, false, true, ns_from_s(10)));
    CHECK(!bus.read(ns_from_s(15)).stale);  // exactly 5 s old: still fresh
    CHECK(bus.read(ns_from_s(15) + 1).stale);
}

TEST_CASE("never-published bus reads stale") {
    SignalBus bus;
    auto r = bus.read(ns_from_s(100));
    CHECK(!r.ever_published);
    CHECK(r.stale);
}

TEST_CASE("gate priority: ghost > idle > no-material") {
    CHECK(evaluate_gate(sig(true, false, true, 0)).mode == GateMode::Active);

    auto g = evaluate_gate(sig(false, true, false, 0));
    CHECK(g.mode == GateMode::Paused);
    CHECK(g.reason == GateReason::GhostRolling);

    g = evaluate_gate(sig(false, false, false, 0));
    CHECK(g.reason == GateReason::MillIdle);

    g = evaluate_gate(sig(true, false, false, 0));
    CHECK(g.reason == GateReason::NoMaterial);

    g = evaluate_gate(sig(true, true, true, 0));
    CHECK(g.reason == GateReason::GhostRolling);
}

TEST_CASE("stale reading fails safe to paused") {
    SignalBus bus(5.0);
    bus.publish(sig(true, false, true, ns_from_s(0)));
    auto g = evaluate_gate(bus.read(ns_from_s(20)), ns_from_s(20));
    CHECK(g.mode == GateMode::Paused);
    CHECK(g.reason == GateReason::MillIdle);
}

TEST_CASE("apply_gate discards events when paused but metrics pass tagged") {
    GateState paused{GateMode::Paused, GateReason::MillIdle, 0};
    std::vector<AnomalyEvent> events{ev(AnomalyKind::Vibration, 0)};
    std::vector<MetricPoint> metrics{
        make_metric_point("m", {{"camera_id", "cam1"}}, {{"v", 1.0}}, 0)};
    auto out = apply_gate(paused, events, metrics);
    CHECK(out.events.empty());
    CHECK(out.gated_event_count == 1);
    REQUIRE(out.metrics.size() == 1);
    CHECK(out.metrics[0].tags.at("gate") == "paused");
    CHECK(out.metrics[0].tags.at("camera_id") == "cam1");  // existing tags kept

    GateState active{GateMode::Active, GateReason::None, 0};
    auto out2 = apply_gate(active, events, metrics);
    CHECK(out2.events.size() == 1);
    CHECK(out2.gated_event_count == 0);
    CHECK(out2.metrics[0].tags.count("gate") == 0);
}

TEST_CASE("dividing-cut suppression covers the cut plus grace") {
    ProcessSignals s;
    s.dividing_cut_active = true;
    s.dividing_cut_until = ns_from_s(12);
    SuppressConfig cfg;  // grace 2 s

    CHECK(suppress_dividing_cut(ev(AnomalyKind::ShortMetal, ns_from_s(11)), s, cfg) ==
          SuppressDecision::Suppressed);
    CHECK(suppress_dividing_cut(ev(AnomalyKind::AbnormalBilletDuration, ns_from_s(13.5)), s, cfg) ==
          SuppressDecision::Suppressed);
    CHECK(suppress_dividing_cut(ev(AnomalyKind::ShortMetal, ns_from_s(14)), s, cfg) ==
          SuppressDecision::Suppressed);  // exactly until + grace
    CHECK(suppress_dividing_cut(ev(AnomalyKind::ShortMetal, ns_from_s(14) + 1), s, cfg) ==
          SuppressDecision::Pass);

    // other kinds always pass
    CHECK(suppress_dividing_cut(ev(AnomalyKind::Vibration, ns_from_s(11)), s, cfg) ==
          SuppressDecision::Pass);
    CHECK(suppress_dividing_cut(ev(AnomalyKind::FlapperDeviation, ns_from_s(11)), s, cfg) ==
          SuppressDecision::Pass);

    // no active cut: nothing suppressed
    ProcessSignals idle;
    CHECK(suppress_dividing_cut(ev(AnomalyKind::ShortMetal, ns_from_s(11)), idle, cfg) ==
          SuppressDecision::Pass);

    // disabled suppression passes everything
    SuppressConfig off;
    off.enabled = false;
    CHECK(suppress_dividing_cut(ev(AnomalyKind::ShortMetal, ns_from_s(11)), s, off) ==
          SuppressDecision::Pass);
}
