#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "anklesim/controller.hpp"
#include "anklesim/noise.hpp"
#include "anklesim/plant.hpp"

using namespace anklesim;

namespace {
ControllerConfig ctrl_config() { return ControllerConfig{}; }
PlantConfig plant_config() { return PlantConfig{}; }

SensorFrame frame_at(double t) {
    SensorFrame f;
    f.time = t;
    f.accel_meas = {0.0, 0.0, 9.80665};
    return f;
}
}  // namespace

TEST_CASE("stiffness law: equilibrium, direct product, unidirectional clamp") {
    ImpedanceParams p{250.0, 0.1};
    CHECK(stiffness_law(0.1, p) == 0.0);
    CHECK(stiffness_law(0.2, p) == doctest::Approx(25.0));
    CHECK(stiffness_law(0.0, p) == 0.0);  // clamped, no commanded compression
}

TEST_CASE("torque_to_tension: zero, division, arm floor") {
    const LeverGeometry g = plant_config().pf_lever;
    CHECK(torque_to_tension(0.0, 0.0, g) == 0.0);
    const double arm = pf_moment_arm(0.0, g);
    CHECK(torque_to_tension(80.0, 0.0, g) == doctest::Approx(80.0 / arm));

    LeverGeometry tiny;
    tiny.attachment_radius = 0.0005;  // arm below the 1 mm floor everywhere
    tiny.attachment_angle_offset = M_PI / 2.0;
    tiny.cable_exit = {-0.30, -0.0005};
    bool floored = false;
    const double tension = torque_to_tension(10.0, 0.0, tiny, &floored);
    CHECK(floored);
    CHECK(tension == doctest::Approx(10.0 / 1.0e-3));
}

TEST_CASE("torque_to_tension round-trips exactly across the flexion range") {
    const LeverGeometry g = plant_config().pf_lever;
    const PlantConfig pc = plant_config();
    for (int i = 0; i <= 500; ++i) {
        const double th = pc.theta_min + (pc.theta_max - pc.theta_min) * i / 500.0;
        const double t_des = 80.0;
        const double back = torque_to_tension(t_des, th, g) * pf_moment_arm(th, g);
        CHECK(std::abs(back - t_des) <= 4.0 * t_des * 1e-16 * 16);
    }
}

TEST_CASE("update_fsm: legal cycle and ignored illegal pairs") {
    GaitEvents none{};
    GaitEvents hs{true, false};
    GaitEvents to{false, true};

    CHECK(update_fsm(GaitPhase::Standing, none, 0.0) == GaitPhase::Standing);
    CHECK(update_fsm(GaitPhase::Standing, hs, 0.0) == GaitPhase::StanceLoading);
    CHECK(update_fsm(GaitPhase::Swing, hs, 0.0) == GaitPhase::StanceLoading);
    // Dorsiflexing -> plantarflexing reversal.
    CHECK(update_fsm(GaitPhase::StanceLoading, none, -0.1) == GaitPhase::StanceLoading);
    CHECK(update_fsm(GaitPhase::StanceLoading, none, 0.1) == GaitPhase::StanceUnloading);
    CHECK(update_fsm(GaitPhase::StanceUnloading, to, 0.5) == GaitPhase::Swing);
    // Illegal pairs leave the phase alone.
    CHECK(update_fsm(GaitPhase::StanceLoading, to, -0.1) == GaitPhase::StanceLoading);
    CHECK(update_fsm(GaitPhase::Swing, to, 0.0) == GaitPhase::Swing);
    CHECK(update_fsm(GaitPhase::StanceUnloading, hs, 0.5) == GaitPhase::StanceUnloading);
}

TEST_CASE("heel-strike detector: jerk arithmetic, constant stream, refractory") {
    const double dt = 1e-3;
    ControllerConfig cc = ctrl_config();

    SUBCASE("constant acceleration never fires") {
        HeelStrikeDetector det(cc.jerk_threshold, cc.jerk_filter_cutoff, 0.1, dt);
        for (int i = 0; i < 1000; ++i) {
            CHECK_FALSE(det.update({1.0, 2.0, 9.0}, i * dt));
        }
    }

    SUBCASE("10 m/s^2 step in one sample crosses a 5000 m/s^3 threshold") {
        HeelStrikeDetector det(5000.0, cc.jerk_filter_cutoff, 0.1, dt);
        bool fired = false;
        for (int i = 0; i < 50; ++i) {
            const double a = i < 25 ? 10.0 : 20.0;
            const bool ev = det.update({a, 0.0, 0.0}, i * dt);
            if (i == 25) {
                CHECK(ev);  // at that sample
                fired = true;
            } else {
                CHECK_FALSE(ev);
            }
        }
        CHECK(fired);
    }

    SUBCASE("two spikes 20 ms apart emit one event") {
        HeelStrikeDetector det(5000.0, cc.jerk_filter_cutoff, 0.1, dt);
        int events = 0;
        for (int i = 0; i < 200; ++i) {
            double a = 10.0;
            if (i == 40 || i == 60) a = 25.0;  // spikes 20 ms apart
            if (det.update({a, 0.0, 0.0}, i * dt)) ++events;
        }
        CHECK(events == 1);
    }
}

TEST_CASE("toe-off detector: constant above, falling ramp, crossing index") {
    ToeOffDetector det(10.0);
    for (int i = 0; i < 100; ++i) CHECK_FALSE(det.update(40.0));

    ToeOffDetector det2(10.0);
    int fired_at = -1;
    int first_below = -1;
    for (int i = 0; i <= 40; ++i) {
        const double tau = 40.0 - i;  // ramps 40 -> 0
        if (tau < 10.0 && first_below < 0) first_below = i;
        if (det2.update(tau) && fired_at < 0) fired_at = i;
    }
    CHECK(fired_at == first_below);
}

TEST_CASE("pd loops: zero history, pure proportional, derivative kick absent") {
    PdLoop loop({0.01, 0.0}, 1e-3, 25.0);
    CHECK(loop.update(0.0, 0.0) == 0.0);
    PdLoop loop2({0.01, 0.0}, 1e-3, 25.0);
    CHECK(loop2.update(200.0, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("phase targets per mode") {
    ControllerConfig cc = ctrl_config();
    const LeverGeometry lever = plant_config().pf_lever;

    SUBCASE("TwoDoF loading goes to the anterior maximum") {
        cc.mode = ControlMode::TwoDoF;
        Controller c(cc, lever, 1.7e-4);
        const TargetSet t = c.phase_targets(GaitPhase::StanceLoading, 0.0);
        CHECK(t.pf_torque_mode);
        CHECK(t.trans_position == doctest::Approx(0.05));
    }
    SUBCASE("Revolute1DoF keeps the translation locked at zero in stance") {
        cc.mode = ControlMode::Revolute1DoF;
        Controller c(cc, lever, 1.7e-4);
        CHECK(c.phase_targets(GaitPhase::StanceLoading, 0.0).trans_position == 0.0);
        CHECK(c.phase_targets(GaitPhase::StanceUnloading, 0.0).trans_position == 0.0);
    }
    SUBCASE("swing lifts the toe") {
        Controller c(cc, lever, 1.7e-4);
        const TargetSet t = c.phase_targets(GaitPhase::Swing, 0.0);
        CHECK_FALSE(t.pf_torque_mode);
        CHECK(t.pf_position == doctest::Approx(cc.swing_toe_lift_angle));
    }
}

TEST_CASE("controller config validation: net-work quadrature and ranges") {
    const PlantConfig pc = plant_config();
    ControllerConfig cc = ctrl_config();
    CHECK_NOTHROW(cc.validate(pc.theta_min, pc.theta_max, pc.s_min, pc.s_max));
    CHECK(net_stance_work(cc) > 0.0);

    // A loading spring stiffer than the unloading spring stores more than it
    // releases; the quadrature check must reject it.
    ControllerConfig weak = cc;
    weak.loading = {600.0, -0.26};
    weak.unloading = {20.0, -0.26};
    CHECK(net_stance_work(weak) < 0.0);
    CHECK_THROWS_AS(weak.validate(pc.theta_min, pc.theta_max, pc.s_min, pc.s_max), ConfigError);

    ControllerConfig oob = cc;
    oob.trans_anterior_target = 0.2;
    CHECK_THROWS_AS(oob.validate(pc.theta_min, pc.theta_max, pc.s_min, pc.s_max), ConfigError);
}

TEST_CASE("control_step: near-zero commands at rest, deterministic replay") {
    const PlantConfig pc = plant_config();
    ControllerConfig cc = ctrl_config();
    Controller a(cc, pc.pf_lever, pc.pf_gear_ratio), b(cc, pc.pf_lever, pc.pf_gear_ratio);
    std::vector<MotorVelocityCommand> ca, cb;
    uint64_t rng = 11;
    std::vector<SensorFrame> frames;
    for (int i = 0; i < 2000; ++i) {
        SensorFrame f = frame_at(i * 1e-3);
        f.theta_meas = 0.01 * std::sin(i * 0.01);
        f.tau_pf_est = std::max(0.0, 5.0 * std::sin(i * 0.004));
        f.accel_meas[0] += 0.1 * (uniform01(rng) - 0.5);
        frames.push_back(f);
    }
    for (const auto& f : frames) {
        ca.push_back(a.step(f));
        cb.push_back(b.step(f));
    }
    for (size_t i = 0; i < ca.size(); ++i) {
        CHECK(ca[i].pf_vel == cb[i].pf_vel);
        CHECK(ca[i].trans_vel == cb[i].trans_vel);
    }
    // At rest in Standing the commands stay near zero.
    Controller c(cc, pc.pf_lever, pc.pf_gear_ratio);
    MotorVelocityCommand last{};
    for (int i = 0; i < 500; ++i) last = c.step(frame_at(i * 1e-3));
    CHECK(std::abs(last.pf_vel) < 1.0);
    CHECK(std::abs(last.trans_vel) < 1.0);
    CHECK(c.phase() == GaitPhase::Standing);
}

TEST_CASE("control_step: frame gap beyond 3 periods trips the safe hold") {
    const PlantConfig pc = plant_config();
    Controller c(ctrl_config(), pc.pf_lever, pc.pf_gear_ratio);
    c.step(frame_at(0.0));
    c.step(frame_at(0.001));
    const MotorVelocityCommand cmd = c.step(frame_at(0.010));  // 9 periods late
    CHECK(c.fault());
    CHECK(cmd.pf_vel == 0.0);
    CHECK(cmd.trans_vel == 0.0);
    CHECK(c.diagnostics().frame_gap_faults == 1);
}

TEST_CASE("fsm fuzz: transitions stay on the legal cycle with dwell respected") {
    // Pure-function fuzz over a million random event/velocity samples.
    auto legal = [](GaitPhase a, GaitPhase b) {
        if (a == b) return true;
        using P = GaitPhase;
        return (a == P::Standing && b == P::StanceLoading) ||
               (a == P::StanceLoading && b == P::Standing) ||
               (a == P::StanceLoading && b == P::StanceUnloading) ||
               (a == P::StanceUnloading && b == P::Swing) ||
               (a == P::Swing && b == P::StanceLoading);
    };
    uint64_t rng = 2024;
    GaitPhase phase = GaitPhase::Standing;
    for (int i = 0; i < 1000000; ++i) {
        GaitEvents ev;
        ev.heel_strike = uniform01(rng) < 0.01;
        ev.toe_off = uniform01(rng) < 0.01;
        const double vel = (uniform01(rng) - 0.5) * 2.0;
        const GaitPhase next = update_fsm(phase, ev, vel);
        CHECK(legal(phase, next));
        phase = next;
    }
}

TEST_CASE("net-positive work loop over the nominal stance excursion") {
    const ControllerConfig cc = ctrl_config();
    // Closed torque-angle loop: loading leg dorsiflexes, unloading leg returns
    // and pushes off. The enclosed work must be strictly positive.
    const double w = net_stance_work(cc);
    CHECK(w > 0.0);
}

TEST_CASE("commanded tension is never negative") {
    const PlantConfig pc = plant_config();
    ControllerConfig cc = ctrl_config();
    for (double th = pc.theta_min; th <= pc.theta_max; th += 0.01) {
        const double t_load = stiffness_law(th, cc.loading);
        const double t_unload = stiffness_law(th, cc.unloading);
        CHECK(t_load >= 0.0);
        CHECK(t_unload >= 0.0);
        CHECK(torque_to_tension(t_load, th, pc.pf_lever) >= 0.0);
    }
}
