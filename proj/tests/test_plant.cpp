#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "anklesim/noise.hpp"
#include "anklesim/plant.hpp"

using namespace anklesim;

namespace {

PlantConfig test_config() {
    PlantConfig cfg;  // tuned defaults
    return cfg;
}

// Independent 2-D vector-geometry oracle for the moment arm: perpendicular
// distance from the origin to the line through the rotated attachment point
// and the cable exit, computed from the raw cross product.
double arm_oracle(double theta, const LeverGeometry& g) {
    const double p0x = -g.attachment_radius * std::cos(g.attachment_angle_offset);
    const double p0y = -g.attachment_radius * std::sin(g.attachment_angle_offset);
    const double px = std::cos(theta) * p0x + std::sin(theta) * p0y;
    const double py = -std::sin(theta) * p0x + std::cos(theta) * p0y;
    const double ex = g.cable_exit.x, ey = g.cable_exit.y;
    const double cross = px * ey - py * ex;  // p x e
    const double len = std::hypot(ex - px, ey - py);
    return std::abs(cross) / len;
}

}  // namespace

TEST_CASE("moment arm: cable perpendicular to the lever equals the lever length") {
    LeverGeometry g;
    g.attachment_radius = 0.08;
    g.attachment_angle_offset = M_PI / 2.0;  // attachment straight below the axis
    g.cable_exit = {-0.30, -0.08};           // cable runs posterior, perpendicular to the lever
    CHECK(pf_moment_arm(0.0, g) == doctest::Approx(0.08).epsilon(1e-12));
}

TEST_CASE("moment arm: default geometry matches the cross-product oracle") {
    const LeverGeometry g = test_config().pf_lever;
    for (double th : {-0.26, -0.1, 0.0, 0.2, 0.4, 0.66}) {
        CHECK(std::abs(pf_moment_arm(th, g)) ==
              doctest::Approx(arm_oracle(th, g)).epsilon(1e-12));
    }
}

TEST_CASE("moment arm: continuous and positive across the flexion range") {
    const PlantConfig cfg = test_config();
    double prev = pf_moment_arm(cfg.theta_min, cfg.pf_lever);
    for (int i = 1; i <= 2000; ++i) {
        const double th = cfg.theta_min + (cfg.theta_max - cfg.theta_min) * i / 2000.0;
        const double arm = pf_moment_arm(th, cfg.pf_lever);
        CHECK(arm > 0.0);
        CHECK(std::abs(arm - prev) < 5e-4);  // dense sweep, no jumps
        prev = arm;
    }
}

TEST_CASE("moment arm equals -dL/dtheta") {
    const LeverGeometry g = test_config().pf_lever;
    const double h = 1e-7;
    for (double th : {-0.2, 0.0, 0.3, 0.6}) {
        const double dl = (pf_cable_span(th + h, g) - pf_cable_span(th - h, g)) / (2 * h);
        CHECK(pf_moment_arm(th, g) == doctest::Approx(-dl).epsilon(1e-6));
    }
}

TEST_CASE("moment arm: degenerate geometry rejected") {
    LeverGeometry g;
    g.attachment_radius = 0.08;
    g.attachment_angle_offset = M_PI / 2.0;
    g.cable_exit = {0.0, -0.08};  // on top of the attachment at theta = 0
    CHECK_THROWS_AS(pf_moment_arm(0.0, g), ConfigError);
}

TEST_CASE("cable_tension_pf: slack returns exactly zero") {
    PlantConfig cfg = test_config();
    PlantState st;
    st.motor_pf_pos = -5.0;  // fully extended, cable slack
    CHECK(cable_tension_pf(st, cfg) == 0.0);
}

TEST_CASE("cable_tension_pf: direct product of stiffness and wind-up") {
    PlantConfig cfg = test_config();
    cfg.pf_series_stiffness = 2.0e5;
    PlantState st;
    st.motor_pf_pos = 2.0e-3 / cfg.pf_gear_ratio;  // 2 mm take-up at theta = 0
    CHECK(pf_cable_windup(st, cfg) == doctest::Approx(2.0e-3).epsilon(1e-12));
    CHECK(cable_tension_pf(st, cfg) == doctest::Approx(400.0).epsilon(1e-9));
}

TEST_CASE("cable_force_trans: symmetric rest gives zero net force") {
    const PlantConfig cfg = test_config();
    PlantState st;
    CHECK(cable_force_trans(st, cfg) == 0.0);
    const TransTensions t = trans_tensions_at(0.0, cfg);
    CHECK(t.anterior == doctest::Approx(cfg.trans_pretension));
    CHECK(t.posterior == doctest::Approx(cfg.trans_pretension));
}

TEST_CASE("cable_force_trans: 1 mm beyond the dead-zone at 3e5 N/m gives 300 N") {
    PlantConfig cfg = test_config();
    cfg.trans_cable_stiffness = 3.0e5;
    PlantState st;
    st.motor_trans_pos = (1.0e-3 + 0.5 * cfg.trans_deadzone) / cfg.trans_gear_ratio;
    CHECK(cable_force_trans(st, cfg) == doctest::Approx(300.0).epsilon(1e-9));
}

TEST_CASE("trans dead-zone: flat region within the specified width bracket") {
    const PlantConfig cfg = test_config();
    // Locked drum, sweep the stage; find the width of the zero-slope region.
    double lo = 0.0, hi = 0.0;
    const double span = cfg.trans_deadzone + 4.0 * cfg.trans_pretension / cfg.trans_cable_stiffness + 1e-3;
    double prev_f = 0.0;
    bool first = true;
    for (double s = -span; s <= span; s += 1e-6) {
        PlantState st;
        st.s = s;
        const double f = cable_force_trans(st, cfg);
        if (!first && std::abs(f - prev_f) < 1e-9) {
            if (lo == 0.0) lo = s - 1e-6;
            hi = s;
        }
        prev_f = f;
        first = false;
    }
    const double width = hi - lo;
    CHECK(width >= cfg.trans_deadzone * 0.999);
    CHECK(width <= cfg.trans_deadzone + 2.0 * cfg.trans_pretension / cfg.trans_cable_stiffness + 1e-5);
}

TEST_CASE("per-side translation tensions never negative") {
    const PlantConfig cfg = test_config();
    for (double e = -0.03; e <= 0.03; e += 1e-4) {
        const TransTensions t = trans_tensions_at(e, cfg);
        CHECK(t.anterior >= 0.0);
        CHECK(t.posterior >= 0.0);
    }
}

TEST_CASE("bowden_attenuation: frictionless identity and analytic factor") {
    CHECK(bowden_attenuation(123.0, +1, 0.0) == doctest::Approx(123.0));
    CHECK(bowden_attenuation(123.0, -1, 0.0) == doctest::Approx(123.0));
    CHECK(bowden_attenuation(100.0, +1, 0.2) == doctest::Approx(81.87307531).epsilon(1e-9));
    CHECK(bowden_attenuation(100.0, -1, 0.2) == doctest::Approx(122.1402758).epsilon(1e-9));
    CHECK_THROWS_AS(bowden_attenuation(-1.0, +1, 0.2), DomainError);
}

TEST_CASE("capstan stiction: presliding latch, held factor clamped to the band") {
    CapstanState cs;
    const double c = 0.2;
    const double L = CapstanState::kSlipLength;
    CHECK(cs.update(2.0 * L, c) == doctest::Approx(std::exp(-c)));
    CHECK(cs.update(0.0, c) == doctest::Approx(std::exp(-c)));  // held while static
    // Vibration smaller than the presliding length does not flip the latch.
    for (int i = 0; i < 50; ++i) {
        CHECK(cs.update((i % 2 ? 1.0 : -1.0) * 0.05 * L, c) == doctest::Approx(std::exp(-c)));
    }
    CHECK(cs.update(-4.0 * L, c) == doctest::Approx(std::exp(c)));  // real reversal latches
    CHECK(cs.update(0.0, 0.1) == doctest::Approx(std::exp(0.1)));   // clamped into tighter band
}

TEST_CASE("saturate_motor: identity inside the envelope, zero at stall") {
    MotorLimits lim{100.0, 2.0, 120.0};
    CHECK(saturate_motor(30.0, 0.0, lim) == doctest::Approx(30.0));
    CHECK(saturate_motor(-30.0, 0.0, lim) == doctest::Approx(-30.0));
    CHECK(saturate_motor(30.0, 2.0, lim) == 0.0);
    CHECK(saturate_motor(30.0, 5.0, lim) == 0.0);
    CHECK(saturate_motor(500.0, 0.0, lim) == doctest::Approx(100.0));
    // Power cap binds between no-load and stall.
    const double v = saturate_motor(500.0, 1.5, lim);
    CHECK(v <= 120.0 / 1.5 + 1e-9);
    CHECK(v > 0.0);
}

TEST_CASE("step_dynamics: rest state with slack cable is a fixed point") {
    PlantConfig cfg = test_config();
    PlantState st;
    st.theta = cfg.df_band_rest_angle;  // bands at rest angle
    st.motor_pf_pos = -0.05 / cfg.pf_gear_ratio;  // well past slack at any flexion angle
    st.motor_trans_pos = st.s / cfg.trans_gear_ratio;
    // Park the translation mismatch mid dead-zone so the pair nets zero.
    Plant plant(cfg, st);
    for (int i = 0; i < 1000; ++i) {
        plant.step({}, ExternalLoad{0.0, 0.0, {0, 0, 9.80665}});
    }
    CHECK(plant.state().theta == doctest::Approx(st.theta).epsilon(1e-12));
    CHECK(plant.state().theta_dot == doctest::Approx(0.0));
    CHECK(plant.state().s == doctest::Approx(st.s).epsilon(1e-12));
    CHECK(plant.state().s_dot == doctest::Approx(0.0));
}

TEST_CASE("step_dynamics: wind-up against a locked output grows the estimate linearly") {
    PlantConfig cfg = test_config();
    cfg.theta_min = cfg.theta_max = 0.0;  // locked output
    cfg.quantization_enabled = false;
    cfg.accel_noise_std = 0.0;
    Plant plant(cfg);
    // Closed-form slope: d(tau_est)/d(motor take-up meters) = k * arm(0).
    const double arm0 = pf_moment_arm(0.0, cfg.pf_lever);
    const double expected_slope = cfg.pf_series_stiffness * arm0;

    const MotorVelocityCommand cmd{20.0, 0.0};
    std::vector<double> take_up, est;
    for (int i = 0; i < 400; ++i) {
        plant.step(cmd, {});
        take_up.push_back(cfg.pf_gear_ratio * plant.state().motor_pf_pos);
        est.push_back(plant.sample_sensors({}, 1).tau_pf_est);
    }
    // Least-squares slope over the taut region.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const size_t n = take_up.size();
    for (size_t i = 0; i < n; ++i) {
        sx += take_up[i];
        sy += est[i];
        sxx += take_up[i] * take_up[i];
        sxy += take_up[i] * est[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope == doctest::Approx(expected_slope).epsilon(1e-6));
}

TEST_CASE("step_dynamics: band oscillation period matches the analytic oracle") {
    PlantConfig cfg = test_config();
    cfg.bowden_friction_pf = 0.0;
    cfg.bowden_friction_trans = 0.0;
    cfg.df_band_rest_angle = -0.15;
    cfg.quantization_enabled = false;
    // Constant plantar torque sets an engaged-band equilibrium; release from
    // 10 deg plantar, a small perturbation about it, and the motion is
    // harmonic with period 2*pi*sqrt(I/k_band).
    const double theta_eq = 0.140;
    const double tau_hold = cfg.df_band_stiffness * (theta_eq - cfg.df_band_rest_angle);
    PlantState st;
    st.theta = 10.0 * M_PI / 180.0;
    st.motor_pf_pos = -1.0;  // slack cable, bands only
    Plant plant(cfg, st);
    ExternalLoad ext;
    ext.ankle_torque_ext = tau_hold;

    // Time the first two downward crossings of theta_eq.
    double t_first = -1.0, t_second = -1.0;
    double prev = plant.state().theta;
    for (int i = 0; i < 4000; ++i) {
        plant.step({}, ext);
        const double th = plant.state().theta;
        if (prev > theta_eq && th <= theta_eq) {
            if (t_first < 0) {
                t_first = plant.state().time;
            } else {
                t_second = plant.state().time;
                break;
            }
        }
        prev = th;
    }
    REQUIRE(t_second > 0);
    const double period = t_second - t_first;
    const double analytic = 2.0 * M_PI * std::sqrt(cfg.ankle_inertia / cfg.df_band_stiffness);
    CHECK(period == doctest::Approx(analytic).epsilon(0.01));
}

TEST_CASE("step_dynamics: non-finite inputs rejected") {
    Plant plant(test_config());
    MotorVelocityCommand bad{std::nan(""), 0.0};
    CHECK_THROWS_AS(plant.step(bad, {}), DomainError);
    ExternalLoad bad_ext;
    bad_ext.ankle_torque_ext = INFINITY;
    CHECK_THROWS_AS(plant.step({}, bad_ext), DomainError);
}

TEST_CASE("config validation: invariants named") {
    PlantConfig cfg = test_config();
    cfg.pf_series_stiffness = -1.0;
    cfg.timestep = 5e-3;
    try {
        cfg.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("pf_series_stiffness") != std::string::npos);
        CHECK(msg.find("timestep") != std::string::npos);
    }
}

TEST_CASE("sensors: encoder quantization is exact") {
    PlantConfig cfg = test_config();
    cfg.accel_noise_std = 0.0;
    PlantState st;
    st.theta = 0.351 * M_PI / 180.0;  // one flexion encoder count
    st.s = 31.7e-6;
    st.motor_pf_pos = 0.0202;
    Plant plant(cfg, st);
    const SensorFrame f = plant.sample_sensors({}, 7);
    CHECK(f.theta_meas == doctest::Approx(2.0 * M_PI / 1024.0).epsilon(1e-12));
    // Quantized channels are exact integer multiples of their resolution.
    const double k_theta = f.theta_meas / kThetaEncoderStep;
    CHECK(k_theta == doctest::Approx(std::round(k_theta)).epsilon(1e-12));
    CHECK(f.s_meas == doctest::Approx(std::round(st.s / kLinearScaleStep) * kLinearScaleStep));
    const double k_m = f.motor_pf_pos_meas / kMotorEncoderStep;
    CHECK(k_m == doctest::Approx(std::round(k_m)).epsilon(1e-12));
}

TEST_CASE("sensors: zero deflection estimates zero torque; frames are deterministic") {
    Plant plant(test_config());
    const SensorFrame a = plant.sample_sensors({}, 42);
    const SensorFrame b = plant.sample_sensors({}, 42);
    CHECK(a.tau_pf_est == 0.0);
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
    const SensorFrame c = plant.sample_sensors({}, 43);
    CHECK(a.accel_meas[0] != c.accel_meas[0]);
}

TEST_CASE("unilaterality: pf tension, band torque, and side tensions stay non-negative") {
    PlantConfig cfg = test_config();
    Plant plant(cfg);
    uint64_t rng = 99;
    for (int i = 0; i < 20000; ++i) {
        MotorVelocityCommand cmd{(uniform01(rng) - 0.5) * 2000.0,
                                 (uniform01(rng) - 0.5) * 800.0};
        ExternalLoad ext;
        ext.ankle_torque_ext = (uniform01(rng) - 0.5) * 120.0;
        ext.ap_force_ext = (uniform01(rng) - 0.5) * 400.0;
        plant.step(cmd, ext);
        CHECK(cable_tension_pf(plant.state(), cfg) >= 0.0);
        const double band = cfg.df_band_stiffness *
                            std::max(0.0, plant.state().theta - cfg.df_band_rest_angle);
        CHECK(band >= 0.0);
        const double mism = cfg.trans_gear_ratio * plant.state().motor_trans_pos - plant.state().s;
        const TransTensions t = trans_tensions_at(mism, cfg);
        CHECK(t.anterior >= 0.0);
        CHECK(t.posterior >= 0.0);
    }
}

TEST_CASE("energy audit balances over randomized trajectories") {
    for (int trial = 0; trial < 20; ++trial) {
        PlantConfig cfg = test_config();
        Plant plant(cfg);
        uint64_t rng = 1000 + trial;
        // Smooth-ish random excitation: piecewise-constant commands and loads.
        MotorVelocityCommand cmd{};
        ExternalLoad ext;
        for (int i = 0; i < 10000; ++i) {
            if (i % 50 == 0) {
                cmd.pf_vel = (uniform01(rng) - 0.5) * 2400.0;
                cmd.trans_vel = (uniform01(rng) - 0.5) * 1000.0;
                ext.ankle_torque_ext = (uniform01(rng) - 0.5) * 160.0;
                ext.ap_force_ext = (uniform01(rng) - 0.5) * 500.0;
            }
            plant.step(cmd, ext);
            if (i % 1000 == 999) {
                const EnergyAudit& a = plant.audit();
                const double tol = 1e-6 * std::max(a.throughput, 1.0);
                CHECK(std::abs(a.residual()) < tol);
            }
        }
        // Metered kinetic matches the state function.
        const EnergyAudit& a = plant.audit();
        CHECK(a.kinetic == doctest::Approx(plant.kinetic_energy()).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("hard stops: inelastic contact zeroes velocity and meters the loss") {
    PlantConfig cfg = test_config();
    Plant plant(cfg);
    ExternalLoad ext;
    ext.ankle_torque_ext = 40.0;  // drive into the plantar stop
    for (int i = 0; i < 2000; ++i) plant.step({}, ext);
    CHECK(plant.state().theta == doctest::Approx(cfg.theta_max));
    CHECK(plant.state().theta_dot == 0.0);
    CHECK(plant.audit().dissipation_hardstop > 0.0);
    const double tol = 1e-6 * std::max(plant.audit().throughput, 1.0);
    CHECK(std::abs(plant.audit().residual()) < tol);
}

TEST_CASE("determinism: identical inputs give bit-identical state streams") {
    auto run = [](std::vector<PlantState>& out) {
        Plant plant(test_config());
        uint64_t rng = 5;
        for (int i = 0; i < 3000; ++i) {
            MotorVelocityCommand cmd{(uniform01(rng) - 0.5) * 1000.0,
                                     (uniform01(rng) - 0.5) * 500.0};
            ExternalLoad ext;
            ext.ankle_torque_ext = (uniform01(rng) - 0.5) * 80.0;
            plant.step(cmd, ext);
            out.push_back(plant.state());
        }
    };
    std::vector<PlantState> a, b;
    run(a);
    run(b);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(PlantState)) == 0);
}

TEST_CASE("rk4 integrator agrees with semi-implicit on a smooth frictionless run") {
    PlantConfig cfg = test_config();
    cfg.bowden_friction_pf = 0.0;
    cfg.bowden_friction_trans = 0.0;
    PlantState st;
    st.theta = 0.15;  // oscillates with the band engaged throughout
    st.motor_pf_pos = -0.05 / cfg.pf_gear_ratio;
    PlantConfig cfg_rk = cfg;
    cfg_rk.integrator = Integrator::Rk4;
    Plant a(cfg, st), b(cfg_rk, st);
    ExternalLoad ext;
    ext.ankle_torque_ext = 2.0;
    for (int i = 0; i < 500; ++i) {
        a.step({}, ext);
        b.step({}, ext);
    }
    CHECK(a.state().theta == doctest::Approx(b.state().theta).epsilon(1e-3));
}
