#include "anklesim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "anklesim/noise.hpp"

namespace anklesim {

namespace {

// Foot-frame attachment point rotated by the plantarflexion angle. Positive
// theta tips the toe down, which swings the posterior lever up, so the foot
// frame rotates clockwise in (x anterior, y up) coordinates.
Vec2 attachment_point(double theta, const LeverGeometry& geom) {
    const double p0x = -geom.attachment_radius * std::cos(geom.attachment_angle_offset);
    const double p0y = -geom.attachment_radius * std::sin(geom.attachment_angle_offset);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c * p0x + s * p0y, -s * p0x + c * p0y};
}

double quantize(double value, double step) {
    return std::round(value / step) * step;
}

void check_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw DomainError(std::string("non-finite input: ") + name);
    }
}

}  // namespace

void PlantConfig::validate() const {
    std::ostringstream bad;
    auto require = [&bad](bool ok, const char* what) {
        if (!ok) bad << "  " << what << "\n";
    };
    require(ankle_inertia > 0.0, "ankle_inertia must be strictly positive");
    require(stage_mass > 0.0, "stage_mass must be strictly positive");
    require(pf_series_stiffness > 0.0, "pf_series_stiffness must be strictly positive");
    require(df_band_stiffness > 0.0, "df_band_stiffness must be strictly positive");
    require(trans_cable_stiffness > 0.0, "trans_cable_stiffness must be strictly positive");
    require(trans_pretension >= 0.0, "trans_pretension must be non-negative");
    require(trans_deadzone >= 0.0, "trans_deadzone must be non-negative");
    require(bowden_friction_pf >= 0.0, "bowden_friction_pf must be non-negative");
    require(bowden_friction_trans >= 0.0, "bowden_friction_trans must be non-negative");
    require(pf_gear_ratio > 0.0, "pf_gear_ratio must be strictly positive");
    require(trans_gear_ratio > 0.0, "trans_gear_ratio must be strictly positive");
    require(pf_lever.attachment_radius > 0.0, "pf_lever.attachment_radius must be strictly positive");
    for (const MotorLimits* m : {&motor_pf, &motor_trans}) {
        require(m->max_velocity > 0.0, "motor max_velocity must be strictly positive");
        require(m->max_torque > 0.0, "motor max_torque must be strictly positive");
        require(m->max_power > 0.0, "motor max_power must be strictly positive");
    }
    require(theta_min <= theta_max, "flexion joint limits must be ordered");
    require(s_min <= s_max, "translation joint limits must be ordered");
    require(timestep > 0.0 && timestep <= 2.0e-3, "timestep must be in (0, 2 ms]");
    require(accel_noise_std >= 0.0, "accel_noise_std must be non-negative");

    if (theta_min < theta_max) {
        // Moment arm must stay usable across the full flexion range.
        for (int i = 0; i <= 32; ++i) {
            const double th = theta_min + (theta_max - theta_min) * i / 32.0;
            if (pf_moment_arm(th, pf_lever) < 1.0e-3) {
                bad << "  pf_lever geometry: moment arm below 1 mm inside the flexion range\n";
                break;
            }
        }
    }

    const std::string msg = bad.str();
    if (!msg.empty()) {
        throw ConfigError("invalid plant configuration:\n" + msg);
    }
}

bool PlantState::finite() const {
    for (double v : {theta, theta_dot, s, s_dot, motor_pf_pos, motor_trans_pos,
                     motor_pf_vel, motor_trans_vel, time}) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double pf_cable_span(double theta, const LeverGeometry& geom) {
    const Vec2 p = attachment_point(theta, geom);
    return std::hypot(geom.cable_exit.x - p.x, geom.cable_exit.y - p.y);
}

double pf_moment_arm(double theta, const LeverGeometry& geom) {
    const Vec2 p = attachment_point(theta, geom);
    const double dx = geom.cable_exit.x - p.x;
    const double dy = geom.cable_exit.y - p.y;
    const double len = std::hypot(dx, dy);
    if (len < 1.0e-9) {
        throw ConfigError("pf_lever geometry degenerate: attachment coincides with cable exit");
    }
    // |p x d|, signed so tension plantarflexes; equals -dL/dtheta.
    return (p.y * dx - p.x * dy) / len;
}

double pf_cable_windup(const PlantState& state, const PlantConfig& cfg) {
    const double take_up = cfg.pf_gear_ratio * state.motor_pf_pos;
    return take_up + pf_cable_span(state.theta, cfg.pf_lever) -
           pf_cable_span(0.0, cfg.pf_lever);
}

double cable_tension_pf(const PlantState& state, const PlantConfig& cfg) {
    return cfg.pf_series_stiffness * std::max(0.0, pf_cable_windup(state, cfg));
}

TransTensions trans_tensions_at(double mismatch, const PlantConfig& cfg) {
    const double half_play = 0.5 * cfg.trans_deadzone;
    const double stretch_ant = std::max(0.0, mismatch - half_play);
    const double stretch_post = std::max(0.0, -mismatch - half_play);
    TransTensions t;
    t.anterior = std::max(0.0, cfg.trans_pretension + cfg.trans_cable_stiffness * stretch_ant);
    t.posterior = std::max(0.0, cfg.trans_pretension + cfg.trans_cable_stiffness * stretch_post);
    return t;
}

double cable_force_trans(const PlantState& state, const PlantConfig& cfg) {
    const double mismatch = cfg.trans_gear_ratio * state.motor_trans_pos - state.s;
    return trans_tensions_at(mismatch, cfg).net();
}

double bowden_attenuation(double tension_in, int direction, double coeff) {
    if (tension_in < 0.0) {
        throw DomainError("bowden_attenuation: tension_in must be non-negative");
    }
    if (direction > 0) return tension_in * std::exp(-coeff);
    if (direction < 0) return tension_in * std::exp(coeff);
    return tension_in;  // static case is the caller's stiction band
}

double CapstanState::update(double slide_disp, double coeff) {
    const double lo = std::exp(-coeff);
    const double hi = std::exp(coeff);
    slip = std::clamp(slip + slide_disp, -kSlipLength, kSlipLength);
    if (slip >= kSlipLength) {
        factor = lo;  // sliding toward the motor: delivering, load side attenuated
    } else if (slip <= -kSlipLength) {
        factor = hi;  // back-driven
    }
    factor = std::clamp(factor, lo, hi);
    return factor;
}

double saturate_motor(double vel_cmd, double resisting_torque, const MotorLimits& lim) {
    if (vel_cmd == 0.0) return 0.0;
    if (resisting_torque >= lim.max_torque) return 0.0;  // stalled
    double allow = lim.max_velocity;
    if (resisting_torque > 0.0) {
        allow = std::min(allow, lim.max_power / resisting_torque);
        // Linear torque-speed boundary scaled so its peak power matches the
        // power cap (tangent to the hyperbola at half stall torque).
        const double line = (4.0 * lim.max_power / lim.max_torque) *
                            (1.0 - resisting_torque / lim.max_torque);
        allow = std::min(allow, line);
    }
    allow = std::max(allow, 0.0);
    return std::clamp(vel_cmd, -allow, allow);
}

double EnergyAudit::residual() const {
    return (work_motor_pf + work_motor_trans + work_external) -
           (kinetic + elastic_pf + elastic_band + elastic_trans) -
           (dissipation_friction + dissipation_hardstop);
}

Plant::Plant(PlantConfig cfg, PlantState initial) : cfg_(std::move(cfg)), state_(initial) {
    cfg_.validate();
    if (!state_.finite()) throw DomainError("initial plant state is non-finite");
    span_rest_ = pf_cable_span(0.0, cfg_.pf_lever);
}

void Plant::set_state(const PlantState& s) {
    if (!s.finite()) throw DomainError("plant state is non-finite");
    state_ = s;
}

double Plant::kinetic_energy() const {
    return 0.5 * cfg_.ankle_inertia * state_.theta_dot * state_.theta_dot +
           0.5 * cfg_.stage_mass * state_.s_dot * state_.s_dot;
}

void Plant::step(const MotorVelocityCommand& cmd, const ExternalLoad& ext) {
    check_finite(cmd.pf_vel, "cmd.pf_vel");
    check_finite(cmd.trans_vel, "cmd.trans_vel");
    check_finite(ext.ankle_torque_ext, "ext.ankle_torque_ext");
    check_finite(ext.ap_force_ext, "ext.ap_force_ext");
    if (!state_.finite()) throw DomainError("plant state is non-finite");
    if (cfg_.integrator == Integrator::Rk4) {
        step_rk4(cmd, ext);
    } else {
        step_semi_implicit(cmd, ext);
    }
    ++tick_;
}

void Plant::step_semi_implicit(const MotorVelocityCommand& cmd, const ExternalLoad& ext) {
    const double dt = cfg_.timestep;
    const PlantState s0 = state_;

    // Transmission forces at step start.
    const double arm = pf_moment_arm(s0.theta, cfg_.pf_lever);
    const double windup0 = pf_cable_windup(s0, cfg_);
    const double t_spring = cfg_.pf_series_stiffness * std::max(0.0, windup0);
    // Cable slides toward the motor while the joint plantarflexes.
    const double kappa_pf =
        capstan_pf_.update(arm * s0.theta_dot * dt, cfg_.bowden_friction_pf);
    const double t_joint = kappa_pf * t_spring;
    const double tau_band = cfg_.df_band_stiffness *
                            std::max(0.0, s0.theta - cfg_.df_band_rest_angle);

    const double mismatch0 = cfg_.trans_gear_ratio * s0.motor_trans_pos - s0.s;
    const double f_el = trans_tensions_at(mismatch0, cfg_).net();
    const double slide_trans = (f_el >= 0.0 ? s0.s_dot : -s0.s_dot) * dt;
    const double kappa_tr = capstan_trans_.update(slide_trans, cfg_.bowden_friction_trans);
    const double f_stage = kappa_tr * f_el;

    const double tau_net = t_joint * arm - tau_band + ext.ankle_torque_ext;
    const double f_net = f_stage + ext.ap_force_ext;

    // Motor velocity sources through the envelope.
    const double resist_pf = cmd.pf_vel > 0.0 ? t_spring * cfg_.pf_gear_ratio : 0.0;
    const double drum_load = f_el * cfg_.trans_gear_ratio;
    const double resist_tr = std::max(0.0, drum_load * (cmd.trans_vel > 0.0 ? 1.0 : -1.0));
    const double w_pf = saturate_motor(cmd.pf_vel, resist_pf, cfg_.motor_pf);
    const double w_tr = saturate_motor(cmd.trans_vel, resist_tr, cfg_.motor_trans);
    last_saturated_ = (w_pf != cmd.pf_vel) || (w_tr != cmd.trans_vel);

    PlantState s1 = s0;
    s1.motor_pf_vel = w_pf;
    s1.motor_trans_vel = w_tr;
    s1.motor_pf_pos = s0.motor_pf_pos + dt * w_pf;
    s1.motor_trans_pos = s0.motor_trans_pos + dt * w_tr;
    s1.time = s0.time + dt;

    double hardstop = 0.0;
    double d_kinetic = 0.0;

    // One translational/rotational axis each: integrate, honoring hard stops.
    // At a limit with the net generalized force pressing in, the axis is held
    // (no velocity update, no conjugate displacement); an arriving impact
    // zeroes velocity and banks the kinetic energy as hard-stop loss.
    struct AxisOut {
        double pos, vel, disp_w;
    };
    auto integrate_axis = [&](double q, double qd, double force, double inertia,
                              double lo, double hi) -> AxisOut {
        const bool held = (q <= lo && force <= 0.0 && std::abs(qd) < 1.0e-12) ||
                          (q >= hi && force >= 0.0 && std::abs(qd) < 1.0e-12);
        if (held) {
            return {std::clamp(q, lo, hi), 0.0, 0.0};
        }
        const double qd1 = qd + dt * force / inertia;
        const double disp_w = 0.5 * dt * (qd + qd1);
        double q1 = q + dt * qd1;
        double vel = qd1;
        if (q1 < lo || q1 > hi) {
            q1 = std::clamp(q1, lo, hi);
            hardstop += 0.5 * inertia * qd1 * qd1;
            d_kinetic += -0.5 * inertia * qd * qd;
            vel = 0.0;
        } else {
            d_kinetic += force * disp_w;
        }
        return {q1, vel, disp_w};
    };

    const AxisOut th = integrate_axis(s0.theta, s0.theta_dot, tau_net, cfg_.ankle_inertia,
                                      cfg_.theta_min, cfg_.theta_max);
    const AxisOut st = integrate_axis(s0.s, s0.s_dot, f_net, cfg_.stage_mass,
                                      cfg_.s_min, cfg_.s_max);
    s1.theta = th.pos;
    s1.theta_dot = th.vel;
    s1.s = st.pos;
    s1.s_dot = st.vel;

    // Energy meters, conjugate to the same discrete update.
    const double d_motor_pf = t_spring * cfg_.pf_gear_ratio * dt * w_pf;
    const double windup1 = pf_cable_windup(s1, cfg_);
    const double d_elastic_pf = t_spring * (windup1 - windup0);
    const double d_cable_joint = t_joint * arm * th.disp_w;
    const double d_fric_pf = d_motor_pf - d_elastic_pf - d_cable_joint;
    const double d_band = tau_band * th.disp_w;

    const double d_motor_tr = f_el * cfg_.trans_gear_ratio * dt * w_tr;
    const double mismatch1 = cfg_.trans_gear_ratio * s1.motor_trans_pos - s1.s;
    const double d_elastic_tr = f_el * (mismatch1 - mismatch0);
    const double d_stage = f_stage * st.disp_w;
    const double d_fric_tr = d_motor_tr - d_elastic_tr - d_stage;

    const double d_ext = ext.ankle_torque_ext * th.disp_w + ext.ap_force_ext * st.disp_w;

    audit_.work_motor_pf += d_motor_pf;
    audit_.work_motor_trans += d_motor_tr;
    audit_.work_external += d_ext;
    audit_.elastic_pf += d_elastic_pf;
    audit_.elastic_band += d_band;
    audit_.elastic_trans += d_elastic_tr;
    audit_.dissipation_friction += d_fric_pf + d_fric_tr;
    audit_.dissipation_hardstop += hardstop;
    audit_.kinetic += d_kinetic;
    audit_.throughput += std::abs(d_motor_pf) + std::abs(d_motor_tr) + std::abs(d_ext) +
                         std::abs(d_elastic_pf) + std::abs(d_band) + std::abs(d_elastic_tr) +
                         std::abs(d_fric_pf) + std::abs(d_fric_tr) + std::abs(hardstop);

    last_tau_cable_ = t_joint * arm;
    last_f_stage_ = f_stage;
    state_ = s1;
}

void Plant::step_rk4(const MotorVelocityCommand& cmd, const ExternalLoad& ext) {
    // Validation integrator for smooth, friction-free runs; the capstan
    // factors are frozen over the step and no energy meters are kept exact.
    const double dt = cfg_.timestep;
    const PlantState s0 = state_;

    const double arm0 = pf_moment_arm(s0.theta, cfg_.pf_lever);
    const double kappa_pf =
        capstan_pf_.update(arm0 * s0.theta_dot * dt, cfg_.bowden_friction_pf);
    const double f_el0 = cable_force_trans(s0, cfg_);
    const double slide_trans = (f_el0 >= 0.0 ? s0.s_dot : -s0.s_dot) * dt;
    const double kappa_tr = capstan_trans_.update(slide_trans, cfg_.bowden_friction_trans);

    struct Deriv {
        double dtheta, dtheta_dot, ds, ds_dot, dm_pf, dm_tr;
    };
    auto deriv = [&](const PlantState& s) -> Deriv {
        const double arm = pf_moment_arm(s.theta, cfg_.pf_lever);
        const double t_spring = cable_tension_pf(s, cfg_);
        const double tau_band = cfg_.df_band_stiffness *
                                std::max(0.0, s.theta - cfg_.df_band_rest_angle);
        const double f_el = cable_force_trans(s, cfg_);
        const double tau_net = kappa_pf * t_spring * arm - tau_band + ext.ankle_torque_ext;
        const double f_net = kappa_tr * f_el + ext.ap_force_ext;
        const double resist_pf = cmd.pf_vel > 0.0 ? t_spring * cfg_.pf_gear_ratio : 0.0;
        const double drum_load = f_el * cfg_.trans_gear_ratio;
        const double resist_tr = std::max(0.0, drum_load * (cmd.trans_vel > 0.0 ? 1.0 : -1.0));
        return {s.theta_dot,
                tau_net / cfg_.ankle_inertia,
                s.s_dot,
                f_net / cfg_.stage_mass,
                saturate_motor(cmd.pf_vel, resist_pf, cfg_.motor_pf),
                saturate_motor(cmd.trans_vel, resist_tr, cfg_.motor_trans)};
    };
    auto advance = [](const PlantState& s, const Deriv& d, double h) {
        PlantState r = s;
        r.theta += h * d.dtheta;
        r.theta_dot += h * d.dtheta_dot;
        r.s += h * d.ds;
        r.s_dot += h * d.ds_dot;
        r.motor_pf_pos += h * d.dm_pf;
        r.motor_trans_pos += h * d.dm_tr;
        return r;
    };

    const Deriv k1 = deriv(s0);
    const Deriv k2 = deriv(advance(s0, k1, 0.5 * dt));
    const Deriv k3 = deriv(advance(s0, k2, 0.5 * dt));
    const Deriv k4 = deriv(advance(s0, k3, dt));

    PlantState s1 = s0;
    s1.theta += dt / 6.0 * (k1.dtheta + 2 * k2.dtheta + 2 * k3.dtheta + k4.dtheta);
    s1.theta_dot += dt / 6.0 * (k1.dtheta_dot + 2 * k2.dtheta_dot + 2 * k3.dtheta_dot + k4.dtheta_dot);
    s1.s += dt / 6.0 * (k1.ds + 2 * k2.ds + 2 * k3.ds + k4.ds);
    s1.s_dot += dt / 6.0 * (k1.ds_dot + 2 * k2.ds_dot + 2 * k3.ds_dot + k4.ds_dot);
    s1.motor_pf_pos += dt / 6.0 * (k1.dm_pf + 2 * k2.dm_pf + 2 * k3.dm_pf + k4.dm_pf);
    s1.motor_trans_pos += dt / 6.0 * (k1.dm_tr + 2 * k2.dm_tr + 2 * k3.dm_tr + k4.dm_tr);
    s1.motor_pf_vel = k4.dm_pf;
    s1.motor_trans_vel = k4.dm_tr;
    s1.time += dt;

    if (s1.theta < cfg_.theta_min || s1.theta > cfg_.theta_max) {
        s1.theta = std::clamp(s1.theta, cfg_.theta_min, cfg_.theta_max);
        audit_.dissipation_hardstop += 0.5 * cfg_.ankle_inertia * s1.theta_dot * s1.theta_dot;
        s1.theta_dot = 0.0;
    }
    if (s1.s < cfg_.s_min || s1.s > cfg_.s_max) {
        s1.s = std::clamp(s1.s, cfg_.s_min, cfg_.s_max);
        audit_.dissipation_hardstop += 0.5 * cfg_.stage_mass * s1.s_dot * s1.s_dot;
        s1.s_dot = 0.0;
    }

    last_tau_cable_ = kappa_pf * cable_tension_pf(s1, cfg_) * pf_moment_arm(s1.theta, cfg_.pf_lever);
    last_f_stage_ = kappa_tr * cable_force_trans(s1, cfg_);
    last_saturated_ = false;
    state_ = s1;
}

SensorFrame Plant::sample_sensors(const ExternalLoad& ext, uint64_t noise_seed) const {
    SensorFrame f;
    const bool q = cfg_.quantization_enabled;
    f.theta_meas = q ? quantize(state_.theta, kThetaEncoderStep) : state_.theta;
    f.s_meas = q ? quantize(state_.s, kLinearScaleStep) : state_.s;
    f.motor_pf_pos_meas = q ? quantize(state_.motor_pf_pos, kMotorEncoderStep)
                            : state_.motor_pf_pos;
    f.motor_trans_pos_meas = q ? quantize(state_.motor_trans_pos, kMotorEncoderStep)
                               : state_.motor_trans_pos;

    uint64_t rng = mix_seed(noise_seed, tick_);
    for (int i = 0; i < 3; ++i) {
        f.accel_meas[i] = ext.accel_truth[i] +
                          (cfg_.accel_noise_std > 0.0 ? cfg_.accel_noise_std * gaussian(rng) : 0.0);
    }

    // Deflection-based load estimates from the measured positions.
    const double windup_meas = cfg_.pf_gear_ratio * f.motor_pf_pos_meas +
                               pf_cable_span(f.theta_meas, cfg_.pf_lever) - span_rest_;
    const double tension_est = cfg_.pf_series_stiffness * std::max(0.0, windup_meas);
    f.tau_pf_est = tension_est * pf_moment_arm(f.theta_meas, cfg_.pf_lever);

    const double mismatch_meas = cfg_.trans_gear_ratio * f.motor_trans_pos_meas - f.s_meas;
    f.f_trans_est = trans_tensions_at(mismatch_meas, cfg_).net();

    f.time = state_.time;
    return f;
}

}  // namespace anklesim
