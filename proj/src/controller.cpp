#include "anklesim/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "anklesim/plant.hpp"

namespace anklesim {

const char* to_string(GaitPhase p) {
    switch (p) {
        case GaitPhase::Standing: return "standing";
        case GaitPhase::StanceLoading: return "stance_loading";
        case GaitPhase::StanceUnloading: return "stance_unloading";
        case GaitPhase::Swing: return "swing";
    }
    return "?";
}

void ControllerConfig::validate(double theta_min, double theta_max, double s_min,
                                double s_max) const {
    std::ostringstream bad;
    auto require = [&bad](bool ok, const char* what) {
        if (!ok) bad << "  " << what << "\n";
    };
    require(jerk_threshold > 0.0, "jerk_threshold must be positive");
    require(toe_off_torque_threshold > 0.0, "toe_off_torque_threshold must be positive");
    require(loading.stiffness >= 0.0, "loading stiffness must be non-negative");
    require(unloading.stiffness >= 0.0, "unloading stiffness must be non-negative");
    for (const PdGains* g : {&trans_position_gains, &torque_gains, &position_gains}) {
        require(g->kp >= 0.0 && g->kd >= 0.0, "PD gains must be non-negative");
    }
    require(control_rate > 0.0, "control_rate must be positive");
    // Equilibrium angles live in the dorsiflexion-positive controller frame.
    auto in_theta = [&](double v) { return -v >= theta_min && -v <= theta_max; };
    auto in_s = [&](double v) { return v >= s_min && v <= s_max; };
    require(in_theta(loading.equilibrium_angle), "loading equilibrium angle outside joint limits");
    require(in_theta(unloading.equilibrium_angle), "unloading equilibrium angle outside joint limits");
    require(in_theta(swing_toe_lift_angle), "swing_toe_lift_angle outside joint limits");
    require(in_s(swing_translation_center), "swing_translation_center outside joint limits");
    require(in_s(trans_anterior_target), "trans_anterior_target outside joint limits");
    require(in_s(trans_posterior_target), "trans_posterior_target outside joint limits");
    require(net_stance_work(*this) > 0.0,
            "unloading spring must release more energy than the loading spring stores "
            "over the nominal stance excursion");
    const std::string msg = bad.str();
    if (!msg.empty()) throw ConfigError("invalid controller configuration:\n" + msg);
}

namespace {
double loading_torque(const ControllerConfig& cfg, double theta) {
    double t = stiffness_law(theta, cfg.loading);
    if (cfg.loading_second_segment) {
        t = std::max(t, stiffness_law(theta, cfg.loading2));
    }
    return t;
}
}  // namespace

double net_stance_work(const ControllerConfig& cfg) {
    // Stored while the wearer dorsiflexes from heel strike to peak, released
    // while plantarflexing out to toe-off. The laws act on the dorsiflexion
    // excursion x = -theta. Composite trapezoid quadrature.
    const int n = 2000;
    auto integrate = [n](double a, double b, auto f) {
        const double h = (b - a) / n;
        double acc = 0.5 * (f(a) + f(b));
        for (int i = 1; i < n; ++i) acc += f(a + i * h);
        return acc * h;
    };
    const double x_hs = -cfg.nominal_theta_hs;
    const double x_peak = -cfg.nominal_theta_peak_dorsi;
    const double x_toe = -cfg.nominal_theta_toe_off;
    const double stored = integrate(x_hs, x_peak,
                                    [&](double x) { return loading_torque(cfg, x); });
    const double released = integrate(x_toe, x_peak,
                                      [&](double x) { return stiffness_law(x, cfg.unloading); });
    return released - stored;
}

double stiffness_law(double theta_meas, const ImpedanceParams& params) {
    return std::max(0.0, params.stiffness * (theta_meas - params.equilibrium_angle));
}

double torque_to_tension(double torque_des, double theta_meas, const LeverGeometry& geom,
                         bool* arm_floored) {
    if (torque_des < 0.0) throw DomainError("torque_to_tension: torque must be non-negative");
    double arm = pf_moment_arm(theta_meas, geom);
    if (arm < 1.0e-3) {
        arm = 1.0e-3;
        if (arm_floored) *arm_floored = true;
    }
    return torque_des / arm;
}

GaitPhase update_fsm(GaitPhase phase, const GaitEvents& events, double theta_dot_filtered) {
    switch (phase) {
        case GaitPhase::Standing:
            if (events.heel_strike) return GaitPhase::StanceLoading;
            break;
        case GaitPhase::StanceLoading:
            // Dorsiflexing -> plantarflexing reversal hands over to unloading.
            if (theta_dot_filtered > 0.0) return GaitPhase::StanceUnloading;
            break;
        case GaitPhase::StanceUnloading:
            if (events.toe_off) return GaitPhase::Swing;
            break;
        case GaitPhase::Swing:
            if (events.heel_strike) return GaitPhase::StanceLoading;
            break;
    }
    return phase;
}

LowPass::LowPass(double cutoff_hz, double dt) {
    if (cutoff_hz <= 0.0) {
        alpha_ = 1.0;
    } else {
        const double tau = 1.0 / (2.0 * M_PI * cutoff_hz);
        alpha_ = dt / (tau + dt);
    }
}

double LowPass::filter(double x) {
    if (!primed_) {
        // First sample passes scaled by alpha so a step registers immediately.
        y_ = alpha_ * x;
        primed_ = true;
    } else {
        y_ += alpha_ * (x - y_);
    }
    return y_;
}

PdLoop::PdLoop(PdGains gains, double dt, double derivative_cutoff_hz)
    : gains_(gains), dt_(dt), dfilter_(derivative_cutoff_hz, dt) {}

double PdLoop::update(double reference, double measured) {
    const double error = reference - measured;
    double derr = 0.0;
    if (primed_) {
        derr = dfilter_.filter((error - prev_error_) / dt_);
    } else {
        dfilter_.reset();
        primed_ = true;
    }
    prev_error_ = error;
    return gains_.kp * error + gains_.kd * derr;
}

void PdLoop::reset() {
    prev_error_ = 0.0;
    primed_ = false;
    dfilter_.reset();
}

HeelStrikeDetector::HeelStrikeDetector(double threshold, double cutoff_hz, double refractory_s,
                                       double dt)
    : threshold_(threshold), refractory_(refractory_s), dt_(dt), lp_(cutoff_hz, dt) {}

bool HeelStrikeDetector::update(const std::array<double, 3>& accel, double time) {
    const double mag = std::sqrt(accel[0] * accel[0] + accel[1] * accel[1] + accel[2] * accel[2]);
    ++samples_;
    if (samples_ == 1) {
        prev_mag_ = mag;
        return false;
    }
    const double raw_jerk = (mag - prev_mag_) / dt_;
    prev_mag_ = mag;
    prev_jerk_ = jerk_;
    jerk_ = lp_.filter(raw_jerk);
    if (samples_ < 3) return false;  // need a settled difference history
    const bool crossing = prev_jerk_ <= threshold_ && jerk_ > threshold_;
    if (!crossing) return false;
    if (last_event_ >= 0.0 && time - last_event_ < refractory_) return false;
    last_event_ = time;
    return true;
}

bool ToeOffDetector::update(double tau) {
    ++samples_;
    const bool falling = samples_ >= 2 && prev_ >= threshold_ && tau < threshold_;
    prev_ = tau;
    return falling;
}

Controller::Controller(ControllerConfig cfg, LeverGeometry lever, double pf_gear_ratio)
    : cfg_(std::move(cfg)),
      lever_(lever),
      pf_gear_ratio_(pf_gear_ratio),
      span_rest_(pf_cable_span(0.0, lever)),
      dt_(1.0 / cfg_.control_rate),
      hs_(cfg_.jerk_threshold, cfg_.jerk_filter_cutoff, cfg_.heel_strike_refractory, dt_),
      to_(cfg_.toe_off_torque_threshold),
      theta_dot_filter_(cfg_.velocity_filter_cutoff, dt_),
      pf_torque_loop_(cfg_.torque_gains, dt_, cfg_.derivative_filter_cutoff),
      pf_position_loop_(cfg_.position_gains, dt_, cfg_.derivative_filter_cutoff),
      trans_loop_(cfg_.trans_position_gains, dt_, cfg_.derivative_filter_cutoff),
      unloading_ramp_(cfg_.default_unloading_ramp) {}

double Controller::loading_law(double theta) const { return loading_torque(cfg_, theta); }

double Controller::stride_period_estimate() const {
    if (stride_periods_.empty()) return -1.0;
    return std::accumulate(stride_periods_.begin(), stride_periods_.end(), 0.0) /
           stride_periods_.size();
}

TargetSet Controller::phase_targets(GaitPhase phase, double time) const {
    TargetSet t;
    const bool two_dof = cfg_.mode == ControlMode::TwoDoF;
    if (cfg_.mode == ControlMode::StaticPosition) {
        t.pf_torque_mode = false;
        t.pf_position = cfg_.static_pf_target;
        t.trans_position = cfg_.static_trans_target;
        return t;
    }
    switch (phase) {
        case GaitPhase::Standing:
            t.pf_position = cfg_.standing_angle;
            t.trans_position = two_dof ? cfg_.swing_translation_center : 0.0;
            break;
        case GaitPhase::StanceLoading:
            t.pf_torque_mode = true;
            t.trans_position = two_dof ? cfg_.trans_anterior_target : 0.0;
            break;
        case GaitPhase::StanceUnloading: {
            t.pf_torque_mode = true;
            if (two_dof) {
                const double progress =
                    std::clamp((time - unloading_entry_) / std::max(unloading_ramp_, 1e-3), 0.0, 1.0);
                t.trans_position = cfg_.trans_anterior_target +
                                   progress * (cfg_.trans_posterior_target - cfg_.trans_anterior_target);
            } else {
                t.trans_position = 0.0;
            }
            break;
        }
        case GaitPhase::Swing:
            t.pf_position = cfg_.swing_toe_lift_angle;
            t.trans_position = two_dof ? cfg_.swing_translation_center : 0.0;
            break;
    }
    return t;
}

MotorVelocityCommand Controller::step(const SensorFrame& frame) {
    // Stale-stream guard: more than 3 control periods without a frame.
    fault_ = false;
    if (last_frame_time_ >= 0.0 && frame.time - last_frame_time_ > 3.0 * dt_ + 0.5 * dt_) {
        ++diag_.frame_gap_faults;
        last_frame_time_ = frame.time;
        fault_ = true;
        return {0.0, 0.0};
    }
    last_frame_time_ = frame.time;

    // Event detection.
    GaitEvents ev;
    ev.heel_strike = hs_.update(frame.accel_meas, frame.time);
    ev.toe_off = to_.update(frame.tau_pf_est);
    last_events_ = ev;

    double theta_dot_f = 0.0;
    if (have_prev_theta_) {
        theta_dot_f = theta_dot_filter_.filter((frame.theta_meas - prev_theta_) / dt_);
    }
    prev_theta_ = frame.theta_meas;
    have_prev_theta_ = true;

    // Phase bookkeeping. Transitions respect the minimum dwell; events that
    // are illegal for the current phase are counted, not acted on.
    const bool dwell_ok = frame.time - phase_entry_time_ >= cfg_.phase_min_dwell;
    GaitPhase next = phase_;
    if (dwell_ok) {
        double fsm_vel = theta_dot_f;
        if (phase_ == GaitPhase::StanceLoading) {
            // The reversal rule wants a real dorsiflexion excursion behind it,
            // not the velocity ripple right after heel strike.
            const bool reversal = theta_dot_f > 0.02 &&
                                  frame.theta_meas < cfg_.nominal_theta_hs - 0.02;
            fsm_vel = reversal ? theta_dot_f : -1.0;
        }
        next = update_fsm(phase_, ev, fsm_vel);
        if (phase_ == GaitPhase::StanceLoading && next == phase_ &&
            frame.time - phase_entry_time_ > cfg_.walk_stop_timeout) {
            next = GaitPhase::Standing;  // walk stop
        }
    }
    if ((ev.heel_strike && !(phase_ == GaitPhase::Standing || phase_ == GaitPhase::Swing)) ||
        (ev.toe_off && phase_ != GaitPhase::StanceUnloading)) {
        ++diag_.illegal_events;
    }
    if (next != phase_) {
        if (next == GaitPhase::StanceLoading) {
            if (last_heel_strike_time_ >= 0.0) {
                const double period = frame.time - last_heel_strike_time_;
                stride_periods_.push_back(period);
                if (stride_periods_.size() > 3) stride_periods_.pop_front();
            }
            last_heel_strike_time_ = frame.time;
            reset_latched_ = false;
        }
        if (next == GaitPhase::StanceUnloading) unloading_entry_ = frame.time;
        if (next == GaitPhase::Swing && phase_ == GaitPhase::StanceUnloading) {
            prev_unloading_duration_ = frame.time - unloading_entry_;
            if (prev_unloading_duration_ > 1e-3) unloading_ramp_ = prev_unloading_duration_;
        }
        phase_ = next;
        phase_entry_time_ = frame.time;
    }

    // Late-swing reset just before the anticipated heel strike.
    if (phase_ == GaitPhase::Swing && !reset_latched_ && last_heel_strike_time_ >= 0.0) {
        const double period = stride_period_estimate();
        if (period > 0.0 &&
            frame.time - last_heel_strike_time_ >= cfg_.anticipation_fraction * period) {
            reset_latched_ = true;
        }
    }

    targets_ = phase_targets(phase_, frame.time);
    if (reset_latched_ && phase_ == GaitPhase::Swing) {
        targets_.pf_position = cfg_.standing_angle;
        targets_.trans_position = cfg_.mode == ControlMode::TwoDoF ? cfg_.swing_translation_center : 0.0;
        targets_.pf_torque_mode = false;
    }

    MotorVelocityCommand cmd;
    if (targets_.pf_torque_mode) {
        const double x_dorsi = -frame.theta_meas;
        double torque_des = 0.0;
        if (phase_ == GaitPhase::StanceLoading) {
            torque_des = loading_law(x_dorsi);
        } else {
            torque_des = stiffness_law(x_dorsi, cfg_.unloading);
        }
        commanded_torque_ = torque_des;
        bool floored = false;
        const double tension_des = torque_to_tension(torque_des, frame.theta_meas, lever_, &floored);
        double arm = pf_moment_arm(frame.theta_meas, lever_);
        if (arm < 1.0e-3) {
            arm = 1.0e-3;
            floored = true;
        }
        if (floored) ++diag_.arm_floor_hits;
        const double tension_meas = std::max(0.0, frame.tau_pf_est) / arm;
        cmd.pf_vel = pf_torque_loop_.update(tension_des, tension_meas);
    } else {
        commanded_torque_ = 0.0;
        cmd.pf_vel = pf_position_loop_.update(targets_.pf_position, frame.theta_meas);
    }
    // Slack management: never unwind the cable more than the configured
    // budget past taut; dorsiflexion proceeds as the bands consume the slack.
    const double windup_est = pf_gear_ratio_ * frame.motor_pf_pos_meas +
                              pf_cable_span(frame.theta_meas, lever_) - span_rest_;
    if (cmd.pf_vel < 0.0 && windup_est < -cfg_.slack_payout_budget) {
        cmd.pf_vel = 0.0;
    }
    cmd.trans_vel = trans_loop_.update(targets_.trans_position, frame.s_meas);
    return cmd;
}

}  // namespace anklesim
