#pragma once

#include <cstdint>
#include <deque>

#include "anklesim/types.hpp"

namespace anklesim {

enum class GaitPhase { Standing, StanceLoading, StanceUnloading, Swing };

const char* to_string(GaitPhase p);

// Virtual torsion spring: commanded torque K*(x - x0), clamped at zero since
// the actuator cannot pull the cable into compression. The walking controller
// evaluates it on the dorsiflexion-positive excursion x = -theta, so torque
// builds while the wearer rides over the foot and releases through push-off.
struct ImpedanceParams {
    double stiffness = 0.0;          // N*m/rad
    double equilibrium_angle = 0.0;  // rad, same frame as x
};

struct PdGains {
    double kp = 0.0;
    double kd = 0.0;
};

enum class ControlMode { Revolute1DoF, TwoDoF, StaticPosition };

struct ControllerConfig {
    double jerk_threshold = 3000.0;            // m/s^3
    double toe_off_torque_threshold = 12.0;    // N*m

    ImpedanceParams loading{180.0, -0.03};
    // Second loading segment; the commanded torque is the max of the two
    // linear laws, giving the piecewise-linear loading spring.
    bool loading_second_segment = true;
    ImpedanceParams loading2{420.0, 0.075};
    ImpedanceParams unloading{73.0, -0.40};

    double swing_toe_lift_angle = -0.10;       // rad, dorsiflexed
    double swing_translation_center = 0.0;     // m
    double trans_anterior_target = 0.05;       // m
    double trans_posterior_target = -0.04;     // m
    double standing_angle = 0.0;               // rad
    double static_pf_target = 0.0;             // rad, StaticPosition mode
    double static_trans_target = 0.0;          // m

    PdGains trans_position_gains{90000.0, 1500.0};  // motor rad/s per m, per m/s
    PdGains torque_gains{40.0, 2.7};                // motor rad/s per N, per N/s
    PdGains position_gains{9000.0, 40.0};           // motor rad/s per rad, per rad/s

    ControlMode mode = ControlMode::Revolute1DoF;
    double control_rate = 1000.0;  // Hz

    double jerk_filter_cutoff = 300.0;        // Hz
    double derivative_filter_cutoff = 25.0;   // Hz
    double velocity_filter_cutoff = 15.0;     // Hz, FSM theta_dot channel
    double heel_strike_refractory = 0.100;    // s
    double phase_min_dwell = 0.050;           // s
    double anticipation_fraction = 0.90;      // of the trailing stride period
    double default_unloading_ramp = 0.25;     // s, before a stride history exists
    double walk_stop_timeout = 3.0;           // s stuck in loading -> Standing
    double slack_payout_budget = 0.008;       // m of cable slack the PF loop may pay out

    // theta excursion used by the net-work quadrature check: heel strike,
    // peak dorsiflexion, toe-off.
    double nominal_theta_hs = 0.0;
    double nominal_theta_peak_dorsi = -0.175;
    double nominal_theta_toe_off = 0.35;

    // Throws ConfigError naming every violated invariant; needs the plant
    // joint limits for the target range checks.
    void validate(double theta_min, double theta_max, double s_min, double s_max) const;
};

// Loading/unloading stiffness-law work over the nominal stance excursion,
// by quadrature. Positive means the unloading leg releases more than the
// loading leg stores.
double net_stance_work(const ControllerConfig& cfg);

// --- spec-level operations, pure where the spec defines them pure ------------

double stiffness_law(double theta_meas, const ImpedanceParams& params);

// tension = T_des / moment arm, with a 1 mm arm floor (flagged by the caller).
double torque_to_tension(double torque_des, double theta_meas, const LeverGeometry& geom,
                         bool* arm_floored = nullptr);

struct GaitEvents {
    bool heel_strike = false;
    bool toe_off = false;
};

// Pure transition function over the legal cycle; illegal event/phase pairs
// leave the phase unchanged.
GaitPhase update_fsm(GaitPhase phase, const GaitEvents& events, double theta_dot_filtered);

// First-order low-pass with the bilinear-free exponential coefficient.
class LowPass {
public:
    LowPass() = default;
    LowPass(double cutoff_hz, double dt);
    double filter(double x);
    double value() const { return y_; }
    void reset(double y = 0.0) { y_ = y; primed_ = false; }

private:
    double alpha_ = 1.0;
    double y_ = 0.0;
    bool primed_ = false;
};

// PD with a filtered derivative term. Output role depends on the loop.
class PdLoop {
public:
    PdLoop() = default;
    PdLoop(PdGains gains, double dt, double derivative_cutoff_hz);
    double update(double reference, double measured);
    void reset();

private:
    PdGains gains_{};
    double dt_ = 1e-3;
    LowPass dfilter_{};
    double prev_error_ = 0.0;
    bool primed_ = false;
};

// Jerk-threshold heel-strike detector over the accelerometer magnitude.
class HeelStrikeDetector {
public:
    HeelStrikeDetector() = default;
    HeelStrikeDetector(double threshold, double cutoff_hz, double refractory_s, double dt);
    bool update(const std::array<double, 3>& accel, double time);
    double filtered_jerk() const { return jerk_; }

private:
    double threshold_ = 5000.0;
    double refractory_ = 0.1;
    double dt_ = 1e-3;
    LowPass lp_{};
    double prev_mag_ = 0.0;
    double jerk_ = 0.0;
    double prev_jerk_ = 0.0;
    double last_event_ = -1.0;
    int samples_ = 0;
};

// Falling-edge detector on the torque estimate.
class ToeOffDetector {
public:
    ToeOffDetector() = default;
    explicit ToeOffDetector(double threshold) : threshold_(threshold) {}
    bool update(double tau);

private:
    double threshold_ = 10.0;
    double prev_ = 0.0;
    int samples_ = 0;
};

// Per-phase targets resolved by mode.
struct TargetSet {
    bool pf_torque_mode = false;      // torque loop vs position loop on the PF axis
    double pf_torque = 0.0;           // N*m when in torque mode
    double pf_position = 0.0;         // rad when in position mode
    double trans_position = 0.0;      // m
};

struct ControllerDiagnostics {
    uint64_t illegal_events = 0;
    uint64_t frame_gap_faults = 0;
    uint64_t arm_floor_hits = 0;
};

// The full hierarchy: detection -> FSM -> phase targets -> low-level loops.
class Controller {
public:
    Controller(ControllerConfig cfg, LeverGeometry lever, double pf_gear_ratio);

    MotorVelocityCommand step(const SensorFrame& frame);

    GaitPhase phase() const { return phase_; }
    double phase_entry_time() const { return phase_entry_time_; }
    const TargetSet& targets() const { return targets_; }
    double commanded_torque() const { return commanded_torque_; }
    bool heel_strike_event() const { return last_events_.heel_strike; }
    bool toe_off_event() const { return last_events_.toe_off; }
    bool fault() const { return fault_; }
    const ControllerDiagnostics& diagnostics() const { return diag_; }
    const ControllerConfig& config() const { return cfg_; }
    double stride_period_estimate() const;

    TargetSet phase_targets(GaitPhase phase, double time) const;

private:
    double loading_law(double theta) const;

    ControllerConfig cfg_;
    LeverGeometry lever_;
    double pf_gear_ratio_;
    double span_rest_;
    double dt_;

    GaitPhase phase_ = GaitPhase::Standing;
    double phase_entry_time_ = 0.0;
    HeelStrikeDetector hs_;
    ToeOffDetector to_;
    LowPass theta_dot_filter_;
    double prev_theta_ = 0.0;
    bool have_prev_theta_ = false;

    PdLoop pf_torque_loop_;
    PdLoop pf_position_loop_;
    PdLoop trans_loop_;

    std::deque<double> stride_periods_;
    double last_heel_strike_time_ = -1.0;
    double unloading_entry_ = 0.0;
    double unloading_ramp_ = 0.25;
    double prev_unloading_duration_ = -1.0;

    TargetSet targets_{};
    GaitEvents last_events_{};
    double commanded_torque_ = 0.0;
    double last_frame_time_ = -1.0;
    bool fault_ = false;
    bool reset_latched_ = false;
    ControllerDiagnostics diag_{};
};

}  // namespace anklesim
