#pragma once

#include <cstdint>

#include "anklesim/types.hpp"

namespace anklesim {

// --- transmission primitives -------------------------------------------------

// Perpendicular distance from the flexion axis to the cable line, signed so
// that positive tension produces plantarflexion torque. Throws ConfigError on
// degenerate geometry (attachment coincident with the exit point).
double pf_moment_arm(double theta, const LeverGeometry& geom);

// Free cable span between the rotated attachment point and the exit point.
double pf_cable_span(double theta, const LeverGeometry& geom);

// Elastic wind-up of the plantarflexion transmission: motor take-up minus the
// payout demanded by the output angle. Negative means slack.
double pf_cable_windup(const PlantState& state, const PlantConfig& cfg);

// Series-spring tension as seen at the motor side; slack returns exactly 0.
double cable_tension_pf(const PlantState& state, const PlantConfig& cfg);

// Antagonist pair tensions. The spring-loaded idlers hold each side at the
// configured pretension inside the free-play window; beyond it the taut side
// carries pretension plus cable stretch.
struct TransTensions {
    double anterior = 0.0;
    double posterior = 0.0;
    double net() const { return anterior - posterior; }
};
TransTensions trans_tensions_at(double mismatch, const PlantConfig& cfg);

// Net elastic force on the stage (anterior positive).
double cable_force_trans(const PlantState& state, const PlantConfig& cfg);

// Capstan transmission across a Bowden run, source side in.
//   direction > 0: source delivers motion toward the load -> e^(-coeff)
//   direction < 0: load back-drives                        -> e^(+coeff)
//   direction = 0: stiction; the caller holds the last factor (see CapstanState)
double bowden_attenuation(double tension_in, int direction, double coeff);

// Stiction memory for one cable run. The factor latches to e^-c / e^+c only
// after the cable has slid through the presliding length in one direction;
// smaller motions (vibration, settling ring-down) hold the last value clamped
// into the band.
struct CapstanState {
    double factor = 1.0;
    double slip = 0.0;  // accumulated slide since the last latch, m
    // slide_disp: signed cable displacement through the conduit this step, m.
    double update(double slide_disp, double coeff);
    static constexpr double kSlipLength = 1.0e-4;  // m
};

// Velocity-mode saturation against the torque/speed/power envelope.
// resisting_torque is the load component opposing the commanded direction
// (>= 0). Zero output at or beyond stall.
double saturate_motor(double vel_cmd, double resisting_torque, const MotorLimits& lim);

// --- energy bookkeeping ------------------------------------------------------

// All meters accumulate with the discrete quadrature of the integrator, so
// residual() is zero to rounding for any trajectory including hard stops.
struct EnergyAudit {
    double work_motor_pf = 0.0;
    double work_motor_trans = 0.0;
    double work_external = 0.0;
    double elastic_pf = 0.0;
    double elastic_band = 0.0;
    double elastic_trans = 0.0;
    double dissipation_friction = 0.0;
    double dissipation_hardstop = 0.0;
    double kinetic = 0.0;       // metered alongside the state-function value
    double throughput = 0.0;    // sum of |increments| over all meters

    double residual() const;
};

// --- the plant ---------------------------------------------------------------

class Plant {
public:
    explicit Plant(PlantConfig cfg, PlantState initial = {});

    const PlantConfig& config() const { return cfg_; }
    const PlantState& state() const { return state_; }
    void set_state(const PlantState& s);

    // Advance one fixed step. Throws DomainError on non-finite inputs.
    void step(const MotorVelocityCommand& cmd, const ExternalLoad& ext);

    // Quantized/noised sensor view of the current state. Pure in
    // (state, ext, cfg, seed); the noise stream is indexed by the step count.
    SensorFrame sample_sensors(const ExternalLoad& ext, uint64_t noise_seed) const;

    const EnergyAudit& audit() const { return audit_; }
    double kinetic_energy() const;

    // True joint-side quantities from the last step, for bench logging.
    double last_delivered_pf_torque() const { return last_tau_cable_; }
    double last_delivered_trans_force() const { return last_f_stage_; }
    bool last_step_saturated() const { return last_saturated_; }
    uint64_t tick() const { return tick_; }

private:
    void step_semi_implicit(const MotorVelocityCommand& cmd, const ExternalLoad& ext);
    void step_rk4(const MotorVelocityCommand& cmd, const ExternalLoad& ext);

    PlantConfig cfg_;
    PlantState state_;
    CapstanState capstan_pf_;
    CapstanState capstan_trans_;
    EnergyAudit audit_;
    double span_rest_;  // cable span at theta = 0
    double last_tau_cable_ = 0.0;
    double last_f_stage_ = 0.0;
    bool last_saturated_ = false;
    uint64_t tick_ = 0;
};

}  // namespace anklesim
