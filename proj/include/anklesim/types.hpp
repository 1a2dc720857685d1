#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace anklesim {

// Error classes. ConfigError covers invalid parameter sets and malformed
// spec files; DomainError covers bad runtime inputs (non-finite state, etc.).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

// Cable lever on the prosthetic foot. The attachment point sits on the foot
// at `attachment_radius` from the flexion axis, rotated `attachment_angle_offset`
// below the posterior horizontal; the cable runs from there to a fixed exit
// point on the frame (x anterior, y up, axis at origin).
struct LeverGeometry {
    double attachment_radius = 0.09;        // m
    double attachment_angle_offset = 0.262;  // rad below posterior horizontal
    Vec2 cable_exit{-0.08, 0.18};            // m, frame coordinates
};

// Torque/speed/power envelope for one motor, expressed at the motor shaft.
struct MotorLimits {
    double max_velocity = 0.0;  // rad/s, drive velocity cap
    double max_torque = 0.0;    // N*m, stall torque
    double max_power = 0.0;     // W, mechanical
};

enum class Integrator { SemiImplicitEuler, Rk4 };

struct PlantConfig {
    double ankle_inertia = 0.045;  // kg*m^2 about the flexion axis
    double stage_mass = 1.35;      // kg, translating stage + foot assembly

    LeverGeometry pf_lever{};
    double pf_series_stiffness = 5.2e4;  // N/m, leaf spring + cable lumped

    double df_band_stiffness = 10.0;    // N*m/rad, dorsiflexion bands
    double df_band_rest_angle = -0.15;  // rad, band engagement angle

    double trans_cable_stiffness = 4.0e5;  // N/m per side
    double trans_pretension = 60.0;        // N, idler pretension per side
    double trans_deadzone = 8.0e-4;        // m, total free play of the pair

    // Capstan mu*phi product per cable run. The translation run has more
    // total bend than the plantarflexion run.
    double bowden_friction_pf = 0.21;
    double bowden_friction_trans = 0.24;

    double pf_gear_ratio = 1.7e-4;    // m of cable per motor rad
    double trans_gear_ratio = 1.0e-3; // m of cable per motor rad (drum/23)

    MotorLimits motor_pf{1300.0, 0.38, 155.0};
    MotorLimits motor_trans{850.0, 0.50, 170.0};

    double theta_min = -0.2618;  // rad, 15 deg dorsiflexion
    double theta_max = 0.6632;   // rad, 38 deg plantarflexion
    double s_min = -0.05;        // m
    double s_max = 0.05;         // m

    double timestep = 1.0e-3;  // s
    Integrator integrator = Integrator::SemiImplicitEuler;

    double accel_noise_std = 0.05;  // m/s^2, accelerometer channel noise
    bool quantization_enabled = true;

    // Throws ConfigError naming every violated invariant.
    void validate() const;
};

// Continuous state of the mechanism. theta positive plantar, s positive anterior.
struct PlantState {
    double theta = 0.0;
    double theta_dot = 0.0;
    double s = 0.0;
    double s_dot = 0.0;
    double motor_pf_pos = 0.0;
    double motor_trans_pos = 0.0;
    double motor_pf_vel = 0.0;
    double motor_trans_vel = 0.0;
    double time = 0.0;

    bool finite() const;
};

// Wearer/ground stand-in. accel_truth is what an ideal accelerometer at the
// mount would read, gravity included.
struct ExternalLoad {
    double ankle_torque_ext = 0.0;  // N*m about flexion axis, plantar positive
    double ap_force_ext = 0.0;      // N on stage, anterior positive
    std::array<double, 3> accel_truth{0.0, 0.0, 9.80665};
};

struct MotorVelocityCommand {
    double pf_vel = 0.0;     // rad/s
    double trans_vel = 0.0;  // rad/s
};

// Everything the controller is allowed to read.
struct SensorFrame {
    double theta_meas = 0.0;            // rad, 1024-count encoder
    double s_meas = 0.0;                // m, 20 um linear scale
    double motor_pf_pos_meas = 0.0;     // rad, 512-count encoder
    double motor_trans_pos_meas = 0.0;  // rad, 512-count encoder
    std::array<double, 3> accel_meas{0.0, 0.0, 0.0};
    double tau_pf_est = 0.0;   // N*m, deflection-based estimate
    double f_trans_est = 0.0;  // N, signed, anterior positive
    double time = 0.0;
};

inline constexpr double kThetaEncoderStep = 2.0 * M_PI / 1024.0;
inline constexpr double kLinearScaleStep = 20.0e-6;
inline constexpr double kMotorEncoderStep = 2.0 * M_PI / 512.0;

}  // namespace anklesim
