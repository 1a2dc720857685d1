#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anklesim/controller.hpp"
#include "anklesim/plant.hpp"

namespace anklesim {

inline constexpr int kStrideSamples = 51;

struct StrideSample {
    double stride_progress = 0.0;   // [0, 1]
    double theta_ref = 0.0;         // rad, plantar positive
    double s_ref = 0.0;             // m
    double ankle_torque_ext = 0.0;  // N*m, wearer/ground reaction
    double ap_force_ext = 0.0;      // N
    bool accel_event_marker = false;
};

struct StrideProfile {
    std::vector<StrideSample> samples;  // exactly 51, progress 0..1
    double stride_duration = 1.15;      // s
    double walking_speed = 1.0;         // m/s
    double stance_end = 0.60;           // stride progress where the foot unloads
    bool resampled = false;             // set by load_stride when row count differed

    void validate(const PlantConfig& limits) const;
    // Linear interpolation at stride progress in [0, 1].
    StrideSample at(double progress) const;
};

struct SynthShape {
    double plantar_peak = 20.0 * M_PI / 180.0;  // rad at push-off
    double dorsi_peak = -10.0 * M_PI / 180.0;   // rad mid-stance
    double stance_fraction = 0.60;
    double dorsi_peak_at = 0.38;                // stride progress of peak dorsiflexion
    double torque_scale = 55.0;                 // N*m per m/s of walking speed
    double ap_force_scale = 90.0;               // N per m/s
    double trans_amplitude = 0.035;             // m, reference translation swing
};

// Canonical synthetic stride: dorsiflexion ramp, rapid plantarflexion to
// push-off, swing return, heel-strike marker at progress 0, double-hump load.
StrideProfile synth_stride(double speed, const SynthShape& shape = {});

// CSV schema: versioned "# anklesim-stride v1 ..." metadata line, then named
// columns.
void save_stride(const StrideProfile& profile, const std::string& path);
StrideProfile load_stride(const std::string& path, const PlantConfig& limits);

// One log row per control period.
struct TrialRow {
    double time = 0.0;
    int stride_index = -1;
    double stride_progress = 0.0;
    int phase = 0;
    double theta_ref = 0.0, theta = 0.0, theta_meas = 0.0;
    double s_ref = 0.0, s = 0.0, s_meas = 0.0;
    double trans_target = 0.0;
    double tau_cmd = 0.0, tau_meas = 0.0, tau_true = 0.0;
    int heel_strike = 0, toe_off = 0, fault = 0;
};

struct TrialLog {
    std::vector<TrialRow> rows;
    double control_rate = 1000.0;
    int strides_run = 0;

    void save_csv(const std::string& path) const;
};

// Drives the closed plant-controller loop: a stiff virtual wearer imposes the
// profile's ankle angle while the foot is loaded, the profile's external loads
// act on the stage, and the controller sees only sensor frames.
TrialLog run_walking_trial(const StrideProfile& profile, ControlMode mode, int n_strides,
                           uint64_t seed, const PlantConfig& plant_cfg,
                           const ControllerConfig& ctrl_cfg);

struct StrideWindow {
    size_t begin = 0;    // heel strike row
    size_t end = 0;      // next heel strike row (exclusive)
    size_t toe_off = 0;  // row of the StanceUnloading -> Swing transition
    bool valid = false;
};

struct SegmentationResult {
    std::vector<StrideWindow> windows;  // valid windows only
    int excluded = 0;
};

// Heel-strike to heel-strike windows; windows missing a toe-off, containing a
// fault, or with a phase-illegal sequence are excluded and counted.
SegmentationResult segment_strides(const TrialLog& log);

struct StrideStats {
    int n_strides = 0;
    double torque_rms = 0.0;         // N*m over stance
    double torque_rms_excl15 = 0.0;  // N*m, first 15% of stance excluded
    double position_rms = 0.0;       // m over stance
    // Stance-percent traces (101 points) for Fig-8 style plots.
    std::vector<double> stance_percent;
    std::vector<double> torque_cmd_mean, torque_meas_mean, torque_meas_var;
    std::vector<double> trans_ref_mean, trans_meas_mean, trans_meas_var;
};

StrideStats tracking_stats(const TrialLog& log, const SegmentationResult& seg,
                           double exclusion_fraction = 0.15);

}  // namespace anklesim
