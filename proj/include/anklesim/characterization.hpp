#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anklesim/controller.hpp"
#include "anklesim/plant.hpp"

namespace anklesim {

// --- signal analysis ----------------------------------------------------------

// Logarithmic chirp sample, instantaneous frequency f0 at t=0 and f1 at
// t=duration. Domain violations are rejected.
double log_chirp(double f0, double f1, double duration, double t);

// Time from the start of `signal` (the command edge) to the first crossing of
// lo + 0.9*(hi-lo), linearly interpolated between samples. Absent if the
// signal never crosses.
std::optional<double> rise_time_90(const std::vector<double>& signal, double rate,
                                   double lo_level, double hi_level);

struct FrequencyResponse {
    std::vector<double> frequencies;    // Hz, strictly increasing
    std::vector<double> magnitude_db;
    std::vector<double> phase_deg;      // unwrapped
    std::vector<double> coherence;      // [0, 1]
};

// Welch-averaged H1 = Pxy/Pxx estimate (Hann window, 4 segments, 50% overlap),
// bins restricted to [f_lo, f_hi]. Bins with no input power are dropped.
FrequencyResponse estimate_frf(const std::vector<double>& input,
                               const std::vector<double>& output, double rate,
                               double f_lo, double f_hi);

enum class BandwidthCriterion { MagnitudeMinus3dB, Phase45deg };

struct BandwidthResult {
    double hz = 0.0;
    BandwidthCriterion criterion = BandwidthCriterion::MagnitudeMinus3dB;
};

// First -3 dB magnitude crossing vs first -45 degree phase crossing, whichever
// comes first; ties go to the magnitude criterion. Errors if the low-frequency
// magnitude is not within +-1 dB of unity; absent if neither crosses in band.
std::optional<BandwidthResult> bandwidth(const FrequencyResponse& frf);

// --- test harness -------------------------------------------------------------

// Closed-loop system under test: one reference in, one measurement out, ticked
// at a fixed rate.
struct SystemUnderTest {
    std::function<double(double)> tick;  // reference -> measured output
    double rate = 1000.0;                // Hz
    std::function<bool()> saturated;     // optional actuator-saturation probe
};

struct StepMetrics {
    double rise_time_90 = 0.0;        // s
    double fall_time_90 = 0.0;        // s
    double overshoot = 0.0;           // fraction of step amplitude
    double steady_state_error = 0.0;  // output units
};

struct SquareSpec {
    double lo = 0.0;
    double hi = 1.0;
    double period = 5.0;  // s
    int cycles = 4;
};

struct StepTestResult {
    std::optional<StepMetrics> metrics;
    std::string diagnostic;
    std::vector<double> time, reference, output;
};
StepTestResult run_step_test(SystemUnderTest& sut, const SquareSpec& square);

struct ChirpSpec {
    double f0 = 0.1;
    double f1 = 30.0;
    double duration = 20.0;
    double bias = 0.0;
    double amplitude = 1.0;
};

struct ChirpTestResult {
    FrequencyResponse frf;
    bool saturation_flagged = false;
    std::vector<double> time, reference, output;
};
ChirpTestResult run_chirp_test(SystemUnderTest& sut, const ChirpSpec& spec);

struct StallSweepReport {
    double peak_load = 0.0;      // N*m or N
    double peak_velocity = 0.0;  // rad/s or m/s
    double peak_power = 0.0;     // W
    std::vector<std::pair<double, double>> load_velocity_curve;
};

struct HysteresisReport {
    std::vector<double> applied;
    std::vector<double> measured;
    double rms_error = 0.0;
    double loop_area = 0.0;
};

// --- bench rigs on the real plant ----------------------------------------------

enum class BenchAxis { PlantarflexionTorque, TranslationPosition };

// Closed-loop torque rig: output locked isometrically at lock_angle, PD
// tension loop on the deflection estimate. Measured output is the estimated
// joint torque; the true delivered torque is logged alongside.
SystemUnderTest make_torque_rig(const PlantConfig& plant_cfg, const ControllerConfig& ctrl_cfg,
                                double lock_angle, std::shared_ptr<Plant>* plant_out = nullptr);

// Closed-loop translation position rig: foot fixed, stage free.
SystemUnderTest make_position_rig(const PlantConfig& plant_cfg, const ControllerConfig& ctrl_cfg,
                                  std::shared_ptr<Plant>* plant_out = nullptr);

// Open-loop stall sweep against a compliant load spring. The fixture spring
// carries a parallel damper (N*m*s/rad or N*s/m) representing the test rig.
StallSweepReport run_stall_sweep(const PlantConfig& plant_cfg, const ControllerConfig& ctrl_cfg,
                                 BenchAxis axis, double compliant_load_rate,
                                 double fixture_damping);

struct WeightLadder {
    double max_load = 120.0;  // N*m or N, magnitude of the top rung
    int rungs = 12;           // per direction
    double hold_time = 1.0;   // s
};

// Fixed motor positions, external load stepped up the ladder and back; the
// deflection-based estimate is recorded at the end of each hold.
HysteresisReport run_hysteresis_test(const PlantConfig& plant_cfg,
                                     const ControllerConfig& ctrl_cfg, BenchAxis axis,
                                     const WeightLadder& ladder);

}  // namespace anklesim
