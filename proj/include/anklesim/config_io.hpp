#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anklesim/controller.hpp"
#include "anklesim/types.hpp"

namespace anklesim {

enum class ExperimentKind { BenchStep, BenchChirp, BenchHysteresis, BenchStall, Walk };

const char* to_string(ExperimentKind k);

// Kind-specific parameters; unused fields keep their defaults.
struct ExperimentParams {
    std::string axis = "pf_torque";  // or "trans_position"
    double lock_angle = 0.0;         // rad, torque-bench fixture angle
    // bench_step
    double lo = 0.0, hi = 100.0, period = 5.0;
    int cycles = 4;
    // bench_chirp
    double f0 = 0.1, f1 = 30.0, duration = 20.0, bias = 45.0, amplitude = 25.0;
    // bench_hysteresis
    double max_load = 55.0;
    int rungs = 12;
    double hold_time = 1.0;
    // bench_stall
    double load_spring_rate = 320.0;
    double fixture_damping = 95.0;
    // walk
    std::string mode = "revolute_1dof";  // or "two_dof"
    double speed = 1.0;
    int n_strides = 50;
    std::string profile = "synth";  // or a stride CSV path
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::BenchChirp;
    PlantConfig plant;
    ControllerConfig controller;
    ExperimentParams params;
    uint64_t seed = 0;
    bool seed_set = false;  // the seed must be explicit, no wall-clock default
    std::string out_dir = "out";

    // Full validation; returns a list of violated invariants (empty = clean).
    std::vector<std::string> validate() const;
};

// Parse an experiment spec JSON file. "plant"/"controller" entries may be
// inline objects or string paths (resolved relative to the spec file) to a
// JSON file with "plant"/"controller" sections. Unknown keys are hard errors.
ExperimentSpec load_spec_file(const std::string& path,
                              const std::vector<std::string>& overrides = {});

// Parse the "plant"/"controller" sections of a config JSON text.
PlantConfig plant_from_json_text(const std::string& json_text);
ControllerConfig controller_from_json_text(const std::string& json_text);

// Serialize the built-in tuned defaults (the bundled configs/default.json
// must match this byte for byte).
std::string default_config_json();

}  // namespace anklesim
