#pragma once

#include <string>
#include <vector>

#include "anklesim/config_io.hpp"
#include "anklesim/gait.hpp"

namespace anklesim {

struct RunResult {
    int exit_code = 0;
    std::vector<std::string> messages;
    std::vector<std::string> files;  // emitted, relative to out_dir
};

// Execute one experiment: CSV outputs plus a manifest with the spec hash and
// per-file checksums. spec_text is whatever the spec hash should cover (the
// spec file contents, or a canonical serialization for generated specs).
RunResult run_experiment(const ExperimentSpec& spec, const std::string& spec_text);

struct PaperRow {
    std::string metric;
    double paper_value = 0.0;
    double measured = 0.0;
    std::string band;
    bool pass = false;
    bool failed_run = false;
};

struct PaperReport {
    std::vector<PaperRow> rows;
    bool all_pass = false;
    std::string table;  // rendered text table
};

// The full bench + walking suite against the bundled tuned defaults, one row
// per reported metric. Known suite ids: "full".
PaperReport replicate_paper(const std::string& suite_id, const std::string& out_dir);

// Calibrated bench parameters behind the paper suite (fixture springs and
// dampers are rig properties, not plant properties).
struct PaperBench {
    double pf_stall_spring = 320.0;      // N*m/rad
    double pf_stall_damping = 95.0;      // N*m*s/rad
    double trans_stall_spring = 20000.0; // N/m
    double trans_stall_damping = 830.0;  // N*s/m
    double pf_ladder_max = 55.0;         // N*m
    double trans_ladder_max = 390.0;     // N
    int ladder_rungs = 12;
    double ladder_hold = 1.0;            // s
    double pf_lock_angle = 0.0;          // rad
};

}  // namespace anklesim
