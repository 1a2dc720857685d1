#include "anklesim/anklesim_c.h"

#include <cstring>
#include <string>

#include "anklesim/config_io.hpp"
#include "anklesim/controller.hpp"
#include "anklesim/experiment.hpp"
#include "anklesim/plant.hpp"
#include "anklesim/version.hpp"

using namespace anklesim;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

anklesim_status classify(const std::exception& e) {
    g_last_error = e.what();
    if (dynamic_cast<const ConfigError*>(&e)) return ANKLESIM_ERR_VALIDATION;
    if (dynamic_cast<const IoError*>(&e)) return ANKLESIM_ERR_IO;
    if (dynamic_cast<const DomainError*>(&e)) return ANKLESIM_ERR_INVALID_ARG;
    return ANKLESIM_ERR_RUNTIME;
}

template <class Fn>
anklesim_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        return fn();
    } catch (const std::exception& e) {
        return classify(e);
    } catch (...) {
        g_last_error = "unknown error";
        return ANKLESIM_ERR_RUNTIME;
    }
}

}  // namespace

struct anklesim_plant {
    Plant impl;
    explicit anklesim_plant(Plant p) : impl(std::move(p)) {}
};

struct anklesim_controller {
    Controller impl;
    explicit anklesim_controller(Controller c) : impl(std::move(c)) {}
};

extern "C" {

const char* anklesim_status_str(anklesim_status status) {
    switch (status) {
        case ANKLESIM_OK: return "ok";
        case ANKLESIM_ERR_INVALID_ARG: return "invalid argument";
        case ANKLESIM_ERR_PARSE: return "parse error";
        case ANKLESIM_ERR_VALIDATION: return "validation error";
        case ANKLESIM_ERR_IO: return "io error";
        case ANKLESIM_ERR_RUNTIME: return "runtime error";
        case ANKLESIM_ERR_USAGE: return "usage error";
    }
    return "unknown status";
}

const char* anklesim_version(void) { return ANKLESIM_VERSION; }

const char* anklesim_last_error(void) { return g_last_error.c_str(); }

void anklesim_string_free(char* s) { std::free(s); }

anklesim_status anklesim_default_config_json(char** out_json) {
    if (!out_json) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&] {
        *out_json = dup_string(default_config_json());
        return *out_json ? ANKLESIM_OK : ANKLESIM_ERR_RUNTIME;
    });
}

anklesim_status anklesim_plant_create(const char* json_text, anklesim_plant** out) {
    if (!out) return ANKLESIM_ERR_INVALID_ARG;
    *out = nullptr;
    return guarded([&] {
        PlantConfig cfg = json_text ? plant_from_json_text(json_text) : PlantConfig{};
        *out = new anklesim_plant(Plant(cfg));
        return ANKLESIM_OK;
    });
}

void anklesim_plant_destroy(anklesim_plant* plant) { delete plant; }

anklesim_status anklesim_plant_get_state(const anklesim_plant* plant,
                                         double state[ANKLESIM_STATE_LEN]) {
    if (!plant || !state) return ANKLESIM_ERR_INVALID_ARG;
    const PlantState& s = plant->impl.state();
    const double vals[ANKLESIM_STATE_LEN] = {s.theta,        s.theta_dot,      s.s,
                                             s.s_dot,        s.motor_pf_pos,   s.motor_trans_pos,
                                             s.motor_pf_vel, s.motor_trans_vel, s.time};
    std::memcpy(state, vals, sizeof vals);
    return ANKLESIM_OK;
}

anklesim_status anklesim_plant_set_state(anklesim_plant* plant,
                                         const double state[ANKLESIM_STATE_LEN]) {
    if (!plant || !state) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&] {
        PlantState s;
        s.theta = state[0];
        s.theta_dot = state[1];
        s.s = state[2];
        s.s_dot = state[3];
        s.motor_pf_pos = state[4];
        s.motor_trans_pos = state[5];
        s.motor_pf_vel = state[6];
        s.motor_trans_vel = state[7];
        s.time = state[8];
        plant->impl.set_state(s);
        return ANKLESIM_OK;
    });
}

anklesim_status anklesim_plant_step(anklesim_plant* plant, const double cmd[2],
                                    const double ext[5]) {
    if (!plant || !cmd || !ext) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&] {
        MotorVelocityCommand c{cmd[0], cmd[1]};
        ExternalLoad e;
        e.ankle_torque_ext = ext[0];
        e.ap_force_ext = ext[1];
        e.accel_truth = {ext[2], ext[3], ext[4]};
        plant->impl.step(c, e);
        return ANKLESIM_OK;
    });
}

anklesim_status anklesim_plant_sensors(const anklesim_plant* plant, const double ext[5],
                                       uint64_t noise_seed,
                                       double frame[ANKLESIM_FRAME_LEN]) {
    if (!plant || !ext || !frame) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&] {
        ExternalLoad e;
        e.ankle_torque_ext = ext[0];
        e.ap_force_ext = ext[1];
        e.accel_truth = {ext[2], ext[3], ext[4]};
        const SensorFrame f = plant->impl.sample_sensors(e, noise_seed);
        const double vals[ANKLESIM_FRAME_LEN] = {
            f.theta_meas,   f.s_meas,        f.motor_pf_pos_meas, f.motor_trans_pos_meas,
            f.accel_meas[0], f.accel_meas[1], f.accel_meas[2],     f.tau_pf_est,
            f.f_trans_est,   f.time};
        std::memcpy(frame, vals, sizeof vals);
        return ANKLESIM_OK;
    });
}

anklesim_status anklesim_plant_energy(const anklesim_plant* plant, double* residual,
                                      double* throughput) {
    if (!plant) return ANKLESIM_ERR_INVALID_ARG;
    if (residual) *residual = plant->impl.audit().residual();
    if (throughput) *throughput = plant->impl.audit().throughput;
    return ANKLESIM_OK;
}

anklesim_status anklesim_controller_create(const char* json_text,
                                           const anklesim_plant* plant,
                                           anklesim_controller** out) {
    if (!out || !plant) return ANKLESIM_ERR_INVALID_ARG;
    *out = nullptr;
    return guarded([&] {
        ControllerConfig cfg =
            json_text ? controller_from_json_text(json_text) : ControllerConfig{};
        const PlantConfig& pc = plant->impl.config();
        cfg.validate(pc.theta_min, pc.theta_max, pc.s_min, pc.s_max);
        *out = new anklesim_controller(Controller(cfg, pc.pf_lever, pc.pf_gear_ratio));
        return ANKLESIM_OK;
    });
}

void anklesim_controller_destroy(anklesim_controller* ctrl) { delete ctrl; }

anklesim_status anklesim_controller_step(anklesim_controller* ctrl,
                                         const double frame[ANKLESIM_FRAME_LEN],
                                         double cmd_out[2]) {
    if (!ctrl || !frame || !cmd_out) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&] {
        SensorFrame f;
        f.theta_meas = frame[0];
        f.s_meas = frame[1];
        f.motor_pf_pos_meas = frame[2];
        f.motor_trans_pos_meas = frame[3];
        f.accel_meas = {frame[4], frame[5], frame[6]};
        f.tau_pf_est = frame[7];
        f.f_trans_est = frame[8];
        f.time = frame[9];
        const MotorVelocityCommand cmd = ctrl->impl.step(f);
        cmd_out[0] = cmd.pf_vel;
        cmd_out[1] = cmd.trans_vel;
        return ANKLESIM_OK;
    });
}

anklesim_status anklesim_controller_phase(const anklesim_controller* ctrl, int* phase) {
    if (!ctrl || !phase) return ANKLESIM_ERR_INVALID_ARG;
    *phase = static_cast<int>(ctrl->impl.phase());
    return ANKLESIM_OK;
}

anklesim_status anklesim_controller_fault(const anklesim_controller* ctrl, int* fault) {
    if (!ctrl || !fault) return ANKLESIM_ERR_INVALID_ARG;
    *fault = ctrl->impl.fault() ? 1 : 0;
    return ANKLESIM_OK;
}

anklesim_status anklesim_run_spec(const char* spec_path, const char* const* overrides,
                                  size_t n_overrides, const char* out_dir,
                                  int64_t seed_override, char** messages_out) {
    if (!spec_path) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&]() -> anklesim_status {
        std::vector<std::string> ov;
        for (size_t i = 0; i < n_overrides; ++i) ov.emplace_back(overrides[i]);
        ExperimentSpec spec = load_spec_file(spec_path, ov);
        if (out_dir) spec.out_dir = out_dir;
        if (seed_override >= 0) {
            spec.seed = static_cast<uint64_t>(seed_override);
            spec.seed_set = true;
        }
        std::ifstream in(spec_path);
        std::string spec_text((std::istreambuf_iterator<char>(in)),
                              std::istreambuf_iterator<char>());
        const RunResult r = run_experiment(spec, spec_text);
        std::string joined;
        for (const std::string& m : r.messages) joined += m + "\n";
        if (messages_out) *messages_out = dup_string(joined);
        if (r.exit_code != 0) {
            g_last_error = joined;
            return ANKLESIM_ERR_VALIDATION;
        }
        return ANKLESIM_OK;
    });
}

anklesim_status anklesim_validate_spec(const char* spec_path, char** report_out) {
    if (!spec_path) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&]() -> anklesim_status {
        ExperimentSpec spec;
        try {
            spec = load_spec_file(spec_path);
        } catch (const IoError& e) {
            g_last_error = e.what();
            if (report_out) *report_out = dup_string(std::string("unreadable: ") + e.what() + "\n");
            return ANKLESIM_ERR_IO;
        }
        const auto violations = spec.validate();
        std::string report;
        if (violations.empty()) {
            report = "clean: all invariants hold\n";
        } else {
            for (const std::string& v : violations) report += "violated: " + v + "\n";
        }
        if (report_out) *report_out = dup_string(report);
        if (!violations.empty()) {
            g_last_error = report;
            return ANKLESIM_ERR_VALIDATION;
        }
        return ANKLESIM_OK;
    });
}

anklesim_status anklesim_replicate_paper(const char* suite_id, const char* out_dir,
                                         char** table_out, int* all_pass) {
    if (!suite_id || !out_dir) return ANKLESIM_ERR_INVALID_ARG;
    return guarded([&]() -> anklesim_status {
        PaperReport rep;
        try {
            rep = replicate_paper(suite_id, out_dir);
        } catch (const ConfigError& e) {
            g_last_error = e.what();
            return ANKLESIM_ERR_USAGE;
        }
        if (table_out) *table_out = dup_string(rep.table);
        if (all_pass) *all_pass = rep.all_pass ? 1 : 0;
        return ANKLESIM_OK;
    });
}

}  // extern "C"
