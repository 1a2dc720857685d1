#include "anklesim/config_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace anklesim {

using json = nlohmann::ordered_json;

const char* to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::BenchStep: return "bench_step";
        case ExperimentKind::BenchChirp: return "bench_chirp";
        case ExperimentKind::BenchHysteresis: return "bench_hysteresis";
        case ExperimentKind::BenchStall: return "bench_stall";
        case ExperimentKind::Walk: return "walk";
    }
    return "?";
}

namespace {

// Pulls known keys out of an object and rejects whatever is left over, so a
// typo in a spec never silently falls back to a default.
class Section {
public:
    Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
        if (!obj_.is_object()) throw ConfigError("'" + name_ + "' must be a JSON object");
    }

    bool has(const char* key) {
        seen_.insert(key);
        return obj_.contains(key);
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("'" + name_ + "." + key + "' has the wrong type");
        }
    }

    const json& raw(const char* key) {
        seen_.insert(key);
        return obj_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (!seen_.count(key)) {
                throw ConfigError("unknown key '" + name_ + "." + key + "'");
            }
        }
    }

private:
    const json& obj_;
    std::string name_;
    std::set<std::string> seen_;
};

void parse_gains(const json& obj, const std::string& name, PdGains& g) {
    Section s(obj, name);
    s.get("kp", g.kp);
    s.get("kd", g.kd);
    s.finish();
}

void parse_impedance(const json& obj, const std::string& name, ImpedanceParams& p) {
    Section s(obj, name);
    s.get("stiffness_nm_per_rad", p.stiffness);
    s.get("equilibrium_angle_rad", p.equilibrium_angle);
    s.finish();
}

PlantConfig parse_plant(const json& obj) {
    PlantConfig c;
    Section s(obj, "plant");
    s.get("ankle_inertia_kg_m2", c.ankle_inertia);
    s.get("stage_mass_kg", c.stage_mass);
    if (s.has("pf_lever")) {
        Section lever(s.raw("pf_lever"), "plant.pf_lever");
        lever.get("attachment_radius_m", c.pf_lever.attachment_radius);
        lever.get("attachment_angle_offset_rad", c.pf_lever.attachment_angle_offset);
        lever.get("cable_exit_x_m", c.pf_lever.cable_exit.x);
        lever.get("cable_exit_y_m", c.pf_lever.cable_exit.y);
        lever.finish();
    }
    s.get("pf_series_stiffness_n_per_m", c.pf_series_stiffness);
    s.get("df_band_stiffness_nm_per_rad", c.df_band_stiffness);
    s.get("df_band_rest_angle_rad", c.df_band_rest_angle);
    s.get("trans_cable_stiffness_n_per_m", c.trans_cable_stiffness);
    s.get("trans_pretension_n", c.trans_pretension);
    s.get("trans_deadzone_m", c.trans_deadzone);
    s.get("bowden_friction_pf", c.bowden_friction_pf);
    s.get("bowden_friction_trans", c.bowden_friction_trans);
    s.get("pf_gear_ratio_m_per_rad", c.pf_gear_ratio);
    s.get("trans_gear_ratio_m_per_rad", c.trans_gear_ratio);
    for (auto [key, lim] : {std::pair{"motor_pf", &c.motor_pf},
                            std::pair{"motor_trans", &c.motor_trans}}) {
        if (s.has(key)) {
            Section m(s.raw(key), std::string("plant.") + key);
            m.get("max_velocity_rad_per_s", lim->max_velocity);
            m.get("max_torque_nm", lim->max_torque);
            m.get("max_power_w", lim->max_power);
            m.finish();
        }
    }
    s.get("theta_min_rad", c.theta_min);
    s.get("theta_max_rad", c.theta_max);
    s.get("s_min_m", c.s_min);
    s.get("s_max_m", c.s_max);
    s.get("timestep_s", c.timestep);
    if (s.has("integrator")) {
        const std::string v = s.raw("integrator").get<std::string>();
        if (v == "semi_implicit_euler") {
            c.integrator = Integrator::SemiImplicitEuler;
        } else if (v == "rk4") {
            c.integrator = Integrator::Rk4;
        } else {
            throw ConfigError("plant.integrator must be 'semi_implicit_euler' or 'rk4'");
        }
    }
    s.get("accel_noise_std_m_per_s2", c.accel_noise_std);
    s.get("quantization_enabled", c.quantization_enabled);
    s.finish();
    return c;
}

ControllerConfig parse_controller(const json& obj) {
    ControllerConfig c;
    Section s(obj, "controller");
    s.get("jerk_threshold_m_per_s3", c.jerk_threshold);
    s.get("toe_off_torque_threshold_nm", c.toe_off_torque_threshold);
    if (s.has("loading")) parse_impedance(s.raw("loading"), "controller.loading", c.loading);
    s.get("loading_second_segment", c.loading_second_segment);
    if (s.has("loading2")) parse_impedance(s.raw("loading2"), "controller.loading2", c.loading2);
    if (s.has("unloading")) parse_impedance(s.raw("unloading"), "controller.unloading", c.unloading);
    s.get("swing_toe_lift_angle_rad", c.swing_toe_lift_angle);
    s.get("swing_translation_center_m", c.swing_translation_center);
    s.get("trans_anterior_target_m", c.trans_anterior_target);
    s.get("trans_posterior_target_m", c.trans_posterior_target);
    s.get("standing_angle_rad", c.standing_angle);
    s.get("static_pf_target_rad", c.static_pf_target);
    s.get("static_trans_target_m", c.static_trans_target);
    if (s.has("trans_position_gains")) {
        parse_gains(s.raw("trans_position_gains"), "controller.trans_position_gains",
                    c.trans_position_gains);
    }
    if (s.has("torque_gains")) parse_gains(s.raw("torque_gains"), "controller.torque_gains", c.torque_gains);
    if (s.has("position_gains")) parse_gains(s.raw("position_gains"), "controller.position_gains", c.position_gains);
    if (s.has("mode")) {
        const std::string v = s.raw("mode").get<std::string>();
        if (v == "revolute_1dof") {
            c.mode = ControlMode::Revolute1DoF;
        } else if (v == "two_dof") {
            c.mode = ControlMode::TwoDoF;
        } else if (v == "static_position") {
            c.mode = ControlMode::StaticPosition;
        } else {
            throw ConfigError("controller.mode must be revolute_1dof, two_dof, or static_position");
        }
    }
    s.get("control_rate_hz", c.control_rate);
    s.get("jerk_filter_cutoff_hz", c.jerk_filter_cutoff);
    s.get("derivative_filter_cutoff_hz", c.derivative_filter_cutoff);
    s.get("velocity_filter_cutoff_hz", c.velocity_filter_cutoff);
    s.get("heel_strike_refractory_s", c.heel_strike_refractory);
    s.get("phase_min_dwell_s", c.phase_min_dwell);
    s.get("anticipation_fraction", c.anticipation_fraction);
    s.get("default_unloading_ramp_s", c.default_unloading_ramp);
    s.get("walk_stop_timeout_s", c.walk_stop_timeout);
    s.get("slack_payout_budget_m", c.slack_payout_budget);
    s.get("nominal_theta_hs_rad", c.nominal_theta_hs);
    s.get("nominal_theta_peak_dorsi_rad", c.nominal_theta_peak_dorsi);
    s.get("nominal_theta_toe_off_rad", c.nominal_theta_toe_off);
    s.finish();
    return c;
}

ExperimentParams parse_params(const json& obj, ExperimentKind kind) {
    ExperimentParams p;
    Section s(obj, "params");
    switch (kind) {
        case ExperimentKind::BenchStep:
            s.get("axis", p.axis);
            s.get("lock_angle_rad", p.lock_angle);
            s.get("lo", p.lo);
            s.get("hi", p.hi);
            s.get("period_s", p.period);
            s.get("cycles", p.cycles);
            break;
        case ExperimentKind::BenchChirp:
            s.get("axis", p.axis);
            s.get("lock_angle_rad", p.lock_angle);
            s.get("f0_hz", p.f0);
            s.get("f1_hz", p.f1);
            s.get("duration_s", p.duration);
            s.get("bias", p.bias);
            s.get("amplitude", p.amplitude);
            break;
        case ExperimentKind::BenchHysteresis:
            s.get("axis", p.axis);
            s.get("max_load", p.max_load);
            s.get("rungs", p.rungs);
            s.get("hold_time_s", p.hold_time);
            break;
        case ExperimentKind::BenchStall:
            s.get("axis", p.axis);
            s.get("load_spring_rate", p.load_spring_rate);
            s.get("fixture_damping", p.fixture_damping);
            break;
        case ExperimentKind::Walk:
            s.get("mode", p.mode);
            s.get("speed_m_per_s", p.speed);
            s.get("n_strides", p.n_strides);
            s.get("profile", p.profile);
            break;
    }
    s.finish();
    return p;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    try {
        return json::parse(in, nullptr, true, true);  // allow comments
    } catch (const json::exception& e) {
        throw ConfigError("JSON parse error in " + path + ": " + e.what());
    }
}

// "--set a.b.c=value" override into the merged spec JSON.
void apply_override(json& root, const std::string& kv) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + kv + "' is not of the form key=value");
    }
    const std::string path = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json* node = &root;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty override key");
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
        node = &(*node)[parts[i]];
    }
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::exception&) {
        parsed = value;  // bare strings allowed
    }
    (*node)[parts.back()] = parsed;
}

}  // namespace

PlantConfig plant_from_json_text(const std::string& json_text) {
    const json root = json::parse(json_text, nullptr, true, true);
    if (root.contains("plant")) return parse_plant(root.at("plant"));
    return parse_plant(root);
}

ControllerConfig controller_from_json_text(const std::string& json_text) {
    const json root = json::parse(json_text, nullptr, true, true);
    if (root.contains("controller")) return parse_controller(root.at("controller"));
    return parse_controller(root);
}

ExperimentSpec load_spec_file(const std::string& path, const std::vector<std::string>& overrides) {
    json root = load_json_file(path);
    for (const std::string& kv : overrides) apply_override(root, kv);

    Section s(root, "spec");
    ExperimentSpec spec;
    if (!s.has("kind")) throw ConfigError("spec is missing 'kind'");
    const std::string kind = s.raw("kind").get<std::string>();
    if (kind == "bench_step") {
        spec.kind = ExperimentKind::BenchStep;
    } else if (kind == "bench_chirp") {
        spec.kind = ExperimentKind::BenchChirp;
    } else if (kind == "bench_hysteresis") {
        spec.kind = ExperimentKind::BenchHysteresis;
    } else if (kind == "bench_stall") {
        spec.kind = ExperimentKind::BenchStall;
    } else if (kind == "walk") {
        spec.kind = ExperimentKind::Walk;
    } else {
        throw ConfigError("unknown experiment kind '" + kind + "'");
    }

    const auto base_dir = std::filesystem::path(path).parent_path();
    auto resolve_section = [&](const char* name) -> json {
        if (!s.has(name)) throw ConfigError(std::string("spec is missing '") + name + "'");
        const json& entry = s.raw(name);
        if (entry.is_string()) {
            const auto ref = base_dir / entry.get<std::string>();
            const json file = load_json_file(ref.string());
            if (!file.contains(name)) {
                throw ConfigError("referenced config " + ref.string() + " has no '" +
                                  name + "' section");
            }
            return file.at(name);
        }
        return entry;
    };
    spec.plant = parse_plant(resolve_section("plant"));
    spec.controller = parse_controller(resolve_section("controller"));
    if (s.has("params")) {
        spec.params = parse_params(s.raw("params"), spec.kind);
    } else {
        spec.params = ExperimentParams{};
    }
    if (s.has("seed")) {
        spec.seed = s.raw("seed").get<uint64_t>();
        spec.seed_set = true;
    }
    s.get("out_dir", spec.out_dir);
    s.finish();
    return spec;
}

std::vector<std::string> ExperimentSpec::validate() const {
    std::vector<std::string> violations;
    auto collect = [&violations](const auto& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            std::stringstream ss(e.what());
            std::string line;
            while (std::getline(ss, line)) {
                if (!line.empty() && line[0] == ' ') {
                    violations.push_back(line.substr(2));
                }
            }
        }
    };
    collect([&] { plant.validate(); });
    collect([&] {
        controller.validate(plant.theta_min, plant.theta_max, plant.s_min, plant.s_max);
    });
    if (!seed_set) violations.push_back("seed must be set explicitly");
    if (params.axis != "pf_torque" && params.axis != "trans_position") {
        violations.push_back("params.axis must be 'pf_torque' or 'trans_position'");
    }
    if (kind == ExperimentKind::Walk) {
        if (params.mode != "revolute_1dof" && params.mode != "two_dof") {
            violations.push_back("params.mode must be 'revolute_1dof' or 'two_dof'");
        }
        if (params.n_strides < 1) violations.push_back("params.n_strides must be >= 1");
        if (params.speed <= 0) violations.push_back("params.speed_m_per_s must be positive");
    }
    if (kind == ExperimentKind::BenchChirp &&
        !(params.f0 > 0 && params.f1 > params.f0 && params.duration > 0)) {
        violations.push_back("chirp requires 0 < f0_hz < f1_hz and positive duration_s");
    }
    if (kind == ExperimentKind::BenchStall && params.load_spring_rate <= 0) {
        violations.push_back("params.load_spring_rate must be positive");
    }
    return violations;
}

std::string default_config_json() {
    const PlantConfig p;
    const ControllerConfig c;
    json j;
    j["plant"] = {
        {"ankle_inertia_kg_m2", p.ankle_inertia},
        {"stage_mass_kg", p.stage_mass},
        {"pf_lever",
         {{"attachment_radius_m", p.pf_lever.attachment_radius},
          {"attachment_angle_offset_rad", p.pf_lever.attachment_angle_offset},
          {"cable_exit_x_m", p.pf_lever.cable_exit.x},
          {"cable_exit_y_m", p.pf_lever.cable_exit.y}}},
        {"pf_series_stiffness_n_per_m", p.pf_series_stiffness},
        {"df_band_stiffness_nm_per_rad", p.df_band_stiffness},
        {"df_band_rest_angle_rad", p.df_band_rest_angle},
        {"trans_cable_stiffness_n_per_m", p.trans_cable_stiffness},
        {"trans_pretension_n", p.trans_pretension},
        {"trans_deadzone_m", p.trans_deadzone},
        {"bowden_friction_pf", p.bowden_friction_pf},
        {"bowden_friction_trans", p.bowden_friction_trans},
        {"pf_gear_ratio_m_per_rad", p.pf_gear_ratio},
        {"trans_gear_ratio_m_per_rad", p.trans_gear_ratio},
        {"motor_pf",
         {{"max_velocity_rad_per_s", p.motor_pf.max_velocity},
          {"max_torque_nm", p.motor_pf.max_torque},
          {"max_power_w", p.motor_pf.max_power}}},
        {"motor_trans",
         {{"max_velocity_rad_per_s", p.motor_trans.max_velocity},
          {"max_torque_nm", p.motor_trans.max_torque},
          {"max_power_w", p.motor_trans.max_power}}},
        {"theta_min_rad", p.theta_min},
        {"theta_max_rad", p.theta_max},
        {"s_min_m", p.s_min},
        {"s_max_m", p.s_max},
        {"timestep_s", p.timestep},
        {"integrator", "semi_implicit_euler"},
        {"accel_noise_std_m_per_s2", p.accel_noise_std},
        {"quantization_enabled", p.quantization_enabled},
    };
    j["controller"] = {
        {"jerk_threshold_m_per_s3", c.jerk_threshold},
        {"toe_off_torque_threshold_nm", c.toe_off_torque_threshold},
        {"loading",
         {{"stiffness_nm_per_rad", c.loading.stiffness},
          {"equilibrium_angle_rad", c.loading.equilibrium_angle}}},
        {"loading_second_segment", c.loading_second_segment},
        {"loading2",
         {{"stiffness_nm_per_rad", c.loading2.stiffness},
          {"equilibrium_angle_rad", c.loading2.equilibrium_angle}}},
        {"unloading",
         {{"stiffness_nm_per_rad", c.unloading.stiffness},
          {"equilibrium_angle_rad", c.unloading.equilibrium_angle}}},
        {"swing_toe_lift_angle_rad", c.swing_toe_lift_angle},
        {"swing_translation_center_m", c.swing_translation_center},
        {"trans_anterior_target_m", c.trans_anterior_target},
        {"trans_posterior_target_m", c.trans_posterior_target},
        {"standing_angle_rad", c.standing_angle},
        {"static_pf_target_rad", c.static_pf_target},
        {"static_trans_target_m", c.static_trans_target},
        {"trans_position_gains", {{"kp", c.trans_position_gains.kp}, {"kd", c.trans_position_gains.kd}}},
        {"torque_gains", {{"kp", c.torque_gains.kp}, {"kd", c.torque_gains.kd}}},
        {"position_gains", {{"kp", c.position_gains.kp}, {"kd", c.position_gains.kd}}},
        {"mode", "revolute_1dof"},
        {"control_rate_hz", c.control_rate},
        {"jerk_filter_cutoff_hz", c.jerk_filter_cutoff},
        {"derivative_filter_cutoff_hz", c.derivative_filter_cutoff},
        {"velocity_filter_cutoff_hz", c.velocity_filter_cutoff},
        {"heel_strike_refractory_s", c.heel_strike_refractory},
        {"phase_min_dwell_s", c.phase_min_dwell},
        {"anticipation_fraction", c.anticipation_fraction},
        {"default_unloading_ramp_s", c.default_unloading_ramp},
        {"walk_stop_timeout_s", c.walk_stop_timeout},
        {"slack_payout_budget_m", c.slack_payout_budget},
        {"nominal_theta_hs_rad", c.nominal_theta_hs},
        {"nominal_theta_peak_dorsi_rad", c.nominal_theta_peak_dorsi},
        {"nominal_theta_toe_off_rad", c.nominal_theta_toe_off},
    };
    return j.dump(2) + "\n";
}

}  // namespace anklesim
