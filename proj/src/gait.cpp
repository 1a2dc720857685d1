#include "anklesim/gait.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "anklesim/csv.hpp"

namespace anklesim {

void StrideProfile::validate(const PlantConfig& limits) const {
    std::ostringstream bad;
    if (static_cast<int>(samples.size()) != kStrideSamples) {
        bad << "  profile must hold exactly " << kStrideSamples << " samples\n";
    }
    if (stride_duration <= 0.0) bad << "  stride_duration must be positive\n";
    if (walking_speed <= 0.0) bad << "  walking_speed must be positive\n";
    for (size_t i = 0; i < samples.size(); ++i) {
        const StrideSample& r = samples[i];
        if (i > 0 && r.stride_progress <= samples[i - 1].stride_progress) {
            bad << "  row " << i << ": stride_progress not strictly increasing\n";
        }
        if (r.theta_ref < limits.theta_min - 1e-9 || r.theta_ref > limits.theta_max + 1e-9) {
            bad << "  row " << i << ": theta_ref " << r.theta_ref
                << " rad exceeds the flexion range\n";
        }
        if (r.s_ref < limits.s_min - 1e-9 || r.s_ref > limits.s_max + 1e-9) {
            bad << "  row " << i << ": s_ref " << r.s_ref << " m exceeds the translation range\n";
        }
    }
    if (!samples.empty() &&
        std::abs(samples.front().theta_ref - samples.back().theta_ref) > 0.05) {
        bad << "  profile is not periodic (first/last theta_ref differ)\n";
    }
    const std::string msg = bad.str();
    if (!msg.empty()) throw ConfigError("invalid stride profile:\n" + msg);
}

StrideSample StrideProfile::at(double progress) const {
    const double p = std::clamp(progress, 0.0, 1.0);
    if (samples.size() < 2) return samples.empty() ? StrideSample{} : samples.front();
    size_t hi = 1;
    while (hi + 1 < samples.size() && samples[hi].stride_progress < p) ++hi;
    const StrideSample& a = samples[hi - 1];
    const StrideSample& b = samples[hi];
    const double span = b.stride_progress - a.stride_progress;
    const double f = span > 0.0 ? std::clamp((p - a.stride_progress) / span, 0.0, 1.0) : 0.0;
    StrideSample out;
    out.stride_progress = p;
    out.theta_ref = a.theta_ref + f * (b.theta_ref - a.theta_ref);
    out.s_ref = a.s_ref + f * (b.s_ref - a.s_ref);
    out.ankle_torque_ext = a.ankle_torque_ext + f * (b.ankle_torque_ext - a.ankle_torque_ext);
    out.ap_force_ext = a.ap_force_ext + f * (b.ap_force_ext - a.ap_force_ext);
    out.accel_event_marker = f < 0.5 ? a.accel_event_marker : b.accel_event_marker;
    return out;
}

namespace {
double cosine_blend(double from, double to, double f) {
    return from + (to - from) * 0.5 * (1.0 - std::cos(M_PI * std::clamp(f, 0.0, 1.0)));
}
}  // namespace

StrideProfile synth_stride(double speed, const SynthShape& shape) {
    if (speed <= 0.0) throw DomainError("synth_stride: speed must be positive");
    StrideProfile prof;
    prof.walking_speed = speed;
    prof.stride_duration = 1.30 - 0.15 * speed;  // faster cadence at higher speed
    prof.stance_end = shape.stance_fraction;
    const double st = shape.stance_fraction;
    const double pk = shape.dorsi_peak_at;
    prof.samples.resize(kStrideSamples);
    for (int i = 0; i < kStrideSamples; ++i) {
        const double p = static_cast<double>(i) / (kStrideSamples - 1);
        StrideSample& r = prof.samples[i];
        r.stride_progress = p;
        // Ankle angle: dorsiflexion ramp to the mid-stance peak, rapid
        // plantarflexion to push-off, swing return to neutral.
        if (p <= pk) {
            r.theta_ref = cosine_blend(0.0, shape.dorsi_peak * std::min(1.0, 0.7 + 0.3 * speed),
                                       p / pk);
        } else if (p <= st) {
            r.theta_ref = cosine_blend(shape.dorsi_peak * std::min(1.0, 0.7 + 0.3 * speed),
                                       shape.plantar_peak, (p - pk) / (st - pk));
        } else {
            r.theta_ref = cosine_blend(shape.plantar_peak, 0.0, (p - st) / (1.0 - st));
        }
        // Reference translation: anterior through loading, posterior through
        // push-off, centered in swing.
        if (p <= pk) {
            r.s_ref = cosine_blend(0.0, shape.trans_amplitude, std::min(1.0, p / 0.12));
        } else if (p <= st) {
            r.s_ref = cosine_blend(shape.trans_amplitude, -0.8 * shape.trans_amplitude,
                                   (p - pk) / (st - pk));
        } else {
            r.s_ref = cosine_blend(-0.8 * shape.trans_amplitude, 0.0, (p - st) / (1.0 - st));
        }
        // Double-hump stance load, dorsiflexing reaction about the ankle.
        if (p < st) {
            const double q = p / st;
            const double hump = std::sin(M_PI * q) * (1.0 + 0.35 * std::cos(2.0 * M_PI * q));
            r.ankle_torque_ext = -shape.torque_scale * speed * std::max(0.0, hump);
            r.ap_force_ext = -shape.ap_force_scale * speed * std::sin(2.0 * M_PI * q);
        } else {
            r.ankle_torque_ext = 0.0;
            r.ap_force_ext = 0.0;
        }
        r.accel_event_marker = (i == 0);
    }
    return prof;
}

void save_stride(const StrideProfile& profile, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "# anklesim-stride v1 stride_duration_s=" << CsvWriter::format(profile.stride_duration)
        << " walking_speed_m_per_s=" << CsvWriter::format(profile.walking_speed)
        << " stance_end=" << CsvWriter::format(profile.stance_end) << "\n";
    out << "stride_progress,theta_ref_rad,s_ref_m,ankle_torque_ext_nm,ap_force_ext_n,"
           "accel_event_marker\n";
    for (const StrideSample& r : profile.samples) {
        out << CsvWriter::format(r.stride_progress) << ',' << CsvWriter::format(r.theta_ref)
            << ',' << CsvWriter::format(r.s_ref) << ',' << CsvWriter::format(r.ankle_torque_ext)
            << ',' << CsvWriter::format(r.ap_force_ext) << ',' << (r.accel_event_marker ? 1 : 0)
            << "\n";
    }
}

StrideProfile load_stride(const std::string& path, const PlantConfig& limits) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    StrideProfile prof;
    std::string line;
    bool have_header = false;
    std::vector<std::string> columns;
    std::vector<StrideSample> rows;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            // Metadata line of the versioned header.
            std::stringstream ss(line);
            std::string tok;
            while (ss >> tok) {
                if (tok.rfind("stride_duration_s=", 0) == 0) {
                    prof.stride_duration = std::stod(tok.substr(18));
                } else if (tok.rfind("walking_speed_m_per_s=", 0) == 0) {
                    prof.walking_speed = std::stod(tok.substr(22));
                } else if (tok.rfind("stance_end=", 0) == 0) {
                    prof.stance_end = std::stod(tok.substr(11));
                }
            }
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!have_header) {
            while (std::getline(ss, cell, ',')) columns.push_back(cell);
            for (const char* required :
                 {"stride_progress", "theta_ref_rad", "s_ref_m", "ankle_torque_ext_nm",
                  "ap_force_ext_n", "accel_event_marker"}) {
                if (std::find(columns.begin(), columns.end(), required) == columns.end()) {
                    throw ConfigError("stride file missing column '" + std::string(required) +
                                      "': " + path);
                }
            }
            have_header = true;
            continue;
        }
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("stride file row " + std::to_string(line_no) +
                                  ": non-numeric cell '" + cell + "'");
            }
        }
        if (vals.size() != columns.size()) {
            throw ConfigError("stride file row " + std::to_string(line_no) + ": expected " +
                              std::to_string(columns.size()) + " cells");
        }
        auto col = [&](const char* name) {
            return vals[std::find(columns.begin(), columns.end(), name) - columns.begin()];
        };
        StrideSample r;
        r.stride_progress = col("stride_progress");
        r.theta_ref = col("theta_ref_rad");
        r.s_ref = col("s_ref_m");
        r.ankle_torque_ext = col("ankle_torque_ext_nm");
        r.ap_force_ext = col("ap_force_ext_n");
        r.accel_event_marker = col("accel_event_marker") != 0.0;
        rows.push_back(r);
    }
    if (rows.size() < 2) throw ConfigError("stride file has fewer than 2 data rows: " + path);

    if (static_cast<int>(rows.size()) != kStrideSamples) {
        // Linear resample onto the canonical 51-point grid.
        StrideProfile tmp = prof;
        tmp.samples = rows;
        prof.samples.resize(kStrideSamples);
        for (int i = 0; i < kStrideSamples; ++i) {
            const double p = static_cast<double>(i) / (kStrideSamples - 1);
            prof.samples[i] = tmp.at(p);
            prof.samples[i].accel_event_marker = (i == 0);
        }
        prof.resampled = true;
    } else {
        prof.samples = rows;
    }
    prof.validate(limits);
    return prof;
}

namespace {

struct WearerGains {
    double kp = 20000.0;  // N*m/rad
    double kd = 48.0;     // N*m*s/rad
};

}  // namespace

TrialLog run_walking_trial(const StrideProfile& profile, ControlMode mode, int n_strides,
                           uint64_t seed, const PlantConfig& plant_cfg,
                           const ControllerConfig& ctrl_cfg) {
    if (n_strides < 1) throw DomainError("run_walking_trial: n_strides must be >= 1");
    profile.validate(plant_cfg);

    ControllerConfig cc = ctrl_cfg;
    cc.mode = mode;
    Plant plant(plant_cfg);
    Controller ctrl(cc, plant_cfg.pf_lever, plant_cfg.pf_gear_ratio);
    const double dt = plant_cfg.timestep;
    const WearerGains vw;

    TrialLog log;
    log.control_rate = 1.0 / dt;
    log.strides_run = n_strides;

    const double lead_in = 1.0;
    const double spike_width = 0.006;
    const double spike_mag = 35.0;
    const double T = profile.stride_duration;
    // One closing partial stride delivers the final heel strike so the last
    // full stride segments cleanly.
    const double total = lead_in + n_strides * T + 0.35;

    MotorVelocityCommand cmd{};
    const size_t n_ticks = static_cast<size_t>(total / dt);
    for (size_t k = 0; k < n_ticks; ++k) {
        const double t = plant.state().time;
        const double t_walk = t - lead_in;
        const int stride = t_walk >= 0.0 ? static_cast<int>(t_walk / T) : -1;
        const double progress = stride >= 0 ? (t_walk - stride * T) / T : 0.0;

        // Wearer/ground inputs for this tick. The position source acts only
        // while the foot is loaded; in swing the foot moves under the device.
        ExternalLoad ext;
        StrideSample ref{};
        if (stride >= 0) {
            ref = profile.at(progress);
            if (progress <= profile.stance_end) {
                const double h = 1e-4;
                const double theta_ref_next = profile.at(std::min(1.0, progress + h / T)).theta_ref;
                const double theta_ref_dot = (theta_ref_next - ref.theta_ref) / h;
                ext.ankle_torque_ext = vw.kp * (ref.theta_ref - plant.state().theta) +
                                       vw.kd * (theta_ref_dot - plant.state().theta_dot) +
                                       ref.ankle_torque_ext;
                ext.ap_force_ext = ref.ap_force_ext;
            } else {
                // Light shank coupling keeps the free foot from ringing.
                ext.ankle_torque_ext = -0.3 * plant.state().theta_dot;
            }
        } else {
            // Standing lead-in: hold the ankle near neutral.
            ext.ankle_torque_ext = vw.kp * (0.0 - plant.state().theta) -
                                   vw.kd * plant.state().theta_dot;
        }
        const double since_hs = progress * T;
        const double spike = (stride >= 0 && since_hs < spike_width) ? spike_mag : 0.0;
        ext.accel_truth = {spike + 2.0 * std::sin(2.0 * M_PI * progress),
                           0.5 * std::sin(4.0 * M_PI * progress),
                           9.80665 + 1.0 * std::sin(2.0 * M_PI * progress + 1.0)};

        const SensorFrame frame = plant.sample_sensors(ext, seed);
        cmd = ctrl.step(frame);
        plant.step(cmd, ext);

        TrialRow row;
        row.time = t;
        row.stride_index = stride >= n_strides ? -2 : stride;  // -2 marks the closer
        row.stride_progress = progress;
        row.phase = static_cast<int>(ctrl.phase());
        row.theta_ref = stride >= 0 ? ref.theta_ref : 0.0;
        row.theta = plant.state().theta;
        row.theta_meas = frame.theta_meas;
        row.s_ref = stride >= 0 ? ref.s_ref : 0.0;
        row.s = plant.state().s;
        row.s_meas = frame.s_meas;
        row.trans_target = ctrl.targets().trans_position;
        row.tau_cmd = ctrl.commanded_torque();
        row.tau_meas = frame.tau_pf_est;
        row.tau_true = plant.last_delivered_pf_torque();
        row.heel_strike = ctrl.heel_strike_event() ? 1 : 0;
        row.toe_off = ctrl.toe_off_event() ? 1 : 0;
        row.fault = ctrl.fault() ? 1 : 0;
        log.rows.push_back(row);
    }
    return log;
}

void TrialLog::save_csv(const std::string& path) const {
    CsvWriter w(path, {"time_s", "stride_index", "stride_progress", "phase", "theta_ref_rad",
                       "theta_rad", "theta_meas_rad", "s_ref_m", "s_m", "s_meas_m",
                       "trans_target_m", "tau_cmd_nm", "tau_meas_nm", "tau_true_nm",
                       "heel_strike", "toe_off", "fault"});
    for (const TrialRow& r : rows) {
        w.row({r.time, static_cast<double>(r.stride_index), r.stride_progress,
               static_cast<double>(r.phase), r.theta_ref, r.theta, r.theta_meas, r.s_ref, r.s,
               r.s_meas, r.trans_target, r.tau_cmd, r.tau_meas, r.tau_true,
               static_cast<double>(r.heel_strike), static_cast<double>(r.toe_off),
               static_cast<double>(r.fault)});
    }
}

SegmentationResult segment_strides(const TrialLog& log) {
    SegmentationResult res;
    std::vector<size_t> heel_strikes;
    for (size_t i = 0; i < log.rows.size(); ++i) {
        if (log.rows[i].heel_strike) heel_strikes.push_back(i);
    }
    for (size_t w = 0; w + 1 < heel_strikes.size(); ++w) {
        StrideWindow win;
        win.begin = heel_strikes[w];
        win.end = heel_strikes[w + 1];
        int swing_entries = 0;
        int load_to_unload = 0;
        bool fault = false;
        int prev_phase = log.rows[win.begin].phase;
        for (size_t i = win.begin; i < win.end; ++i) {
            const TrialRow& r = log.rows[i];
            fault = fault || r.fault;
            if (prev_phase == static_cast<int>(GaitPhase::StanceLoading) &&
                r.phase == static_cast<int>(GaitPhase::StanceUnloading)) {
                ++load_to_unload;
            }
            if (prev_phase == static_cast<int>(GaitPhase::StanceUnloading) &&
                r.phase == static_cast<int>(GaitPhase::Swing)) {
                if (swing_entries == 0) win.toe_off = i;
                ++swing_entries;
            }
            prev_phase = r.phase;
        }
        win.valid = swing_entries == 1 && load_to_unload == 1 && !fault &&
                    win.toe_off > win.begin + 2;
        if (win.valid) {
            res.windows.push_back(win);
        } else {
            ++res.excluded;
        }
    }
    return res;
}

StrideStats tracking_stats(const TrialLog& log, const SegmentationResult& seg,
                           double exclusion_fraction) {
    if (seg.windows.empty()) throw DomainError("tracking_stats: no valid stride windows");
    const int grid_n = 101;
    StrideStats st;
    st.n_strides = static_cast<int>(seg.windows.size());
    st.stance_percent.resize(grid_n);
    for (int g = 0; g < grid_n; ++g) st.stance_percent[g] = 100.0 * g / (grid_n - 1);

    std::vector<double> cmd_sum(grid_n, 0.0), meas_sum(grid_n, 0.0), meas_sq(grid_n, 0.0);
    std::vector<double> ref_sum(grid_n, 0.0), smeas_sum(grid_n, 0.0), smeas_sq(grid_n, 0.0);

    double se_t = 0.0, se_t_excl = 0.0, se_p = 0.0;
    long n_t = 0, n_t_excl = 0;
    for (const StrideWindow& w : seg.windows) {
        // Stance runs from the detected heel strike to the last row before
        // the swing transition.
        const size_t a = w.begin;
        const size_t b = w.toe_off > a ? w.toe_off - 1 : a;
        for (int g = 0; g < grid_n; ++g) {
            const double frac = static_cast<double>(g) / (grid_n - 1);
            const double idx = a + frac * (b - a);
            const size_t i0 = static_cast<size_t>(idx);
            const size_t i1 = std::min(i0 + 1, b);
            const double f = idx - i0;
            auto lerp = [&](double TrialRow::* m) {
                return log.rows[i0].*m + f * (log.rows[i1].*m - log.rows[i0].*m);
            };
            const double cmd = lerp(&TrialRow::tau_cmd);
            const double meas = lerp(&TrialRow::tau_meas);
            const double target = lerp(&TrialRow::trans_target);
            const double smeas = lerp(&TrialRow::s_meas);
            cmd_sum[g] += cmd;
            meas_sum[g] += meas;
            meas_sq[g] += meas * meas;
            ref_sum[g] += target;
            smeas_sum[g] += smeas;
            smeas_sq[g] += smeas * smeas;
            const double et = cmd - meas;
            const double ep = target - smeas;
            se_t += et * et;
            ++n_t;
            se_p += ep * ep;
            if (frac >= exclusion_fraction) {
                se_t_excl += et * et;
                ++n_t_excl;
            }
        }
    }
    st.torque_rms = std::sqrt(se_t / n_t);
    st.torque_rms_excl15 = n_t_excl ? std::sqrt(se_t_excl / n_t_excl) : 0.0;
    st.position_rms = std::sqrt(se_p / n_t);

    const double inv = 1.0 / st.n_strides;
    st.torque_cmd_mean.resize(grid_n);
    st.torque_meas_mean.resize(grid_n);
    st.torque_meas_var.resize(grid_n);
    st.trans_ref_mean.resize(grid_n);
    st.trans_meas_mean.resize(grid_n);
    st.trans_meas_var.resize(grid_n);
    for (int g = 0; g < grid_n; ++g) {
        st.torque_cmd_mean[g] = cmd_sum[g] * inv;
        st.torque_meas_mean[g] = meas_sum[g] * inv;
        st.torque_meas_var[g] = meas_sq[g] * inv - st.torque_meas_mean[g] * st.torque_meas_mean[g];
        st.trans_ref_mean[g] = ref_sum[g] * inv;
        st.trans_meas_mean[g] = smeas_sum[g] * inv;
        st.trans_meas_var[g] = smeas_sq[g] * inv - st.trans_meas_mean[g] * st.trans_meas_mean[g];
    }
    return st;
}

}  // namespace anklesim
