#include "anklesim/characterization.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numeric>

namespace anklesim {

double log_chirp(double f0, double f1, double duration, double t) {
    if (!(f0 > 0.0) || !(f1 > f0)) {
        throw DomainError("log_chirp: requires 0 < f0 < f1");
    }
    if (t < 0.0 || t > duration || duration <= 0.0) {
        throw DomainError("log_chirp: t outside [0, duration]");
    }
    const double k = std::log(f1 / f0) / duration;
    const double phase = 2.0 * M_PI * f0 * (std::exp(k * t) - 1.0) / k;
    return std::sin(phase);
}

std::optional<double> rise_time_90(const std::vector<double>& signal, double rate,
                                   double lo_level, double hi_level) {
    if (signal.size() < 2 || rate <= 0.0) return std::nullopt;
    const double threshold = lo_level + 0.9 * (hi_level - lo_level);
    const bool rising = hi_level >= lo_level;
    for (size_t i = 1; i < signal.size(); ++i) {
        const double a = signal[i - 1];
        const double b = signal[i];
        const bool crossed = rising ? (a < threshold && b >= threshold)
                                    : (a > threshold && b <= threshold);
        if (crossed) {
            const double frac = (threshold - a) / (b - a);
            return (static_cast<double>(i - 1) + frac) / rate;
        }
    }
    return std::nullopt;
}

FrequencyResponse estimate_frf(const std::vector<double>& input,
                               const std::vector<double>& output, double rate,
                               double f_lo, double f_hi) {
    if (input.size() != output.size()) {
        throw DomainError("estimate_frf: input/output length mismatch");
    }
    const size_t n = input.size();
    if (f_lo > 0.0 && static_cast<double>(n) < 2.0 * rate / f_lo) {
        throw DomainError("estimate_frf: record too short for the requested band");
    }
    // 4 segments at 50% overlap.
    size_t seg = (2 * n) / 5;
    seg &= ~size_t{1};
    if (seg < 16) throw DomainError("estimate_frf: record too short");
    const size_t hop = seg / 2;
    const size_t n_segments = (n - seg) / hop + 1;

    std::vector<double> window(seg);
    for (size_t i = 0; i < seg; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (seg - 1)));
    }

    const size_t n_bins = seg / 2 + 1;
    std::vector<double> pxx(n_bins, 0.0), pyy(n_bins, 0.0);
    std::vector<std::complex<double>> pxy(n_bins, {0.0, 0.0});

    std::vector<double> buf(seg);
    std::vector<fftw_complex> spec(n_bins);
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(seg), buf.data(), spec.data(),
                                          FFTW_ESTIMATE);
    std::vector<std::complex<double>> sx(n_bins), sy(n_bins);
    for (size_t s = 0; s < n_segments; ++s) {
        const size_t off = s * hop;
        for (int which = 0; which < 2; ++which) {
            const std::vector<double>& src = which == 0 ? input : output;
            double mean = 0.0;
            for (size_t i = 0; i < seg; ++i) mean += src[off + i];
            mean /= seg;
            for (size_t i = 0; i < seg; ++i) buf[i] = (src[off + i] - mean) * window[i];
            fftw_execute(plan);
            auto& dst = which == 0 ? sx : sy;
            for (size_t i = 0; i < n_bins; ++i) dst[i] = {spec[i][0], spec[i][1]};
        }
        for (size_t i = 0; i < n_bins; ++i) {
            pxx[i] += std::norm(sx[i]);
            pyy[i] += std::norm(sy[i]);
            pxy[i] += std::conj(sx[i]) * sy[i];
        }
    }
    fftw_destroy_plan(plan);

    const double df = rate / static_cast<double>(seg);
    const double pxx_max = *std::max_element(pxx.begin(), pxx.end());

    FrequencyResponse frf;
    double prev_phase = 0.0;
    bool first = true;
    for (size_t i = 1; i < n_bins; ++i) {
        const double f = i * df;
        if (f < f_lo || f > f_hi) continue;
        if (pxx[i] <= 1e-14 * pxx_max) continue;  // no excitation in this bin
        const std::complex<double> h = pxy[i] / pxx[i];
        double phase = std::atan2(h.imag(), h.real());
        if (!first) {
            while (phase - prev_phase > M_PI) phase -= 2.0 * M_PI;
            while (phase - prev_phase < -M_PI) phase += 2.0 * M_PI;
        }
        prev_phase = phase;
        first = false;
        frf.frequencies.push_back(f);
        frf.magnitude_db.push_back(20.0 * std::log10(std::max(std::abs(h), 1e-300)));
        frf.phase_deg.push_back(phase * 180.0 / M_PI);
        const double denom = pxx[i] * pyy[i];
        frf.coherence.push_back(denom > 0.0 ? std::norm(pxy[i]) / denom : 0.0);
    }
    return frf;
}

std::optional<BandwidthResult> bandwidth(const FrequencyResponse& frf) {
    if (frf.frequencies.size() < 4) throw DomainError("bandwidth: frf too short");
    // Low-frequency magnitude sanity: median of the first few bins.
    std::vector<double> head(frf.magnitude_db.begin(),
                             frf.magnitude_db.begin() + std::min<size_t>(5, frf.magnitude_db.size()));
    std::sort(head.begin(), head.end());
    const double dc_db = head[head.size() / 2];
    if (std::abs(dc_db) > 1.0) {
        throw DomainError("bandwidth: low-frequency magnitude not within +-1 dB of unity");
    }

    auto first_crossing = [&](const std::vector<double>& y, double level) -> std::optional<double> {
        for (size_t i = 1; i < y.size(); ++i) {
            if (y[i - 1] > level && y[i] <= level) {
                const double frac = (y[i - 1] - level) / (y[i - 1] - y[i]);
                return frf.frequencies[i - 1] +
                       frac * (frf.frequencies[i] - frf.frequencies[i - 1]);
            }
        }
        return std::nullopt;
    };
    const auto f_mag = first_crossing(frf.magnitude_db, -3.0);
    const auto f_phase = first_crossing(frf.phase_deg, -45.0);
    if (!f_mag && !f_phase) return std::nullopt;
    BandwidthResult r;
    if (f_mag && (!f_phase || *f_mag <= *f_phase)) {
        r.hz = *f_mag;
        r.criterion = BandwidthCriterion::MagnitudeMinus3dB;
    } else {
        r.hz = *f_phase;
        r.criterion = BandwidthCriterion::Phase45deg;
    }
    return r;
}

StepTestResult run_step_test(SystemUnderTest& sut, const SquareSpec& square) {
    StepTestResult res;
    const double dt = 1.0 / sut.rate;
    const size_t half = static_cast<size_t>(square.period / 2.0 * sut.rate);
    const size_t settle_n = static_cast<size_t>(0.5 * sut.rate);
    const double amplitude = std::abs(square.hi - square.lo);

    // Settle at lo, then drive (cycles + 1) full squares; the first is discarded.
    for (size_t i = 0; i < half; ++i) sut.tick(square.lo);
    const int total_cycles = square.cycles + 1;
    for (int c = 0; c < total_cycles; ++c) {
        for (int leg = 0; leg < 2; ++leg) {
            const double ref = leg == 0 ? square.hi : square.lo;
            for (size_t i = 0; i < half; ++i) {
                res.time.push_back(res.time.size() * dt);
                res.reference.push_back(ref);
                res.output.push_back(sut.tick(ref));
            }
        }
    }

    StepMetrics acc{};
    int n_ok = 0;
    double overshoot_max = 0.0;
    for (int c = 1; c < total_cycles; ++c) {
        const size_t rise_edge = static_cast<size_t>(c) * 2 * half;
        const size_t fall_edge = rise_edge + half;
        // Steady levels from the tails before each edge.
        auto tail_mean = [&](size_t end) {
            double m = 0.0;
            for (size_t i = end - settle_n; i < end; ++i) m += res.output[i];
            return m / settle_n;
        };
        auto settled = [&](size_t end, double level) {
            for (size_t i = end - settle_n; i < end; ++i) {
                if (std::abs(res.output[i] - level) > 0.02 * amplitude) return false;
            }
            return true;
        };
        const double lo_meas = tail_mean(rise_edge);
        const double hi_meas = tail_mean(fall_edge);
        if (!settled(rise_edge, lo_meas) || !settled(fall_edge, hi_meas)) {
            res.diagnostic = "output does not settle within +-2% of the step amplitude for 0.5 s";
            return res;
        }
        // Slices start at the last pre-edge sample so an instantaneous system
        // still shows a crossing within one sample period.
        std::vector<double> rise_slice(res.output.begin() + rise_edge - 1,
                                       res.output.begin() + fall_edge);
        std::vector<double> fall_slice(res.output.begin() + fall_edge - 1,
                                       res.output.begin() + fall_edge + half);
        const auto tr = rise_time_90(rise_slice, sut.rate, lo_meas, hi_meas);
        const auto tf = rise_time_90(fall_slice, sut.rate, hi_meas, lo_meas);
        if (!tr || !tf) {
            res.diagnostic = "output never crosses the 90% level";
            return res;
        }
        acc.rise_time_90 += *tr;
        acc.fall_time_90 += *tf;
        const double peak = *std::max_element(rise_slice.begin(), rise_slice.end());
        overshoot_max = std::max(overshoot_max, (peak - hi_meas) / amplitude);
        acc.steady_state_error += std::abs(hi_meas - square.hi);
        ++n_ok;
    }
    acc.rise_time_90 /= n_ok;
    acc.fall_time_90 /= n_ok;
    acc.steady_state_error /= n_ok;
    acc.overshoot = overshoot_max;
    res.metrics = acc;
    return res;
}

ChirpTestResult run_chirp_test(SystemUnderTest& sut, const ChirpSpec& spec) {
    ChirpTestResult res;
    const double dt = 1.0 / sut.rate;
    const size_t settle_n = static_cast<size_t>(2.0 * sut.rate);
    for (size_t i = 0; i < settle_n; ++i) sut.tick(spec.bias);
    const size_t n = static_cast<size_t>(spec.duration * sut.rate);
    for (size_t i = 0; i < n; ++i) {
        const double t = i * dt;
        const double ref = spec.bias + spec.amplitude * log_chirp(spec.f0, spec.f1, spec.duration, t);
        res.time.push_back(t);
        res.reference.push_back(ref);
        res.output.push_back(sut.tick(ref));
        if (sut.saturated && sut.saturated()) res.saturation_flagged = true;
    }
    res.frf = estimate_frf(res.reference, res.output, sut.rate, spec.f0, spec.f1);
    return res;
}

namespace {

struct TorqueRigState {
    std::shared_ptr<Plant> plant;
    PdLoop loop;
    LeverGeometry lever;
};

}  // namespace

SystemUnderTest make_torque_rig(const PlantConfig& plant_cfg, const ControllerConfig& ctrl_cfg,
                                double lock_angle, std::shared_ptr<Plant>* plant_out) {
    PlantConfig cfg = plant_cfg;
    cfg.theta_min = cfg.theta_max = lock_angle;  // isometric fixture
    PlantState st;
    st.theta = lock_angle;
    auto rig = std::make_shared<TorqueRigState>();
    rig->plant = std::make_shared<Plant>(cfg, st);
    rig->loop = PdLoop(ctrl_cfg.torque_gains, cfg.timestep, ctrl_cfg.derivative_filter_cutoff);
    rig->lever = cfg.pf_lever;
    if (plant_out) *plant_out = rig->plant;

    SystemUnderTest sut;
    sut.rate = 1.0 / cfg.timestep;
    sut.tick = [rig](double torque_ref) {
        const SensorFrame f = rig->plant->sample_sensors({}, 0);
        const double tension_ref =
            torque_to_tension(std::max(0.0, torque_ref), f.theta_meas, rig->lever);
        double arm = pf_moment_arm(f.theta_meas, rig->lever);
        arm = std::max(arm, 1.0e-3);
        const double tension_meas = std::max(0.0, f.tau_pf_est) / arm;
        MotorVelocityCommand cmd;
        cmd.pf_vel = rig->loop.update(tension_ref, tension_meas);
        rig->plant->step(cmd, {});
        return rig->plant->sample_sensors({}, 0).tau_pf_est;
    };
    sut.saturated = [rig]() { return rig->plant->last_step_saturated(); };
    return sut;
}

SystemUnderTest make_position_rig(const PlantConfig& plant_cfg, const ControllerConfig& ctrl_cfg,
                                  std::shared_ptr<Plant>* plant_out) {
    auto plant = std::make_shared<Plant>(plant_cfg);
    auto loop = std::make_shared<PdLoop>(ctrl_cfg.trans_position_gains, plant_cfg.timestep,
                                         ctrl_cfg.derivative_filter_cutoff);
    if (plant_out) *plant_out = plant;
    SystemUnderTest sut;
    sut.rate = 1.0 / plant_cfg.timestep;
    sut.tick = [plant, loop](double s_ref) {
        const SensorFrame f = plant->sample_sensors({}, 0);
        MotorVelocityCommand cmd;
        cmd.trans_vel = loop->update(s_ref, f.s_meas);
        plant->step(cmd, {});
        return plant->sample_sensors({}, 0).s_meas;
    };
    sut.saturated = [plant]() { return plant->last_step_saturated(); };
    return sut;
}

StallSweepReport run_stall_sweep(const PlantConfig& plant_cfg, const ControllerConfig& ctrl_cfg,
                                 BenchAxis axis, double compliant_load_rate,
                                 double fixture_damping) {
    if (compliant_load_rate <= 0.0) {
        throw DomainError("run_stall_sweep: compliant load spring rate must be positive");
    }
    if (fixture_damping < 0.0) {
        throw DomainError("run_stall_sweep: fixture damping must be non-negative");
    }
    Plant plant(plant_cfg);
    const double dt = plant_cfg.timestep;
    (void)ctrl_cfg;  // the idle axis holds position with zero commanded velocity

    StallSweepReport rep;
    const double duration = 5.0;
    const size_t n = static_cast<size_t>(duration / dt);
    double settle_count = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ExternalLoad ext;
        MotorVelocityCommand cmd;
        double load = 0.0, vel = 0.0;
        if (axis == BenchAxis::PlantarflexionTorque) {
            ext.ankle_torque_ext = -compliant_load_rate * plant.state().theta -
                                   fixture_damping * plant.state().theta_dot;
            cmd.pf_vel = 10.0 * plant_cfg.motor_pf.max_velocity;  // beyond capability
            plant.step(cmd, ext);
            load = -ext.ankle_torque_ext;  // fixture load-cell reading
            vel = plant.state().theta_dot;
        } else {
            ext.ap_force_ext = -compliant_load_rate * plant.state().s -
                               fixture_damping * plant.state().s_dot;
            cmd.trans_vel = 10.0 * plant_cfg.motor_trans.max_velocity;
            plant.step(cmd, ext);
            load = -ext.ap_force_ext;
            vel = plant.state().s_dot;
        }
        rep.load_velocity_curve.emplace_back(load, vel);
        rep.peak_load = std::max(rep.peak_load, load);
        rep.peak_velocity = std::max(rep.peak_velocity, vel);
        rep.peak_power = std::max(rep.peak_power, load * vel);
        // Stop once stalled: negligible motion for a quarter second.
        settle_count = std::abs(vel) < 1e-4 ? settle_count + dt : 0.0;
        if (settle_count > 0.25 && i > 100) break;
    }
    return rep;
}

HysteresisReport run_hysteresis_test(const PlantConfig& plant_cfg,
                                     const ControllerConfig& ctrl_cfg, BenchAxis axis,
                                     const WeightLadder& ladder) {
    if (ladder.rungs < 1) throw DomainError("run_hysteresis_test: need at least one rung");
    Plant plant(plant_cfg);
    const double dt = plant_cfg.timestep;
    // Fixed static position controlled for each motor: stiff PD on the motor
    // encoders themselves, letting the end effector deflect under load.
    PdLoop hold_pf({400.0, 0.0}, dt, ctrl_cfg.derivative_filter_cutoff);
    PdLoop hold_tr({400.0, 0.0}, dt, ctrl_cfg.derivative_filter_cutoff);
    const double m_pf_ref = plant.state().motor_pf_pos;
    const double m_tr_ref = plant.state().motor_trans_pos;

    // Symmetric ladder: up then down, ending at zero.
    std::vector<double> rung_loads;
    for (int i = 1; i <= ladder.rungs; ++i) {
        rung_loads.push_back(ladder.max_load * i / ladder.rungs);
    }
    for (int i = ladder.rungs - 1; i >= 0; --i) {
        rung_loads.push_back(ladder.max_load * i / ladder.rungs);
    }

    // The deflecting structure under a hanging weight settles; a ramped load
    // application plus a modest fixture damper stands in for that.
    const double arm0 = pf_moment_arm(0.0, plant_cfg.pf_lever);
    const double damp_pf =
        1.2 * std::sqrt(plant_cfg.pf_series_stiffness * arm0 * arm0 * plant_cfg.ankle_inertia);
    const double damp_tr = 1.2 * std::sqrt(plant_cfg.trans_cable_stiffness * plant_cfg.stage_mass);

    HysteresisReport rep;
    const size_t hold_n = static_cast<size_t>(ladder.hold_time / dt);
    const size_t ramp_n = std::min(hold_n / 2, static_cast<size_t>(0.3 / dt));

    // Tare at zero load before hanging anything.
    for (size_t i = 0; i < hold_n; ++i) {
        ExternalLoad ext;
        if (axis == BenchAxis::PlantarflexionTorque) {
            ext.ankle_torque_ext = -damp_pf * plant.state().theta_dot;
        } else {
            ext.ap_force_ext = -damp_tr * plant.state().s_dot;
        }
        const SensorFrame f = plant.sample_sensors(ext, 0);
        MotorVelocityCommand cmd;
        cmd.pf_vel = hold_pf.update(m_pf_ref, f.motor_pf_pos_meas);
        cmd.trans_vel = hold_tr.update(m_tr_ref, f.motor_trans_pos_meas);
        plant.step(cmd, ext);
    }
    const SensorFrame tare_frame = plant.sample_sensors({}, 0);
    const double tare = axis == BenchAxis::PlantarflexionTorque ? std::abs(tare_frame.tau_pf_est)
                                                                : std::abs(tare_frame.f_trans_est);

    double prev_load = 0.0;
    for (double load : rung_loads) {
        for (size_t i = 0; i < hold_n; ++i) {
            const double frac = ramp_n ? std::min(1.0, static_cast<double>(i) / ramp_n) : 1.0;
            const double applied = prev_load + frac * (load - prev_load);
            ExternalLoad ext;
            if (axis == BenchAxis::PlantarflexionTorque) {
                // Weights dorsiflex, loading the cable.
                ext.ankle_torque_ext = -applied - damp_pf * plant.state().theta_dot;
            } else {
                ext.ap_force_ext = -applied - damp_tr * plant.state().s_dot;
            }
            const SensorFrame f = plant.sample_sensors(ext, 0);
            MotorVelocityCommand cmd;
            cmd.pf_vel = hold_pf.update(m_pf_ref, f.motor_pf_pos_meas);
            cmd.trans_vel = hold_tr.update(m_tr_ref, f.motor_trans_pos_meas);
            plant.step(cmd, ext);
        }
        prev_load = load;
        const SensorFrame f = plant.sample_sensors({}, 0);
        const double raw = axis == BenchAxis::PlantarflexionTorque ? std::abs(f.tau_pf_est)
                                                                   : std::abs(f.f_trans_est);
        rep.applied.push_back(load);
        rep.measured.push_back(raw - tare);
    }

    double se = 0.0;
    for (size_t i = 0; i < rep.applied.size(); ++i) {
        const double e = rep.measured[i] - rep.applied[i];
        se += e * e;
    }
    rep.rms_error = std::sqrt(se / rep.applied.size());
    // Enclosed loop area by the shoelace rule over the closed (applied, measured) path.
    double area = 0.0;
    const size_t n = rep.applied.size();
    for (size_t i = 0; i < n; ++i) {
        const size_t j = (i + 1) % n;
        area += rep.applied[i] * rep.measured[j] - rep.applied[j] * rep.measured[i];
    }
    rep.loop_area = std::abs(0.5 * area);
    return rep;
}

}  // namespace anklesim
