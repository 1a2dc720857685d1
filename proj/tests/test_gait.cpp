#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "anklesim/gait.hpp"

using namespace anklesim;

namespace {
std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("synth_stride: constructor contract") {
    for (double speed : {0.6, 1.0, 1.4}) {
        const StrideProfile p = synth_stride(speed);
        CHECK(p.samples.size() == kStrideSamples);
        CHECK(p.samples.front().stride_progress == doctest::Approx(0.0));
        CHECK(p.samples.back().stride_progress == doctest::Approx(1.0));
        // Periodic in angle.
        CHECK(std::abs(p.samples.front().theta_ref - p.samples.back().theta_ref) < 1e-6);
        PlantConfig limits;
        CHECK_NOTHROW(p.validate(limits));
    }
    CHECK_THROWS_AS(synth_stride(0.0), DomainError);
}

TEST_CASE("synth_stride: 1.0 m/s template peaks") {
    const StrideProfile p = synth_stride(1.0);
    double dorsi_peak = 0.0, plantar_peak = 0.0, plantar_at = 0.0;
    for (const StrideSample& r : p.samples) {
        dorsi_peak = std::min(dorsi_peak, r.theta_ref);
        if (r.theta_ref > plantar_peak) {
            plantar_peak = r.theta_ref;
            plantar_at = r.stride_progress;
        }
    }
    // Device convention is plantar positive: dorsiflexion peak ~ -10 deg,
    // plantarflexion push-off peak ~ +20 deg around 60% stride.
    CHECK(dorsi_peak == doctest::Approx(-10.0 * M_PI / 180.0).epsilon(0.05));
    CHECK(plantar_peak == doctest::Approx(20.0 * M_PI / 180.0).epsilon(0.05));
    CHECK(plantar_at == doctest::Approx(0.60).epsilon(0.05));
    PlantConfig limits;
    for (const StrideSample& r : p.samples) {
        CHECK(r.theta_ref >= limits.theta_min);
        CHECK(r.theta_ref <= limits.theta_max);
    }
    CHECK(p.samples.front().accel_event_marker);
}

TEST_CASE("stride file: round-trip, resampling, limit rejection") {
    PlantConfig limits;
    const StrideProfile p = synth_stride(1.0);

    SUBCASE("round-trip is identity") {
        const std::string path = tmp_path("stride_rt.csv");
        save_stride(p, path);
        const StrideProfile q = load_stride(path, limits);
        CHECK_FALSE(q.resampled);
        CHECK(q.stride_duration == doctest::Approx(p.stride_duration));
        CHECK(q.walking_speed == doctest::Approx(p.walking_speed));
        for (int i = 0; i < kStrideSamples; ++i) {
            CHECK(q.samples[i].theta_ref == doctest::Approx(p.samples[i].theta_ref).epsilon(1e-7));
            CHECK(q.samples[i].s_ref == doctest::Approx(p.samples[i].s_ref).epsilon(1e-7));
        }
        std::filesystem::remove(path);
    }

    SUBCASE("101-row input resampled to 51 with the flag set") {
        const std::string path = tmp_path("stride_101.csv");
        {
            std::FILE* f = std::fopen(path.c_str(), "w");
            std::fprintf(f, "# anklesim-stride v1 stride_duration_s=1.1 walking_speed_m_per_s=1\n");
            std::fprintf(f,
                         "stride_progress,theta_ref_rad,s_ref_m,ankle_torque_ext_nm,"
                         "ap_force_ext_n,accel_event_marker\n");
            for (int i = 0; i <= 100; ++i) {
                const double pr = i / 100.0;
                std::fprintf(f, "%.6f,%.6f,0,0,0,%d\n", pr, 0.1 * std::sin(2 * M_PI * pr),
                             i == 0 ? 1 : 0);
            }
            std::fclose(f);
        }
        const StrideProfile q = load_stride(path, limits);
        CHECK(q.resampled);
        CHECK(q.samples.size() == kStrideSamples);
        std::filesystem::remove(path);
    }

    SUBCASE("theta beyond 38 deg plantar rejected with a row diagnostic") {
        const std::string path = tmp_path("stride_oob.csv");
        StrideProfile bad = p;
        bad.samples[30].theta_ref = 45.0 * M_PI / 180.0;
        save_stride(bad, path);
        try {
            load_stride(path, limits);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("row 30") != std::string::npos);
        }
        std::filesystem::remove(path);
    }

    SUBCASE("missing column rejected") {
        const std::string path = tmp_path("stride_col.csv");
        {
            std::FILE* f = std::fopen(path.c_str(), "w");
            std::fprintf(f, "stride_progress,theta_ref_rad\n0,0\n1,0\n");
            std::fclose(f);
        }
        CHECK_THROWS_AS(load_stride(path, limits), ConfigError);
        std::filesystem::remove(path);
    }
}

TEST_CASE("walking trial: deterministic, events detected, phases legal") {
    const StrideProfile prof = synth_stride(1.0);
    PlantConfig pc;
    ControllerConfig cc;
    const TrialLog log = run_walking_trial(prof, ControlMode::Revolute1DoF, 6, 42, pc, cc);
    const TrialLog log2 = run_walking_trial(prof, ControlMode::Revolute1DoF, 6, 42, pc, cc);
    REQUIRE(log.rows.size() == log2.rows.size());
    for (size_t i = 0; i < log.rows.size(); i += 97) {
        CHECK(log.rows[i].theta == log2.rows[i].theta);
        CHECK(log.rows[i].tau_meas == log2.rows[i].tau_meas);
    }

    const SegmentationResult seg = segment_strides(log);
    CHECK(seg.windows.size() == 6);
    CHECK(seg.excluded == 0);

    // Heel strikes land within 20 ms of the marker (stride boundaries).
    for (const StrideWindow& w : seg.windows) {
        const double p = log.rows[w.begin].stride_progress;
        const double offset = p < 0.5 ? p : p - 1.0;
        CHECK(std::abs(offset) * prof.stride_duration <= 0.020);
    }

    // Exactly one loading->unloading transition and one swing entry per stride.
    for (const StrideWindow& w : seg.windows) {
        int swing_entries = 0;
        for (size_t i = w.begin + 1; i < w.end; ++i) {
            if (log.rows[i].phase == static_cast<int>(GaitPhase::Swing) &&
                log.rows[i - 1].phase != static_cast<int>(GaitPhase::Swing)) {
                ++swing_entries;
            }
        }
        CHECK(swing_entries == 1);
    }
}

TEST_CASE("walking trial: near-ideal loop tracks the stiffness law") {
    // Frictionless, noise-free, unquantized plant: measured torque follows the
    // commanded stiffness-law torque closely.
    PlantConfig pc;
    pc.bowden_friction_pf = 0.0;
    pc.bowden_friction_trans = 0.0;
    pc.quantization_enabled = false;
    pc.accel_noise_std = 0.0;
    ControllerConfig cc;
    cc.torque_gains = {160.0, 0.5};  // tight loop; this probes the pipeline, not the tuning
    const StrideProfile prof = synth_stride(1.0);
    const TrialLog log = run_walking_trial(prof, ControlMode::Revolute1DoF, 1, 1, pc, cc);
    const SegmentationResult seg = segment_strides(log);
    REQUIRE(seg.windows.size() == 1);
    const StrideStats st = tracking_stats(log, seg);
    CHECK(st.torque_rms < 1.0);
}

TEST_CASE("segment_strides: suppressed heel strike merges and is excluded") {
    const StrideProfile prof = synth_stride(1.0);
    PlantConfig pc;
    ControllerConfig cc;
    TrialLog log = run_walking_trial(prof, ControlMode::Revolute1DoF, 5, 7, pc, cc);
    // Suppress the third heel-strike event: the merged double window fails the
    // exactly-one-toe-off rule.
    int seen = 0;
    for (TrialRow& r : log.rows) {
        if (r.heel_strike && ++seen == 3) {
            r.heel_strike = 0;
            break;
        }
    }
    const SegmentationResult seg = segment_strides(log);
    CHECK(seg.windows.size() == 3);
    CHECK(seg.excluded == 1);
}

TEST_CASE("segment_strides: empty log gives an empty list") {
    TrialLog log;
    const SegmentationResult seg = segment_strides(log);
    CHECK(seg.windows.empty());
    CHECK(seg.excluded == 0);
}

TEST_CASE("tracking_stats: exact tracking, constant offset, early-confined error") {
    // Hand-built log: one stride, stance rows 0..99, toe-off at 100, HS at 0 and 199.
    auto make_log = [](auto fill) {
        TrialLog log;
        log.rows.resize(200);
        for (int i = 0; i < 200; ++i) {
            TrialRow& r = log.rows[i];
            r.time = i * 1e-3;
            r.phase = static_cast<int>(i <= 50 ? GaitPhase::StanceLoading
                                               : (i <= 100 ? GaitPhase::StanceUnloading
                                                           : GaitPhase::Swing));
            if (i == 51) r.phase = static_cast<int>(GaitPhase::StanceUnloading);
            r.heel_strike = (i == 0 || i == 199) ? 1 : 0;
            r.toe_off = (i == 100) ? 1 : 0;
            fill(i, r);
        }
        return log;
    };

    SUBCASE("commanded == measured gives zero RMS") {
        TrialLog log = make_log([](int i, TrialRow& r) {
            r.tau_cmd = r.tau_meas = 10.0 + i;
            r.trans_target = r.s_meas = 0.01;
        });
        const SegmentationResult seg = segment_strides(log);
        REQUIRE(seg.windows.size() == 1);
        const StrideStats st = tracking_stats(log, seg);
        CHECK(st.torque_rms == doctest::Approx(0.0));
        CHECK(st.torque_rms_excl15 == doctest::Approx(0.0));
        CHECK(st.position_rms == doctest::Approx(0.0));
    }

    SUBCASE("constant 5 N*m offset is 5 N*m RMS with and without exclusion") {
        TrialLog log = make_log([](int i, TrialRow& r) {
            r.tau_cmd = 20.0 + i;
            r.tau_meas = r.tau_cmd - 5.0;
        });
        const SegmentationResult seg = segment_strides(log);
        const StrideStats st = tracking_stats(log, seg);
        CHECK(st.torque_rms == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(st.torque_rms_excl15 == doctest::Approx(5.0).epsilon(1e-9));
    }

    SUBCASE("error confined to the first 10% of stance vanishes after exclusion") {
        TrialLog log = make_log([](int i, TrialRow& r) {
            r.tau_cmd = 50.0;
            r.tau_meas = i < 10 ? 30.0 : 50.0;  // stance is rows 0..100
        });
        const SegmentationResult seg = segment_strides(log);
        const StrideStats st = tracking_stats(log, seg);
        CHECK(st.torque_rms > 0.0);
        CHECK(st.torque_rms_excl15 == doctest::Approx(0.0));
    }
}

TEST_CASE("stance-percent resampling preserves RMS for uniform sampling") {
    TrialLog log;
    log.rows.resize(300);
    for (int i = 0; i < 300; ++i) {
        TrialRow& r = log.rows[i];
        r.time = i * 1e-3;
        r.phase = static_cast<int>(i <= 100 ? (i <= 50 ? GaitPhase::StanceLoading
                                                       : GaitPhase::StanceUnloading)
                                            : GaitPhase::Swing);
        r.heel_strike = (i == 0 || i == 299) ? 1 : 0;
        r.toe_off = (i == 200) ? 1 : 0;
        r.tau_cmd = 40.0 + 20.0 * std::sin(i * 0.05);
        r.tau_meas = r.tau_cmd - 3.0 * std::cos(i * 0.11);
    }
    const SegmentationResult seg = segment_strides(log);
    REQUIRE(seg.windows.size() == 1);
    const StrideStats st = tracking_stats(log, seg);
    // Direct time-domain RMS over the stance rows.
    double se = 0.0;
    int n = 0;
    for (size_t i = seg.windows[0].begin; i <= seg.windows[0].toe_off; ++i) {
        const double e = log.rows[i].tau_cmd - log.rows[i].tau_meas;
        se += e * e;
        ++n;
    }
    const double direct = std::sqrt(se / n);
    CHECK(st.torque_rms == doctest::Approx(direct).epsilon(0.01));
}
