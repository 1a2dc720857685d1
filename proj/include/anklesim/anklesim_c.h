/* C API for the anklesim shared library.
 *
 * Opaque handles plus integer status codes; every entry point is safe to call
 * from plain C. Handles are not thread-safe individually, but independent
 * handles may be used from different threads.
 */
#ifndef ANKLESIM_C_H
#define ANKLESIM_C_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum anklesim_status {
    ANKLESIM_OK = 0,
    ANKLESIM_ERR_INVALID_ARG = 1,
    ANKLESIM_ERR_PARSE = 2,
    ANKLESIM_ERR_VALIDATION = 3,
    ANKLESIM_ERR_IO = 4,
    ANKLESIM_ERR_RUNTIME = 5,
    ANKLESIM_ERR_USAGE = 6
} anklesim_status;

const char* anklesim_status_str(anklesim_status status);
const char* anklesim_version(void);

/* Explanation of the most recent failure on this thread, empty if none. */
const char* anklesim_last_error(void);

/* Heap strings returned by the API are released with this. */
void anklesim_string_free(char* s);

/* The built-in tuned default configuration as JSON text (caller frees). */
anklesim_status anklesim_default_config_json(char** out_json);

/* ---- plant ---------------------------------------------------------------- */

typedef struct anklesim_plant anklesim_plant;

/* json_text holds a {"plant": {...}} document or the plant object itself;
 * NULL selects the built-in defaults. */
anklesim_status anklesim_plant_create(const char* json_text, anklesim_plant** out);
void anklesim_plant_destroy(anklesim_plant* plant);

/* state layout: [theta, theta_dot, s, s_dot, motor_pf_pos, motor_trans_pos,
 *                motor_pf_vel, motor_trans_vel, time] */
#define ANKLESIM_STATE_LEN 9
anklesim_status anklesim_plant_get_state(const anklesim_plant* plant,
                                         double state[ANKLESIM_STATE_LEN]);
anklesim_status anklesim_plant_set_state(anklesim_plant* plant,
                                         const double state[ANKLESIM_STATE_LEN]);

/* cmd: [pf_vel, trans_vel] rad/s.
 * ext: [ankle_torque_ext, ap_force_ext, accel_x, accel_y, accel_z]. */
anklesim_status anklesim_plant_step(anklesim_plant* plant, const double cmd[2],
                                    const double ext[5]);

/* frame layout: [theta_meas, s_meas, motor_pf_pos_meas, motor_trans_pos_meas,
 *                accel_x, accel_y, accel_z, tau_pf_est, f_trans_est, time] */
#define ANKLESIM_FRAME_LEN 10
anklesim_status anklesim_plant_sensors(const anklesim_plant* plant, const double ext[5],
                                       uint64_t noise_seed,
                                       double frame[ANKLESIM_FRAME_LEN]);

/* Energy audit residual and total throughput, for balance checks. */
anklesim_status anklesim_plant_energy(const anklesim_plant* plant, double* residual,
                                      double* throughput);

/* ---- controller ----------------------------------------------------------- */

typedef struct anklesim_controller anklesim_controller;

/* json_text as for the plant ("controller" section); the plant handle supplies
 * the lever geometry and gear ratio the controller needs. */
anklesim_status anklesim_controller_create(const char* json_text,
                                           const anklesim_plant* plant,
                                           anklesim_controller** out);
void anklesim_controller_destroy(anklesim_controller* ctrl);

/* One control step over a sensor frame; cmd_out = [pf_vel, trans_vel]. */
anklesim_status anklesim_controller_step(anklesim_controller* ctrl,
                                         const double frame[ANKLESIM_FRAME_LEN],
                                         double cmd_out[2]);

/* 0 Standing, 1 StanceLoading, 2 StanceUnloading, 3 Swing. */
anklesim_status anklesim_controller_phase(const anklesim_controller* ctrl, int* phase);
anklesim_status anklesim_controller_fault(const anklesim_controller* ctrl, int* fault);

/* ---- experiments ----------------------------------------------------------- */

/* Execute a spec file; overrides are "key.path=value" strings (may be NULL
 * when n_overrides is 0). out_dir/seed override the spec when non-NULL / >= 0. */
anklesim_status anklesim_run_spec(const char* spec_path, const char* const* overrides,
                                  size_t n_overrides, const char* out_dir,
                                  int64_t seed_override, char** messages_out);

/* Validate without executing; the report lists every violated invariant. */
anklesim_status anklesim_validate_spec(const char* spec_path, char** report_out);

/* Run the full paper bench+walking suite; table_out receives the rendered
 * table, all_pass is 1 when every row passes. */
anklesim_status anklesim_replicate_paper(const char* suite_id, const char* out_dir,
                                         char** table_out, int* all_pass);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ANKLESIM_C_H */
