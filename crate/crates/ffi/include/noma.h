/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef NOMA_H
#define NOMA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NomaStatus {
  NOMA_STATUS_OK = 0,
  NOMA_STATUS_NULL_POINTER = 1,
  NOMA_STATUS_INVALID_ARGUMENT = 2,
  NOMA_STATUS_CONFIG = 3,
  NOMA_STATUS_SOLVER = 4,
  NOMA_STATUS_PANIC = 5,
} NomaStatus;

/**
 * Opaque simulation handle.
 */
typedef struct NomaSimulation NomaSimulation;

/**
 * Scalar summary of a simulation so far.
 */
typedef struct NomaMetrics {
  uint64_t slots;
  double avg_power_w;
  double max_slot_power_w;
  double utility;
  double overall_delay_ms;
  double max_z;
  double final_z;
} NomaMetrics;

/**
 * Human-readable name of a status code. The string is static.
 */
const char *noma_status_str(enum NomaStatus status);

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`). Returns the length the full message needs,
 * including the terminator; 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t noma_last_error_message(char *buf, size_t len);

double noma_dbm_to_watts(double dbm);

/**
 * Solves the per-slot power allocation exactly. Inputs and `powers_out`
 * are in the caller's user order. `objective_out` and `levels_out` (the
 * candidate-set size) may be null.
 *
 * # Safety
 * `gains`, `weights` and `powers_out` must point to `k` doubles.
 */
enum NomaStatus noma_dppa_solve(size_t k,
                                const double *gains,
                                const double *weights,
                                double z,
                                double eta,
                                double p_max,
                                double *powers_out,
                                double *objective_out,
                                size_t *levels_out);

/**
 * Same problem as [`noma_dppa_solve`], solved by enumerating KKT supports.
 * Refuses `k > 20`.
 *
 * # Safety
 * `gains`, `weights` and `powers_out` must point to `k` doubles.
 */
enum NomaStatus noma_kkt_solve(size_t k,
                               const double *gains,
                               const double *weights,
                               double z,
                               double eta,
                               double p_max,
                               double *powers_out,
                               double *objective_out);

/**
 * Creates a simulation from a TOML run configuration (NUL-terminated
 * UTF-8). On success `*out` owns a handle for [`noma_simulation_free`].
 *
 * # Safety
 * `config_toml` must be null or a valid C string; `out` must be null or
 * writable.
 */
enum NomaStatus noma_simulation_new(const char *config_toml, struct NomaSimulation **out);

/**
 * Advances by up to `slots` slots, stopping at the configured horizon.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
enum NomaStatus noma_simulation_step(struct NomaSimulation *sim, uint64_t slots);

/**
 * Runs the remaining slots of the configured horizon.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
enum NomaStatus noma_simulation_run(struct NomaSimulation *sim);

/**
 * Number of users, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t noma_simulation_user_count(const struct NomaSimulation *sim);

/**
 * Slots simulated so far, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uint64_t noma_simulation_slot(const struct NomaSimulation *sim);

/**
 * Current backlogs in bits; `len` must equal the user count.
 *
 * # Safety
 * `sim` must be null or a live handle; `out` must point to `len` values.
 */
enum NomaStatus noma_simulation_backlogs(const struct NomaSimulation *sim,
                                         uint64_t *out,
                                         size_t len);

/**
 * Time-averaged metrics over the slots run so far. The per-user arrays
 * (rates in Mbit/s, delays in ms, backlogs in Mbit) may each be null;
 * non-null arrays must hold `len` = user count values.
 *
 * # Safety
 * `sim` must be null or a live handle; pointers as described above.
 */
enum NomaStatus noma_simulation_metrics(const struct NomaSimulation *sim,
                                        struct NomaMetrics *out,
                                        double *rate_mbps,
                                        double *delay_ms,
                                        double *backlog_mbit,
                                        size_t len);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void noma_simulation_free(struct NomaSimulation *sim);

#endif  /* NOMA_H */
