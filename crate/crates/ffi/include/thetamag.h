#ifndef THETAMAG_H
#define THETAMAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible call.
 */
typedef enum {
  TM_STATUS_OK = 0,
  TM_STATUS_NULL_POINTER = 1,
  TM_STATUS_INVALID_ARGUMENT = 2,
  TM_STATUS_INVALID_MESH = 3,
  TM_STATUS_SOLVER_FAILURE = 4,
  TM_STATUS_IO = 5,
  TM_STATUS_CONFIG = 6,
  TM_STATUS_BUFFER_TOO_SMALL = 7,
  TM_STATUS_PANIC = 8,
} TmStatus;

/**
 * Opaque simulation handle.
 */
typedef struct TmSimulation TmSimulation;

/**
 * Run parameters; obtain defaults from [`tm_config_default`].
 */
typedef struct {
  uint32_t n_per_axis;
  double lambda1;
  double lambda2;
  double mu0;
  double sigma;
  double theta;
  double k;
  double t_final;
  double hs;
  double solver_tol;
} TmConfig;

/**
 * Monitored quantities of the current state.
 */
typedef struct {
  uint64_t step;
  double t;
  double grad_m;
  double h_l2;
  double curl_h;
  double energy;
  double ledger_lhs;
  /**
   * 1 if the energy ledger holds at this step, 0 otherwise.
   */
  int32_t ledger_ok;
  double unit_deviation;
  double solver_residual;
} TmDiagnostics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Writes the reference configuration into `out`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `TmConfig`.
 */
TmStatus tm_config_default(TmConfig *out);

/**
 * Creates a simulation on the unit cube from `config`.
 *
 * # Safety
 * `config` must point to a valid `TmConfig` and `out` to writable storage
 * for one pointer.
 */
TmStatus tm_simulation_new(const TmConfig *config, TmSimulation **out);

/**
 * Creates a simulation from a `key = value` configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable storage for
 * one pointer.
 */
TmStatus tm_simulation_new_from_file(const char *path, TmSimulation **out);

/**
 * Advances the simulation by `steps` time steps.
 *
 * # Safety
 * `sim` must be a live handle.
 */
TmStatus tm_simulation_step(TmSimulation *sim, uint64_t steps);

/**
 * Reports the diagnostics of the current state.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
TmStatus tm_simulation_diagnostics(const TmSimulation *sim, TmDiagnostics *out);

/**
 * Number of energy-ledger violations since creation.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
TmStatus tm_simulation_ledger_violations(const TmSimulation *sim, uint64_t *out);

/**
 * Number of magnetization nodes and of field edges.
 *
 * # Safety
 * `sim` must be a live handle; `nodes` and `edges` writable.
 */
TmStatus tm_simulation_sizes(const TmSimulation *sim, size_t *nodes, size_t *edges);

/**
 * Copies the nodal magnetization as `x, y, z` triples into `buf`, which
 * must hold `3 * nodes` doubles.
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` doubles.
 */
TmStatus tm_simulation_magnetization(const TmSimulation *sim, double *buf, size_t len);

/**
 * Copies the edge circulations of the field into `buf` (`edges` doubles).
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` doubles.
 */
TmStatus tm_simulation_field(const TmSimulation *sim, double *buf, size_t len);

/**
 * Writes the current state as a legacy ASCII VTK file.
 *
 * # Safety
 * `sim` must be a live handle and `path` a NUL-terminated string.
 */
TmStatus tm_simulation_write_vtk(const TmSimulation *sim, const char *path);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void tm_simulation_free(TmSimulation *sim);

/**
 * Evaluates the reference initial magnetization at `x`.
 *
 * # Safety
 * `x` must point to 3 readable doubles and `out` to 3 writable doubles.
 */
TmStatus tm_initial_m0(const double *x, double *out);

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *tm_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THETAMAG_H */
