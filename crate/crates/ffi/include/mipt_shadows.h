#ifndef MIPT_SHADOWS_H
#define MIPT_SHADOWS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_CONFIG = 2,
  MS_STATUS_RESOURCE = 3,
  MS_STATUS_NUMERICAL = 4,
  MS_STATUS_IO = 5,
  MS_STATUS_PANIC = 6,
} MsStatus;

typedef enum MsGateEnsemble {
  MS_GATE_ENSEMBLE_HAAR = 0,
  MS_GATE_ENSEMBLE_CLIFFORD = 1,
  MS_GATE_ENSEMBLE_U1_HAAR = 2,
} MsGateEnsemble;

typedef enum MsPrescramble {
  MS_PRESCRAMBLE_NONE = 0,
  MS_PRESCRAMBLE_GLOBAL_HAAR = 1,
  MS_PRESCRAMBLE_GLOBAL_CLIFFORD = 2,
} MsPrescramble;

typedef enum MsEngine {
  MS_ENGINE_DENSE = 0,
  MS_ENGINE_STABILIZER = 1,
  MS_ENGINE_CHARGE_BLOCK = 2,
} MsEngine;

/**
 * Opaque experiment configuration.
 */
typedef struct MsConfig MsConfig;

/**
 * Opaque circuit description.
 */
typedef struct MsSpec MsSpec;

/**
 * Ensemble moments with standard errors.
 */
typedef struct MsMoments {
  double purity;
  double purity_stderr;
  double purity3;
  double purity3_stderr;
  double purity_modified;
  double purity_modified_stderr;
  double einf;
  double einf_stderr;
  double ess;
} MsMoments;

/**
 * Harmonic, arithmetic and geometric means of the Pauli shadow norms.
 */
typedef struct MsShadowNorms {
  double harmonic;
  double arithmetic;
  double geometric;
  uint64_t unlearnable;
} MsShadowNorms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next library call on the same thread.
 */
const char *ms_last_error(void);

/**
 * Creates a circuit description. Free with [`ms_spec_free`].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum MsStatus ms_spec_new(size_t n_qubits,
                          size_t depth,
                          double measurement_rate,
                          enum MsGateEnsemble gates,
                          enum MsPrescramble prescramble,
                          struct MsSpec **out);

/**
 * # Safety
 * `spec` must be NULL or a pointer from [`ms_spec_new`] not yet freed.
 */
void ms_spec_free(struct MsSpec *spec);

/**
 * Writes the 64-character hex hash of the circuit description and a NUL into `buf`.
 *
 * # Safety
 * `spec` must be a live handle and `buf` must hold at least 65 bytes.
 */
enum MsStatus ms_spec_hash(const struct MsSpec *spec, char *buf);

/**
 * Monte Carlo moments of the eavesdropper's ensemble.
 *
 * # Safety
 * `spec` must be a live handle and `out` a valid pointer.
 */
enum MsStatus ms_moments(const struct MsSpec *spec,
                         enum MsEngine engine,
                         size_t n_traj,
                         uint64_t seed,
                         struct MsMoments *out);

/**
 * Shadow-norm means from the subsystem-purity table of `n_traj` trajectories.
 *
 * # Safety
 * `spec` must be a live handle and `out` a valid pointer.
 */
enum MsStatus ms_shadow_norms(const struct MsSpec *spec,
                              enum MsEngine engine,
                              size_t n_traj,
                              uint64_t seed,
                              struct MsShadowNorms *out);

/**
 * Subentropy of a probability spectrum.
 *
 * # Safety
 * `spectrum` must point to `len` readable doubles and `out` must be valid.
 */
enum MsStatus ms_subentropy(const double *spectrum, size_t len, double *out);

/**
 * Third-order Weingarten values (identity, transposition, 3-cycle) at dimension `d`.
 *
 * # Safety
 * `out` must point to 3 writable doubles.
 */
enum MsStatus ms_weingarten3(size_t d, double *out);

/**
 * Parses and validates a JSON experiment configuration. Free with [`ms_config_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MsStatus ms_config_from_json(const char *json, struct MsConfig **out);

/**
 * # Safety
 * `config` must be NULL or a pointer from [`ms_config_from_json`] not yet freed.
 */
void ms_config_free(struct MsConfig *config);

/**
 * Runs the configured experiment and writes its outputs to the configured directory.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum MsStatus ms_config_run(const struct MsConfig *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIPT_SHADOWS_H */
