#ifndef MRWLAB_H
#define MRWLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. The first four match the command-line exit codes.
 */
typedef enum MrwStatus {
  MRW_STATUS_OK = 0,
  MRW_STATUS_IDENTITY_FAILURE = 1,
  MRW_STATUS_CONFIG_ERROR = 2,
  MRW_STATUS_NON_CONVERGENCE = 3,
  MRW_STATUS_NULL_POINTER = 4,
  MRW_STATUS_BUFFER_TOO_SMALL = 5,
  MRW_STATUS_PANIC = 6,
} MrwStatus;

/**
 * Validated model with its stationary law.
 */
typedef struct MrwModel MrwModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *mrw_version(void);

/**
 * Message of the last failed call on this thread, or an empty string.
 * Valid until the next failing call on the same thread.
 */
const char *mrw_last_error_message(void);

/**
 * Parses a model from its JSON description.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be writable.
 */
enum MrwStatus mrw_model_from_json(const char *json, struct MrwModel **out);

/**
 * Builds a named model. `params_json` may be null for defaults.
 *
 * # Safety
 * `name` and a non-null `params_json` must be NUL-terminated; `out` must
 * be writable.
 */
enum MrwStatus mrw_model_from_zoo(const char *name, const char *params_json, struct MrwModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from one of the constructors and not be freed twice.
 */
void mrw_model_free(struct MrwModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MrwStatus mrw_model_num_states(const struct MrwModel *model, size_t *out);

/**
 * Copies `π` into `out[0..num_states]`.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `len` doubles.
 */
enum MrwStatus mrw_model_stationary(const struct MrwModel *model, double *out, size_t len);

/**
 * Stationary drift `μ` in units of the walk.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MrwStatus mrw_model_drift(const struct MrwModel *model, double *out);

/**
 * Stationary law of the ladder chain and the escape constant `c`.
 * Refuses models without positive drift.
 *
 * # Safety
 * `model` must be a live handle; `pi_ladder` must hold `len` doubles;
 * `c` may be null.
 */
enum MrwStatus mrw_ladder_stationary(const struct MrwModel *model,
                                     double *pi_ladder,
                                     size_t len,
                                     double *c);

/**
 * Largest entrywise total-variation residual of the Wiener-Hopf
 * factorization.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MrwStatus mrw_factorization_residual(const struct MrwModel *model, double *out);

/**
 * Runs the exact identities and the Monte Carlo cross-checks and returns
 * the report as JSON in `*out_json`. `config_json` uses the command-line
 * config format without a model and may be null for defaults; `seed`
 * overrides any seed it contains. Returns `MRW_STATUS_IDENTITY_FAILURE`
 * with a complete report when a check fails.
 *
 * # Safety
 * `model` must be a live handle; a non-null `config_json` must be
 * NUL-terminated; `out_json` must be writable. Free the result with
 * [`mrw_string_free`].
 */
enum MrwStatus mrw_verify_json(const struct MrwModel *model,
                               const char *config_json,
                               uint64_t seed,
                               char **out_json);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void mrw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRWLAB_H */
