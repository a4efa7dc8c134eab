#ifndef TIMEREV_H
#define TIMEREV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum TrStatus {
  TR_STATUS_OK = 0,
  TR_STATUS_NULL_POINTER = 1,
  TR_STATUS_INVALID_UTF8 = 2,
  TR_STATUS_PARAMETER = 3,
  TR_STATUS_SIMULATION = 4,
  TR_STATUS_NUMERIC = 5,
  TR_STATUS_SUPPORT = 6,
  TR_STATUS_CONSISTENCY = 7,
  TR_STATUS_CONFIG = 8,
  TR_STATUS_DOMAIN = 9,
  TR_STATUS_FORMAT = 10,
  TR_STATUS_IO = 11,
  TR_STATUS_BUFFER_TOO_SMALL = 12,
  TR_STATUS_WRONG_MODEL_KIND = 13,
  TR_STATUS_PANIC = 14,
} TrStatus;

/**
 * Opaque ensemble of discretised diffusion paths.
 */
typedef struct TrEnsemble TrEnsemble;

/**
 * Opaque model: a diffusion or a graph walk built from a JSON descriptor.
 */
typedef struct TrModel TrModel;

/**
 * Opaque reversed drift of a diffusion whose marginals are known in closed form.
 */
typedef struct TrReversal TrReversal;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or NULL. Valid until the next call
 * into the library on the same thread.
 */
const char *tr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tr_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void tr_string_free(char *s);

/**
 * `x log x - x + 1`, `1` at zero and `+inf` for negative arguments.
 */
double tr_h(double x);

/**
 * Builds a model from a JSON descriptor such as
 * `{"type": "ou", "dim": 1}` or `{"type": "cycle", "n": 4, "rate_cw": 2, "rate_ccw": 1}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` a valid pointer.
 */
enum TrStatus tr_model_from_json(const char *json, struct TrModel **out);

/**
 * # Safety
 * `model` must come from [`tr_model_from_json`] (or be NULL).
 */
void tr_model_free(struct TrModel *model);

/**
 * State-space dimension (diffusions) or number of states (walks).
 *
 * # Safety
 * Valid handle and output pointer.
 */
enum TrStatus tr_model_dim(const struct TrModel *model, size_t *out);

/**
 * Model descriptor as JSON; free with [`tr_string_free`].
 *
 * # Safety
 * Valid handle and output pointer.
 */
enum TrStatus tr_model_to_json(const struct TrModel *model, char **out);

/**
 * Euler-Maruyama ensemble of `n_paths` paths on `n_steps` steps of `[0, horizon]`.
 *
 * # Safety
 * Valid handle and output pointer.
 */
enum TrStatus tr_simulate(const struct TrModel *model,
                          double horizon,
                          size_t n_steps,
                          size_t n_paths,
                          uint64_t seed,
                          struct TrEnsemble **out);

/**
 * # Safety
 * `e` must come from this library (or be NULL).
 */
void tr_ensemble_free(struct TrEnsemble *e);

/**
 * Shape of an ensemble; any output pointer may be NULL.
 *
 * # Safety
 * Valid handle; non-NULL outputs must be writable.
 */
enum TrStatus tr_ensemble_shape(const struct TrEnsemble *e,
                                size_t *dim,
                                size_t *n_paths,
                                size_t *n_steps,
                                double *horizon);

/**
 * Copies the row-major `n_paths x (n_steps + 1) x dim` tensor into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum TrStatus tr_ensemble_copy(const struct TrEnsemble *e, double *buf, size_t len);

/**
 * Time-reversed copy of an ensemble.
 *
 * # Safety
 * Valid handle and output pointer.
 */
enum TrStatus tr_ensemble_flip(const struct TrEnsemble *e, struct TrEnsemble **out);

/**
 * Writes the binary container to `path`.
 *
 * # Safety
 * Valid handle and NUL-terminated path.
 */
enum TrStatus tr_ensemble_write(const struct TrEnsemble *e, const char *path);

/**
 * Reads a binary container written by [`tr_ensemble_write`].
 *
 * # Safety
 * NUL-terminated path and valid output pointer.
 */
enum TrStatus tr_ensemble_read(const char *path, struct TrEnsemble **out);

/**
 * Reversed drift of a linear model with Gaussian initial law on `[0, horizon]`.
 *
 * # Safety
 * Valid handle and output pointer.
 */
enum TrStatus tr_reversal_new(const struct TrModel *model, double horizon, struct TrReversal **out);

/**
 * # Safety
 * `r` must come from [`tr_reversal_new`] (or be NULL).
 */
void tr_reversal_free(struct TrReversal *r);

/**
 * Evaluates the reversed drift at reversed time `t` and point `x`
 * (`dim` doubles) into `out` (`dim` doubles). `flags`, if non-NULL,
 * receives bit 0 = below support floor, bit 1 = singular diffusion,
 * bit 2 = magnitude capped.
 *
 * # Safety
 * `x` and `out` must hold `dim` doubles.
 */
enum TrStatus tr_reversed_drift(const struct TrReversal *r,
                                double t,
                                const double *x,
                                size_t dim,
                                double *out,
                                uint32_t *flags);

/**
 * Relative entropy of a walk model against the counting walk on `[0, horizon]`,
 * with marginals from the master equation on `n_steps` steps.
 *
 * # Safety
 * Valid handle and output pointer.
 */
enum TrStatus tr_rw_relative_entropy(const struct TrModel *model,
                                     double horizon,
                                     size_t n_steps,
                                     double *out);

/**
 * Current-osmosis entropy report of a diffusion model with closed-form
 * marginals, as JSON. Free the string with [`tr_string_free`].
 *
 * # Safety
 * Valid handles and output pointer.
 */
enum TrStatus tr_entropy_report_json(const struct TrModel *model,
                                     const struct TrEnsemble *ensemble,
                                     char **out);

/**
 * Runs the configured experiment, writing artifacts to the configured
 * output directory (or `out_dir` when non-NULL). `exit_code` receives
 * 0 when every check passes and 1 otherwise.
 *
 * # Safety
 * NUL-terminated strings; valid output pointer.
 */
enum TrStatus tr_run_config(const char *config_path, const char *out_dir, int32_t *exit_code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TIMEREV_H */
