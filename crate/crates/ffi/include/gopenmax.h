#ifndef GOPENMAX_H
#define GOPENMAX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Decision value meaning "unknown".
 */
#define GOM_UNKNOWN -1

typedef enum GomStatus {
  GOM_STATUS_OK = 0,
  GOM_STATUS_NULL_POINTER = 1,
  GOM_STATUS_INVALID_ARGUMENT = 2,
  GOM_STATUS_IO = 3,
  GOM_STATUS_PARSE = 4,
  GOM_STATUS_DIMENSION_MISMATCH = 5,
  GOM_STATUS_FIT_FAILED = 6,
  GOM_STATUS_BUFFER_TOO_SMALL = 7,
  GOM_STATUS_PANIC = 8,
} GomStatus;

/**
 * Opaque fitted calibrator.
 */
typedef struct GomCalibrator GomCalibrator;

/**
 * Weibull tail model by value.
 */
typedef struct GomWeibull {
  double t;
  double lambda;
  double k;
  size_t tail_size;
  size_t n_fitted;
} GomWeibull;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *gom_last_error_message(void);

/**
 * Parses a calibrator from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GomStatus gom_calibrator_from_json(const char *json, struct GomCalibrator **out);

/**
 * Loads a calibrator file written by `gopenmax fit`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GomStatus gom_calibrator_load(const char *path, struct GomCalibrator **out);

/**
 * Fits a calibrator on an activation dump. `config_json` may be NULL for
 * the default configuration.
 *
 * # Safety
 * `dump_path` and a non-null `config_json` must be NUL-terminated strings;
 * `out` must be a valid pointer.
 */
enum GomStatus gom_calibrator_fit_dump(const char *dump_path,
                                       const char *config_json,
                                       struct GomCalibrator **out);

/**
 * Releases a calibrator. NULL is ignored.
 *
 * # Safety
 * `calib` must come from a `gom_calibrator_*` constructor and not be used
 * afterwards.
 */
void gom_calibrator_free(struct GomCalibrator *calib);

/**
 * Activation vector length the calibrator expects; 0 for NULL.
 *
 * # Safety
 * `calib` must be NULL or a live handle.
 */
size_t gom_calibrator_dimension(const struct GomCalibrator *calib);

/**
 * Length of the probability vector `gom_calibrator_recalibrate` writes; 0 for NULL.
 *
 * # Safety
 * `calib` must be NULL or a live handle.
 */
size_t gom_calibrator_num_outputs(const struct GomCalibrator *calib);

/**
 * Recalibrates one activation vector. Writes the probabilities (unknown
 * last) into `probs` and the decision (class index or `GOM_UNKNOWN`) into
 * `decision`, which may be NULL.
 *
 * # Safety
 * `calib` must be a live handle, `av` must point to `av_len` doubles and
 * `probs` to `probs_len` writable doubles.
 */
enum GomStatus gom_calibrator_recalibrate(const struct GomCalibrator *calib,
                                          const double *av,
                                          size_t av_len,
                                          double *probs,
                                          size_t probs_len,
                                          int64_t *decision);

/**
 * Serialises the calibrator to JSON. Free the string with [`gom_string_free`].
 *
 * # Safety
 * `calib` must be a live handle and `out` a valid pointer.
 */
enum GomStatus gom_calibrator_to_json(const struct GomCalibrator *calib, char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void gom_string_free(char *s);

/**
 * Fits a Weibull model to the `tail_size` largest distances.
 *
 * # Safety
 * `distances` must point to `len` doubles and `out` must be valid.
 */
enum GomStatus gom_weibull_fit(const double *distances,
                               size_t len,
                               size_t tail_size,
                               struct GomWeibull *out);

/**
 * CDF of `model` at `x`. Returns NaN for a NULL or invalid model.
 *
 * # Safety
 * `model` must be NULL or point to a `GomWeibull`.
 */
double gom_weibull_cdf(const struct GomWeibull *model, double x);

/**
 * # Safety
 * `out` must be a valid pointer.
 */
enum GomStatus gom_openness(size_t n_train, size_t n_test, size_t n_r, double *out);

/**
 * Writes an `n`-component mixture vector for `seed` into `out`.
 *
 * # Safety
 * `out` must point to `out_len` writable doubles.
 */
enum GomStatus gom_sample_mixture(size_t n,
                                  uint64_t seed,
                                  double sigma,
                                  double *out,
                                  size_t out_len);

/**
 * Threshold decision over a probability vector: the argmax class index, or
 * `GOM_UNKNOWN` when the maximum is below `epsilon` or, with
 * `last_is_unknown`, when the last position wins.
 *
 * # Safety
 * `probs` must point to `len` doubles and `out` must be valid.
 */
enum GomStatus gom_decide(const double *probs,
                          size_t len,
                          double epsilon,
                          bool last_is_unknown,
                          int64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOPENMAX_H */
