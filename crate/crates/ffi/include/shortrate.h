/*
 * C interface to the shortrate term-structure engine.
 *
 * Conventions: fallible calls return SrStatus and write results through
 * out-pointers only on SR_OK; strings are NUL-terminated UTF-8; model
 * handles are immutable, thread-safe to share, and freed exactly once
 * with sr_model_free. sr_last_error() describes the calling thread's most
 * recent failure.
 */

#ifndef SHORTRATE_H
#define SHORTRATE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Nonzero values group errors the same way the companion
 * CLI's process exit codes do, with dedicated codes for null pointers and
 * internal faults.
 */
typedef enum SrStatus {
  /**
   * Success.
   */
  SR_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SR_NULL_POINTER = 1,
  /**
   * Invalid input: malformed JSON, bad UTF-8, or arguments outside the
   * model's domain.
   */
  SR_INVALID_INPUT = 2,
  /**
   * Inputs parse but contradict each other or leave required data
   * missing.
   */
  SR_DATA_ERROR = 3,
  /**
   * An iterative routine failed to converge.
   */
  SR_NO_CONVERGENCE = 4,
  /**
   * A pipeline stage was invoked before its prerequisite.
   */
  SR_MISSING_STAGE = 5,
  /**
   * An internal fault was caught at the language boundary.
   */
  SR_INTERNAL = 6,
} SrStatus;

/**
 * Opaque model handle created by [`sr_model_from_json`].
 */
typedef struct SrModel SrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sr_version(void);

/**
 * Message for the most recent error on the calling thread, or an empty
 * string when none occurred. Valid until the next failing call on the
 * same thread.
 */
const char *sr_last_error(void);

/**
 * Parse a model snapshot (the JSON produced by calibration, or
 * handwritten) and build a pricing handle from it.
 *
 * On `SR_OK`, `*out` owns the handle; release it with [`sr_model_free`].
 *
 * # Safety
 * `json` must be null or NUL-terminated; `out` must be null or valid for
 * writing one pointer.
 */
enum SrStatus sr_model_from_json(const char *json, struct SrModel **out);

/**
 * Release a handle created by [`sr_model_from_json`]. Passing null is a
 * no-op; passing the same handle twice is undefined behavior.
 *
 * # Safety
 * `model` must be null or a pointer obtained from [`sr_model_from_json`]
 * that has not been freed.
 */
void sr_model_free(struct SrModel *model);

/**
 * Zero-coupon bond price `B(0, T)` for a maturity in year fractions from
 * the model's anchor date.
 *
 * # Safety
 * `model` must be a live handle or null; `out` must be null or valid for
 * writing one double.
 */
enum SrStatus sr_model_bond_price(const struct SrModel *model, double maturity_years, double *out);

/**
 * Expected overnight rate on a date (`YYYY-MM-DD`), as seen from the
 * anchor date.
 *
 * # Safety
 * `model` must be a live handle or null; `date_iso` must be null or
 * NUL-terminated; `out` must be null or valid for writing one double.
 */
enum SrStatus sr_model_expected_rate_on(const struct SrModel *model,
                                        const char *date_iso,
                                        double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHORTRATE_H */
