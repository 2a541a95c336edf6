#ifndef REDUNDANCY_LAB_H
#define REDUNDANCY_LAB_H

/* Generated by cbindgen from redundancy-lab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * CUR aggregation rule below the full subset size.
 */
typedef enum RlCurRule {
  RL_CUR_PER_SUBSET_MEAN = 0,
  RL_CUR_MEAN_OF_SCORES = 1,
} RlCurRule;

/**
 * Status codes. The first four mirror the CLI exit-code classes.
 */
typedef enum RlStatus {
  RL_OK = 0,
  RL_USAGE = 1,
  RL_DATA = 2,
  RL_NUMERIC = 3,
  RL_NULL_ARGUMENT = 4,
  RL_INVALID_UTF8 = 5,
  RL_NOT_FOUND = 6,
  RL_BUFFER_TOO_SMALL = 7,
  RL_PANIC = 8,
} RlStatus;

/**
 * Opaque report handle.
 */
typedef struct RlReport RlReport;

/**
 * Opaque category scheme handle.
 */
typedef struct RlScheme RlScheme;

/**
 * Opaque score table handle.
 */
typedef struct RlTable RlTable;

/**
 * Max/min/mean scores at one masking level.
 */
typedef struct RlDegradationRow {
  double max;
  double min;
  double mean;
  /**
   * Valid only when `has_rel_change` is nonzero.
   */
  double rel_change;
  int32_t has_rel_change;
  size_t subset_count;
} RlDegradationRow;

/**
 * Outcome of the redundancy predicate on overall scores.
 */
typedef struct RlRedundancy {
  int32_t raised;
  double epsilon;
  double baseline;
  double best_proper;
  /**
   * (baseline - best_proper) / baseline.
   */
  double relative_drop;
  /**
   * Active-encoder bitmask of the best proper subset.
   */
  uint32_t witness_bits;
} RlRedundancy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string.
 */
const char *rl_version(void);

/**
 * Message for the most recent failure on this thread. Valid until the next
 * library call on the same thread.
 */
const char *rl_last_error(void);

/**
 * Load a score table from a v1 file (encoder order and granularity come
 * from the file's metadata comments).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum RlStatus rl_table_load(const char *path, struct RlTable **out);

/**
 * Load one of the bundled reference tables: "eagle" or "cambrian".
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum RlStatus rl_table_builtin(const char *name, struct RlTable **out);

/**
 * # Safety
 * `table` must be NULL or a pointer returned by `rl_table_load`/`rl_table_builtin`.
 */
void rl_table_free(struct RlTable *table);

/**
 * Number of encoders in the table; 0 for a null handle.
 *
 * # Safety
 * `table` must be NULL or a valid table handle.
 */
size_t rl_table_encoder_count(const struct RlTable *table);

/**
 * Copy the NUL-terminated name of encoder `index` into `buf`.
 *
 * # Safety
 * `table` must be a valid handle; `buf` must point to `len` writable bytes.
 */
enum RlStatus rl_table_encoder_name(const struct RlTable *table,
                                    size_t index,
                                    char *buf,
                                    size_t len);

/**
 * Load a category scheme from a v1 file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum RlStatus rl_scheme_load(const char *path, struct RlScheme **out);

/**
 * The built-in benchmark -> category scheme.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RlStatus rl_scheme_default(struct RlScheme **out);

/**
 * # Safety
 * `scheme` must be NULL or a pointer returned by a scheme constructor.
 */
void rl_scheme_free(struct RlScheme *scheme);

/**
 * Compute the full report. `epsilon` feeds the redundancy predicate (score
 * units; 0 demands a proper subset that matches or beats the full set).
 *
 * # Safety
 * `table` and `scheme` must be valid handles; `out` must be a valid pointer.
 */
enum RlStatus rl_report_compute(const struct RlTable *table,
                                const struct RlScheme *scheme,
                                enum RlCurRule rule,
                                double epsilon,
                                struct RlReport **out);

/**
 * CUR (as a fraction) of `encoder` at subset size `size` in `category`.
 *
 * # Safety
 * `report` must be a valid handle; `category` a NUL-terminated string;
 * `out` a valid pointer.
 */
enum RlStatus rl_report_cur(const struct RlReport *report,
                            const char *category,
                            size_t size,
                            size_t encoder,
                            double *out);

/**
 * Information gap (max - min CUR, as a fraction) at (category, size).
 *
 * # Safety
 * `report` must be a valid handle; `category` a NUL-terminated string;
 * `out` a valid pointer.
 */
enum RlStatus rl_report_ig(const struct RlReport *report,
                           const char *category,
                           size_t size,
                           double *out);

/**
 * Degradation row for a category name (or "Overall") at `masked` masked
 * encoders.
 *
 * # Safety
 * `report` must be a valid handle; `category` a NUL-terminated string;
 * `out` a valid pointer.
 */
enum RlStatus rl_report_degradation(const struct RlReport *report,
                                    const char *category,
                                    size_t masked,
                                    struct RlDegradationRow *out);

/**
 * Outcome of the redundancy predicate.
 *
 * # Safety
 * `report` must be a valid handle; `out` a valid pointer.
 */
enum RlStatus rl_report_redundancy(const struct RlReport *report, struct RlRedundancy *out);

/**
 * # Safety
 * `report` must be NULL or a pointer returned by `rl_report_compute`.
 */
void rl_report_free(struct RlReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REDUNDANCY_LAB_H */
