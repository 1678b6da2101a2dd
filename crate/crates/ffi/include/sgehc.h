/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SGEHC_H
#define SGEHC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. The numeric values match the exit codes of the `sgehc`
// binary where both exist.
typedef enum SgeStatus {
  SGE_STATUS_OK = 0,
  SGE_STATUS_INTERNAL = 1,
  SGE_STATUS_CONFIG = 3,
  SGE_STATUS_INVALID_ARGUMENT = 4,
  SGE_STATUS_NUMERICAL = 5,
  SGE_STATUS_IO = 6,
  SGE_STATUS_NULL_POINTER = 7,
  SGE_STATUS_UTF8 = 8,
  SGE_STATUS_OUT_OF_RANGE = 9,
  SGE_STATUS_PANIC = 10,
} SgeStatus;

// Index set handle.
typedef struct SgeHcSet SgeHcSet;

// Result of a solve: the error report and the `λ` it used.
typedef struct SgeRun SgeRun;

// One report row.
typedef struct SgeReportRow {
  double time;
  double linf;
  double rms;
  double kappa;
  double residual;
  double wall_seconds;
} SgeReportRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library on the same thread.
const char *sge_last_error(void);

// Library version as a static string.
const char *sge_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void sge_string_free(char *s);

// Builds the hyperbolic-cross set of order `order_cap` in `dim` dimensions.
// `superposition_cap` < 0 means no cap.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum SgeStatus sge_hc_set_new(size_t dim,
                              double lambda,
                              double order_cap,
                              int32_t superposition_cap,
                              struct SgeHcSet **out);

// Number of indices; 0 for a null handle.
//
// # Safety
// `set` must be null or a live handle.
size_t sge_hc_set_len(const struct SgeHcSet *set);

// Dimension of the indices; 0 for a null handle.
//
// # Safety
// `set` must be null or a live handle.
size_t sge_hc_set_dim(const struct SgeHcSet *set);

// Copies index `i` (canonical order) into `entries[0..dim]` and its weight
// into `weight` when that is not null.
//
// # Safety
// `entries` must have room for `dim` values.
enum SgeStatus sge_hc_set_get(const struct SgeHcSet *set,
                              size_t i,
                              int32_t *entries,
                              size_t dim,
                              double *weight);

// # Safety
// `set` must be null or a live handle, not used afterwards.
void sge_hc_set_free(struct SgeHcSet *set);

// Solves the problem described by a JSON run configuration (the same format
// the `sgehc solve` command reads). Nothing is written to disk unless the
// configuration names a checkpoint directory.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
enum SgeStatus sge_run_solve(const char *config_json, struct SgeRun **out);

// Number of report rows; 0 for a null handle.
//
// # Safety
// `run` must be null or a live handle.
size_t sge_run_rows(const struct SgeRun *run);

// The `λ` used by the run; NaN for a null handle.
//
// # Safety
// `run` must be null or a live handle.
double sge_run_lambda(const struct SgeRun *run);

// # Safety
// `run` must be a live handle and `row` writable.
enum SgeStatus sge_run_row(const struct SgeRun *run, size_t i, struct SgeReportRow *row);

// The report as CSV text; release it with [`sge_string_free`].
//
// # Safety
// `run` must be a live handle and `out` writable.
enum SgeStatus sge_run_csv(const struct SgeRun *run, char **out);

// # Safety
// `run` must be null or a live handle, not used afterwards.
void sge_run_free(struct SgeRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SGEHC_H */
