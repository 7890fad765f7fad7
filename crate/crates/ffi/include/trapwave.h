#ifndef TRAPWAVE_H
#define TRAPWAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of the fallible calls.
typedef enum TwStatus {
  TW_STATUS_OK = 0,
  // A null pointer, invalid UTF-8 or an out-of-range argument.
  TW_STATUS_INVALID_ARGUMENT = 1,
  // The scenario text does not parse or does not validate.
  TW_STATUS_CONFIG = 2,
  // The solver or a diagnostic failed.
  TW_STATUS_NUMERICAL = 3,
  TW_STATUS_IO = 4,
  // A Rust panic was caught at the boundary.
  TW_STATUS_PANIC = 5,
} TwStatus;

// The result of running a scenario.
typedef struct TwOutcome TwOutcome;

// A parsed and validated scenario.
typedef struct TwScenario TwScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *tw_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *tw_version(void);

// `1/(1+x²)`.
double tw_potential_v(double x);

// `1` if `2 - 2α = 3α` to within `1e-12`, else `0`.
int tw_alpha_balance(double alpha);

// Minimum of `(1-3s²)/(1+s²)³ + M s²` over `n` uniform samples of
// `[0, s_max]`.
//
// # Safety
// `out_min` and `out_argmin` must be valid for writes.
enum TwStatus tw_lemma_min_scan(double m_const,
                                double s_max,
                                size_t n_samples,
                                double *out_min,
                                double *out_argmin);

// Parse and validate a scenario from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` valid for writes.
enum TwStatus tw_scenario_from_toml(const char *toml, struct TwScenario **out);

// # Safety
// `scenario` must be null or a handle from [`tw_scenario_from_toml`] that
// has not been freed.
void tw_scenario_free(struct TwScenario *scenario);

// Run a scenario in memory. No files are written.
//
// # Safety
// `scenario` must be a live handle and `out` valid for writes.
enum TwStatus tw_scenario_run(const struct TwScenario *scenario, struct TwOutcome **out);

// # Safety
// `outcome` must be null or a live handle from [`tw_scenario_run`].
void tw_outcome_free(struct TwOutcome *outcome);

// `1` if every check passed, `0` if not, `-1` for a null handle.
//
// # Safety
// `outcome` must be null or a live handle.
int tw_outcome_all_pass(const struct TwOutcome *outcome);

// Number of checks in the summary; `0` for a null handle.
//
// # Safety
// `outcome` must be null or a live handle.
size_t tw_outcome_check_count(const struct TwOutcome *outcome);

// Name of check `index`, owned by the handle; null when out of range.
//
// # Safety
// `outcome` must be null or a live handle.
const char *tw_outcome_check_name(const struct TwOutcome *outcome, size_t index);

// Verdict (`0`/`1`), margin and value of check `index`.
//
// # Safety
// `outcome` must be a live handle; the output pointers must be valid for
// writes.
enum TwStatus tw_outcome_check(const struct TwOutcome *outcome,
                               size_t index,
                               int *out_verdict,
                               double *out_margin,
                               double *out_value);

// Empirical constant `name` of the run.
//
// # Safety
// `outcome` must be a live handle, `name` a NUL-terminated string and
// `out` valid for writes.
enum TwStatus tw_outcome_constant(const struct TwOutcome *outcome, const char *name, double *out);

// The summary as pretty-printed JSON, owned by the handle.
//
// # Safety
// `outcome` must be null or a live handle.
const char *tw_outcome_summary_json(const struct TwOutcome *outcome);

// Write the CSV and JSON artifacts into directory `dir`.
//
// # Safety
// `outcome` must be a live handle and `dir` a NUL-terminated string.
enum TwStatus tw_outcome_write(const struct TwOutcome *outcome, const char *dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* TRAPWAVE_H */
