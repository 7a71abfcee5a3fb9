#ifndef QDSIM_H
#define QDSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  QD_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  QD_STATUS_NULL_POINTER = 1,
  /**
   * An input string was not valid UTF-8.
   */
  QD_STATUS_INVALID_UTF8 = 2,
  /**
   * The input was not syntactically valid JSON.
   */
  QD_STATUS_PARSE_ERROR = 3,
  /**
   * The input parsed but failed validation.
   */
  QD_STATUS_CONFIG_ERROR = 4,
  /**
   * The simulation aborted; see the summary for the diagnostic.
   */
  QD_STATUS_RUN_ABORTED = 5,
  /**
   * Robustness was requested for a graph above the brute-force cap.
   */
  QD_STATUS_GRAPH_TOO_LARGE = 6,
  /**
   * A panic or other unexpected failure inside the library.
   */
  QD_STATUS_INTERNAL_ERROR = 7,
} QdStatus;

/**
 * Finished run handle. The summary and trace are captured at run time,
 * so the handle does not borrow from the scenario.
 */
typedef struct QdRunResult QdRunResult;

/**
 * Validated scenario handle, created by `qd_scenario_parse`.
 */
typedef struct QdScenario QdScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *qd_version(void);

/**
 * Message for the most recent error on this thread, or an empty string.
 * Valid until the next failing call on the same thread; do not free.
 */
const char *qd_last_error_message(void);

/**
 * Releases a string returned by this library. Null is accepted.
 *
 * # Safety
 * `s` must come from this library and not have been freed already.
 */
void qd_string_free(char *s);

/**
 * Parses and validates a scenario JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
QdStatus qd_scenario_parse(const char *json, QdScenario **out);

/**
 * # Safety
 * `sc` must come from `qd_scenario_parse` and not have been freed.
 */
void qd_scenario_free(QdScenario *sc);

/**
 * Runs a scenario to completion. On `Ok` the result handle is written.
 * On `RunAborted` the handle is written too when a partial trace exists
 * (its summary carries the diagnostic); it stays untouched otherwise,
 * so initialize it to null before calling.
 *
 * # Safety
 * `sc` must come from `qd_scenario_parse`; `out` must be valid.
 */
QdStatus qd_run(const QdScenario *sc, QdRunResult **out);

/**
 * True when the run stopped early; the summary explains where and why.
 *
 * # Safety
 * `res` must come from `qd_run` and not have been freed.
 */
bool qd_run_result_aborted(const QdRunResult *res);

/**
 * Copies the run summary as a JSON string; free with `qd_string_free`.
 *
 * # Safety
 * `res` must come from `qd_run`; `out` must be valid.
 */
QdStatus qd_run_result_summary_json(const QdRunResult *res, char **out);

/**
 * Copies the checkpoint trace as CSV; free with `qd_string_free`.
 *
 * # Safety
 * `res` must come from `qd_run`; `out` must be valid.
 */
QdStatus qd_run_result_trace_csv(const QdRunResult *res, char **out);

/**
 * # Safety
 * `res` must come from `qd_run` and not have been freed.
 */
void qd_run_result_free(QdRunResult *res);

/**
 * Computes fixed points and disagreement bounds. Accepts either a full
 * scenario document (adversaries excluded from the regular set) or a
 * bare environment object (every agent regular). Writes a JSON report;
 * free with `qd_string_free`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid.
 */
QdStatus qd_oracle_report_json(const char *json, char **out);

/**
 * Certifies a graph: rootedness, robustness by brute force, and
 * optional locality verdicts. Accepts the same input as the CLI's
 * check-graph command ({"graph": ..., "adversary_sets": ..., "f": ...,
 * "max_r": ...} or a bare graph object). `force_large` lifts the node
 * cap on the exponential robustness search. Writes a JSON report; free
 * with `qd_string_free`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid.
 */
QdStatus qd_check_graph_json(const char *json, bool force_large, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDSIM_H */
