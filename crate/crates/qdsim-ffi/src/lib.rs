//! C ABI over the simulator core: opaque handles, integer status codes,
//! and JSON strings at the boundary.
//!
//! Conventions:
//! - Functions returning [`QdStatus`] write their product through an out
//!   pointer, which is left untouched on failure (except as documented
//!   for `qd_run` on an aborted run).
//! - Strings produced by this library are NUL-terminated UTF-8 owned by
//!   the caller; release them with `qd_string_free`.
//! - On any non-`Ok` status, `qd_last_error_message` returns a
//!   description. The pointer stays valid until the next call on the
//!   same thread that sets an error.
//! - Every entry point catches panics and reports them as
//!   `InternalError`; nothing unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};

use qdsim::graphs::{AdversarySet, Digraph, DEFAULT_ROBUSTNESS_CAP};
use qdsim::mdp::EnvSpec;
use qdsim::oracle::{bound_report, DEFAULT_TOL};
use qdsim::sim::{run, summary_json, trace_to_csv, Scenario, SimError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QdStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The input was not syntactically valid JSON.
    ParseError = 3,
    /// The input parsed but failed validation.
    ConfigError = 4,
    /// The simulation aborted; see the summary for the diagnostic.
    RunAborted = 5,
    /// Robustness was requested for a graph above the brute-force cap.
    GraphTooLarge = 6,
    /// A panic or other unexpected failure inside the library.
    InternalError = 7,
}

/// Validated scenario handle, created by `qd_scenario_parse`.
pub struct QdScenario {
    inner: Scenario,
}

/// Finished run handle. The summary and trace are captured at run time,
/// so the handle does not borrow from the scenario.
pub struct QdRunResult {
    summary: CString,
    trace_csv: CString,
    aborted: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Display) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(text).expect("NULs stripped above");
    });
}

fn fail(status: QdStatus, msg: impl Display) -> QdStatus {
    set_error(msg);
    status
}

/// Runs `body` with panics converted to `InternalError`.
fn guarded(body: impl FnOnce() -> QdStatus) -> QdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(QdStatus::InternalError, format!("internal panic: {msg}"))
        }
    }
}

/// # Safety
/// `input` must be null or a NUL-terminated string.
unsafe fn read_utf8<'a>(input: *const c_char) -> Result<&'a str, QdStatus> {
    if input.is_null() {
        return Err(fail(QdStatus::NullPointer, "input string is null"));
    }
    CStr::from_ptr(input)
        .to_str()
        .map_err(|e| fail(QdStatus::InvalidUtf8, format!("input is not UTF-8: {e}")))
}

fn parse_json(text: &str) -> Result<serde_json::Value, QdStatus> {
    serde_json::from_str(text)
        .map_err(|e| fail(QdStatus::ParseError, format!("invalid JSON: {e}")))
}

fn into_owned_c_string(text: String, out: *mut *mut c_char) -> QdStatus {
    if out.is_null() {
        return fail(QdStatus::NullPointer, "output pointer is null");
    }
    let sanitized = text.replace('\0', " ");
    let c = CString::new(sanitized).expect("NULs stripped above");
    unsafe { *out = c.into_raw() };
    QdStatus::Ok
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent error on this thread, or an empty string.
/// Valid until the next failing call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn qd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is accepted.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn qd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a scenario JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_parse(
    json: *const c_char,
    out: *mut *mut QdScenario,
) -> QdStatus {
    guarded(|| {
        if out.is_null() {
            return fail(QdStatus::NullPointer, "output pointer is null");
        }
        let text = match read_utf8(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let value = match parse_json(text) {
            Ok(v) => v,
            Err(status) => return status,
        };
        match Scenario::from_value(value) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(QdScenario { inner }));
                QdStatus::Ok
            }
            Err(e) => fail(QdStatus::ConfigError, e),
        }
    })
}

/// # Safety
/// `sc` must come from `qd_scenario_parse` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qd_scenario_free(sc: *mut QdScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}

/// Runs a scenario to completion. On `Ok` the result handle is written.
/// On `RunAborted` the handle is written too when a partial trace exists
/// (its summary carries the diagnostic); it stays untouched otherwise,
/// so initialize it to null before calling.
///
/// # Safety
/// `sc` must come from `qd_scenario_parse`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_run(sc: *const QdScenario, out: *mut *mut QdRunResult) -> QdStatus {
    guarded(|| {
        if sc.is_null() || out.is_null() {
            return fail(QdStatus::NullPointer, "scenario or output pointer is null");
        }
        let scenario = &(*sc).inner;
        match run(scenario) {
            Ok(output) => {
                let aborted = output.abort.is_some();
                let summary = summary_json(scenario, &output).to_string().replace('\0', " ");
                let csv = trace_to_csv(&output.trace).replace('\0', " ");
                let handle = QdRunResult {
                    summary: CString::new(summary).expect("JSON has no NULs"),
                    trace_csv: CString::new(csv).expect("CSV has no NULs"),
                    aborted,
                };
                *out = Box::into_raw(Box::new(handle));
                if aborted {
                    fail(QdStatus::RunAborted, "run aborted; see the summary diagnostic")
                } else {
                    QdStatus::Ok
                }
            }
            Err(e @ SimError::Hull { .. }) => fail(QdStatus::RunAborted, e),
            Err(e) => fail(QdStatus::ConfigError, e),
        }
    })
}

/// True when the run stopped early; the summary explains where and why.
///
/// # Safety
/// `res` must come from `qd_run` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qd_run_result_aborted(res: *const QdRunResult) -> bool {
    !res.is_null() && (*res).aborted
}

/// Copies the run summary as a JSON string; free with `qd_string_free`.
///
/// # Safety
/// `res` must come from `qd_run`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_run_result_summary_json(
    res: *const QdRunResult,
    out: *mut *mut c_char,
) -> QdStatus {
    guarded(|| {
        if res.is_null() {
            return fail(QdStatus::NullPointer, "result handle is null");
        }
        into_owned_c_string((*res).summary.to_string_lossy().into_owned(), out)
    })
}

/// Copies the checkpoint trace as CSV; free with `qd_string_free`.
///
/// # Safety
/// `res` must come from `qd_run`; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_run_result_trace_csv(
    res: *const QdRunResult,
    out: *mut *mut c_char,
) -> QdStatus {
    guarded(|| {
        if res.is_null() {
            return fail(QdStatus::NullPointer, "result handle is null");
        }
        into_owned_c_string((*res).trace_csv.to_string_lossy().into_owned(), out)
    })
}

/// # Safety
/// `res` must come from `qd_run` and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qd_run_result_free(res: *mut QdRunResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Computes fixed points and disagreement bounds. Accepts either a full
/// scenario document (adversaries excluded from the regular set) or a
/// bare environment object (every agent regular). Writes a JSON report;
/// free with `qd_string_free`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_oracle_report_json(
    json: *const c_char,
    out: *mut *mut c_char,
) -> QdStatus {
    guarded(|| {
        let text = match read_utf8(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let value = match parse_json(text) {
            Ok(v) => v,
            Err(status) => return status,
        };
        let report = if value.get("env").is_some() {
            match Scenario::from_value(value) {
                Ok(sc) => bound_report(&sc.mdp, &sc.costs, &sc.regular(), sc.oracle_tol),
                Err(e) => return fail(QdStatus::ConfigError, e),
            }
        } else {
            let env: EnvSpec = match serde_json::from_value(value) {
                Ok(env) => env,
                Err(e) => return fail(QdStatus::ConfigError, format!("invalid environment: {e}")),
            };
            match env.build() {
                Ok((mdp, costs)) => {
                    let regular: Vec<usize> = (0..costs.num_agents).collect();
                    bound_report(&mdp, &costs, &regular, DEFAULT_TOL)
                }
                Err(e) => return fail(QdStatus::ConfigError, e),
            }
        };
        match report {
            Ok(report) => into_owned_c_string(report.to_json().to_string(), out),
            Err(e) => fail(QdStatus::ConfigError, e),
        }
    })
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckGraphInput {
    graph: Digraph,
    #[serde(default)]
    adversary_sets: Vec<Vec<usize>>,
    #[serde(default)]
    f: Option<usize>,
    #[serde(default)]
    max_r: Option<usize>,
}

/// Certifies a graph: rootedness, robustness by brute force, and
/// optional locality verdicts. Accepts the same input as the CLI's
/// check-graph command ({"graph": ..., "adversary_sets": ..., "f": ...,
/// "max_r": ...} or a bare graph object). `force_large` lifts the node
/// cap on the exponential robustness search. Writes a JSON report; free
/// with `qd_string_free`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qd_check_graph_json(
    json: *const c_char,
    force_large: bool,
    out: *mut *mut c_char,
) -> QdStatus {
    guarded(|| {
        let text = match read_utf8(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        let value = match parse_json(text) {
            Ok(v) => v,
            Err(status) => return status,
        };
        let input: CheckGraphInput = if value.get("graph").is_some() {
            match serde_json::from_value(value) {
                Ok(input) => input,
                Err(e) => {
                    return fail(QdStatus::ConfigError, format!("invalid check-graph input: {e}"))
                }
            }
        } else {
            match serde_json::from_value::<Digraph>(value) {
                Ok(graph) => {
                    CheckGraphInput { graph, adversary_sets: vec![], f: None, max_r: None }
                }
                Err(e) => return fail(QdStatus::ConfigError, format!("invalid graph: {e}")),
            }
        };

        let g = &input.graph;
        let n = g.num_nodes();
        let cap = if force_large { n } else { DEFAULT_ROBUSTNESS_CAP };
        if n > cap {
            return fail(
                QdStatus::GraphTooLarge,
                format!(
                    "graph has {n} nodes; robustness brute force is capped at \
                     {DEFAULT_ROBUSTNESS_CAP} (pass force_large to compute anyway)"
                ),
            );
        }
        let robustness = match g.robustness_with_cap(input.max_r.unwrap_or(n), cap) {
            Ok(r) => r,
            Err(e) => return fail(QdStatus::GraphTooLarge, e),
        };

        let f = input.f.unwrap_or(1);
        let mut locality = Vec::new();
        for set in &input.adversary_sets {
            let adv = match AdversarySet::new(n, set.iter().copied()) {
                Ok(adv) => adv,
                Err(e) => return fail(QdStatus::ConfigError, format!("adversary set {set:?}: {e}")),
            };
            let verdict = match g.is_f_local(&adv, f) {
                Ok(v) => v,
                Err(e) => return fail(QdStatus::ConfigError, format!("adversary set {set:?}: {e}")),
            };
            locality.push(serde_json::json!({
                "adversaries": adv.members().collect::<Vec<_>>(),
                "f": f,
                "is_f_local": verdict,
            }));
        }

        let output = serde_json::json!({
            "n": n,
            "num_edges": g.num_edges(),
            "rooted": g.is_rooted(),
            "robustness": robustness,
            "f_local": locality,
        });
        into_owned_c_string(output.to_string(), out)
    })
}
