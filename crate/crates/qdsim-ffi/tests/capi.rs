//! Exercises the C ABI from Rust: status codes, ownership transfers,
//! error-message plumbing, and the generated header.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use qdsim_ffi::*;

fn small_scenario(seed: u64) -> CString {
    let value = serde_json::json!({
        "env": {
            "num_states": 1,
            "num_actions": 1,
            "gamma": 0.5,
            "transitions": [[[1.0]]],
            "mean_costs": [[[1.0]], [[3.0]]],
        },
        "graph": {"mode": "generated", "kind": "complete", "n": 2},
        "horizon": 2000,
        "checkpoint_every": 100,
        "seed": seed,
    });
    CString::new(value.to_string()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(qd_last_error_message()).to_string_lossy().into_owned() }
}

/// Takes ownership of an out-string and frees it through the ABI.
unsafe fn take_string(ptr: *mut c_char) -> String {
    assert!(!ptr.is_null());
    let text = CStr::from_ptr(ptr).to_string_lossy().into_owned();
    qd_string_free(ptr);
    text
}

#[test]
fn version_is_the_package_version() {
    let v = unsafe { CStr::from_ptr(qd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn parse_run_and_extract_outputs() {
    unsafe {
        let json = small_scenario(5);
        let mut sc: *mut QdScenario = ptr::null_mut();
        assert_eq!(qd_scenario_parse(json.as_ptr(), &mut sc), QdStatus::Ok);
        assert!(!sc.is_null());

        let mut res: *mut QdRunResult = ptr::null_mut();
        assert_eq!(qd_run(sc, &mut res), QdStatus::Ok);
        assert!(!res.is_null());
        assert!(!qd_run_result_aborted(res));

        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(qd_run_result_summary_json(res, &mut out), QdStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(summary["version"], 1);
        assert_eq!(summary["seed"], 5);
        assert!(summary["aborted"].is_null());
        assert!(summary["tail"].is_object());

        let mut csv: *mut c_char = ptr::null_mut();
        assert_eq!(qd_run_result_trace_csv(res, &mut csv), QdStatus::Ok);
        let trace = take_string(csv);
        assert!(trace.starts_with("t,agent,dist,"));
        assert_eq!(trace.lines().count(), 1 + 20 * 2);

        qd_run_result_free(res);
        qd_scenario_free(sc);
    }
}

#[test]
fn identical_seeds_give_identical_outputs_across_handles() {
    unsafe {
        let mut texts = Vec::new();
        for _ in 0..2 {
            let json = small_scenario(42);
            let mut sc: *mut QdScenario = ptr::null_mut();
            assert_eq!(qd_scenario_parse(json.as_ptr(), &mut sc), QdStatus::Ok);
            let mut res: *mut QdRunResult = ptr::null_mut();
            assert_eq!(qd_run(sc, &mut res), QdStatus::Ok);
            let mut csv: *mut c_char = ptr::null_mut();
            assert_eq!(qd_run_result_trace_csv(res, &mut csv), QdStatus::Ok);
            texts.push(take_string(csv));
            qd_run_result_free(res);
            qd_scenario_free(sc);
        }
        assert_eq!(texts[0], texts[1]);
    }
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut sc: *mut QdScenario = ptr::null_mut();
        assert_eq!(qd_scenario_parse(ptr::null(), &mut sc), QdStatus::NullPointer);
        assert!(sc.is_null());
        assert!(!last_error().is_empty());

        let json = small_scenario(0);
        assert_eq!(qd_scenario_parse(json.as_ptr(), ptr::null_mut()), QdStatus::NullPointer);

        let mut res: *mut QdRunResult = ptr::null_mut();
        assert_eq!(qd_run(ptr::null(), &mut res), QdStatus::NullPointer);

        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(qd_run_result_summary_json(ptr::null(), &mut out), QdStatus::NullPointer);
        assert!(out.is_null());

        // Free functions tolerate null.
        qd_scenario_free(ptr::null_mut());
        qd_run_result_free(ptr::null_mut());
        qd_string_free(ptr::null_mut());
    }
}

#[test]
fn bad_inputs_map_to_distinct_statuses() {
    unsafe {
        let mut sc: *mut QdScenario = ptr::null_mut();

        let not_utf8: [c_char; 3] = [-1i8 as c_char, -2i8 as c_char, 0];
        assert_eq!(qd_scenario_parse(not_utf8.as_ptr(), &mut sc), QdStatus::InvalidUtf8);

        let not_json = CString::new("{nope").unwrap();
        assert_eq!(qd_scenario_parse(not_json.as_ptr(), &mut sc), QdStatus::ParseError);
        assert!(last_error().contains("JSON"));

        let mut bad = serde_json::from_str::<serde_json::Value>(
            small_scenario(0).to_str().unwrap(),
        )
        .unwrap();
        bad["env"]["gamma"] = serde_json::json!(1.2);
        let bad = CString::new(bad.to_string()).unwrap();
        assert_eq!(qd_scenario_parse(bad.as_ptr(), &mut sc), QdStatus::ConfigError);
        assert!(last_error().contains("gamma"), "{}", last_error());
        assert!(sc.is_null());
    }
}

#[test]
fn aborted_run_returns_a_result_with_the_diagnostic() {
    unsafe {
        let value = serde_json::json!({
            "env": {
                "num_states": 1,
                "num_actions": 1,
                "gamma": 0.5,
                "transitions": [[[1.0]]],
                "mean_costs": [[[1.0]], [[1.0]], [[1.0]]],
            },
            "graph": {"mode": "generated", "kind": "complete", "n": 3},
            "adversaries": [{"agent": 2, "attack": {"kind": "max_push", "delta": 1e308}}],
            "horizon": 1000,
            "checkpoint_every": 10,
        });
        let json = CString::new(value.to_string()).unwrap();
        let mut sc: *mut QdScenario = ptr::null_mut();
        assert_eq!(qd_scenario_parse(json.as_ptr(), &mut sc), QdStatus::Ok);
        let mut res: *mut QdRunResult = ptr::null_mut();
        assert_eq!(qd_run(sc, &mut res), QdStatus::RunAborted);
        assert!(!res.is_null());
        assert!(qd_run_result_aborted(res));
        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(qd_run_result_summary_json(res, &mut out), QdStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert!(summary["aborted"].is_object(), "{summary}");
        qd_run_result_free(res);
        qd_scenario_free(sc);
    }
}

#[test]
fn oracle_report_from_a_bare_environment() {
    unsafe {
        let env = serde_json::json!({
            "num_states": 1,
            "num_actions": 1,
            "gamma": 0.5,
            "transitions": [[[1.0]]],
            "mean_costs": [[[1.0]], [[2.0]]],
        });
        let json = CString::new(env.to_string()).unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(qd_oracle_report_json(json.as_ptr(), &mut out), QdStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        // Costs 1 and 2 at gamma 0.5: fixed points 2 and 4, radius 2.
        assert!((report["R"].as_f64().unwrap() - 2.0).abs() < 1e-6);
        assert!(report["regular_fixed_point"]["q_star"].is_array());
    }
}

#[test]
fn check_graph_reports_and_caps() {
    unsafe {
        let k5 = serde_json::json!({
            "graph": {"n": 5, "edges": complete_edges(5)},
            "adversary_sets": [[4], [2, 3]],
            "f": 1,
        });
        let json = CString::new(k5.to_string()).unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(qd_check_graph_json(json.as_ptr(), false, &mut out), QdStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(report["robustness"], 3);
        assert_eq!(report["rooted"], true);
        assert_eq!(report["f_local"][0]["is_f_local"], true);
        assert_eq!(report["f_local"][1]["is_f_local"], false);

        // A 20-node ring is over the brute-force cap unless forced.
        let ring: Vec<[usize; 2]> =
            (0..20).flat_map(|i| [[i, (i + 1) % 20], [(i + 1) % 20, i]]).collect();
        let big = serde_json::json!({"n": 20, "edges": ring});
        let json = CString::new(big.to_string()).unwrap();
        let mut out: *mut c_char = ptr::null_mut();
        assert_eq!(qd_check_graph_json(json.as_ptr(), false, &mut out), QdStatus::GraphTooLarge);
        assert!(out.is_null());
        assert!(last_error().contains("capped"));
        assert_eq!(qd_check_graph_json(json.as_ptr(), true, &mut out), QdStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(report["robustness"], 1);
    }
}

fn complete_edges(n: usize) -> Vec<[usize; 2]> {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                edges.push([a, b]);
            }
        }
    }
    edges
}

#[test]
fn generated_header_declares_the_surface() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/qdsim.h"
    ))
    .unwrap();
    for symbol in [
        "QD_STATUS_OK",
        "QD_STATUS_RUN_ABORTED",
        "QD_STATUS_GRAPH_TOO_LARGE",
        "typedef struct QdScenario QdScenario;",
        "typedef struct QdRunResult QdRunResult;",
        "qd_scenario_parse",
        "qd_scenario_free",
        "qd_run(",
        "qd_run_result_summary_json",
        "qd_run_result_trace_csv",
        "qd_run_result_free",
        "qd_oracle_report_json",
        "qd_check_graph_json",
        "qd_last_error_message",
        "qd_string_free",
        "qd_version",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
