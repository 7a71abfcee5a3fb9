//! Command-line front end: scenario execution, oracle reports, graph
//! certification, and multi-seed sweeps.
//!
//! Exit codes: 0 success, 1 configuration error, 2 run aborted on a
//! non-finite value, 3 graph beyond the brute-force cap.
//!
//! Validation-first: nothing is written for an input that fails validation.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::Value;

use crate::adversary::cost_spoof_pretended;
use crate::graphs::{AdversarySet, Digraph, DEFAULT_ROBUSTNESS_CAP};
use crate::oracle::{bound_report, fixed_point, DEFAULT_TOL};
use crate::sim::{
    default_tail_window, run_with_options, summary_json, tail_estimate, trace_to_csv,
    RunOptions, RunOutput, Scenario, SimError, TailEstimate,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_GRAPH_TOO_LARGE: i32 = 3;

/// The only environment variable the tool reads: output-directory override.
pub const OUT_DIR_ENV: &str = "QDSIM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "qdsim",
    version,
    about = "Networked Q-learning simulator with Byzantine fault injection"
)]
struct Cli {
    /// Print passing assumption checks and progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Execute one scenario; write trace.csv and summary.json.
    Run(RunArgs),
    /// Print the fixed-point bound report for a scenario's environment.
    Oracle(OracleArgs),
    /// Certify rootedness, robustness, and adversary locality of a graph.
    CheckGraph(CheckGraphArgs),
    /// Run a seed/variant grid; write per-cell outputs and an aggregate CSV.
    Sweep(SweepArgs),
    /// Reproduce the packaged value-freezing and cost-spoofing attacks.
    AttackDemo(AttackDemoArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (default: $QDSIM_OUT_DIR, then "out").
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's checkpoint interval.
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Override the scenario's tail window (in checkpoints).
    #[arg(long)]
    tail_window: Option<usize>,
    /// Also write messages.jsonl with every delivered payload.
    #[arg(long)]
    log_messages: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Scenario JSON file, or a bare environment object.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct CheckGraphArgs {
    /// Graph JSON: {"n", "edges"} bare, or wrapped with adversary sets.
    #[arg(long)]
    input: PathBuf,
    /// Compute robustness past the default node cap.
    #[arg(long)]
    force_large_graph: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep JSON: {"base": scenario, "seeds": [...], "variants": [...]}.
    #[arg(long)]
    input: PathBuf,
    /// Output directory (default: $QDSIM_OUT_DIR, then "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AttackDemoArgs {
    /// Output directory (default: $QDSIM_OUT_DIR, then "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point for the binary; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = err.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Run(args) => cmd_run(&args, cli.verbose),
        Cmd::Oracle(args) => cmd_oracle(&args),
        Cmd::CheckGraph(args) => cmd_check_graph(&args),
        Cmd::Sweep(args) => cmd_sweep(&args, cli.verbose),
        Cmd::AttackDemo(args) => cmd_attack_demo(&args, cli.verbose),
    }
}

fn fail(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_CONFIG
}

/// Flag, then the environment override, then "out".
fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    resolve_out_dir_with(flag, std::env::var(OUT_DIR_ENV).ok())
}

fn resolve_out_dir_with(flag: Option<PathBuf>, env: Option<String>) -> PathBuf {
    flag.or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{} is not valid JSON: {e}", path.display()))
}

/// Applies CLI overrides into the scenario JSON before validation, so an
/// invalid override is reported like any other field violation.
fn apply_overrides(
    mut value: Value,
    seed: Option<u64>,
    checkpoint_every: Option<u64>,
    tail_window: Option<usize>,
) -> Value {
    if let Some(obj) = value.as_object_mut() {
        if let Some(s) = seed {
            obj.insert("seed".into(), s.into());
        }
        if let Some(c) = checkpoint_every {
            obj.insert("checkpoint_every".into(), c.into());
        }
        if let Some(w) = tail_window {
            obj.insert("tail_window".into(), w.into());
        }
    }
    value
}

fn report_assumptions(out: &RunOutput, verbose: bool) {
    for check in &out.assumptions.checks {
        match check.status {
            crate::sim::CheckStatus::Warn => {
                eprintln!("warning: {}: {}", check.name, check.detail)
            }
            crate::sim::CheckStatus::Pass if verbose => {
                eprintln!("check {}: {}", check.name, check.detail)
            }
            _ => {}
        }
    }
}

/// Runs one validated scenario into `dir`. Returns the output and the exit
/// code contribution (0 or aborted).
fn execute_into(
    sc: &Scenario,
    dir: &Path,
    log_messages: bool,
) -> Result<(RunOutput, i32), SimError> {
    fs::create_dir_all(dir)?;
    let out = if log_messages {
        let file = fs::File::create(dir.join("messages.jsonl"))?;
        let mut writer = BufWriter::new(file);
        let out = run_with_options(
            sc,
            RunOptions { message_log: Some(&mut writer), ..RunOptions::default() },
        )?;
        writer.flush()?;
        out
    } else {
        run_with_options(sc, RunOptions::default())?
    };
    fs::write(dir.join("trace.csv"), trace_to_csv(&out.trace))?;
    let summary = summary_json(sc, &out);
    fs::write(dir.join("summary.json"), format!("{:#}\n", summary))?;
    let code = if out.abort.is_some() { EXIT_ABORTED } else { EXIT_OK };
    Ok((out, code))
}

fn cmd_run(args: &RunArgs, verbose: bool) -> i32 {
    let value = match read_json(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let value = apply_overrides(value, args.seed, args.checkpoint_every, args.tail_window);
    let sc = match Scenario::from_value(value) {
        Ok(sc) => sc,
        Err(e) => return fail(e),
    };
    let dir = resolve_out_dir(args.out.clone());
    match execute_into(&sc, &dir, args.log_messages) {
        Ok((out, code)) => {
            report_assumptions(&out, verbose);
            if let Some(abort) = out.abort {
                eprintln!(
                    "aborted at t = {}: agent {} produced {} at state {}, action {}",
                    abort.t, abort.agent, abort.value, abort.state, abort.action
                );
            } else if verbose {
                eprintln!(
                    "completed horizon {} with {} checkpoints",
                    sc.horizon,
                    out.trace.checkpoints.len()
                );
            }
            println!("{}", dir.join("summary.json").display());
            code
        }
        Err(e) => fail(e),
    }
}

fn cmd_oracle(args: &OracleArgs) -> i32 {
    let value = match read_json(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    // A full scenario file or a bare environment object.
    let report = if value.get("env").is_some() {
        match Scenario::from_value(value) {
            Ok(sc) => bound_report(&sc.mdp, &sc.costs, &sc.regular(), sc.oracle_tol),
            Err(e) => return fail(e),
        }
    } else {
        let env: crate::mdp::EnvSpec = match serde_json::from_value(value) {
            Ok(env) => env,
            Err(e) => return fail(format!("invalid environment: {e}")),
        };
        match env.build() {
            Ok((mdp, costs)) => {
                let regular: Vec<usize> = (0..costs.num_agents).collect();
                bound_report(&mdp, &costs, &regular, DEFAULT_TOL)
            }
            Err(e) => return fail(e),
        }
    };
    match report {
        Ok(report) => {
            println!("{:#}", report.to_json());
            EXIT_OK
        }
        Err(e) => fail(e),
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckGraphInput {
    graph: Digraph,
    #[serde(default)]
    adversary_sets: Vec<Vec<usize>>,
    /// Locality bound tested against each adversary set.
    #[serde(default)]
    f: Option<usize>,
    /// Robustness search ceiling; defaults to the node count.
    #[serde(default)]
    max_r: Option<usize>,
}

fn cmd_check_graph(args: &CheckGraphArgs) -> i32 {
    let value = match read_json(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let input: CheckGraphInput = if value.get("graph").is_some() {
        match serde_json::from_value(value) {
            Ok(input) => input,
            Err(e) => return fail(format!("invalid check-graph input: {e}")),
        }
    } else {
        match serde_json::from_value::<Digraph>(value) {
            Ok(graph) => CheckGraphInput { graph, adversary_sets: vec![], f: None, max_r: None },
            Err(e) => return fail(format!("invalid graph: {e}")),
        }
    };

    let g = &input.graph;
    let n = g.num_nodes();
    let cap = if args.force_large_graph { n } else { DEFAULT_ROBUSTNESS_CAP };
    if n > cap {
        eprintln!(
            "error: graph has {n} nodes; robustness brute force is capped at \
             {DEFAULT_ROBUSTNESS_CAP} (pass --force-large-graph to compute anyway)"
        );
        return EXIT_GRAPH_TOO_LARGE;
    }
    let max_r = input.max_r.unwrap_or(n);
    let robustness = match g.robustness_with_cap(max_r, cap) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_GRAPH_TOO_LARGE;
        }
    };

    let f = input.f.unwrap_or(1);
    let mut locality = Vec::new();
    for set in &input.adversary_sets {
        let adv = match AdversarySet::new(n, set.iter().copied()) {
            Ok(adv) => adv,
            Err(e) => return fail(format!("adversary set {set:?}: {e}")),
        };
        let verdict = match g.is_f_local(&adv, f) {
            Ok(v) => v,
            Err(e) => return fail(format!("adversary set {set:?}: {e}")),
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
    println!("{output:#}");
    EXIT_OK
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepInput {
    base: Value,
    #[serde(default)]
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    variants: Option<Vec<SweepVariant>>,
}

#[derive(serde::Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct SweepVariant {
    #[serde(default)]
    name: Option<String>,
    /// JSON merge patch applied to the base scenario.
    #[serde(default)]
    patch: Value,
}

/// RFC 7386 merge: objects merge key-wise, null removes, anything else
/// replaces.
fn merge_patch(base: &mut Value, patch: &Value) {
    match patch.as_object() {
        Some(p) => {
            if !base.is_object() {
                *base = Value::Object(Default::default());
            }
            let b = base.as_object_mut().expect("just ensured");
            for (k, v) in p {
                if v.is_null() {
                    b.remove(k);
                } else {
                    merge_patch(b.entry(k.clone()).or_insert(Value::Null), v);
                }
            }
        }
        None => *base = patch.clone(),
    }
}

fn sanitize_cell_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Keeps first occurrences in order; duplicates are redundant because runs
/// are deterministic in the seed.
fn dedup_seeds(seeds: &[u64]) -> (Vec<u64>, usize) {
    let mut seen = std::collections::BTreeSet::new();
    let mut kept = Vec::new();
    for &s in seeds {
        if seen.insert(s) {
            kept.push(s);
        }
    }
    let dropped = seeds.len() - kept.len();
    (kept, dropped)
}

struct SweepCell {
    name: String,
    variant: String,
    seed: u64,
    scenario: Scenario,
}

struct CellOutcome {
    name: String,
    variant: String,
    seed: u64,
    result: Result<(RunOutput, Option<TailEstimate>), String>,
}

fn cmd_sweep(args: &SweepArgs, verbose: bool) -> i32 {
    let value = match read_json(&args.input) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    let input: SweepInput = match serde_json::from_value(value) {
        Ok(input) => input,
        Err(e) => return fail(format!("invalid sweep input: {e}")),
    };

    let base_seed = input.base.get("seed").and_then(Value::as_u64).unwrap_or(0);
    let seeds = input.seeds.unwrap_or_else(|| vec![base_seed]);
    let (seeds, dropped) = dedup_seeds(&seeds);
    if dropped > 0 {
        eprintln!("warning: {dropped} duplicate seed(s) removed; runs are deterministic per seed");
    }
    let variants = input
        .variants
        .unwrap_or_else(|| vec![SweepVariant { name: Some("base".into()), patch: Value::Null }]);
    if seeds.is_empty() || variants.is_empty() {
        return fail("sweep grid is empty: needs at least one seed and one variant");
    }

    // Validation-first across the whole grid: any invalid cell stops the
    // sweep before anything is written.
    let mut cells = Vec::new();
    let mut violations = Vec::new();
    for (vi, variant) in variants.iter().enumerate() {
        let vname = variant
            .name
            .clone()
            .map(|n| sanitize_cell_name(&n))
            .unwrap_or_else(|| format!("v{vi}"));
        for &seed in &seeds {
            let mut cell_value = input.base.clone();
            if !variant.patch.is_null() {
                merge_patch(&mut cell_value, &variant.patch);
            }
            if let Some(obj) = cell_value.as_object_mut() {
                obj.insert("seed".into(), seed.into());
            }
            let name = format!("{vname}-s{seed}");
            match Scenario::from_value(cell_value) {
                Ok(scenario) => {
                    cells.push(SweepCell { name, variant: vname.clone(), seed, scenario })
                }
                Err(e) => violations.push(format!("cell {name}: {e}")),
            }
        }
    }
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("error: {v}");
        }
        return EXIT_CONFIG;
    }

    let dir = resolve_out_dir(args.out.clone());
    if let Err(e) = fs::create_dir_all(&dir) {
        return fail(format!("cannot create {}: {e}", dir.display()));
    }

    // Cells are isolated deterministic runs; order of execution is
    // irrelevant to their contents.
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|cell| {
            let cell_dir = dir.join(&cell.name);
            let result = execute_into(&cell.scenario, &cell_dir, false)
                .map(|(out, _)| {
                    let window = cell
                        .scenario
                        .tail_window
                        .unwrap_or_else(|| default_tail_window(out.trace.checkpoints.len()));
                    let tail = tail_estimate(&out.trace, window).ok();
                    (out, tail)
                })
                .map_err(|e| e.to_string());
            CellOutcome {
                name: cell.name.clone(),
                variant: cell.variant.clone(),
                seed: cell.seed,
                result,
            }
        })
        .collect();

    let mut csv = String::from(
        "cell,variant,seed,status,dist_max,dist_min,v_dist_max,diameter_max,q_max_max,q_min_min,policy_match_all\n",
    );
    let mut all_ok = true;
    let mut any_abort = false;
    for outcome in &outcomes {
        match &outcome.result {
            Ok((out, tail)) => {
                let status = if out.abort.is_some() { "aborted" } else { "ok" };
                if out.abort.is_some() {
                    any_abort = true;
                    all_ok = false;
                }
                let (dist_max, dist_min, v_dist_max, diam, qmax, qmin, pol) = match tail {
                    Some(t) => {
                        let dist_max = t.worst_dist();
                        let dist_min = t
                            .per_agent
                            .iter()
                            .map(|a| a.dist.min)
                            .fold(f64::INFINITY, f64::min);
                        let v_dist_max = t
                            .per_agent
                            .iter()
                            .map(|a| a.v_dist.max)
                            .fold(f64::NEG_INFINITY, f64::max);
                        let qmax = t
                            .per_agent
                            .iter()
                            .map(|a| a.q_max.max)
                            .fold(f64::NEG_INFINITY, f64::max);
                        let qmin = t
                            .per_agent
                            .iter()
                            .map(|a| a.q_min.min)
                            .fold(f64::INFINITY, f64::min);
                        let pol = t.per_agent.iter().all(|a| a.policy_match_all);
                        (
                            dist_max.to_string(),
                            dist_min.to_string(),
                            v_dist_max.to_string(),
                            t.diameter.max.to_string(),
                            qmax.to_string(),
                            qmin.to_string(),
                            u8::from(pol).to_string(),
                        )
                    }
                    None => (
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ),
                };
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    outcome.name,
                    outcome.variant,
                    outcome.seed,
                    status,
                    dist_max,
                    dist_min,
                    v_dist_max,
                    diam,
                    qmax,
                    qmin,
                    pol
                ));
                if verbose {
                    eprintln!("cell {}: {status}", outcome.name);
                }
            }
            Err(e) => {
                all_ok = false;
                eprintln!("error: cell {}: {e}", outcome.name);
                csv.push_str(&format!(
                    "{},{},{},error,,,,,,,\n",
                    outcome.name, outcome.variant, outcome.seed
                ));
            }
        }
    }
    if let Err(e) = fs::write(dir.join("aggregate.csv"), csv) {
        return fail(format!("cannot write aggregate: {e}"));
    }
    println!("{}", dir.join("aggregate.csv").display());
    if all_ok {
        EXIT_OK
    } else if any_abort {
        EXIT_ABORTED
    } else {
        EXIT_CONFIG
    }
}

/// Shared five-agent demo environment: 3 states, 2 actions, regular agents
/// 0..3 with cost offsets 0.25n, compromised agent 4.
fn demo_env() -> Value {
    let base = |i: usize, u: usize| 1.0 + 0.1 * i as f64 + u as f64;
    let mean_costs: Vec<Vec<Vec<f64>>> = (0..5)
        .map(|n| {
            let offset = if n < 4 { 0.25 * n as f64 } else { 1.0 };
            (0..3).map(|i| (0..2).map(|u| base(i, u) + offset).collect()).collect()
        })
        .collect();
    serde_json::json!({
        "num_states": 3,
        "num_actions": 2,
        "gamma": 0.5,
        "transitions": [
            [[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]],
            [[0.1, 0.6, 0.3], [0.7, 0.1, 0.2]],
            [[0.3, 0.1, 0.6], [0.2, 0.7, 0.1]]
        ],
        "mean_costs": mean_costs,
    })
}

fn complete_graph_json(n: usize) -> Value {
    serde_json::json!({"mode": "generated", "kind": "complete", "n": n})
}

fn cmd_attack_demo(args: &AttackDemoArgs, verbose: bool) -> i32 {
    let dir = resolve_out_dir(args.out.clone());
    let env = demo_env();
    let horizon = 200_000u64;

    // Demo 1: a frozen table drags the whole undefended network to itself.
    let frozen = vec![vec![7.0, 7.0]; 3];
    let fixed_scenario = serde_json::json!({
        "env": env,
        "graph": complete_graph_json(5),
        "adversaries": [
            {"agent": 4, "attack": {"kind": "fixed_value", "table": frozen.clone()}}
        ],
        "algorithm": {"kind": "qd"},
        "horizon": horizon,
        "checkpoint_every": 1000,
        "seed": 0,
        "reference_q": frozen,
    });

    // Demo 2: spoofed cost reports steer the honest protocol to a fixed
    // point of the adversary's choosing.
    let spoof_target_mean = 0.5f64;
    let (mdp, costs) = match serde_json::from_value::<crate::mdp::EnvSpec>(env.clone())
        .map_err(|e| e.to_string())
        .and_then(|spec| spec.build().map_err(|e| e.to_string()))
    {
        Ok(pair) => pair,
        Err(e) => return fail(e),
    };
    let target_sum = vec![spoof_target_mean * costs.num_agents as f64; mdp.num_pairs()];
    let pretended = cost_spoof_pretended(&costs, 4, &target_sum);
    let spoof_fp = match fixed_point(&mdp, &vec![spoof_target_mean; mdp.num_pairs()], DEFAULT_TOL)
    {
        Ok(fp) => fp,
        Err(e) => return fail(e),
    };
    let spoof_scenario = serde_json::json!({
        "env": demo_env(),
        "graph": complete_graph_json(5),
        "adversaries": [
            {"agent": 4, "attack": {"kind": "cost_spoof", "pretended_mean": pretended}}
        ],
        "algorithm": {"kind": "qd"},
        "horizon": horizon,
        "checkpoint_every": 1000,
        "seed": 0,
        "reference_q": spoof_fp.q_star.to_nested(),
    });

    let demos = [("fixed_value", fixed_scenario), ("cost_spoof", spoof_scenario)];
    if let Err(e) = fs::create_dir_all(&dir) {
        return fail(format!("cannot create {}: {e}", dir.display()));
    }
    for (name, scenario) in &demos {
        let path = dir.join(format!("{name}_demo.json"));
        if let Err(e) = fs::write(&path, format!("{scenario:#}\n")) {
            return fail(format!("cannot write {}: {e}", path.display()));
        }
    }

    for (name, scenario) in demos {
        let sc = match Scenario::from_value(scenario) {
            Ok(sc) => sc,
            Err(e) => return fail(format!("demo {name}: {e}")),
        };
        let (out, code) = match execute_into(&sc, &dir.join(name), false) {
            Ok(pair) => pair,
            Err(e) => return fail(format!("demo {name}: {e}")),
        };
        if code != EXIT_OK {
            eprintln!("demo {name} aborted");
            return code;
        }
        report_assumptions(&out, verbose);
        let window = default_tail_window(out.trace.checkpoints.len());
        let tail = match tail_estimate(&out.trace, window) {
            Ok(t) => t,
            Err(e) => return fail(format!("demo {name}: {e}")),
        };
        match name {
            "fixed_value" => println!(
                "fixed_value: tail max distance of regular tables to the frozen table = {:.4} (threshold 0.05)",
                tail.worst_dist()
            ),
            _ => {
                let v_dist = tail
                    .per_agent
                    .iter()
                    .map(|a| a.v_dist.max)
                    .fold(f64::NEG_INFINITY, f64::max);
                println!(
                    "cost_spoof: tail max value-function distance to the co-opted fixed point = {v_dist:.4} (threshold 0.05)"
                );
            }
        }
    }
    EXIT_OK
}
