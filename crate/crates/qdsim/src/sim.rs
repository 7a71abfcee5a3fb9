//! The experiment engine: scenario description, synchronous lockstep
//! execution, metric collection, tail estimation, and assumption auditing.
//!
//! Determinism contract: every random draw comes from a stream keyed by
//! `(seed, purpose, entity, sub, t)`; see the `*_rng` helpers. Two runs of
//! the same scenario produce byte-identical traces, and any single agent's
//! evolution can be replayed from the message log alone.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::AttackStrategy;
use crate::graphs::{AdversarySet, GraphSchedule, DEFAULT_ROBUSTNESS_CAP};
use crate::learning::{
    assemble_regular_update_matrix, combine_entry, trim_removal_mask, QTable, StepRecord,
    WeightSchedule,
};
use crate::mdp::{CostModel, EnvSpec, Mdp, Violation};
use crate::oracle::{bound_report, BoundReport, OracleError, DEFAULT_TOL};
use crate::rng::{RngStream, StreamPurpose};

/// Next-state draw for one scheduled pair: entity = flat pair index.
pub fn transition_rng(seed: u64, pair: usize, t: u64) -> RngStream {
    RngStream::new(seed, StreamPurpose::Transition, pair as u64, 0, t)
}

/// Cost observation draw: entity = agent, sub = flat pair index.
pub fn cost_rng(seed: u64, agent: usize, pair: usize, t: u64) -> RngStream {
    RngStream::new(seed, StreamPurpose::Cost, agent as u64, pair as u64, t)
}

/// Uniform action choice in trajectory mode.
pub fn controller_rng(seed: u64, t: u64) -> RngStream {
    RngStream::new(seed, StreamPurpose::Controller, 0, 0, t)
}

/// Adversarial emission randomness: entity = sender, sub = receiver.
pub fn attack_rng(seed: u64, sender: usize, receiver: usize, t: u64) -> RngStream {
    RngStream::new(seed, StreamPurpose::Attack, sender as u64, receiver as u64, t)
}

/// Initial-table draw for one agent.
pub fn init_rng(seed: u64, agent: usize) -> RngStream {
    RngStream::new(seed, StreamPurpose::Init, agent as u64, 0, 0)
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("oracle failure: {0}")]
    Oracle(#[from] OracleError),
    #[error("graph failure: {0}")]
    Graph(#[from] crate::graphs::GraphError),
    #[error("trace has {have} checkpoints, tail window needs at least {need}")]
    ShortTrace { have: usize, need: usize },
    #[error("tail window must be at least 1")]
    BadWindow,
    #[error("update hull violated at t = {t}, agent {agent}: {detail}")]
    Hull { t: u64, agent: usize, detail: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Update rule selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Qd,
    ResilientQd { f: usize },
}

impl Algorithm {
    /// Trim depth: `None` for the plain update.
    pub fn trim_f(&self) -> Option<usize> {
        match *self {
            Algorithm::Qd => None,
            Algorithm::ResilientQd { f } => Some(f),
        }
    }
}

/// How state-action samples are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Exploration {
    /// Every pair gets an independent next-state sample each step; the
    /// sample is shared by all agents.
    #[default]
    Generative,
    /// One chain driven by a uniformly random global controller.
    Trajectory {
        #[serde(default)]
        initial_state: usize,
    },
}

/// Initial table contents, identical shape for every agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitQ {
    #[default]
    Zeros,
    Constant { value: f64 },
    /// Per-agent seeded uniform draw on `[low, high)`.
    Uniform { low: f64, high: f64 },
}

/// Step-size and consensus parameters; absent fields take the defaults
/// eta = 1/(2N), b = eta, k0 = 100.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub eta: Option<f64>,
    pub b: Option<f64>,
    pub k0: Option<f64>,
}

/// One compromised agent and its behavior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryEntry {
    pub agent: usize,
    pub attack: AttackStrategy,
}

fn default_checkpoint() -> u64 {
    100
}

/// JSON form of a scenario. `Scenario::build` resolves defaults and
/// validates semantics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub env: EnvSpec,
    pub graph: GraphSchedule,
    #[serde(default)]
    pub adversaries: Vec<AdversaryEntry>,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub weights: Option<WeightSpec>,
    #[serde(default)]
    pub exploration: Exploration,
    pub horizon: u64,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: u64,
    /// Tail window in checkpoints; default is the last 10%.
    #[serde(default)]
    pub tail_window: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init_q: InitQ,
    /// Audit every resilient update against the regular-value hull.
    #[serde(default)]
    pub check_hull: bool,
    /// Distance reference override; defaults to the oracle fixed point of
    /// the regular-average costs.
    #[serde(default)]
    pub reference_q: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub oracle_tol: Option<f64>,
}

/// A validated, runnable experiment.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub mdp: Mdp,
    pub costs: CostModel,
    pub schedule: GraphSchedule,
    pub adversaries: BTreeMap<usize, AttackStrategy>,
    pub algorithm: Algorithm,
    pub eta: f64,
    pub b: f64,
    pub k0: f64,
    pub exploration: Exploration,
    pub horizon: u64,
    pub checkpoint_every: u64,
    pub tail_window: Option<usize>,
    pub seed: u64,
    pub init_q: InitQ,
    pub check_hull: bool,
    pub reference_q: Option<QTable>,
    pub oracle_tol: f64,
    /// Frozen emission tables, resolved per fixed-value adversary.
    frozen: BTreeMap<usize, QTable>,
    /// Flat pretended mean-cost tables per cost-spoofing adversary.
    pretended: BTreeMap<usize, Vec<f64>>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| SimError::Invalid(vec![Violation::new("json", e.to_string())]))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, SimError> {
        let spec: ScenarioSpec = serde_json::from_value(value)
            .map_err(|e| SimError::Invalid(vec![Violation::new("json", e.to_string())]))?;
        Self::build(spec)
    }

    /// Resolves defaults and validates every semantic constraint, reporting
    /// all violations at once.
    pub fn build(spec: ScenarioSpec) -> Result<Self, SimError> {
        let mut violations = Vec::new();

        let (mdp, costs) = match spec.env.build() {
            Ok(pair) => pair,
            Err(err) => return Err(SimError::Invalid(err.0)),
        };
        let n = costs.num_agents;

        if spec.graph.num_nodes() != n {
            violations.push(Violation::new(
                "graph",
                format!("has {} nodes but the cost model lists {n} agents", spec.graph.num_nodes()),
            ));
        }

        let mut adversaries = BTreeMap::new();
        let mut frozen = BTreeMap::new();
        let mut pretended = BTreeMap::new();
        for (idx, entry) in spec.adversaries.iter().enumerate() {
            let field = format!("adversaries[{idx}]");
            if entry.agent >= n {
                violations.push(Violation::new(
                    &field,
                    format!("agent {} out of range for {n} agents", entry.agent),
                ));
                continue;
            }
            if adversaries.insert(entry.agent, entry.attack.clone()).is_some() {
                violations.push(Violation::new(
                    &field,
                    format!("agent {} listed more than once", entry.agent),
                ));
                continue;
            }
            match &entry.attack {
                AttackStrategy::FixedValue { table } => {
                    match QTable::from_nested(entry.agent, table) {
                        Ok(q) if q.num_states() == mdp.num_states
                            && q.num_actions() == mdp.num_actions =>
                        {
                            if let Some(&bad) = q.values().iter().find(|v| !v.is_finite()) {
                                violations.push(Violation::new(
                                    format!("{field}.table"),
                                    format!("entries must be finite, got {bad}"),
                                ));
                            } else {
                                frozen.insert(entry.agent, q);
                            }
                        }
                        Ok(q) => violations.push(Violation::new(
                            format!("{field}.table"),
                            format!(
                                "shape {}x{} does not match the {}x{} environment",
                                q.num_states(),
                                q.num_actions(),
                                mdp.num_states,
                                mdp.num_actions
                            ),
                        )),
                        Err(msg) => {
                            violations.push(Violation::new(format!("{field}.table"), msg))
                        }
                    }
                }
                AttackStrategy::CostSpoof { pretended_mean } => {
                    match QTable::from_nested(entry.agent, pretended_mean) {
                        Ok(q) if q.num_states() == mdp.num_states
                            && q.num_actions() == mdp.num_actions =>
                        {
                            if let Some(&bad) = q.values().iter().find(|v| !v.is_finite()) {
                                violations.push(Violation::new(
                                    format!("{field}.pretended_mean"),
                                    format!("entries must be finite, got {bad}"),
                                ));
                            } else {
                                pretended.insert(entry.agent, q.values().to_vec());
                            }
                        }
                        Ok(q) => violations.push(Violation::new(
                            format!("{field}.pretended_mean"),
                            format!(
                                "shape {}x{} does not match the {}x{} environment",
                                q.num_states(),
                                q.num_actions(),
                                mdp.num_states,
                                mdp.num_actions
                            ),
                        )),
                        Err(msg) => violations
                            .push(Violation::new(format!("{field}.pretended_mean"), msg)),
                    }
                }
                AttackStrategy::RandomNoise { amplitude } => {
                    if !amplitude.is_finite() || *amplitude < 0.0 {
                        violations.push(Violation::new(
                            format!("{field}.amplitude"),
                            format!("must be finite and non-negative, got {amplitude}"),
                        ));
                    }
                }
                AttackStrategy::Conflicting { base, per_receiver } => {
                    if !base.is_finite() || !per_receiver.is_finite() {
                        violations.push(Violation::new(
                            &field,
                            format!("offsets must be finite, got base {base}, per_receiver {per_receiver}"),
                        ));
                    }
                }
                AttackStrategy::MaxPush { delta } => {
                    if !delta.is_finite() {
                        violations.push(Violation::new(
                            format!("{field}.delta"),
                            format!("must be finite, got {delta}"),
                        ));
                    }
                }
            }
        }
        if !adversaries.is_empty() && adversaries.len() >= n {
            violations.push(Violation::new(
                "adversaries",
                "every agent is adversarial; at least one regular agent is required",
            ));
        }

        let weights = spec.weights.unwrap_or_default();
        let eta = weights.eta.unwrap_or(1.0 / (2.0 * n.max(1) as f64));
        let b = weights.b.unwrap_or(eta);
        let k0 = weights.k0.unwrap_or(100.0);
        if n > 0 {
            if let Err(err) = WeightSchedule::new(n, 1, eta, b, k0) {
                violations.push(Violation::new("weights", err.to_string()));
            }
        }

        if let Exploration::Trajectory { initial_state } = spec.exploration {
            if initial_state >= mdp.num_states {
                violations.push(Violation::new(
                    "exploration.initial_state",
                    format!("state {initial_state} out of range for {} states", mdp.num_states),
                ));
            }
        }
        if let InitQ::Uniform { low, high } = spec.init_q {
            if !(low.is_finite() && high.is_finite() && low < high) {
                violations.push(Violation::new(
                    "init_q",
                    format!("uniform bounds must be finite with low < high, got [{low}, {high})"),
                ));
            }
        }
        if let InitQ::Constant { value } = spec.init_q {
            if !value.is_finite() {
                violations.push(Violation::new(
                    "init_q.value",
                    format!("must be finite, got {value}"),
                ));
            }
        }

        if spec.checkpoint_every == 0 {
            violations.push(Violation::new("checkpoint_every", "must be at least 1"));
        }
        if spec.tail_window == Some(0) {
            violations.push(Violation::new("tail_window", "must be at least 1"));
        }
        let oracle_tol = spec.oracle_tol.unwrap_or(DEFAULT_TOL);
        if !oracle_tol.is_finite() || oracle_tol <= 0.0 {
            violations.push(Violation::new(
                "oracle_tol",
                format!("must be positive and finite, got {oracle_tol}"),
            ));
        }

        let reference_q = match &spec.reference_q {
            None => None,
            Some(nested) => match QTable::from_nested(0, nested) {
                Ok(q) if q.num_states() == mdp.num_states
                    && q.num_actions() == mdp.num_actions =>
                {
                    if let Some(&bad) = q.values().iter().find(|v| !v.is_finite()) {
                        violations.push(Violation::new(
                            "reference_q",
                            format!("entries must be finite, got {bad}"),
                        ));
                        None
                    } else {
                        Some(q)
                    }
                }
                Ok(q) => {
                    violations.push(Violation::new(
                        "reference_q",
                        format!(
                            "shape {}x{} does not match the {}x{} environment",
                            q.num_states(),
                            q.num_actions(),
                            mdp.num_states,
                            mdp.num_actions
                        ),
                    ));
                    None
                }
                Err(msg) => {
                    violations.push(Violation::new("reference_q", msg));
                    None
                }
            },
        };

        if !violations.is_empty() {
            return Err(SimError::Invalid(violations));
        }
        Ok(Scenario {
            mdp,
            costs,
            schedule: spec.graph,
            adversaries,
            algorithm: spec.algorithm,
            eta,
            b,
            k0,
            exploration: spec.exploration,
            horizon: spec.horizon,
            checkpoint_every: spec.checkpoint_every,
            tail_window: spec.tail_window,
            seed: spec.seed,
            init_q: spec.init_q,
            check_hull: spec.check_hull,
            reference_q,
            oracle_tol,
            frozen,
            pretended,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.costs.num_agents
    }

    /// Ascending regular agent indices.
    pub fn regular(&self) -> Vec<usize> {
        (0..self.num_agents()).filter(|a| !self.adversaries.contains_key(a)).collect()
    }

    pub fn adversary_set(&self) -> AdversarySet {
        AdversarySet::new(self.num_agents(), self.adversaries.keys().copied())
            .expect("validated at build time")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Where the distance reference came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Oracle fixed point of the regular-average costs.
    Oracle,
    /// `reference_q` supplied in the scenario.
    Provided,
}

/// Metrics for one regular agent at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub agent: usize,
    /// `||Q^n - Q_ref||_inf`.
    pub dist: f64,
    /// `max_i |min_u Q^n(i,u) - V_ref(i)|`.
    pub v_dist: f64,
    pub q_max: f64,
    pub q_min: f64,
    /// Greedy policy equals the reference policy at every state.
    pub policy_match: bool,
}

/// One trace row: global time plus per-regular-agent metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Steps completed when the snapshot was taken.
    pub t: u64,
    pub agents: Vec<AgentMetrics>,
    /// `max_{n,l regular} ||Q^n - Q^l||_inf`.
    pub diameter: f64,
    /// Visit count per flat pair index (shared by all agents in lockstep).
    pub visits: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct RunTrace {
    pub checkpoints: Vec<Checkpoint>,
    pub regular: Vec<usize>,
    pub num_states: usize,
    pub num_actions: usize,
}

/// Diagnostic for a run cut short by a non-finite table entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub t: u64,
    pub agent: usize,
    pub state: usize,
    pub action: usize,
    /// The offending value; serialized as a string since JSON has no
    /// infinities.
    pub value: f64,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: RunTrace,
    /// Final tables for every agent, adversaries included.
    pub final_q: Vec<QTable>,
    pub bound_report: BoundReport,
    pub assumptions: AssumptionReport,
    pub reference: ReferenceKind,
    pub abort: Option<AbortInfo>,
}

/// Engine knobs that are not part of the scenario.
#[derive(Default)]
pub struct RunOptions<'a> {
    /// JSONL sink receiving one line per delivered message.
    pub message_log: Option<&'a mut dyn Write>,
    /// Diagnostic: force every step size a_k to zero, leaving only the
    /// consensus map.
    pub freeze_innovation: bool,
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, SimError> {
    run_with_options(scenario, RunOptions::default())
}

pub fn run_with_options(
    scenario: &Scenario,
    mut opts: RunOptions<'_>,
) -> Result<RunOutput, SimError> {
    let sc = scenario;
    let n = sc.num_agents();
    let num_actions = sc.mdp.num_actions;
    let pairs = sc.mdp.num_pairs();
    let gamma = sc.mdp.gamma;
    let regular = sc.regular();
    let adversary_nodes: std::collections::BTreeSet<usize> =
        sc.adversaries.keys().copied().collect();

    let report = bound_report(&sc.mdp, &sc.costs, &regular, sc.oracle_tol)?;
    let (reference, ref_q) = match &sc.reference_q {
        Some(q) => (ReferenceKind::Provided, q.clone()),
        None => (ReferenceKind::Oracle, report.regular_fixed_point.q_star.clone()),
    };
    let ref_v: Vec<f64> = (0..sc.mdp.num_states).map(|i| ref_q.min_over_actions(i)).collect();
    let ref_policy: Vec<usize> =
        (0..sc.mdp.num_states).map(|i| ref_q.greedy_action(i)).collect();

    let assumptions = verify_assumptions(sc);

    // Initial tables; fixed-value adversaries start (and stay) frozen.
    let mut tables: Vec<QTable> = (0..n)
        .map(|a| match sc.init_q {
            InitQ::Zeros => QTable::zeros(a, sc.mdp.num_states, num_actions),
            InitQ::Constant { value } => {
                QTable::constant(a, sc.mdp.num_states, num_actions, value)
            }
            InitQ::Uniform { low, high } => {
                let mut rng = init_rng(sc.seed, a);
                let values = (0..pairs).map(|_| rng.uniform_range(low, high)).collect();
                QTable::from_values(a, sc.mdp.num_states, num_actions, values)
            }
        })
        .collect();
    for (&a, table) in &sc.frozen {
        tables[a] = table.clone();
    }

    let mut weights: Vec<WeightSchedule> = (0..n)
        .map(|_| {
            let mut w = WeightSchedule::new(n, pairs, sc.eta, sc.b, sc.k0)
                .expect("validated at build time");
            if opts.freeze_innovation {
                w.freeze_innovation();
            }
            w
        })
        .collect();

    // Which agents run the (honest) update rule.
    let updating: Vec<bool> = (0..n)
        .map(|a| sc.adversaries.get(&a).is_none_or(|s| s.runs_honest_update()))
        .collect();
    // Effective mean costs: spoofers sample around their pretended table.
    let effective_mean: Vec<&[f64]> = (0..n)
        .map(|a| {
            sc.pretended.get(&a).map(|v| v.as_slice()).unwrap_or_else(|| sc.costs.agent_means(a))
        })
        .collect();

    let trim_f = sc.algorithm.trim_f();
    let mut trace = RunTrace {
        checkpoints: Vec::new(),
        regular: regular.clone(),
        num_states: sc.mdp.num_states,
        num_actions,
    };
    let mut abort: Option<AbortInfo> = None;
    let mut chain_state = match sc.exploration {
        Exploration::Trajectory { initial_state } => initial_state,
        Exploration::Generative => 0,
    };

    let mut visited: Vec<(usize, usize)> = Vec::with_capacity(pairs);
    let mut incoming: Vec<(usize, f64)> = Vec::new();
    let mut next_vals: Vec<Vec<f64>> = tables.iter().map(|q| q.values().to_vec()).collect();
    let mut emitted: BTreeMap<(usize, usize), QTable> = BTreeMap::new();

    'steps: for t in 0..sc.horizon {
        let graph = sc.schedule.at(t);

        visited.clear();
        match sc.exploration {
            Exploration::Generative => {
                for p in 0..pairs {
                    let (i, u) = (p / num_actions, p % num_actions);
                    let j =
                        sc.mdp.sample_next_state(i, u, &mut transition_rng(sc.seed, p, t));
                    visited.push((p, j));
                }
            }
            Exploration::Trajectory { .. } => {
                let u = controller_rng(sc.seed, t).pick(num_actions);
                let p = chain_state * num_actions + u;
                let j = sc
                    .mdp
                    .sample_next_state(chain_state, u, &mut transition_rng(sc.seed, p, t));
                visited.push((p, j));
                chain_state = j;
            }
        }

        // Per-edge adversarial payloads for this step.
        emitted.clear();
        for (&sender, strategy) in &sc.adversaries {
            for &receiver in graph.out_neighbors(sender) {
                let msg = strategy.emit(
                    &tables[sender],
                    receiver,
                    &mut attack_rng(sc.seed, sender, receiver, t),
                );
                emitted.insert((sender, receiver), msg.payload);
            }
        }

        if let Some(log) = opts.message_log.as_deref_mut() {
            for receiver in 0..n {
                for &sender in graph.in_neighbors(receiver) {
                    let payload = emitted
                        .get(&(sender, receiver))
                        .unwrap_or(&tables[sender]);
                    let line = serde_json::json!({
                        "t": t,
                        "sender": sender,
                        "receiver": receiver,
                        "payload": payload.to_nested(),
                    });
                    writeln!(log, "{line}")?;
                }
            }
        }

        for agent in 0..n {
            if !updating[agent] {
                continue;
            }
            let in_nb = graph.in_neighbors(agent);
            for &(p, next_j) in &visited {
                let (i, u) = (p / num_actions, p % num_actions);
                let mean = effective_mean[agent][p];
                let cost = if sc.costs.noise[agent].is_none() {
                    mean
                } else {
                    mean + sc.costs.noise[agent].draw(&mut cost_rng(sc.seed, agent, p, t))
                };
                let own = tables[agent].values()[p];
                incoming.clear();
                for &l in in_nb {
                    let v = emitted
                        .get(&(l, agent))
                        .map(|q| q.values()[p])
                        .unwrap_or_else(|| tables[l].values()[p]);
                    incoming.push((l, v));
                }
                let removed = match trim_f {
                    Some(f) => trim_removal_mask(own, &incoming, f),
                    None => 0u64,
                };
                let a = weights[agent].innovation_step(p);
                let target = cost + gamma * tables[agent].min_over_actions(next_j);
                let retained = incoming
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| removed & (1 << idx) == 0)
                    .map(|(_, &(_, v))| v);
                let value = combine_entry(own, retained, a, sc.b, target);
                weights[agent].record_visit(p);

                if sc.check_hull && trim_f.is_some() && !adversary_nodes.contains(&agent) {
                    let record = StepRecord {
                        state: i,
                        action: u,
                        own_value: own,
                        incoming: incoming.clone(),
                        retained: incoming
                            .iter()
                            .enumerate()
                            .filter(|(idx, _)| removed & (1 << idx) == 0)
                            .map(|(_, &pair)| pair)
                            .collect(),
                        consensus_weight: sc.b,
                        innovation_step: a,
                        innovation_target: target,
                        updated_value: value,
                    };
                    if let Err(err) = assemble_regular_update_matrix(&record, &adversary_nodes)
                    {
                        return Err(SimError::Hull {
                            t,
                            agent,
                            detail: err.to_string(),
                        });
                    }
                }

                if !value.is_finite() {
                    abort = Some(AbortInfo { t, agent, state: i, action: u, value });
                    break 'steps;
                }
                next_vals[agent][p] = value;
            }
        }

        for agent in 0..n {
            if updating[agent] {
                tables[agent].values_mut().copy_from_slice(&next_vals[agent]);
            }
        }

        if (t + 1) % sc.checkpoint_every == 0 {
            trace.checkpoints.push(make_checkpoint(
                t + 1,
                &tables,
                &regular,
                &ref_q,
                &ref_v,
                &ref_policy,
                &weights,
            ));
        }
    }

    if abort.is_none() && sc.horizon > 0 && !sc.horizon.is_multiple_of(sc.checkpoint_every) {
        trace.checkpoints.push(make_checkpoint(
            sc.horizon,
            &tables,
            &regular,
            &ref_q,
            &ref_v,
            &ref_policy,
            &weights,
        ));
    }

    Ok(RunOutput {
        trace,
        final_q: tables,
        bound_report: report,
        assumptions,
        reference,
        abort,
    })
}

fn make_checkpoint(
    t: u64,
    tables: &[QTable],
    regular: &[usize],
    ref_q: &QTable,
    ref_v: &[f64],
    ref_policy: &[usize],
    weights: &[WeightSchedule],
) -> Checkpoint {
    let num_states = ref_q.num_states();
    let agents = regular
        .iter()
        .map(|&a| {
            let q = &tables[a];
            let mut v_dist: f64 = 0.0;
            let mut policy_match = true;
            for i in 0..num_states {
                v_dist = v_dist.max((q.min_over_actions(i) - ref_v[i]).abs());
                if q.greedy_action(i) != ref_policy[i] {
                    policy_match = false;
                }
            }
            let q_max = q.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let q_min = q.values().iter().copied().fold(f64::INFINITY, f64::min);
            AgentMetrics { agent: a, dist: q.sup_distance(ref_q), v_dist, q_max, q_min, policy_match }
        })
        .collect();
    let mut diameter: f64 = 0.0;
    for (idx, &a) in regular.iter().enumerate() {
        for &b in &regular[idx + 1..] {
            diameter = diameter.max(tables[a].sup_distance(&tables[b]));
        }
    }
    let visits = weights[regular[0]].visit_counts().to_vec();
    Checkpoint { t, agents, diameter, visits }
}

/// Max and min of one metric over the tail window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTail {
    pub max: f64,
    pub min: f64,
}

fn metric_tail(values: impl Iterator<Item = f64>) -> MetricTail {
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for v in values {
        max = max.max(v);
        min = min.min(v);
    }
    MetricTail { max, min }
}

/// Tail summary for one regular agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentTail {
    pub agent: usize,
    pub dist: MetricTail,
    pub v_dist: MetricTail,
    pub q_max: MetricTail,
    pub q_min: MetricTail,
    /// Policy matched the reference at every tail checkpoint.
    pub policy_match_all: bool,
    /// Policy matched at some tail checkpoint.
    pub policy_match_any: bool,
}

/// Extrema of every metric over the last `window` checkpoints: the max is
/// the finite-sample limsup surrogate, the min the liminf one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub window: usize,
    pub from_t: u64,
    pub to_t: u64,
    pub per_agent: Vec<AgentTail>,
    pub diameter: MetricTail,
}

impl TailEstimate {
    /// Largest tail-max distance across regular agents.
    pub fn worst_dist(&self) -> f64 {
        self.per_agent.iter().map(|a| a.dist.max).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn tail_estimate(trace: &RunTrace, window: usize) -> Result<TailEstimate, SimError> {
    if window == 0 {
        return Err(SimError::BadWindow);
    }
    let have = trace.checkpoints.len();
    if have < window {
        return Err(SimError::ShortTrace { have, need: window });
    }
    let tail = &trace.checkpoints[have - window..];
    let per_agent = trace
        .regular
        .iter()
        .enumerate()
        .map(|(slot, &agent)| AgentTail {
            agent,
            dist: metric_tail(tail.iter().map(|c| c.agents[slot].dist)),
            v_dist: metric_tail(tail.iter().map(|c| c.agents[slot].v_dist)),
            q_max: metric_tail(tail.iter().map(|c| c.agents[slot].q_max)),
            q_min: metric_tail(tail.iter().map(|c| c.agents[slot].q_min)),
            policy_match_all: tail.iter().all(|c| c.agents[slot].policy_match),
            policy_match_any: tail.iter().any(|c| c.agents[slot].policy_match),
        })
        .collect();
    Ok(TailEstimate {
        window,
        from_t: tail.first().map(|c| c.t).unwrap_or(0),
        to_t: tail.last().map(|c| c.t).unwrap_or(0),
        per_agent,
        diameter: metric_tail(tail.iter().map(|c| c.diameter)),
    })
}

/// Default tail window: the last 10% of checkpoints, at least 1.
pub fn default_tail_window(num_checkpoints: usize) -> usize {
    (num_checkpoints / 10).max(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
}

/// One audited prerequisite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Warn)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: String) {
        self.checks.push(AssumptionCheck { name: name.into(), status, detail });
    }
}

/// Audits the scenario against the protocol's prerequisites: every scheduled
/// graph rooted; for the resilient algorithm, (2F+1)-robustness and
/// F-locality of the adversary placement; and pair visitation (by
/// construction in generative mode, empirically in trajectory mode).
/// Report-only: failures become warnings, never errors.
pub fn verify_assumptions(sc: &Scenario) -> AssumptionReport {
    let mut report = AssumptionReport::default();

    let unrooted: Vec<usize> = sc
        .schedule
        .members()
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_rooted())
        .map(|(idx, _)| idx)
        .collect();
    if unrooted.is_empty() {
        report.push(
            "rooted",
            CheckStatus::Pass,
            format!("all {} scheduled graph(s) are rooted", sc.schedule.period()),
        );
    } else {
        report.push(
            "rooted",
            CheckStatus::Warn,
            format!("scheduled graph(s) {unrooted:?} have no root"),
        );
    }

    if let Algorithm::ResilientQd { f } = sc.algorithm {
        let need = 2 * f + 1;
        if !sc.schedule.is_static() {
            report.push(
                "robustness",
                CheckStatus::Warn,
                "trimmed consensus expects a time-invariant graph; schedule is cyclic"
                    .to_string(),
            );
        } else {
            let g = sc.schedule.at(0);
            match g.robustness_with_cap(need, DEFAULT_ROBUSTNESS_CAP) {
                Ok(r) if r >= need => report.push(
                    "robustness",
                    CheckStatus::Pass,
                    format!("graph is {r}-robust, needs {need} for f = {f}"),
                ),
                Ok(r) => report.push(
                    "robustness",
                    CheckStatus::Warn,
                    format!("graph robustness {r} is below the required {need} for f = {f}"),
                ),
                Err(err) => report.push(
                    "robustness",
                    CheckStatus::Warn,
                    format!("robustness not checked: {err}"),
                ),
            }
        }

        let adv = sc.adversary_set();
        let mut violating = Vec::new();
        for (idx, g) in sc.schedule.members().iter().enumerate() {
            match g.is_f_local(&adv, f) {
                Ok(true) => {}
                Ok(false) => violating.push(idx),
                Err(err) => {
                    report.push(
                        "f_local",
                        CheckStatus::Warn,
                        format!("locality not checked: {err}"),
                    );
                    violating.clear();
                    break;
                }
            }
        }
        if report.checks.iter().all(|c| c.name != "f_local") {
            if violating.is_empty() {
                report.push(
                    "f_local",
                    CheckStatus::Pass,
                    format!("adversary set is {f}-local in every scheduled graph"),
                );
            } else {
                report.push(
                    "f_local",
                    CheckStatus::Warn,
                    format!(
                        "some regular node has more than {f} adversarial in-neighbors in graph(s) {violating:?}"
                    ),
                );
            }
        }
    }

    match sc.exploration {
        Exploration::Generative => report.push(
            "visitation",
            CheckStatus::Pass,
            "generative mode schedules every pair every step".to_string(),
        ),
        Exploration::Trajectory { initial_state } => {
            // Empirical only: infinite-visitation is an almost-sure property
            // the finite run cannot certify.
            let mut counts = vec![0u64; sc.mdp.num_pairs()];
            let mut x = initial_state;
            for t in 0..sc.horizon {
                let u = controller_rng(sc.seed, t).pick(sc.mdp.num_actions);
                let p = x * sc.mdp.num_actions + u;
                counts[p] += 1;
                x = sc.mdp.sample_next_state(x, u, &mut transition_rng(sc.seed, p, t));
            }
            let min = counts.iter().copied().min().unwrap_or(0);
            let status = if min > 0 { CheckStatus::Pass } else { CheckStatus::Warn };
            report.push(
                "visitation",
                status,
                format!(
                    "empirical min visit count over pairs at horizon {}: {min} (almost-sure visitation is not certifiable from a finite run)",
                    sc.horizon
                ),
            );
        }
    }

    report
}

/// CSV rendering of a trace: one row per (checkpoint, regular agent).
pub fn trace_to_csv(trace: &RunTrace) -> String {
    let mut out = String::from("t,agent,dist,v_dist,diameter,q_max,q_min,policy_match,min_visits\n");
    for cp in &trace.checkpoints {
        let min_visits = cp.visits.iter().copied().min().unwrap_or(0);
        for m in &cp.agents {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                cp.t,
                m.agent,
                m.dist,
                m.v_dist,
                cp.diameter,
                m.q_max,
                m.q_min,
                u8::from(m.policy_match),
                min_visits
            ));
        }
    }
    out
}

/// Versioned run summary: tail estimates, assumption report, bound report,
/// and final tables.
pub fn summary_json(sc: &Scenario, out: &RunOutput) -> serde_json::Value {
    let num_checkpoints = out.trace.checkpoints.len();
    let window = sc.tail_window.unwrap_or_else(|| default_tail_window(num_checkpoints));
    let tail = tail_estimate(&out.trace, window).ok();
    let final_q: Vec<serde_json::Value> = out
        .final_q
        .iter()
        .map(|q| serde_json::json!({ "agent": q.owner, "q": q.to_nested() }))
        .collect();
    serde_json::json!({
        "version": 1,
        "seed": sc.seed,
        "horizon": sc.horizon,
        "algorithm": sc.algorithm,
        "num_agents": sc.num_agents(),
        "regular": out.trace.regular,
        "reference": out.reference,
        "aborted": out.abort.map(|a| serde_json::json!({
            "t": a.t,
            "agent": a.agent,
            "state": a.state,
            "action": a.action,
            "value": a.value.to_string(),
        })),
        "checkpoints": num_checkpoints,
        "tail": tail,
        "assumptions": out.assumptions,
        "oracle": out.bound_report.to_json(),
        "final_q": final_q,
        "final_visits": out.trace.checkpoints.last().map(|c| c.visits.clone()),
    })
}
