//! Finite controlled MDP shared by all agents, plus per-agent cost models.
//!
//! Tensor layouts are flat row-major `Vec<f64>`:
//! transitions are indexed `(state, action, next_state)`, mean costs
//! `(agent, state, action)`. The JSON forms use the same nesting order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Tolerance for transition rows summing to one.
pub const PROB_TOL: f64 = 1e-12;

/// A single named validity failure. `field` uses index notation such as
/// `transitions[1][0]` so messages point at the offending entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Construction-time rejection carrying every violation found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvalidModel(pub Vec<Violation>);

impl fmt::Display for InvalidModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid model: ")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for InvalidModel {}

/// Finite MDP: `num_states` states, `num_actions` actions shared across
/// states, transition tensor `p(j | i, u)`, discount factor `gamma`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    /// Flat `(i, u, j)` row-major probabilities, length `S * A * S`.
    pub transitions: Vec<f64>,
}

impl Mdp {
    /// Validating constructor; collects every violation rather than stopping
    /// at the first.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        gamma: f64,
        transitions: Vec<f64>,
    ) -> Result<Self, InvalidModel> {
        let mdp = Mdp { num_states, num_actions, gamma, transitions };
        let violations = mdp.validate();
        if violations.is_empty() {
            Ok(mdp)
        } else {
            Err(InvalidModel(violations))
        }
    }

    /// Returns every invariant violation; empty iff the MDP is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_states == 0 {
            out.push(Violation::new("num_states", "must be at least 1"));
        }
        if self.num_actions == 0 {
            out.push(Violation::new("num_actions", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            out.push(Violation::new(
                "gamma",
                format!("must lie strictly inside (0, 1), got {}", self.gamma),
            ));
        }
        let expected = self.num_states * self.num_actions * self.num_states;
        if self.transitions.len() != expected {
            out.push(Violation::new(
                "transitions",
                format!("expected {expected} entries, got {}", self.transitions.len()),
            ));
            return out;
        }
        for i in 0..self.num_states {
            for u in 0..self.num_actions {
                let row = self.row_unchecked(i, u);
                let mut sum = 0.0;
                let mut row_ok = true;
                for (j, &p) in row.iter().enumerate() {
                    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                        out.push(Violation::new(
                            format!("transitions[{i}][{u}][{j}]"),
                            format!("probability must lie in [0, 1], got {p}"),
                        ));
                        row_ok = false;
                    }
                    sum += p;
                }
                if row_ok && (sum - 1.0).abs() > PROB_TOL {
                    out.push(Violation::new(
                        format!("transitions[{i}][{u}]"),
                        format!("row sums to {sum}, expected 1"),
                    ));
                }
            }
        }
        out
    }

    pub fn num_pairs(&self) -> usize {
        self.num_states * self.num_actions
    }

    /// Flat index of the state-action pair `(i, u)`.
    #[inline]
    pub fn pair_index(&self, i: usize, u: usize) -> usize {
        i * self.num_actions + u
    }

    #[inline]
    pub fn prob(&self, i: usize, u: usize, j: usize) -> f64 {
        assert!(j < self.num_states, "next-state index {j} out of range");
        self.row(i, u)[j]
    }

    /// Transition row `p(· | i, u)`.
    #[inline]
    pub fn row(&self, i: usize, u: usize) -> &[f64] {
        assert!(i < self.num_states, "state index {i} out of range");
        assert!(u < self.num_actions, "action index {u} out of range");
        self.row_unchecked(i, u)
    }

    #[inline]
    fn row_unchecked(&self, i: usize, u: usize) -> &[f64] {
        let start = (i * self.num_actions + u) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// Draws the next state with probability `p(j | i, u)`.
    pub fn sample_next_state(&self, i: usize, u: usize, rng: &mut RngStream) -> usize {
        rng.pick_weighted(self.row(i, u))
    }
}

/// Zero-mean observation-noise family attached to an agent's costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// `param` is the standard deviation.
    Gaussian { param: f64 },
    /// `param` is the half-width; draws are uniform on `[-param, param)`.
    Uniform { param: f64 },
}

impl NoiseKind {
    pub fn is_none(&self) -> bool {
        matches!(self, NoiseKind::None)
    }

    pub fn draw(&self, rng: &mut RngStream) -> f64 {
        match *self {
            NoiseKind::None => 0.0,
            NoiseKind::Gaussian { param } => rng.gaussian(param),
            NoiseKind::Uniform { param } => rng.symmetric_uniform(param),
        }
    }

    fn check(&self, field: &str, out: &mut Vec<Violation>) {
        let param = match *self {
            NoiseKind::None => return,
            NoiseKind::Gaussian { param } | NoiseKind::Uniform { param } => param,
        };
        if !param.is_finite() || param < 0.0 {
            out.push(Violation::new(
                field,
                format!("noise parameter must be finite and non-negative, got {param}"),
            ));
        }
    }
}

/// Per-agent mean costs plus the noise attached to each agent's draws.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    pub num_agents: usize,
    pub num_states: usize,
    pub num_actions: usize,
    /// Flat `(agent, state, action)` row-major means, length `N * S * A`.
    pub mean: Vec<f64>,
    /// One noise descriptor per agent.
    pub noise: Vec<NoiseKind>,
}

impl CostModel {
    pub fn new(
        num_agents: usize,
        num_states: usize,
        num_actions: usize,
        mean: Vec<f64>,
        noise: Vec<NoiseKind>,
    ) -> Result<Self, InvalidModel> {
        let costs = CostModel { num_agents, num_states, num_actions, mean, noise };
        let violations = costs.validate();
        if violations.is_empty() {
            Ok(costs)
        } else {
            Err(InvalidModel(violations))
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.num_agents == 0 {
            out.push(Violation::new("mean_costs", "need at least one agent"));
        }
        let expected = self.num_agents * self.num_states * self.num_actions;
        if self.mean.len() != expected {
            out.push(Violation::new(
                "mean_costs",
                format!("expected {expected} entries, got {}", self.mean.len()),
            ));
        } else {
            for n in 0..self.num_agents {
                for i in 0..self.num_states {
                    for u in 0..self.num_actions {
                        let c = self.mean[(n * self.num_states + i) * self.num_actions + u];
                        if !c.is_finite() {
                            out.push(Violation::new(
                                format!("mean_costs[{n}][{i}][{u}]"),
                                format!("mean cost must be finite, got {c}"),
                            ));
                        }
                    }
                }
            }
        }
        if self.noise.len() != self.num_agents {
            out.push(Violation::new(
                "noise",
                format!(
                    "expected one descriptor per agent ({}), got {}",
                    self.num_agents,
                    self.noise.len()
                ),
            ));
        }
        for (n, kind) in self.noise.iter().enumerate() {
            kind.check(&format!("noise[{n}]"), &mut out);
        }
        out
    }

    #[inline]
    pub fn mean_at(&self, n: usize, i: usize, u: usize) -> f64 {
        assert!(n < self.num_agents, "agent index {n} out of range");
        assert!(i < self.num_states, "state index {i} out of range");
        assert!(u < self.num_actions, "action index {u} out of range");
        self.mean[(n * self.num_states + i) * self.num_actions + u]
    }

    /// Agent `n`'s mean-cost table as a flat `(i, u)` slice.
    pub fn agent_means(&self, n: usize) -> &[f64] {
        assert!(n < self.num_agents, "agent index {n} out of range");
        let len = self.num_states * self.num_actions;
        &self.mean[n * len..(n + 1) * len]
    }

    /// One stochastic cost observation: mean plus a zero-mean noise draw.
    pub fn sample(&self, n: usize, i: usize, u: usize, rng: &mut RngStream) -> f64 {
        self.mean_at(n, i, u) + self.noise[n].draw(rng)
    }

    /// Arithmetic mean of the listed agents' mean-cost tables, flat `(i, u)`.
    pub fn mean_over(&self, agents: &[usize]) -> Vec<f64> {
        assert!(!agents.is_empty(), "mean over an empty agent set");
        let len = self.num_states * self.num_actions;
        let mut out = vec![0.0; len];
        for &n in agents {
            let table = self.agent_means(n);
            for (o, c) in out.iter_mut().zip(table) {
                *o += c;
            }
        }
        for o in &mut out {
            *o /= agents.len() as f64;
        }
        out
    }
}

/// Noise field of the JSON document: a single descriptor applied to every
/// agent, or one descriptor per agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Shared(NoiseKind),
    PerAgent(Vec<NoiseKind>),
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::Shared(NoiseKind::None)
    }
}

/// JSON form of an environment: MDP plus cost model in one document.
/// Nesting is row-major: `transitions[state][action][next_state]`,
/// `mean_costs[agent][state][action]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub mean_costs: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

impl EnvSpec {
    /// Flattens and validates; returns every violation found.
    pub fn build(&self) -> Result<(Mdp, CostModel), InvalidModel> {
        let mut violations = Vec::new();
        let transitions = flatten3(
            &self.transitions,
            "transitions",
            self.num_states,
            self.num_actions,
            self.num_states,
            &mut violations,
        );
        let num_agents = self.mean_costs.len();
        let mean = flatten3(
            &self.mean_costs,
            "mean_costs",
            num_agents,
            self.num_states,
            self.num_actions,
            &mut violations,
        );
        let noise = match &self.noise {
            NoiseSpec::Shared(kind) => vec![*kind; num_agents],
            NoiseSpec::PerAgent(kinds) => kinds.clone(),
        };
        if !violations.is_empty() {
            return Err(InvalidModel(violations));
        }
        let mdp = Mdp { num_states: self.num_states, num_actions: self.num_actions, gamma: self.gamma, transitions };
        let costs = CostModel {
            num_agents,
            num_states: self.num_states,
            num_actions: self.num_actions,
            mean,
            noise,
        };
        violations.extend(mdp.validate());
        violations.extend(costs.validate());
        if violations.is_empty() {
            Ok((mdp, costs))
        } else {
            Err(InvalidModel(violations))
        }
    }

    /// Inverse of [`EnvSpec::build`] for writing documents.
    pub fn from_parts(mdp: &Mdp, costs: &CostModel) -> Self {
        let mut transitions = Vec::with_capacity(mdp.num_states);
        for i in 0..mdp.num_states {
            let mut per_action = Vec::with_capacity(mdp.num_actions);
            for u in 0..mdp.num_actions {
                per_action.push(mdp.row(i, u).to_vec());
            }
            transitions.push(per_action);
        }
        let mut mean_costs = Vec::with_capacity(costs.num_agents);
        for n in 0..costs.num_agents {
            let mut per_state = Vec::with_capacity(costs.num_states);
            for i in 0..costs.num_states {
                let row: Vec<f64> =
                    (0..costs.num_actions).map(|u| costs.mean_at(n, i, u)).collect();
                per_state.push(row);
            }
            mean_costs.push(per_state);
        }
        EnvSpec {
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            gamma: mdp.gamma,
            transitions,
            mean_costs,
            noise: NoiseSpec::PerAgent(costs.noise.clone()),
        }
    }
}

/// Flattens a 3-level nested array, recording shape mismatches against the
/// expected dimensions.
fn flatten3(
    nested: &[Vec<Vec<f64>>],
    field: &str,
    d0: usize,
    d1: usize,
    d2: usize,
    violations: &mut Vec<Violation>,
) -> Vec<f64> {
    if nested.len() != d0 {
        violations.push(Violation::new(
            field,
            format!("expected {d0} outer entries, got {}", nested.len()),
        ));
        return Vec::new();
    }
    let mut flat = Vec::with_capacity(d0 * d1 * d2);
    for (a, level1) in nested.iter().enumerate() {
        if level1.len() != d1 {
            violations.push(Violation::new(
                format!("{field}[{a}]"),
                format!("expected {d1} entries, got {}", level1.len()),
            ));
            return Vec::new();
        }
        for (b, level2) in level1.iter().enumerate() {
            if level2.len() != d2 {
                violations.push(Violation::new(
                    format!("{field}[{a}][{b}]"),
                    format!("expected {d2} entries, got {}", level2.len()),
                ));
                return Vec::new();
            }
            flat.extend_from_slice(level2);
        }
    }
    flat
}
