//! Exact fixed points by value iteration, and the derived agreement bounds.
//!
//! For a mean-cost table c the operator is
//!
//! ```text
//! G(Q)(i,u) = c(i,u) + gamma * sum_j p(j|i,u) * min_v Q(j,v)
//! ```
//!
//! a gamma-contraction in the sup norm, so iterating from Q = 0 until the
//! successive difference drops below `tol * (1-gamma) / gamma` certifies
//! `||Q - Q*||_inf <= tol`.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::learning::QTable;
use crate::mdp::{CostModel, Mdp};

/// Certified sup-norm accuracy used when callers pass no tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Hard stop for non-converging inputs (cannot trigger for a valid MDP, the
/// operator contracts; this guards corrupted callers).
const ITERATION_GUARD: u64 = 10_000_000;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("cost entry ({state}, {action}) is not finite: {value}")]
    NonFiniteCost { state: usize, action: usize, value: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
    #[error("cost table has {got} entries, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("regular agent set is empty")]
    EmptyRegularSet,
    #[error("agent index {agent} out of range for {num_agents} agents")]
    AgentOutOfRange { agent: usize, num_agents: usize },
    #[error("value iteration failed to converge within {0} sweeps")]
    IterationLimit(u64),
}

/// Converged solution of one operator.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoint {
    /// Q*, stored as a table whose owner is the agent it belongs to (or 0
    /// for aggregate operators).
    pub q_star: QTable,
    /// V*[i] = min_u Q*(i, u).
    pub v_star: Vec<f64>,
    /// Argmin policy; ties break to the smallest action index.
    pub policy: Vec<usize>,
    /// `||G(Q) - Q||_inf` measured by one extra, unapplied sweep.
    pub bellman_residual: f64,
    pub iterations: u64,
}

impl FixedPoint {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "q_star": self.q_star.to_nested(),
            "v_star": self.v_star,
            "policy": self.policy,
            "bellman_residual": self.bellman_residual,
            "iterations": self.iterations,
        })
    }
}

/// One sweep of the operator into `out`; returns the sup-norm difference
/// from `q`.
fn sweep(mdp: &Mdp, costs: &[f64], v: &[f64], q: &[f64], out: &mut [f64]) -> f64 {
    let mut diff: f64 = 0.0;
    for i in 0..mdp.num_states {
        for u in 0..mdp.num_actions {
            let p = i * mdp.num_actions + u;
            let row = mdp.row(i, u);
            let mut exp = 0.0;
            for (j, &pr) in row.iter().enumerate() {
                exp += pr * v[j];
            }
            out[p] = costs[p] + mdp.gamma * exp;
            diff = diff.max((out[p] - q[p]).abs());
        }
    }
    diff
}

fn values_of(mdp: &Mdp, q: &[f64], v: &mut [f64]) {
    for i in 0..mdp.num_states {
        let row = &q[i * mdp.num_actions..(i + 1) * mdp.num_actions];
        v[i] = row.iter().copied().fold(f64::INFINITY, f64::min);
    }
}

/// Exact fixed point of the operator with mean costs `costs` (flat `(i, u)`
/// layout), accurate to `tol` in sup norm. `owner` labels the returned
/// table.
pub fn fixed_point_for(
    mdp: &Mdp,
    owner: usize,
    costs: &[f64],
    tol: f64,
) -> Result<FixedPoint, OracleError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(OracleError::BadTolerance(tol));
    }
    let pairs = mdp.num_pairs();
    if costs.len() != pairs {
        return Err(OracleError::ShapeMismatch { expected: pairs, got: costs.len() });
    }
    for i in 0..mdp.num_states {
        for u in 0..mdp.num_actions {
            let c = costs[i * mdp.num_actions + u];
            if !c.is_finite() {
                return Err(OracleError::NonFiniteCost { state: i, action: u, value: c });
            }
        }
    }

    let threshold = tol * (1.0 - mdp.gamma) / mdp.gamma;
    let mut q = vec![0.0; pairs];
    let mut next = vec![0.0; pairs];
    let mut v = vec![0.0; mdp.num_states];
    let mut iterations = 0u64;
    loop {
        values_of(mdp, &q, &mut v);
        let diff = sweep(mdp, costs, &v, &q, &mut next);
        std::mem::swap(&mut q, &mut next);
        iterations += 1;
        if diff <= threshold {
            break;
        }
        if iterations >= ITERATION_GUARD {
            return Err(OracleError::IterationLimit(ITERATION_GUARD));
        }
    }
    values_of(mdp, &q, &mut v);
    let residual = sweep(mdp, costs, &v, &q, &mut next);

    let table = QTable::from_values(owner, mdp.num_states, mdp.num_actions, q);
    let policy = (0..mdp.num_states).map(|i| table.greedy_action(i)).collect();
    Ok(FixedPoint {
        v_star: v,
        policy,
        bellman_residual: residual,
        iterations,
        q_star: table,
    })
}

/// [`fixed_point_for`] with owner 0, for aggregate operators.
pub fn fixed_point(mdp: &Mdp, costs: &[f64], tol: f64) -> Result<FixedPoint, OracleError> {
    fixed_point_for(mdp, 0, costs, tol)
}

fn checked_regular(costs: &CostModel, regular: &[usize]) -> Result<Vec<usize>, OracleError> {
    let set: BTreeSet<usize> = regular.iter().copied().collect();
    if set.is_empty() {
        return Err(OracleError::EmptyRegularSet);
    }
    if let Some(&bad) = set.iter().find(|&&n| n >= costs.num_agents) {
        return Err(OracleError::AgentOutOfRange { agent: bad, num_agents: costs.num_agents });
    }
    Ok(set.into_iter().collect())
}

/// Fixed point of the operator whose cost is the arithmetic mean of the
/// regular agents' mean-cost tables.
pub fn regular_fixed_point(
    mdp: &Mdp,
    costs: &CostModel,
    regular: &[usize],
    tol: f64,
) -> Result<FixedPoint, OracleError> {
    let regular = checked_regular(costs, regular)?;
    let mean = costs.mean_over(&regular);
    fixed_point(mdp, &mean, tol)
}

/// Agreement-radius report over a regular agent set.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    /// Ascending, deduplicated regular agent indices.
    pub regular: Vec<usize>,
    /// Max pairwise `||Q^{n*} - Q^{l*}||_inf` over regular agents.
    pub r: f64,
    /// Max pairwise mean-cost spread over `1 - gamma`; >= `r` up to
    /// solver tolerance.
    pub r_cost_bound: f64,
    /// Largest entry of any regular agent's fixed point.
    pub m_upper: f64,
    /// Smallest entry of any regular agent's fixed point.
    pub m_lower: f64,
    /// Per state: optimum unique and every distinct-valued action pair
    /// separated by at least `2 r`.
    pub separation_ok: Vec<bool>,
    /// Per state: two or more actions tie at the optimum (within twice the
    /// tolerance), making argmin recovery ambiguous there.
    pub tied_optimal: Vec<bool>,
    /// One fixed point per regular agent, in `regular` order.
    pub agent_fixed_points: Vec<FixedPoint>,
    /// Fixed point of the regular-average operator.
    pub regular_fixed_point: FixedPoint,
    pub tol: f64,
}

impl BoundReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "regular": self.regular,
            "R": self.r,
            "R_cost_bound": self.r_cost_bound,
            "M_R": self.m_upper,
            "m_R": self.m_lower,
            "separation_ok": self.separation_ok,
            "tied_optimal": self.tied_optimal,
            "tol": self.tol,
            "regular_fixed_point": self.regular_fixed_point.to_json(),
            "agent_fixed_points": self.regular.iter().zip(&self.agent_fixed_points)
                .map(|(n, fp)| {
                    let mut obj = fp.to_json();
                    obj["agent"] = serde_json::json!(n);
                    obj
                })
                .collect::<Vec<_>>(),
        })
    }
}

/// Computes every per-agent fixed point over `regular`, the regular-average
/// fixed point, and the bound quantities tied to them.
pub fn bound_report(
    mdp: &Mdp,
    costs: &CostModel,
    regular: &[usize],
    tol: f64,
) -> Result<BoundReport, OracleError> {
    let regular = checked_regular(costs, regular)?;
    let mut fps = Vec::with_capacity(regular.len());
    for &n in &regular {
        fps.push(fixed_point_for(mdp, n, costs.agent_means(n), tol)?);
    }
    let avg_fp = fixed_point(mdp, &costs.mean_over(&regular), tol)?;

    let mut r: f64 = 0.0;
    let mut cost_spread: f64 = 0.0;
    for a in 0..fps.len() {
        for b in a + 1..fps.len() {
            r = r.max(fps[a].q_star.sup_distance(&fps[b].q_star));
            let spread = costs
                .agent_means(regular[a])
                .iter()
                .zip(costs.agent_means(regular[b]))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            cost_spread = cost_spread.max(spread);
        }
    }
    let r_cost_bound = cost_spread / (1.0 - mdp.gamma);

    let mut m_upper = f64::NEG_INFINITY;
    let mut m_lower = f64::INFINITY;
    for fp in &fps {
        for &q in fp.q_star.values() {
            m_upper = m_upper.max(q);
            m_lower = m_lower.min(q);
        }
    }

    // Distinctness at oracle accuracy: gaps within 2 tol are treated as
    // ties (each table entry is only known to +/- tol).
    let tie_eps = 2.0 * tol;
    let mut separation_ok = Vec::with_capacity(mdp.num_states);
    let mut tied_optimal = Vec::with_capacity(mdp.num_states);
    for i in 0..mdp.num_states {
        let best = avg_fp.v_star[i];
        let ties = (0..mdp.num_actions)
            .filter(|&u| (avg_fp.q_star.get(i, u) - best).abs() <= tie_eps)
            .count();
        let tied = ties > 1;
        let mut ok = !tied;
        'pairs: for u in 0..mdp.num_actions {
            for v in u + 1..mdp.num_actions {
                let gap = (avg_fp.q_star.get(i, u) - avg_fp.q_star.get(i, v)).abs();
                if gap > tie_eps && gap < 2.0 * r {
                    ok = false;
                    break 'pairs;
                }
            }
        }
        separation_ok.push(ok);
        tied_optimal.push(tied);
    }

    Ok(BoundReport {
        regular,
        r,
        r_cost_bound,
        m_upper,
        m_lower,
        separation_ok,
        tied_optimal,
        agent_fixed_points: fps,
        regular_fixed_point: avg_fp,
        tol,
    })
}
