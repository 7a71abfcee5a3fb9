//! Per-agent update rules: the QD-learning step (consensus + innovation),
//! value trimming, the resilient variant, and diagnostic decomposition of a
//! completed step into a weight row.
//!
//! A step touches exactly one state-action pair. With visit count k for that
//! pair, consensus weight b, and step size a_k, the update is
//!
//! ```text
//! Q'(i,u) = Q(i,u) - b * sum_{l in J} (Q(i,u) - Q^l(i,u))
//!                  + a_k * (c + gamma * min_v Q(j,v) - Q(i,u))
//! ```
//!
//! where J is every in-neighbor for the plain step and the trimmed set for
//! the resilient step.

use std::collections::BTreeSet;

use thiserror::Error;

/// One agent's tabular estimate. Flat row-major `(state, action)` values.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    pub owner: usize,
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(owner: usize, num_states: usize, num_actions: usize) -> Self {
        Self::constant(owner, num_states, num_actions, 0.0)
    }

    pub fn constant(owner: usize, num_states: usize, num_actions: usize, value: f64) -> Self {
        QTable { owner, num_states, num_actions, values: vec![value; num_states * num_actions] }
    }

    pub fn from_values(
        owner: usize,
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
    ) -> Self {
        assert_eq!(
            values.len(),
            num_states * num_actions,
            "value vector length must equal num_states * num_actions"
        );
        QTable { owner, num_states, num_actions, values }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn pair_index(&self, i: usize, u: usize) -> usize {
        assert!(i < self.num_states, "state index {i} out of range");
        assert!(u < self.num_actions, "action index {u} out of range");
        i * self.num_actions + u
    }

    #[inline]
    pub fn get(&self, i: usize, u: usize) -> f64 {
        self.values[self.pair_index(i, u)]
    }

    pub fn set(&mut self, i: usize, u: usize, value: f64) {
        let idx = self.pair_index(i, u);
        self.values[idx] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Minimum entry at state `i`; ties need no resolution (value only).
    #[inline]
    pub fn min_over_actions(&self, i: usize) -> f64 {
        let row = &self.values[i * self.num_actions..(i + 1) * self.num_actions];
        min_of(row)
    }

    /// Greedy action at state `i`; ties break to the smallest action index.
    pub fn greedy_action(&self, i: usize) -> usize {
        let row = &self.values[i * self.num_actions..(i + 1) * self.num_actions];
        let mut best = 0usize;
        for (u, &q) in row.iter().enumerate().skip(1) {
            if q < row[best] {
                best = u;
            }
        }
        best
    }

    pub fn sup_distance(&self, other: &QTable) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "table shapes differ");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.num_states)
            .map(|i| self.values[i * self.num_actions..(i + 1) * self.num_actions].to_vec())
            .collect()
    }

    pub fn from_nested(owner: usize, nested: &[Vec<f64>]) -> Result<Self, String> {
        let num_states = nested.len();
        if num_states == 0 {
            return Err("table needs at least one state row".into());
        }
        let num_actions = nested[0].len();
        if num_actions == 0 {
            return Err("table needs at least one action column".into());
        }
        let mut values = Vec::with_capacity(num_states * num_actions);
        for (i, row) in nested.iter().enumerate() {
            if row.len() != num_actions {
                return Err(format!(
                    "row {i} has {} entries, expected {num_actions}",
                    row.len()
                ));
            }
            values.extend_from_slice(row);
        }
        Ok(QTable { owner, num_states, num_actions, values })
    }
}

#[inline]
fn min_of(row: &[f64]) -> f64 {
    let mut m = row[0];
    for &v in &row[1..] {
        if v < m {
            m = v;
        }
    }
    m
}

/// Value vector `V_i = min_u Q(i, u)`.
pub fn value_from_q(q: &QTable) -> Vec<f64> {
    (0..q.num_states()).map(|i| q.min_over_actions(i)).collect()
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("eta must lie in (0, 1/N] = (0, {max}], got {eta}")]
    EtaOutOfRange { eta: f64, max: f64 },
    #[error("b must lie in [eta, (1-eta)/(N-1)) = [{lo}, {hi}), got {b}")]
    BOutOfRange { b: f64, lo: f64, hi: f64 },
    #[error("k0 must be positive and finite, got {0}")]
    BadK0(f64),
}

/// Consensus weight b and step-size family a_k = eta / (1 + k / k0), plus
/// per-pair visit counters realizing the sampling-instant indexing.
///
/// Constraints enforced at construction: eta in (0, 1/N], b in
/// [eta, (1-eta)/(N-1)) (any finite b >= eta for N = 1, where it is unused),
/// k0 > 0. Together they guarantee 1 - a_k - b(N-1) > 0 for every k, which
/// is what keeps every realized update a positive-self-weight combination.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSchedule {
    num_agents: usize,
    eta: f64,
    b: f64,
    k0: f64,
    visits: Vec<u64>,
    frozen: bool,
}

impl WeightSchedule {
    pub fn new(
        num_agents: usize,
        num_pairs: usize,
        eta: f64,
        b: f64,
        k0: f64,
    ) -> Result<Self, WeightError> {
        assert!(num_agents >= 1, "need at least one agent");
        let eta_max = 1.0 / num_agents as f64;
        if !eta.is_finite() || eta <= 0.0 || eta > eta_max {
            return Err(WeightError::EtaOutOfRange { eta, max: eta_max });
        }
        if num_agents > 1 {
            let hi = (1.0 - eta) / (num_agents as f64 - 1.0);
            if !b.is_finite() || b < eta || b >= hi {
                return Err(WeightError::BOutOfRange { b, lo: eta, hi });
            }
        } else if !b.is_finite() || b < eta {
            return Err(WeightError::BOutOfRange { b, lo: eta, hi: f64::INFINITY });
        }
        if !k0.is_finite() || k0 <= 0.0 {
            return Err(WeightError::BadK0(k0));
        }
        Ok(WeightSchedule {
            num_agents,
            eta,
            b,
            k0,
            visits: vec![0; num_pairs],
            frozen: false,
        })
    }

    /// Defaults: eta = 1/(2N) (half the cap, since the b-interval is empty
    /// at eta = 1/N), b = eta, k0 = 100.
    pub fn with_defaults(num_agents: usize, num_pairs: usize) -> Self {
        let eta = 1.0 / (2.0 * num_agents as f64);
        Self::new(num_agents, num_pairs, eta, eta, 100.0)
            .expect("default parameters satisfy the constraints")
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn consensus_weight(&self) -> f64 {
        self.b
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn visits(&self, pair: usize) -> u64 {
        self.visits[pair]
    }

    pub fn min_visits(&self) -> u64 {
        self.visits.iter().copied().min().unwrap_or(0)
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visits
    }

    /// Step size for the next update of `pair`: a_k with k the number of
    /// completed updates. Zero when innovations are frozen.
    pub fn innovation_step(&self, pair: usize) -> f64 {
        if self.frozen {
            return 0.0;
        }
        self.eta / (1.0 + self.visits[pair] as f64 / self.k0)
    }

    pub fn record_visit(&mut self, pair: usize) {
        self.visits[pair] += 1;
    }

    /// Diagnostic mode: forces a_k = 0 so the update degenerates to the pure
    /// consensus map (used to observe its non-expansion in isolation).
    pub fn freeze_innovation(&mut self) {
        self.frozen = true;
    }
}

/// One observed sample for the visited pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub state: usize,
    pub action: usize,
    pub cost: f64,
    pub next_state: usize,
}

/// A full-table payload as received from one sender. Adversaries may send
/// different payloads to different receivers, so the payload belongs to the
/// (sender, receiver, t) edge, not to the sender alone.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborMessage {
    pub sender: usize,
    pub payload: QTable,
}

/// Removal mask over `incoming` (bit per index): among values strictly above
/// `own_value` the `f` largest are dropped (all if fewer), symmetrically
/// below; equals are never dropped. Among equal extreme candidates the
/// larger sender index is dropped first, making replay deterministic.
pub(crate) fn trim_removal_mask(own_value: f64, incoming: &[(usize, f64)], f: usize) -> u64 {
    assert!(incoming.len() <= 64, "at most 64 in-neighbors supported");
    let mut removed = 0u64;
    if f == 0 {
        return removed;
    }
    // Above: repeatedly drop the max by (value, sender).
    for _ in 0..f {
        let mut pick: Option<usize> = None;
        for (idx, &(sender, value)) in incoming.iter().enumerate() {
            if removed & (1 << idx) != 0 || value <= own_value {
                continue;
            }
            pick = match pick {
                None => Some(idx),
                Some(best) => {
                    let (bs, bv) = incoming[best];
                    if value > bv || (value == bv && sender > bs) {
                        Some(idx)
                    } else {
                        Some(best)
                    }
                }
            };
        }
        match pick {
            Some(idx) => removed |= 1 << idx,
            None => break,
        }
    }
    // Below: repeatedly drop the min by (value, then larger sender).
    for _ in 0..f {
        let mut pick: Option<usize> = None;
        for (idx, &(sender, value)) in incoming.iter().enumerate() {
            if removed & (1 << idx) != 0 || value >= own_value {
                continue;
            }
            pick = match pick {
                None => Some(idx),
                Some(best) => {
                    let (bs, bv) = incoming[best];
                    if value < bv || (value == bv && sender > bs) {
                        Some(idx)
                    } else {
                        Some(best)
                    }
                }
            };
        }
        match pick {
            Some(idx) => removed |= 1 << idx,
            None => break,
        }
    }
    removed
}

/// Trimmed retention: the kept `(sender, value)` pairs in their original
/// order.
pub fn trim_neighbors(
    own_value: f64,
    incoming: &[(usize, f64)],
    f: usize,
) -> Vec<(usize, f64)> {
    let removed = trim_removal_mask(own_value, incoming, f);
    incoming
        .iter()
        .enumerate()
        .filter(|(idx, _)| removed & (1 << idx) == 0)
        .map(|(_, &pair)| pair)
        .collect()
}

/// Shared core of both step rules. Summation runs in the given retained
/// order so the plain and f = 0 resilient paths are bit-identical.
#[inline]
pub(crate) fn combine_entry(
    own_value: f64,
    retained_values: impl Iterator<Item = f64>,
    a: f64,
    b: f64,
    innovation_target: f64,
) -> f64 {
    let mut consensus = 0.0;
    for v in retained_values {
        consensus += own_value - v;
    }
    own_value - b * consensus + a * (innovation_target - own_value)
}

fn step_common(
    own: &QTable,
    msgs: &[NeighborMessage],
    sample: &Sample,
    weights: &mut WeightSchedule,
    gamma: f64,
    trim_f: Option<usize>,
) -> (QTable, StepRecord) {
    let pair = own.pair_index(sample.state, sample.action);
    let own_value = own.values[pair];
    let incoming: Vec<(usize, f64)> =
        msgs.iter().map(|m| (m.sender, m.payload.values[pair])).collect();
    let removed = match trim_f {
        Some(f) => trim_removal_mask(own_value, &incoming, f),
        None => 0,
    };
    let a = weights.innovation_step(pair);
    let b = weights.consensus_weight();
    let target = sample.cost + gamma * own.min_over_actions(sample.next_state);
    let retained_values = incoming
        .iter()
        .enumerate()
        .filter(|(idx, _)| removed & (1 << idx) == 0)
        .map(|(_, &(_, v))| v);
    let updated = combine_entry(own_value, retained_values, a, b, target);
    weights.record_visit(pair);

    let mut next = own.clone();
    next.values[pair] = updated;
    let retained: Vec<(usize, f64)> = incoming
        .iter()
        .enumerate()
        .filter(|(idx, _)| removed & (1 << idx) == 0)
        .map(|(_, &p)| p)
        .collect();
    let record = StepRecord {
        state: sample.state,
        action: sample.action,
        own_value,
        incoming,
        retained,
        consensus_weight: b,
        innovation_step: a,
        innovation_target: target,
        updated_value: updated,
    };
    (next, record)
}

/// Plain QD-learning step: consensus over every in-neighbor message plus the
/// temporal-difference innovation on the visited pair. Returns the updated
/// table; increments the pair's visit count.
pub fn qd_step(
    own: &QTable,
    msgs: &[NeighborMessage],
    sample: &Sample,
    weights: &mut WeightSchedule,
    gamma: f64,
) -> QTable {
    step_common(own, msgs, sample, weights, gamma, None).0
}

/// Resilient step: identical to [`qd_step`] but the consensus sum ranges
/// over the trimmed set (compute the retained set, then the entry, then the
/// derived value).
pub fn resilient_qd_step(
    own: &QTable,
    msgs: &[NeighborMessage],
    sample: &Sample,
    weights: &mut WeightSchedule,
    gamma: f64,
    f: usize,
) -> QTable {
    step_common(own, msgs, sample, weights, gamma, Some(f)).0
}

/// [`resilient_qd_step`] variant that also returns the diagnostic record
/// consumed by [`assemble_regular_update_matrix`].
pub fn resilient_qd_step_with_record(
    own: &QTable,
    msgs: &[NeighborMessage],
    sample: &Sample,
    weights: &mut WeightSchedule,
    gamma: f64,
    f: usize,
) -> (QTable, StepRecord) {
    step_common(own, msgs, sample, weights, gamma, Some(f))
}

/// Everything needed to audit one completed step on one pair.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub state: usize,
    pub action: usize,
    pub own_value: f64,
    /// All `(sender, value)` entries offered, in received order.
    pub incoming: Vec<(usize, f64)>,
    /// The retained subset, original order preserved.
    pub retained: Vec<(usize, f64)>,
    pub consensus_weight: f64,
    pub innovation_step: f64,
    pub innovation_target: f64,
    pub updated_value: f64,
}

/// The realized pre-innovation combination expressed as an explicit weight
/// row: `1 - b|J|` on self, `b` per retained sender. Row-stochastic by
/// construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularCombination {
    pub self_weight: f64,
    /// `(sender, weight)` per retained sender, received order.
    pub retained_weights: Vec<(usize, f64)>,
    /// `(1 - b|J|) * own + b * sum(retained values)`.
    pub pre_innovation: f64,
    /// Hull of {own value} and all regular senders' offered values.
    pub hull_low: f64,
    pub hull_high: f64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CombineError {
    #[error(
        "pre-innovation value {value} escapes the regular hull [{low}, {high}] \
         at pair ({state}, {action})"
    )]
    HullViolation { value: f64, low: f64, high: f64, state: usize, action: usize },
    #[error("step record is internally inconsistent: {0}")]
    BadRecord(String),
}

/// Exact-equality slack for the hull check; covers the rounding of the
/// b-weighted sum.
const HULL_SLACK: f64 = 1e-9;

/// Expresses a completed resilient step as a row-stochastic weight row and
/// verifies the safety consequence of trimming: the post-consensus
/// pre-innovation value must lie within [min, max] over {own value} union
/// {regular in-neighbors' offered values}. Labels are supplied by the
/// harness; a violation indicates an implementation bug or a broken
/// F-locality precondition.
pub fn assemble_regular_update_matrix(
    record: &StepRecord,
    adversaries: &BTreeSet<usize>,
) -> Result<RegularCombination, CombineError> {
    let b = record.consensus_weight;
    let retained_count = record.retained.len() as f64;
    let self_weight = 1.0 - b * retained_count;
    if self_weight <= 0.0 {
        return Err(CombineError::BadRecord(format!(
            "self weight 1 - b|J| = {self_weight} is not positive"
        )));
    }
    let mut pre = self_weight * record.own_value;
    for &(_, v) in &record.retained {
        pre += b * v;
    }

    let mut low = record.own_value;
    let mut high = record.own_value;
    for &(sender, v) in &record.incoming {
        if !adversaries.contains(&sender) {
            low = low.min(v);
            high = high.max(v);
        }
    }
    if pre < low - HULL_SLACK || pre > high + HULL_SLACK {
        return Err(CombineError::HullViolation {
            value: pre,
            low,
            high,
            state: record.state,
            action: record.action,
        });
    }
    Ok(RegularCombination {
        self_weight,
        retained_weights: record.retained.iter().map(|&(s, _)| (s, b)).collect(),
        pre_innovation: pre,
        hull_low: low,
        hull_high: high,
    })
}
