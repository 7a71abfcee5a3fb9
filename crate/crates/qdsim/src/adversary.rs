//! Byzantine sender behaviors. An attack decides, per receiver and per
//! step, what table payload to emit; it may also replace the sender's own
//! local update. Emission happens at the network boundary, so regular
//! agents never observe anything but a `NeighborMessage`.

use serde::{Deserialize, Serialize};

use crate::learning::{NeighborMessage, QTable};
use crate::mdp::CostModel;
use crate::rng::RngStream;

/// What a compromised agent sends. Every variant is deterministic given the
/// keyed stream handed to [`AttackStrategy::emit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackStrategy {
    /// Emits one frozen table to every receiver at every step, and holds its
    /// own table at exactly that value. The steady-state attack: regular
    /// plain-QD neighbors are dragged to the frozen values.
    FixedValue { table: Vec<Vec<f64>> },
    /// Runs the honest protocol, but on costs drawn around a falsified mean
    /// table. The falsified means are chosen so the network average of the
    /// pretended costs reproduces a target; see [`cost_spoof_pretended`].
    CostSpoof { pretended_mean: Vec<Vec<f64>> },
    /// Honest value plus `uniform(-amplitude, +amplitude)` noise, drawn
    /// fresh per receiver, per entry, per step.
    RandomNoise { amplitude: f64 },
    /// Honest value plus `base + per_receiver * receiver_index`: every
    /// receiver sees a different, internally consistent lie.
    Conflicting { base: f64, per_receiver: f64 },
    /// Honest value plus a constant push of `delta` toward +/- infinity.
    /// A blunt stress attack for exercising the trimmed update.
    MaxPush { delta: f64 },
}

impl AttackStrategy {
    /// Payload for one `(receiver, t)` edge. `own` is the attacker's current
    /// local table (for FixedValue, the frozen one). `rng` must be keyed per
    /// (attacker, receiver, t) by the caller; strategies that need no
    /// randomness never touch it.
    pub fn emit(&self, own: &QTable, receiver: usize, rng: &mut RngStream) -> NeighborMessage {
        let sender = own.owner;
        let payload = match self {
            AttackStrategy::FixedValue { .. } | AttackStrategy::CostSpoof { .. } => own.clone(),
            AttackStrategy::RandomNoise { amplitude } => {
                let mut values = own.values().to_vec();
                for v in &mut values {
                    *v += rng.symmetric_uniform(*amplitude);
                }
                QTable::from_values(sender, own.num_states(), own.num_actions(), values)
            }
            AttackStrategy::Conflicting { base, per_receiver } => {
                let shift = base + per_receiver * receiver as f64;
                let values = own.values().iter().map(|v| v + shift).collect();
                QTable::from_values(sender, own.num_states(), own.num_actions(), values)
            }
            AttackStrategy::MaxPush { delta } => {
                let values = own.values().iter().map(|v| v + delta).collect();
                QTable::from_values(sender, own.num_states(), own.num_actions(), values)
            }
        };
        NeighborMessage { sender, payload }
    }

    /// Whether the attacker keeps running the honest local update rule
    /// (possibly on falsified costs). FixedValue instead pins its table.
    pub fn runs_honest_update(&self) -> bool {
        !matches!(self, AttackStrategy::FixedValue { .. })
    }

    /// The frozen table, when the strategy pins one.
    pub fn frozen_table(&self, owner: usize) -> Option<Result<QTable, String>> {
        match self {
            AttackStrategy::FixedValue { table } => {
                Some(QTable::from_nested(owner, table))
            }
            _ => None,
        }
    }

    /// Mean-cost table the attacker samples around instead of its true one,
    /// when the strategy falsifies costs.
    pub fn pretended_mean(&self) -> Option<&Vec<Vec<f64>>> {
        match self {
            AttackStrategy::CostSpoof { pretended_mean } => Some(pretended_mean),
            _ => None,
        }
    }
}

/// Falsified mean table for a cost-spoofing agent: per pair,
///
/// ```text
/// pretended(i,u) = target(i,u) - sum over the other agents of their true means
/// ```
///
/// so that pretended + sum_of_others = target exactly. With `target` chosen
/// as N times a desired average, honest updates on the spoofed costs steer
/// the whole network's agreement point to the fixed point of that average.
pub fn cost_spoof_pretended(
    costs: &CostModel,
    adversary: usize,
    target: &[f64],
) -> Vec<Vec<f64>> {
    assert!(adversary < costs.num_agents, "adversary index out of range");
    let pairs = costs.num_states * costs.num_actions;
    assert_eq!(target.len(), pairs, "target table has the wrong shape");
    let mut pretended = vec![0.0; pairs];
    for (p, slot) in pretended.iter_mut().enumerate() {
        let i = p / costs.num_actions;
        let u = p % costs.num_actions;
        let mut others = 0.0;
        for n in 0..costs.num_agents {
            if n != adversary {
                others += costs.mean_at(n, i, u);
            }
        }
        *slot = target[p] - others;
    }
    (0..costs.num_states)
        .map(|i| pretended[i * costs.num_actions..(i + 1) * costs.num_actions].to_vec())
        .collect()
}
