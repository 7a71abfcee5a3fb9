//! Shared fixtures and naive reference implementations for integration
//! tests. The reference oracle here is deliberately written as plain nested
//! loops with a fixed sweep count, independent of the library's stop rule.
#![allow(dead_code)]

use serde_json::Value;

/// Plain synchronous Q-value iteration from zero. With gamma <= 0.9 and
/// costs bounded by ~10, 600 sweeps land far below 1e-12 of the fixed
/// point, so results serve as ground truth at 1e-9 comparisons.
pub fn naive_q_iteration(
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    prob: &[f64],  // flat (i, u, j)
    costs: &[f64], // flat (i, u)
    sweeps: usize,
) -> Vec<f64> {
    let mut q = vec![0.0; num_states * num_actions];
    for _ in 0..sweeps {
        let mut next = vec![0.0; num_states * num_actions];
        for i in 0..num_states {
            for u in 0..num_actions {
                let mut expected = 0.0;
                for j in 0..num_states {
                    let mut best = f64::INFINITY;
                    for v in 0..num_actions {
                        if q[j * num_actions + v] < best {
                            best = q[j * num_actions + v];
                        }
                    }
                    expected += prob[(i * num_actions + u) * num_states + j] * best;
                }
                next[i * num_actions + u] = costs[i * num_actions + u] + gamma * expected;
            }
        }
        q = next;
    }
    q
}

/// One naive Bellman sweep, for contraction-factor measurements.
pub fn naive_sweep(
    num_states: usize,
    num_actions: usize,
    gamma: f64,
    prob: &[f64],
    costs: &[f64],
    q: &[f64],
) -> Vec<f64> {
    let mut next = vec![0.0; num_states * num_actions];
    for i in 0..num_states {
        for u in 0..num_actions {
            let mut expected = 0.0;
            for j in 0..num_states {
                let mut best = f64::INFINITY;
                for v in 0..num_actions {
                    if q[j * num_actions + v] < best {
                        best = q[j * num_actions + v];
                    }
                }
                expected += prob[(i * num_actions + u) * num_states + j] * best;
            }
            next[i * num_actions + u] = costs[i * num_actions + u] + gamma * expected;
        }
    }
    next
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Base per-pair mean cost used by the shared 3-state 2-action fixture.
pub fn base_cost(i: usize, u: usize) -> f64 {
    1.0 + 0.1 * i as f64 + u as f64
}

/// Returns transition rows for the fixture. `shared_rows` makes both
/// actions of a state identical, which pins every Q-gap to the cost gap.
pub fn fixture_transitions(shared_rows: bool) -> Vec<Vec<Vec<f64>>> {
    let a: Vec<Vec<f64>> =
        vec![vec![0.6, 0.3, 0.1], vec![0.1, 0.6, 0.3], vec![0.3, 0.1, 0.6]];
    let b: Vec<Vec<f64>> =
        vec![vec![0.1, 0.2, 0.7], vec![0.7, 0.1, 0.2], vec![0.2, 0.7, 0.1]];
    (0..3)
        .map(|i| {
            if shared_rows {
                vec![a[i].clone(), a[i].clone()]
            } else {
                vec![a[i].clone(), b[i].clone()]
            }
        })
        .collect()
}

/// 3-state 2-action environment, gamma 0.5, one cost offset per agent.
pub fn offset_env(offsets: &[f64], shared_rows: bool) -> Value {
    let mean_costs: Vec<Vec<Vec<f64>>> = offsets
        .iter()
        .map(|&d| {
            (0..3)
                .map(|i| (0..2).map(|u| base_cost(i, u) + d).collect())
                .collect()
        })
        .collect();
    serde_json::json!({
        "num_states": 3,
        "num_actions": 2,
        "gamma": 0.5,
        "transitions": fixture_transitions(shared_rows),
        "mean_costs": mean_costs,
    })
}

pub fn complete_graph(n: usize) -> Value {
    serde_json::json!({"mode": "generated", "kind": "complete", "n": n})
}

/// Replays a no-adversary generative run as the stacked recursion
/// z <- (I - bL)z - a(z - G(z)) with L the in-degree Laplacian of a static
/// ring and G the per-agent Bellman targets on the shared sampled next
/// states. Returns the largest sup-norm gap between the engine's final
/// tables and the replica's.
pub fn matrix_form_divergence(horizon: u64) -> f64 {
    use qdsim::graphs::Digraph;
    use qdsim::sim::{run, transition_rng, Scenario};

    let offsets = [0.0, 0.25, 0.5, 0.75, 1.0];
    let n = offsets.len();
    let graph = Digraph::ring(n, 1).unwrap();
    let (num_states, num_actions) = (3usize, 2usize);
    let pairs = num_states * num_actions;
    let gamma = 0.5;
    let seed = 21u64;
    let (eta, b, k0) = (1.0 / (2.0 * n as f64), 1.0 / (2.0 * n as f64), 100.0);

    let costs: Vec<Vec<f64>> = offsets
        .iter()
        .map(|&d| {
            (0..pairs).map(|p| base_cost(p / num_actions, p % num_actions) + d).collect()
        })
        .collect();

    let sc = Scenario::from_value(serde_json::json!({
        "env": offset_env(&offsets, false),
        "graph": {"mode": "generated", "kind": "ring", "k": 1, "n": n},
        "horizon": horizon,
        "checkpoint_every": 1_000_000u64,
        "seed": seed,
    }))
    .unwrap();
    let engine = run(&sc).unwrap();

    let mut z: Vec<Vec<f64>> = vec![vec![0.0; pairs]; n];
    for t in 0..horizon {
        let a = eta / (1.0 + t as f64 / k0);
        let next_states: Vec<usize> = (0..pairs)
            .map(|p| {
                let (i, u) = (p / num_actions, p % num_actions);
                let mut rng = transition_rng(seed, p, t);
                sc.mdp.sample_next_state(i, u, &mut rng)
            })
            .collect();
        let mut znext = vec![vec![0.0; pairs]; n];
        for agent in 0..n {
            let in_nb = graph.in_neighbors(agent);
            for p in 0..pairs {
                // (I - bL) row: 1 - b*deg on self, b per in-neighbor.
                let mut mixed = (1.0 - b * in_nb.len() as f64) * z[agent][p];
                for &l in in_nb {
                    mixed += b * z[l][p];
                }
                let j = next_states[p];
                let mut best = f64::INFINITY;
                for v in 0..num_actions {
                    best = best.min(z[agent][j * num_actions + v]);
                }
                let target = costs[agent][p] + gamma * best;
                znext[agent][p] = mixed - a * (z[agent][p] - target);
            }
        }
        z = znext;
    }

    (0..n)
        .map(|agent| sup_diff(engine.final_q[agent].values(), &z[agent]))
        .fold(0.0, f64::max)
}

/// K5 scenario with agent 4 compromised; regular agents 0..3.
pub fn k5_scenario(
    env: Value,
    attack: Value,
    algorithm: Value,
    horizon: u64,
    checkpoint_every: u64,
    seed: u64,
) -> Value {
    serde_json::json!({
        "env": env,
        "graph": complete_graph(5),
        "adversaries": [{"agent": 4, "attack": attack}],
        "algorithm": algorithm,
        "horizon": horizon,
        "checkpoint_every": checkpoint_every,
        "seed": seed,
    })
}
