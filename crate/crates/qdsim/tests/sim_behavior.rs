//! Behavioral contracts of the engine that only show at the run level:
//! an agent's evolution is a function of its own observations plus the
//! messages it received (verified by replaying from the message log), and
//! the hull audit stays silent across long adversarial runs.

mod common;

use common::offset_env;
use qdsim::learning::{qd_step, resilient_qd_step, NeighborMessage, QTable, WeightSchedule};
use qdsim::sim::{run_with_options, transition_rng, RunOptions, Scenario};

struct LoggedMessage {
    t: u64,
    sender: usize,
    receiver: usize,
    payload: Vec<Vec<f64>>,
}

fn parse_log(bytes: &[u8]) -> Vec<LoggedMessage> {
    String::from_utf8(bytes.to_vec())
        .unwrap()
        .lines()
        .map(|line| {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            LoggedMessage {
                t: v["t"].as_u64().unwrap(),
                sender: v["sender"].as_u64().unwrap() as usize,
                receiver: v["receiver"].as_u64().unwrap() as usize,
                payload: serde_json::from_value(v["payload"].clone()).unwrap(),
            }
        })
        .collect()
}

/// Replays one regular agent from the log alone and demands bitwise
/// agreement with the engine's final table.
fn replay_agent(
    sc: &Scenario,
    log: &[LoggedMessage],
    agent: usize,
    trim_f: Option<usize>,
) -> QTable {
    let (num_states, num_actions) = (sc.mdp.num_states, sc.mdp.num_actions);
    let pairs = sc.mdp.num_pairs();
    let mut table = QTable::zeros(agent, num_states, num_actions);
    let mut weights =
        WeightSchedule::new(sc.num_agents(), pairs, sc.eta, sc.b, sc.k0).unwrap();
    for t in 0..sc.horizon {
        let mut msgs: Vec<NeighborMessage> = log
            .iter()
            .filter(|m| m.t == t && m.receiver == agent)
            .map(|m| NeighborMessage {
                sender: m.sender,
                payload: QTable::from_nested(m.sender, &m.payload).unwrap(),
            })
            .collect();
        msgs.sort_by_key(|m| m.sender);
        let mut next = table.clone();
        for p in 0..pairs {
            let (i, u) = (p / num_actions, p % num_actions);
            let j = sc.mdp.sample_next_state(i, u, &mut transition_rng(sc.seed, p, t));
            let sample = qdsim::learning::Sample {
                state: i,
                action: u,
                cost: sc.costs.mean_at(agent, i, u),
                next_state: j,
            };
            let stepped = match trim_f {
                Some(f) => resilient_qd_step(&table, &msgs, &sample, &mut weights, sc.mdp.gamma, f),
                None => qd_step(&table, &msgs, &sample, &mut weights, sc.mdp.gamma),
            };
            next.set(i, u, stepped.get(i, u));
        }
        table = next;
    }
    table
}

fn logged_run(scenario_json: serde_json::Value) -> (Scenario, Vec<LoggedMessage>, Vec<QTable>) {
    let sc = Scenario::from_value(scenario_json).unwrap();
    let mut log = Vec::new();
    let out = run_with_options(
        &sc,
        RunOptions { message_log: Some(&mut log), ..RunOptions::default() },
    )
    .unwrap();
    assert!(out.abort.is_none());
    (sc, parse_log(&log), out.final_q)
}

#[test]
fn plain_run_replays_from_its_message_log() {
    let (sc, log, final_q) = logged_run(serde_json::json!({
        "env": offset_env(&[0.0, 0.3, 0.6, 0.9], false),
        "graph": {"mode": "generated", "kind": "ring", "k": 1, "n": 4},
        "horizon": 40,
        "checkpoint_every": 10,
        "seed": 17,
    }));
    for (agent, expected) in final_q.iter().enumerate().take(4) {
        let replayed = replay_agent(&sc, &log, agent, None);
        assert_eq!(replayed.values(), expected.values(), "agent {agent}");
    }
}

#[test]
fn resilient_run_under_attack_replays_from_its_message_log() {
    let (sc, log, final_q) = logged_run(serde_json::json!({
        "env": offset_env(&[0.0, 0.3, 0.6, 0.9, 1.2], false),
        "graph": {"mode": "generated", "kind": "complete", "n": 5},
        "adversaries": [
            {"agent": 4, "attack": {"kind": "conflicting", "base": 3.0, "per_receiver": 2.0}}
        ],
        "algorithm": {"kind": "resilient_qd", "f": 1},
        "horizon": 40,
        "checkpoint_every": 10,
        "seed": 23,
    }));
    for (agent, expected) in final_q.iter().enumerate().take(4) {
        let replayed = replay_agent(&sc, &log, agent, Some(1));
        assert_eq!(replayed.values(), expected.values(), "agent {agent}");
    }
}

#[test]
fn hull_audit_stays_silent_across_attacks() {
    for attack in [
        serde_json::json!({"kind": "max_push", "delta": 50.0}),
        serde_json::json!({"kind": "max_push", "delta": -50.0}),
        serde_json::json!({"kind": "conflicting", "base": 10.0, "per_receiver": 5.0}),
        serde_json::json!({"kind": "random_noise", "amplitude": 10.0}),
        serde_json::json!({"kind": "fixed_value", "table": [[7.0, 7.0], [7.0, 7.0], [7.0, 7.0]]}),
    ] {
        let sc = Scenario::from_value(serde_json::json!({
            "env": offset_env(&[0.0, 0.25, 0.5, 0.75, 1.0], false),
            "graph": {"mode": "generated", "kind": "complete", "n": 5},
            "adversaries": [{"agent": 4, "attack": attack.clone()}],
            "algorithm": {"kind": "resilient_qd", "f": 1},
            "check_hull": true,
            "horizon": 5000,
            "seed": 29,
        }))
        .unwrap();
        let out = run_with_options(&sc, RunOptions::default())
            .unwrap_or_else(|e| panic!("attack {attack}: {e}"));
        assert!(out.abort.is_none(), "attack {attack} aborted");
    }
}
