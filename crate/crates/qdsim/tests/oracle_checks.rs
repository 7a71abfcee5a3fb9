//! Cross-checks the fixed-point oracle against an independent naive value
//! iteration on randomized instances, and verifies its contraction and
//! bound inequalities.

mod common;

use common::{naive_q_iteration, naive_sweep, sup_diff};
use qdsim::mdp::{CostModel, Mdp};
use qdsim::oracle::{bound_report, fixed_point, DEFAULT_TOL};
use qdsim::rng::{RngStream, StreamPurpose};

struct RandomInstance {
    mdp: Mdp,
    costs: Vec<f64>,
}

fn random_instance(case: u64) -> RandomInstance {
    let mut rng = RngStream::new(0xABCD, StreamPurpose::Init, case, 0, 0);
    let num_states = 1 + rng.pick(4);
    let num_actions = 1 + rng.pick(3);
    let gamma = rng.uniform_range(0.1, 0.9);
    let mut transitions = Vec::with_capacity(num_states * num_actions * num_states);
    for _ in 0..num_states * num_actions {
        let raw: Vec<f64> = (0..num_states).map(|_| rng.uniform_range(0.01, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        transitions.extend(raw.iter().map(|w| w / total));
    }
    let costs: Vec<f64> =
        (0..num_states * num_actions).map(|_| rng.uniform_range(0.0, 10.0)).collect();
    let mdp = Mdp::new(num_states, num_actions, gamma, transitions).expect("rows normalized");
    RandomInstance { mdp, costs }
}

#[test]
fn fixed_point_matches_naive_value_iteration_on_random_instances() {
    for case in 0..100u64 {
        let inst = random_instance(case);
        let fp = fixed_point(&inst.mdp, &inst.costs, DEFAULT_TOL).unwrap();
        let naive = naive_q_iteration(
            inst.mdp.num_states,
            inst.mdp.num_actions,
            inst.mdp.gamma,
            &inst.mdp.transitions,
            &inst.costs,
            600,
        );
        let diff = sup_diff(fp.q_star.values(), &naive);
        assert!(diff <= 1e-9, "case {case}: oracle vs naive differ by {diff}");
        assert!(
            fp.bellman_residual <= DEFAULT_TOL,
            "case {case}: residual {} above tolerance",
            fp.bellman_residual
        );
    }
}

#[test]
fn bellman_sweeps_contract_at_rate_gamma() {
    for case in 0..100u64 {
        let inst = random_instance(case);
        let (s, a, g) = (inst.mdp.num_states, inst.mdp.num_actions, inst.mdp.gamma);
        // Start away from the fixed point so successive differences are
        // well above rounding noise.
        let mut q = vec![0.0; s * a];
        let mut prev_diff = f64::INFINITY;
        for sweep in 0..30 {
            let next = naive_sweep(s, a, g, &inst.mdp.transitions, &inst.costs, &q);
            let diff = sup_diff(&next, &q);
            if sweep > 0 && prev_diff > 1e-9 {
                assert!(
                    diff <= g * prev_diff + 1e-12,
                    "case {case} sweep {sweep}: {diff} > gamma * {prev_diff}"
                );
            }
            prev_diff = diff;
            q = next;
        }
    }
}

#[test]
fn heterogeneity_radius_is_bounded_by_the_cost_spread() {
    for case in 0..100u64 {
        let inst = random_instance(case);
        let mut rng = RngStream::new(0xBEEF, StreamPurpose::Init, case, 1, 0);
        let num_agents = 2 + rng.pick(3);
        let pairs = inst.mdp.num_pairs();
        let mut mean = Vec::with_capacity(num_agents * pairs);
        for _ in 0..num_agents {
            let offset = rng.uniform_range(-2.0, 2.0);
            for p in 0..pairs {
                mean.push(inst.costs[p] + offset + rng.uniform_range(-0.5, 0.5));
            }
        }
        let costs = CostModel::new(
            num_agents,
            inst.mdp.num_states,
            inst.mdp.num_actions,
            mean,
            vec![qdsim::mdp::NoiseKind::None; num_agents],
        )
        .unwrap();
        let regular: Vec<usize> = (0..num_agents).collect();
        let report = bound_report(&inst.mdp, &costs, &regular, DEFAULT_TOL).unwrap();
        assert!(
            report.r <= report.r_cost_bound + 1e-9,
            "case {case}: R {} exceeds cost-spread bound {}",
            report.r,
            report.r_cost_bound
        );
        // The radius also bounds each agent's distance to the average table.
        for fp in &report.agent_fixed_points {
            let d = sup_diff(fp.q_star.values(), report.regular_fixed_point.q_star.values());
            assert!(d <= report.r + 1e-9, "case {case}: agent beyond radius");
        }
    }
}

#[test]
fn report_extrema_cover_every_regular_table() {
    for case in 0..20u64 {
        let inst = random_instance(case);
        let mut rng = RngStream::new(0xFEED, StreamPurpose::Init, case, 2, 0);
        let num_agents = 2 + rng.pick(2);
        let mean: Vec<f64> = (0..num_agents)
            .flat_map(|_| {
                let offset = rng.uniform_range(-1.0, 1.0);
                inst.costs.iter().map(move |c| c + offset).collect::<Vec<_>>()
            })
            .collect();
        let costs = CostModel::new(
            num_agents,
            inst.mdp.num_states,
            inst.mdp.num_actions,
            mean,
            vec![qdsim::mdp::NoiseKind::None; num_agents],
        )
        .unwrap();
        let regular: Vec<usize> = (0..num_agents).collect();
        let report = bound_report(&inst.mdp, &costs, &regular, DEFAULT_TOL).unwrap();
        for fp in &report.agent_fixed_points {
            for &v in fp.q_star.values() {
                assert!(v <= report.m_upper + 1e-12 && v >= report.m_lower - 1e-12);
            }
        }
    }
}
