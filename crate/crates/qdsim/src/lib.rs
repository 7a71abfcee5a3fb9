//! Deterministic simulator and analysis toolkit for networked multi-agent
//! Q-learning under Byzantine adversaries.
//!
//! The crate provides:
//!
//! - [`mdp`]: finite controlled MDPs with per-agent stochastic cost models;
//! - [`graphs`]: directed communication graphs, time-varying schedules, and
//!   exact structural certification (rootedness, r-robustness, F-locality);
//! - [`learning`]: the QD-learning update, value-trimmed resilient variant,
//!   and step-size/weight schedules;
//! - [`adversary`]: Byzantine message strategies, from frozen tables to
//!   cost spoofing and per-receiver conflicting payloads;
//! - [`oracle`]: exact fixed points by value iteration plus the bound
//!   quantities (R, M_R, m_R, action-separation flags) used to judge runs;
//! - [`sim`]: the lockstep experiment engine with checkpointed metrics;
//! - [`cli`]: the command-line front end (`run`, `oracle`, `check-graph`,
//!   `sweep`, `attack-demo`).
//!
//! Every random draw comes from a counter-style stream keyed by
//! `(seed, purpose, entity, sub, t)`, so runs replay bit-identically and
//! adding consumers never perturbs existing draws.

pub mod adversary;
pub mod cli;
pub mod graphs;
pub mod learning;
pub mod mdp;
pub mod oracle;
pub mod rng;
pub mod sim;
