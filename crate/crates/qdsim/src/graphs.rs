//! Directed communication graphs, time-varying schedules, and structural
//! certification: rootedness, r-reachability, r-robustness, F-local
//! adversary placements.
//!
//! Edge `(l, n)` means agent `l` sends to agent `n`, so consensus terms for
//! agent `n` range over its in-neighbors. Self-loops are disallowed; the
//! update rule adds the self term separately.

use std::collections::BTreeSet;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng::{RngStream, StreamPurpose};

/// Brute-force robustness refuses graphs larger than this unless the caller
/// raises the cap explicitly; the labeling enumeration is Θ(3^N).
pub const DEFAULT_ROBUSTNESS_CAP: usize = 16;

/// Hard ceiling for the bitmask-based subset enumeration.
const MASK_LIMIT: usize = 60;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("node {node} out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-loop on node {0} is not allowed")]
    SelfLoop(usize),
    #[error("node subset must be nonempty")]
    EmptySubset,
    #[error("robustness of a graph on {n} nodes: exponential check too large (cap {cap})")]
    TooLarge { n: usize, cap: usize },
    #[error("adversary set must leave at least one regular node")]
    NoRegularNodes,
    #[error("graph sizes disagree: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("cyclic schedule needs at least one graph")]
    EmptySchedule,
    #[error("graph generation failed: {0}")]
    Generation(String),
}

/// Simple directed graph with deduplicated edges and sorted adjacency.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut set = BTreeSet::new();
        for (l, v) in edges {
            if l >= n {
                return Err(GraphError::NodeOutOfRange { node: l, n });
            }
            if v >= n {
                return Err(GraphError::NodeOutOfRange { node: v, n });
            }
            if l == v {
                return Err(GraphError::SelfLoop(l));
            }
            set.insert((l, v));
        }
        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(l, v) in &set {
            in_neighbors[v].push(l);
            out_neighbors[l].push(v);
        }
        // BTreeSet iteration makes out-lists sorted already; in-lists need it.
        for list in &mut in_neighbors {
            list.sort_unstable();
        }
        Ok(Digraph { n, edges: set, in_neighbors, out_neighbors })
    }

    /// Complete bidirectional graph K_n.
    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges = (0..n).flat_map(|l| (0..n).filter(move |&v| v != l).map(move |v| (l, v)));
        Digraph::new(n, edges)
    }

    /// Bidirectional circulant: each node linked with its k nearest
    /// neighbors on each side of the cycle.
    pub fn ring(n: usize, k: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::Generation(format!(
                "ring needs at least 3 nodes, got {n}"
            )));
        }
        if k == 0 || 2 * k >= n {
            return Err(GraphError::Generation(format!(
                "ring offset k={k} must satisfy 1 <= k < n/2 for n={n}"
            )));
        }
        let mut edges = Vec::new();
        for v in 0..n {
            for d in 1..=k {
                edges.push((v, (v + d) % n));
                edges.push(((v + d) % n, v));
            }
        }
        Digraph::new(n, edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, l: usize, v: usize) -> bool {
        self.edges.contains(&(l, v))
    }

    /// Copy of the graph with one extra edge.
    pub fn with_edge(&self, l: usize, v: usize) -> Result<Self, GraphError> {
        let mut edges: Vec<_> = self.edges.iter().copied().collect();
        edges.push((l, v));
        Digraph::new(self.n, edges)
    }

    pub fn in_neighbors(&self, v: usize) -> &[usize] {
        assert!(v < self.n, "node index {v} out of range");
        &self.in_neighbors[v]
    }

    pub fn out_neighbors(&self, v: usize) -> &[usize] {
        assert!(v < self.n, "node index {v} out of range");
        &self.out_neighbors[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_neighbors(v).len()
    }

    pub fn max_in_degree(&self) -> usize {
        (0..self.n).map(|v| self.in_neighbors[v].len()).max().unwrap_or(0)
    }

    /// Smallest node that reaches every other node along directed edges,
    /// if one exists.
    pub fn find_root(&self) -> Option<usize> {
        (0..self.n).find(|&start| self.reaches_all(start))
    }

    pub fn is_rooted(&self) -> bool {
        self.find_root().is_some()
    }

    fn reaches_all(&self, start: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![start];
        seen[start] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.out_neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// True iff some node of `set` has at least `r` in-neighbors outside
    /// `set`.
    pub fn is_r_reachable(&self, set: &[usize], r: usize) -> Result<bool, GraphError> {
        if set.is_empty() {
            return Err(GraphError::EmptySubset);
        }
        let mut inside = vec![false; self.n];
        for &v in set {
            if v >= self.n {
                return Err(GraphError::NodeOutOfRange { node: v, n: self.n });
            }
            inside[v] = true;
        }
        Ok(set.iter().any(|&v| {
            self.in_neighbors[v].iter().filter(|&&l| !inside[l]).count() >= r
        }))
    }

    fn in_masks(&self) -> Vec<u64> {
        let mut masks = vec![0u64; self.n];
        for &(l, v) in &self.edges {
            masks[v] |= 1 << l;
        }
        masks
    }

    /// Exhaustive r-robustness check: every pair of disjoint nonempty node
    /// subsets has at least one r-reachable member. Early exit on the first
    /// witness pair that fails.
    pub fn is_r_robust(&self, r: usize) -> Result<bool, GraphError> {
        self.is_r_robust_with_cap(r, DEFAULT_ROBUSTNESS_CAP)
    }

    pub fn is_r_robust_with_cap(&self, r: usize, cap: usize) -> Result<bool, GraphError> {
        if self.n > cap.min(MASK_LIMIT) {
            return Err(GraphError::TooLarge { n: self.n, cap: cap.min(MASK_LIMIT) });
        }
        if r == 0 {
            return Ok(true);
        }
        let masks = self.in_masks();
        let mut failing_pair = false;
        self.for_each_disjoint_pair(&masks, |reach1, reach2| {
            if reach1 < r && reach2 < r {
                failing_pair = true;
                true // stop
            } else {
                false
            }
        });
        Ok(!failing_pair)
    }

    /// Largest r <= max_r such that the graph is r-robust, by exhaustive
    /// enumeration of {S1, S2, outside} labelings.
    pub fn robustness(&self, max_r: usize) -> Result<usize, GraphError> {
        self.robustness_with_cap(max_r, DEFAULT_ROBUSTNESS_CAP)
    }

    pub fn robustness_with_cap(&self, max_r: usize, cap: usize) -> Result<usize, GraphError> {
        if self.n > cap.min(MASK_LIMIT) {
            return Err(GraphError::TooLarge { n: self.n, cap: cap.min(MASK_LIMIT) });
        }
        if self.n == 1 {
            // No disjoint nonempty pair exists; every r holds vacuously.
            return Ok(max_r);
        }
        let masks = self.in_masks();
        let mut best = usize::MAX;
        self.for_each_disjoint_pair(&masks, |reach1, reach2| {
            let pair_bound = reach1.max(reach2);
            if pair_bound < best {
                best = pair_bound;
            }
            best == 0 // cannot get lower; stop
        });
        Ok(best.min(max_r))
    }

    /// Visits every unordered pair of disjoint nonempty subsets with their
    /// maximal outside-in-neighbor counts; stops early when the callback
    /// returns true.
    fn for_each_disjoint_pair(
        &self,
        masks: &[u64],
        mut visit: impl FnMut(usize, usize) -> bool,
    ) {
        let full: u64 = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let reach = |set: u64| -> usize {
            let mut bits = set;
            let mut best = 0usize;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let outside = (masks[v] & !set).count_ones() as usize;
                if outside > best {
                    best = outside;
                }
            }
            best
        };
        // Union set t, then subsets s1 of t that contain t's lowest bit
        // (fixing the lowest bit picks one representative per unordered pair).
        let mut t: u64 = 1;
        while t <= full {
            if t.count_ones() >= 2 {
                let low = t & t.wrapping_neg();
                let rest = t ^ low;
                let mut s: u64 = 0;
                loop {
                    let s1 = low | s;
                    let s2 = t & !s1;
                    if s2 != 0 && visit(reach(s1), reach(s2)) {
                        return;
                    }
                    if s == rest {
                        break;
                    }
                    s = s.wrapping_sub(rest) & rest;
                }
            }
            t += 1;
        }
    }

    /// True iff every regular node has at most `f` adversarial in-neighbors.
    pub fn is_f_local(&self, adv: &AdversarySet, f: usize) -> Result<bool, GraphError> {
        if adv.num_nodes() != self.n {
            return Err(GraphError::SizeMismatch(adv.num_nodes(), self.n));
        }
        Ok((0..self.n).filter(|&v| !adv.contains(v)).all(|v| {
            self.in_neighbors[v].iter().filter(|&&l| adv.contains(l)).count() <= f
        }))
    }
}

#[derive(Serialize, Deserialize)]
struct DigraphRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Serialize for Digraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DigraphRepr { n: self.n, edges: self.edges.iter().copied().collect() }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Digraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DigraphRepr::deserialize(deserializer)?;
        Digraph::new(repr.n, repr.edges).map_err(serde::de::Error::custom)
    }
}

/// Adversarial node placement; the complement (regular set) must be
/// nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdversarySet {
    n: usize,
    members: BTreeSet<usize>,
}

impl AdversarySet {
    pub fn new(
        n: usize,
        members: impl IntoIterator<Item = usize>,
    ) -> Result<Self, GraphError> {
        let members: BTreeSet<usize> = members.into_iter().collect();
        for &v in &members {
            if v >= n {
                return Err(GraphError::NodeOutOfRange { node: v, n });
            }
        }
        if members.len() == n {
            return Err(GraphError::NoRegularNodes);
        }
        Ok(AdversarySet { n, members })
    }

    pub fn empty(n: usize) -> Self {
        AdversarySet { n, members: BTreeSet::new() }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.contains(&v)
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    /// Ascending list of regular (non-adversarial) nodes.
    pub fn regular(&self) -> Vec<usize> {
        (0..self.n).filter(|v| !self.members.contains(v)).collect()
    }
}

/// Communication topology over time: one fixed graph or a cyclic family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GraphSchedule {
    Static(Digraph),
    Cyclic(Vec<Digraph>),
}

impl GraphSchedule {
    pub fn cyclic(graphs: Vec<Digraph>) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptySchedule)?;
        let n = first.num_nodes();
        for g in &graphs {
            if g.num_nodes() != n {
                return Err(GraphError::SizeMismatch(g.num_nodes(), n));
            }
        }
        Ok(GraphSchedule::Cyclic(graphs))
    }

    pub fn at(&self, t: u64) -> &Digraph {
        match self {
            GraphSchedule::Static(g) => g,
            GraphSchedule::Cyclic(gs) => &gs[(t % gs.len() as u64) as usize],
        }
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            GraphSchedule::Static(g) => g.num_nodes(),
            GraphSchedule::Cyclic(gs) => gs[0].num_nodes(),
        }
    }

    pub fn period(&self) -> usize {
        match self {
            GraphSchedule::Static(_) => 1,
            GraphSchedule::Cyclic(gs) => gs.len(),
        }
    }

    pub fn members(&self) -> &[Digraph] {
        match self {
            GraphSchedule::Static(g) => std::slice::from_ref(g),
            GraphSchedule::Cyclic(gs) => gs,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, GraphSchedule::Static(_))
    }
}

/// Named topology families for scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    Complete,
    Ring { k: usize },
    RotatingRooted { period: usize },
}

/// Builds a schedule from a named family. `seed` only matters for the
/// randomized rotating_rooted family.
pub fn generate(kind: GeneratorKind, n: usize, seed: u64) -> Result<GraphSchedule, GraphError> {
    if n < 2 {
        return Err(GraphError::Generation(format!(
            "generated families need at least 2 nodes, got {n}"
        )));
    }
    match kind {
        GeneratorKind::Complete => Ok(GraphSchedule::Static(Digraph::complete(n)?)),
        GeneratorKind::Ring { k } => Ok(GraphSchedule::Static(Digraph::ring(n, k)?)),
        GeneratorKind::RotatingRooted { period } => {
            if period == 0 {
                return Err(GraphError::Generation("period must be at least 1".into()));
            }
            let mut graphs: Vec<Digraph> = Vec::with_capacity(period);
            for idx in 0..period {
                let mut found = None;
                for attempt in 0..64u64 {
                    let g = random_rooted(n, seed, idx as u64, attempt);
                    if !graphs.contains(&g) {
                        found = Some(g);
                        break;
                    }
                }
                let g = found.ok_or_else(|| {
                    GraphError::Generation(format!(
                        "could not draw {period} distinct rooted graphs on {n} nodes"
                    ))
                })?;
                if !g.is_rooted() {
                    return Err(GraphError::Generation(
                        "generated member graph is not rooted".into(),
                    ));
                }
                graphs.push(g);
            }
            GraphSchedule::cyclic(graphs)
        }
    }
}

/// Random spanning arborescence (guaranteeing a root) plus random extra
/// edges at density 0.3.
fn random_rooted(n: usize, seed: u64, idx: u64, attempt: u64) -> Digraph {
    let mut rng = RngStream::new(seed, StreamPurpose::Graph, idx, attempt, 0);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.pick(i + 1));
    }
    let mut edges = Vec::new();
    for child in 1..n {
        let parent = order[rng.pick(child)];
        edges.push((parent, order[child]));
    }
    for l in 0..n {
        for v in 0..n {
            if l != v && rng.unit() < 0.3 {
                edges.push((l, v));
            }
        }
    }
    Digraph::new(n, edges).expect("constructed edges are in range and loop-free")
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum ScheduleRepr {
    Static {
        graph: Digraph,
    },
    Cyclic {
        graphs: Vec<Digraph>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<usize>,
    },
    Generated {
        #[serde(flatten)]
        kind: GeneratorKind,
        n: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl Serialize for GraphSchedule {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            GraphSchedule::Static(g) => ScheduleRepr::Static { graph: g.clone() },
            GraphSchedule::Cyclic(gs) => {
                ScheduleRepr::Cyclic { graphs: gs.clone(), period: Some(gs.len()) }
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GraphSchedule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match ScheduleRepr::deserialize(deserializer)? {
            ScheduleRepr::Static { graph } => Ok(GraphSchedule::Static(graph)),
            ScheduleRepr::Cyclic { graphs, period } => {
                if let Some(p) = period {
                    if p != graphs.len() {
                        return Err(serde::de::Error::custom(format!(
                            "period {p} disagrees with {} listed graphs",
                            graphs.len()
                        )));
                    }
                }
                GraphSchedule::cyclic(graphs).map_err(serde::de::Error::custom)
            }
            ScheduleRepr::Generated { kind, n, seed } => {
                generate(kind, n, seed).map_err(serde::de::Error::custom)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn digraph(n: usize, edges: &[(usize, usize)]) -> Digraph {
        Digraph::new(n, edges.iter().copied()).unwrap()
    }

    #[test]
    fn cycle_is_rooted_at_zero() {
        let g = digraph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(g.find_root(), Some(0));
    }

    #[test]
    fn isolated_nodes_are_not_rooted() {
        let g = digraph(2, &[]);
        assert_eq!(g.find_root(), None);
    }

    #[test]
    fn star_is_rooted_at_the_hub() {
        let g = digraph(4, &[(2, 0), (2, 1), (2, 3)]);
        assert_eq!(g.find_root(), Some(2));
    }

    #[test]
    fn self_loops_are_rejected() {
        assert_eq!(Digraph::new(3, [(1, 1)]).unwrap_err(), GraphError::SelfLoop(1));
        assert_eq!(
            Digraph::new(2, [(0, 5)]).unwrap_err(),
            GraphError::NodeOutOfRange { node: 5, n: 2 }
        );
    }

    #[test]
    fn reachability_on_complete_graph() {
        let g = Digraph::complete(4).unwrap();
        assert!(g.is_r_reachable(&[0], 3).unwrap());
        assert!(!g.is_r_reachable(&[0], 4).unwrap());
    }

    #[test]
    fn reachability_on_four_cycle() {
        let g = Digraph::ring(4, 1).unwrap();
        assert!(g.is_r_reachable(&[0, 1], 1).unwrap());
        assert!(!g.is_r_reachable(&[0, 1], 2).unwrap());
    }

    #[test]
    fn full_set_is_never_reachable_for_positive_r() {
        let g = Digraph::complete(4).unwrap();
        assert!(!g.is_r_reachable(&[0, 1, 2, 3], 1).unwrap());
        assert!(g.is_r_reachable(&[0, 1, 2, 3], 0).unwrap());
        assert_eq!(g.is_r_reachable(&[], 1).unwrap_err(), GraphError::EmptySubset);
    }

    #[test]
    fn robustness_of_known_graphs() {
        assert_eq!(Digraph::complete(5).unwrap().robustness(5).unwrap(), 3);
        assert_eq!(Digraph::ring(6, 1).unwrap().robustness(6).unwrap(), 1);
        // Bidirectional path on 4 nodes.
        let path = digraph(4, &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)]);
        assert_eq!(path.robustness(4).unwrap(), 1);
        // Disconnected pair.
        assert_eq!(digraph(2, &[]).robustness(2).unwrap(), 0);
    }

    #[test]
    fn robustness_respects_the_cap() {
        let g = Digraph::complete(20).unwrap();
        assert!(matches!(g.robustness(3), Err(GraphError::TooLarge { n: 20, cap: 16 })));
        assert!(g.robustness_with_cap(3, 20).is_ok());
    }

    #[test]
    fn r_robust_checker_is_coherent_with_robustness() {
        for (n, seed) in [(4, 1u64), (5, 2), (6, 3), (7, 4)] {
            let g = random_rooted(n, seed, 0, 0);
            let rob = g.robustness(n).unwrap();
            assert!(g.is_r_robust(rob).unwrap());
            assert!(!g.is_r_robust(rob + 1).unwrap());
            if rob >= 1 {
                assert!(g.is_r_robust(rob - 1).unwrap());
            }
        }
    }

    #[test]
    fn f_locality_on_k5() {
        let g = Digraph::complete(5).unwrap();
        let one = AdversarySet::new(5, [4]).unwrap();
        let two = AdversarySet::new(5, [3, 4]).unwrap();
        assert!(g.is_f_local(&one, 1).unwrap());
        assert!(!g.is_f_local(&two, 1).unwrap());
        assert!(g.is_f_local(&AdversarySet::empty(5), 0).unwrap());
    }

    #[test]
    fn adversary_set_needs_a_regular_remnant() {
        assert_eq!(
            AdversarySet::new(2, [0, 1]).unwrap_err(),
            GraphError::NoRegularNodes
        );
        let set = AdversarySet::new(3, [2]).unwrap();
        assert_eq!(set.regular(), vec![0, 1]);
    }

    #[test]
    fn generators_meet_their_contracts() {
        let complete = generate(GeneratorKind::Complete, 5, 0).unwrap();
        assert_eq!(complete.at(0).robustness(5).unwrap(), 3);

        let ring = generate(GeneratorKind::Ring { k: 1 }, 6, 0).unwrap();
        assert_eq!(ring.at(0).robustness(6).unwrap(), 1);

        let rotating = generate(GeneratorKind::RotatingRooted { period: 3 }, 5, 7).unwrap();
        assert_eq!(rotating.period(), 3);
        for g in rotating.members() {
            assert!(g.is_rooted());
        }
        // Members are pairwise distinct.
        assert_ne!(rotating.members()[0], rotating.members()[1]);
        assert_ne!(rotating.members()[1], rotating.members()[2]);
        // Deterministic in the seed.
        let again = generate(GeneratorKind::RotatingRooted { period: 3 }, 5, 7).unwrap();
        assert_eq!(rotating.members(), again.members());
    }

    #[test]
    fn complete_family_robustness_matches_half_n() {
        for n in 2..=8 {
            let g = Digraph::complete(n).unwrap();
            assert_eq!(g.robustness(n).unwrap(), n.div_ceil(2), "K{n}");
        }
    }

    #[test]
    fn robustness_is_monotone_under_edge_addition() {
        for seed in 0..20u64 {
            let n = 4 + (seed % 4) as usize;
            let g = random_rooted(n, seed, 1, 0);
            let before = g.robustness(n).unwrap();
            // Add the first absent edge found.
            'outer: for l in 0..n {
                for v in 0..n {
                    if l != v && !g.has_edge(l, v) {
                        let bigger = g.with_edge(l, v).unwrap();
                        assert!(bigger.robustness(n).unwrap() >= before);
                        break 'outer;
                    }
                }
            }
        }
    }

    #[test]
    fn rootedness_agrees_with_matrix_power_closure() {
        for seed in 0..30u64 {
            let n = 3 + (seed % 6) as usize;
            let mut rng = RngStream::new(seed, StreamPurpose::Graph, 9, 9, 9);
            let mut edges = Vec::new();
            for l in 0..n {
                for v in 0..n {
                    if l != v && rng.unit() < 0.25 {
                        edges.push((l, v));
                    }
                }
            }
            let g = digraph(n, &edges);
            // Boolean matrix closure by repeated squaring-free powering.
            let mut reach = vec![vec![false; n]; n];
            for (v, row) in reach.iter_mut().enumerate() {
                row[v] = true;
            }
            for &(l, v) in &edges {
                reach[l][v] = true;
            }
            for _ in 0..n {
                let prev = reach.clone();
                for a in 0..n {
                    for b in 0..n {
                        if !reach[a][b] {
                            reach[a][b] = (0..n).any(|m| prev[a][m] && prev[m][b]);
                        }
                    }
                }
            }
            let closure_rooted = (0..n).any(|v| (0..n).all(|w| reach[v][w]));
            assert_eq!(g.is_rooted(), closure_rooted, "seed {seed}");
        }
    }

    #[test]
    fn schedule_serialization_round_trips() {
        let sched = generate(GeneratorKind::RotatingRooted { period: 2 }, 4, 3).unwrap();
        let json = serde_json::to_string(&sched).unwrap();
        let back: GraphSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(sched, back);

        let gen_doc = serde_json::json!({
            "mode": "generated", "kind": "ring", "k": 1, "n": 6
        });
        let ring: GraphSchedule = serde_json::from_value(gen_doc).unwrap();
        assert!(ring.is_static());
        assert_eq!(ring.at(5).num_edges(), 12);
    }

    #[test]
    fn graph_json_shape_is_an_edge_list() {
        let g = digraph(3, &[(0, 1), (1, 2)]);
        let json = serde_json::to_value(&g).unwrap();
        assert_eq!(json, serde_json::json!({"n": 3, "edges": [[0, 1], [1, 2]]}));
        let bad: Result<Digraph, _> =
            serde_json::from_value(serde_json::json!({"n": 2, "edges": [[0, 0]]}));
        assert!(bad.is_err());
    }

    #[test]
    fn cyclic_schedule_indexes_by_time_modulo_period() {
        let a = digraph(3, &[(0, 1), (1, 2), (2, 0)]);
        let b = digraph(3, &[(0, 2), (2, 1), (1, 0)]);
        let sched = GraphSchedule::cyclic(vec![a.clone(), b.clone()]).unwrap();
        assert_eq!(sched.at(0), &a);
        assert_eq!(sched.at(1), &b);
        assert_eq!(sched.at(2), &a);
        assert_eq!(sched.period(), 2);
    }
}
