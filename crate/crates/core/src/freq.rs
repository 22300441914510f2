//! Crossing graph of the folded resonator network and minimum-detuning
//! frequency assignment.
//!
//! Two resonators that cross via an airbridge exchange energy when they are
//! on resonance, so every crossing pair must be detuned by at least a
//! configurable minimum (10 MHz by default, the measured crosstalk
//! bandwidth). Candidate frequencies live on a `delta_min / 2` lattice, which
//! makes feasibility checks exact integer arithmetic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layout::{route_wires, PhysicalLayout};
use crate::parallel;

#[derive(Debug, Error, PartialEq)]
pub enum FreqError {
    #[error("layout is not folded; fold it before deriving the crossing graph")]
    NotFolded,
    #[error("frequency band is empty: f_min {0} Hz >= f_max {1} Hz")]
    EmptyBand(f64, f64),
    #[error("delta_min must be positive, got {0} Hz")]
    NonPositiveDeltaMin(f64),
    #[error("plan is missing an assignment for resonator {0}")]
    MissingAssignment(u32),
    #[error("no feasible assignment: {certificate}")]
    Infeasible { certificate: InfeasibleCertificate },
}

/// Evidence that the constraints cannot be met: the node whose neighborhood
/// saturated the band (for a clique of size k this demands a band of width
/// at least `(k-1) * delta_min`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleCertificate {
    pub saturated_node: u32,
    pub assigned_neighbors: Vec<(u32, f64)>,
    pub band_width_hz: f64,
    pub delta_min_hz: f64,
}

impl std::fmt::Display for InfeasibleCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "resonator {} has {} already-assigned crossing partners and a band of {:.3e} Hz \
             leaves no slot detuned by {:.3e} Hz from all of them",
            self.saturated_node,
            self.assigned_neighbors.len(),
            self.band_width_hz,
            self.delta_min_hz
        )
    }
}

/// Resonators that participate in at least one airbridge crossing, with one
/// edge per physically crossing pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingGraph {
    pub nodes: Vec<u32>,
    pub edges: Vec<(u32, u32)>,
}

impl CrossingGraph {
    pub fn adjacency(&self) -> BTreeMap<u32, Vec<u32>> {
        let mut adj: BTreeMap<u32, Vec<u32>> = self.nodes.iter().map(|&n| (n, vec![])).collect();
        for &(a, b) in &self.edges {
            adj.get_mut(&a).unwrap().push(b);
            adj.get_mut(&b).unwrap().push(a);
        }
        adj
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency().values().map(Vec::len).max().unwrap_or(0)
    }

    /// A complete graph on `k` synthetic nodes, useful for stress cases.
    pub fn clique(k: u32) -> Self {
        let nodes: Vec<u32> = (0..k).collect();
        let mut edges = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                edges.push((i, j));
            }
        }
        CrossingGraph { nodes, edges }
    }

    fn connected_components(&self) -> Vec<Vec<u32>> {
        let adj = self.adjacency();
        let mut seen = BTreeMap::new();
        let mut components = Vec::new();
        for &start in &self.nodes {
            if seen.contains_key(&start) {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen.insert(start, true);
            while let Some(node) = stack.pop() {
                comp.push(node);
                for &nb in &adj[&node] {
                    if seen.insert(nb, true).is_none() {
                        stack.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }
}

/// Derive the crossing graph from a folded layout.
///
/// Edge `(i, j)` means resonators `i` and `j` physically cross: they wrap the
/// same fold and escape through the same strip edge, so one bridges over the
/// other.
pub fn crossing_graph(layout: &PhysicalLayout) -> Result<CrossingGraph, FreqError> {
    if !layout.is_folded() {
        return Err(FreqError::NotFolded);
    }
    let routing = route_wires(layout);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for group in &routing.crossing_groups {
        for (k, &a) in group.iter().enumerate() {
            nodes.push(a as u32);
            for &b in &group[k + 1..] {
                let (lo, hi) = (a.min(b) as u32, a.max(b) as u32);
                edges.push((lo, hi));
            }
        }
    }
    nodes.sort_unstable();
    nodes.dedup();
    edges.sort_unstable();
    edges.dedup();
    Ok(CrossingGraph { nodes, edges })
}

/// A frequency assignment over a band with a minimum pairwise detuning for
/// crossing resonators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPlan {
    /// `(f_min, f_max)` in Hz.
    pub band: (f64, f64),
    /// Minimum allowed detuning between crossing resonators, Hz.
    pub delta_min: f64,
    /// Resonator id to assigned frequency in Hz.
    pub assignment: BTreeMap<u32, f64>,
}

/// A detuning constraint violation found by [`verify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    pub i: u32,
    pub j: u32,
    pub detuning_hz: f64,
}

/// Assign frequencies greedily, highest-degree nodes first, choosing the
/// smallest feasible slot on the `delta_min / 2` lattice. Backtracking is
/// bounded by the node count; exhaustion yields an [`InfeasibleCertificate`].
/// Connected components are independent and are allocated in parallel.
pub fn allocate(
    graph: &CrossingGraph,
    band: (f64, f64),
    delta_min: f64,
) -> Result<FrequencyPlan, FreqError> {
    if band.1 <= band.0 {
        return Err(FreqError::EmptyBand(band.0, band.1));
    }
    if delta_min <= 0.0 {
        return Err(FreqError::NonPositiveDeltaMin(delta_min));
    }
    let step = delta_min / 2.0;
    // Slots 0..=max_slot; a detuning constraint |f_i - f_j| >= delta_min is
    // exactly |slot_i - slot_j| >= 2.
    let max_slot = ((band.1 - band.0) / step).floor() as i64;

    let components = graph.connected_components();
    let adj = graph.adjacency();
    let results = parallel::map_slice(&components, |comp| {
        allocate_component(comp, &adj, max_slot)
    });

    let mut assignment = BTreeMap::new();
    for result in results {
        let slots = result.map_err(|certificate| {
            FreqError::Infeasible {
                certificate: InfeasibleCertificate {
                    band_width_hz: band.1 - band.0,
                    delta_min_hz: delta_min,
                    saturated_node: certificate.0,
                    assigned_neighbors: certificate
                        .1
                        .into_iter()
                        .map(|(id, slot)| (id, band.0 + slot as f64 * step))
                        .collect(),
                },
            }
        })?;
        for (id, slot) in slots {
            assignment.insert(id, band.0 + slot as f64 * step);
        }
    }

    Ok(FrequencyPlan {
        band,
        delta_min,
        assignment,
    })
}

type ComponentFailure = (u32, Vec<(u32, i64)>);

fn allocate_component(
    comp: &[u32],
    adj: &BTreeMap<u32, Vec<u32>>,
    max_slot: i64,
) -> Result<Vec<(u32, i64)>, ComponentFailure> {
    // Degree-descending order with id as the deterministic tiebreak.
    let mut order: Vec<u32> = comp.to_vec();
    order.sort_by_key(|&n| (std::cmp::Reverse(adj[&n].len()), n));

    let mut slot_of: BTreeMap<u32, i64> = BTreeMap::new();
    let feasible = |slot_of: &BTreeMap<u32, i64>, node: u32, slot: i64| {
        adj[&node]
            .iter()
            .all(|nb| slot_of.get(nb).is_none_or(|&s| (s - slot).abs() >= 2))
    };
    let next_feasible = |slot_of: &BTreeMap<u32, i64>, node: u32, from: i64| -> Option<i64> {
        (from..=max_slot).find(|&s| feasible(slot_of, node, s))
    };

    let mut chosen: Vec<i64> = Vec::with_capacity(order.len());
    let mut idx = 0;
    let mut backtracks = 0usize;
    while idx < order.len() {
        let node = order[idx];
        let start = if chosen.len() > idx { chosen[idx] + 1 } else { 0 };
        chosen.truncate(idx);
        match next_feasible(&slot_of, node, start) {
            Some(slot) => {
                chosen.push(slot);
                slot_of.insert(node, slot);
                idx += 1;
            }
            None => {
                backtracks += 1;
                if idx == 0 || backtracks > order.len() {
                    let neighbors = adj[&node]
                        .iter()
                        .filter_map(|nb| slot_of.get(nb).map(|&s| (*nb, s)))
                        .collect();
                    return Err((node, neighbors));
                }
                idx -= 1;
                slot_of.remove(&order[idx]);
            }
        }
    }
    Ok(order.into_iter().zip(chosen).collect())
}

/// Check a plan against a crossing graph, reporting every violated edge.
pub fn verify(plan: &FrequencyPlan, graph: &CrossingGraph) -> Result<Vec<Violation>, FreqError> {
    for &node in &graph.nodes {
        if !plan.assignment.contains_key(&node) {
            return Err(FreqError::MissingAssignment(node));
        }
    }
    // 1 uHz of absolute slack so exact lattice assignments never flag.
    let slack = 1e-6;
    let mut violations = Vec::new();
    for &(i, j) in &graph.edges {
        let detuning = (plan.assignment[&i] - plan.assignment[&j]).abs();
        if detuning < plan.delta_min - slack {
            violations.push(Violation {
                i,
                j,
                detuning_hz: detuning,
            });
        }
    }
    Ok(violations)
}

/// Copy a plan's frequencies onto the layout's resonators.
pub fn apply_plan(layout: &mut PhysicalLayout, plan: &FrequencyPlan) {
    for (idx, edge) in layout.resonators.iter_mut().enumerate() {
        if let Some(&f) = plan.assignment.get(&(idx as u32)) {
            edge.frequency = Some(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_grid, fold, Encoding, SurfaceCodeSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn folded(d: u32, n: u32) -> PhysicalLayout {
        let spec = SurfaceCodeSpec::new(d, n, Encoding::Square).unwrap();
        fold(&build_grid(&spec).unwrap()).unwrap()
    }

    #[test]
    fn crossing_graph_requires_folded_layout() {
        let spec = SurfaceCodeSpec::new(3, 1, Encoding::Square).unwrap();
        let prefold = build_grid(&spec).unwrap();
        assert_eq!(crossing_graph(&prefold), Err(FreqError::NotFolded));
    }

    #[test]
    fn d3_max_degree_is_two() {
        let graph = crossing_graph(&folded(3, 1)).unwrap();
        assert_eq!(graph.max_degree(), 2);
    }

    #[test]
    fn d5_max_degree_is_four() {
        let graph = crossing_graph(&folded(5, 1)).unwrap();
        assert_eq!(graph.max_degree(), 4);
    }

    #[test]
    fn single_column_layout_has_empty_graph() {
        // Keep only one column's qubits and its vertical wires.
        let mut layout = folded(3, 1);
        layout.qubits.retain(|q| q.grid_pos.1 == 0);
        let ids: std::collections::HashSet<u32> = layout.qubits.iter().map(|q| q.id).collect();
        layout
            .resonators
            .retain(|e| ids.contains(&e.endpoints.0) && ids.contains(&e.endpoints.1));
        let graph = crossing_graph(&layout).unwrap();
        assert!(graph.nodes.is_empty());
        assert!(graph.edges.is_empty());
    }

    #[test]
    fn two_crossed_resonators_get_detuned() {
        let graph = CrossingGraph::clique(2);
        let plan = allocate(&graph, (8.0e9, 8.1e9), 1.0e7).unwrap();
        let f1 = plan.assignment[&0];
        let f2 = plan.assignment[&1];
        assert!((f1 - f2).abs() >= 1.0e7);
        assert!(verify(&plan, &graph).unwrap().is_empty());
    }

    #[test]
    fn clique_feasibility_is_exact_on_the_lattice() {
        let delta = 1.0e7;
        for k in [2u32, 3, 5, 8] {
            let graph = CrossingGraph::clique(k);
            let exact_width = (k - 1) as f64 * delta;
            let plan = allocate(&graph, (7.0e9, 7.0e9 + exact_width), delta).unwrap();
            assert!(verify(&plan, &graph).unwrap().is_empty(), "k={k}");
            // One lattice step narrower cannot fit.
            let narrow = allocate(&graph, (7.0e9, 7.0e9 + exact_width - delta / 2.0), delta);
            assert!(
                matches!(narrow, Err(FreqError::Infeasible { .. })),
                "k={k}"
            );
        }
    }

    #[test]
    fn infeasible_certificate_names_saturated_node() {
        let graph = CrossingGraph::clique(4);
        let err = allocate(&graph, (7.0e9, 7.0e9 + 1.5e7), 1.0e7).unwrap_err();
        let FreqError::Infeasible { certificate } = err else {
            panic!("expected infeasibility");
        };
        assert!(!certificate.assigned_neighbors.is_empty());
        assert!(graph.nodes.contains(&certificate.saturated_node));
    }

    #[test]
    fn d3_n2_allocation_verifies_clean() {
        let layout = folded(3, 2);
        let graph = crossing_graph(&layout).unwrap();
        let plan = allocate(&graph, (7.0e9, 10.2e9), 1.0e7).unwrap();
        assert!(verify(&plan, &graph).unwrap().is_empty());
        for &f in plan.assignment.values() {
            assert!((7.0e9..=10.2e9).contains(&f));
        }
    }

    #[test]
    fn greedy_uses_at_most_d_distinct_slots() {
        for d in [3u32, 5, 7] {
            let layout = folded(d, 2);
            let graph = crossing_graph(&layout).unwrap();
            let plan = allocate(&graph, (7.0e9, 10.2e9), 1.0e7).unwrap();
            let mut slots: Vec<u64> = plan.assignment.values().map(|f| f.to_bits()).collect();
            slots.sort_unstable();
            slots.dedup();
            assert!(slots.len() as u32 <= d, "d={d} used {} slots", slots.len());
        }
    }

    #[test]
    fn allocation_is_deterministic() {
        let layout = folded(5, 3);
        let graph = crossing_graph(&layout).unwrap();
        let a = allocate(&graph, (7.0e9, 10.2e9), 1.0e7).unwrap();
        let b = allocate(&graph, (7.0e9, 10.2e9), 1.0e7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let graph = CrossingGraph::clique(2);
        assert!(matches!(
            allocate(&graph, (8.0e9, 8.0e9), 1.0e7),
            Err(FreqError::EmptyBand(_, _))
        ));
        assert!(matches!(
            allocate(&graph, (8.0e9, 9.0e9), 0.0),
            Err(FreqError::NonPositiveDeltaMin(_))
        ));
    }

    #[test]
    fn verify_reports_zero_detuning_pairs() {
        let graph = CrossingGraph::clique(2);
        let mut plan = allocate(&graph, (8.0e9, 8.1e9), 1.0e7).unwrap();
        plan.assignment.insert(1, plan.assignment[&0]);
        let violations = verify(&plan, &graph).unwrap();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].detuning_hz, 0.0);
    }

    #[test]
    fn verify_requires_full_coverage() {
        let graph = CrossingGraph::clique(3);
        let plan = FrequencyPlan {
            band: (7.0e9, 8.0e9),
            delta_min: 1.0e7,
            assignment: BTreeMap::from([(0, 7.0e9), (1, 7.5e9)]),
        };
        assert_eq!(verify(&plan, &graph), Err(FreqError::MissingAssignment(2)));
    }

    /// Randomized agreement with a brute-force pairwise check.
    #[test]
    fn verify_agrees_with_brute_force_on_random_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(2..12u32);
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(0.4) {
                        edges.push((i, j));
                    }
                }
            }
            let graph = CrossingGraph {
                nodes: (0..n).collect(),
                edges,
            };
            let delta = 1.0e7;
            let assignment: BTreeMap<u32, f64> = (0..n)
                .map(|i| (i, 7.0e9 + rng.gen_range(0.0..1.0e8)))
                .collect();
            let plan = FrequencyPlan {
                band: (7.0e9, 7.2e9),
                delta_min: delta,
                assignment: assignment.clone(),
            };
            let reported = verify(&plan, &graph).unwrap();
            let brute: Vec<(u32, u32)> = graph
                .edges
                .iter()
                .copied()
                .filter(|&(i, j)| (assignment[&i] - assignment[&j]).abs() < delta - 1e-6)
                .collect();
            let got: Vec<(u32, u32)> = reported.iter().map(|v| (v.i, v.j)).collect();
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn apply_plan_sets_edge_frequencies() {
        let mut layout = folded(3, 1);
        let graph = crossing_graph(&layout).unwrap();
        let plan = allocate(&graph, (7.0e9, 10.2e9), 1.0e7).unwrap();
        apply_plan(&mut layout, &plan);
        for &node in &graph.nodes {
            assert!(layout.resonators[node as usize].frequency.is_some());
        }
    }

    #[test]
    fn plan_json_shape() {
        let graph = CrossingGraph::clique(2);
        let plan = allocate(&graph, (8.0e9, 8.1e9), 1.0e7).unwrap();
        let json = serde_json::to_value(&plan).unwrap();
        assert!(json["band"].is_array());
        assert!(json["delta_min"].is_number());
        assert!(json["assignment"].is_object());
        let back: FrequencyPlan = serde_json::from_value(json).unwrap();
        assert_eq!(back, plan);
    }
}
