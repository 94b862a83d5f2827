//! Semantic graph construction and the Weisfeiler-Lehman diff kernel.
//!
//! Each cluster side becomes a labeled graph: summary nodes carry their
//! normalized text, edges carry their kind and direction. The kernel then
//! relabels both graphs in lockstep, folding neighbor labels into each node,
//! and counts label mismatches per iteration. Early iterations see local
//! differences, later ones see how far they propagate; weights fall off
//! linearly so a contained change scores lower than one that keeps
//! spreading.
//!
//! Benign-tagged nodes participate with a reduced weight, and a benign node
//! whose label has no counterpart in the other graph at the start is
//! transparent: neighbors aggregate as if it were not there. An added guard
//! or handler then leaves the surrounding structure's labels untouched
//! instead of dragging ever-larger neighborhoods into the mismatch count.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::benign::BenignSet;
use crate::hash::{fnv64_str, Fnv64};
use crate::slicer::{ClusterSlice, Origin};

/// Which snapshot a graph was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Old,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EdgeKind {
    ControlFlow,
    DataDep,
    Guard,
}

#[derive(Debug, Clone)]
pub struct SemanticNode {
    pub origin: Origin,
    pub label: String,
    pub benign: bool,
}

/// One cluster side as a labeled directed graph.
#[derive(Debug, Clone, Default)]
pub struct SemanticGraph {
    /// Sorted by origin.
    pub nodes: Vec<SemanticNode>,
    /// Indices into `nodes`.
    pub edges: BTreeSet<(usize, usize, EdgeKind)>,
}

impl SemanticGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn benign_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.benign).count()
    }
}

/// Builds the semantic graph of one slice, marking nodes the benign
/// classification claimed for that side.
pub fn semantic_graph(slice: &ClusterSlice, benign: &BenignSet, side: Side) -> SemanticGraph {
    let origins: BTreeSet<Origin> = slice
        .summaries
        .dds
        .keys()
        .chain(slice.summaries.cds.keys())
        .chain(slice.summaries.es.keys())
        .cloned()
        .collect();
    let index: BTreeMap<&Origin, usize> = origins.iter().zip(0..).collect();
    let nodes: Vec<SemanticNode> = origins
        .iter()
        .map(|origin| SemanticNode {
            origin: origin.clone(),
            label: slice.summaries.label(origin).unwrap_or_default(),
            benign: match side {
                Side::Old => benign.is_benign_old(origin),
                Side::New => benign.is_benign_new(origin),
            },
        })
        .collect();
    let mut edges = BTreeSet::new();
    let mut add = |set: &BTreeSet<(Origin, Origin)>, kind: EdgeKind| {
        for (from, to) in set {
            if let (Some(&f), Some(&t)) = (index.get(from), index.get(to)) {
                edges.insert((f, t, kind));
            }
        }
    };
    add(&slice.control_flow_edges, EdgeKind::ControlFlow);
    add(&slice.data_edges, EdgeKind::DataDep);
    add(&slice.guard_edges, EdgeKind::Guard);
    SemanticGraph { nodes, edges }
}

/// How benign tags enter the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// Benign nodes weigh `beta` individually and unmatched benign labels
    /// turn transparent for neighbor aggregation.
    PerNode,
    /// Mismatches stay integer; the final score is scaled by one global
    /// factor interpolating toward `beta` with the benign fraction of the
    /// new graph. Kept for comparison: it dampens genuine breaks that ride
    /// along with benign edits.
    Global,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    pub h: usize,
    pub threshold: f64,
    pub beta: f64,
    pub penalty_mode: PenaltyMode,
}

impl Default for KernelConfig {
    fn default() -> KernelConfig {
        KernelConfig {
            h: 3,
            threshold: 0.1,
            beta: 0.25,
            penalty_mode: PenaltyMode::PerNode,
        }
    }
}

/// Kernel output: the score, raw mismatch counts per iteration, and the
/// nodes that never found a counterpart.
#[derive(Debug, Clone)]
pub struct KernelResult {
    pub k: f64,
    pub per_iteration: Vec<f64>,
    pub is_semb: bool,
    pub unmatched_initial_old: BTreeSet<Origin>,
    pub unmatched_initial_new: BTreeSet<Origin>,
    pub unmatched_final_old: BTreeSet<Origin>,
    pub unmatched_final_new: BTreeSet<Origin>,
}

struct NodeRef<'a> {
    graph: &'a SemanticGraph,
    transparent: Vec<bool>,
    labels: Vec<u64>,
    /// Per node: (direction-tagged kind, neighbor index).
    adjacency: Vec<Vec<(&'static str, usize)>>,
}

fn edge_tags(kind: EdgeKind) -> (&'static str, &'static str) {
    match kind {
        EdgeKind::ControlFlow => ("cf>", "cf<"),
        EdgeKind::DataDep => ("dd>", "dd<"),
        EdgeKind::Guard => ("gd>", "gd<"),
    }
}

impl<'a> NodeRef<'a> {
    fn new(graph: &'a SemanticGraph) -> NodeRef<'a> {
        let labels = graph.nodes.iter().map(|n| fnv64_str(&n.label)).collect();
        let mut adjacency = vec![Vec::new(); graph.nodes.len()];
        for &(from, to, kind) in &graph.edges {
            let (out_tag, in_tag) = edge_tags(kind);
            adjacency[from].push((out_tag, to));
            adjacency[to].push((in_tag, from));
        }
        NodeRef {
            graph,
            transparent: vec![false; graph.nodes.len()],
            labels,
            adjacency,
        }
    }

    fn relabel(&mut self, skip_transparent: bool) {
        let mut next = Vec::with_capacity(self.labels.len());
        for (node, neighbors) in self.adjacency.iter().enumerate() {
            let mut contributions: Vec<u64> = neighbors
                .iter()
                .filter(|(_, neighbor)| !(skip_transparent && self.transparent[*neighbor]))
                .map(|(tag, neighbor)| {
                    Fnv64::new()
                        .bytes(tag.as_bytes())
                        .u64(self.labels[*neighbor])
                        .finish()
                })
                .collect();
            contributions.sort_unstable();
            let mut hash = Fnv64::new().u64(self.labels[node]);
            for contribution in contributions {
                hash = hash.u64(contribution);
            }
            next.push(hash.finish());
        }
        self.labels = next;
    }
}

/// Node labels per refinement round, base labels first, as the kernel
/// computes them when no node is transparent. Exposed so the refinement can
/// be replayed against independent implementations; only label equality
/// between nodes is meaningful, the hash values themselves are not.
pub fn wl_label_sequence(graph: &SemanticGraph, h: usize) -> Vec<Vec<u64>> {
    let mut node_ref = NodeRef::new(graph);
    let mut out = Vec::with_capacity(h);
    out.push(node_ref.labels.clone());
    for _ in 1..h {
        node_ref.relabel(false);
        out.push(node_ref.labels.clone());
    }
    out
}

/// Label-multiset matching between the two sides. Returns the unmatched
/// node indices per side; within one label, non-benign nodes are matched
/// first so leftovers fall on benign nodes where possible.
fn unmatched_nodes(a: &NodeRef<'_>, b: &NodeRef<'_>) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<u64, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, &label) in a.labels.iter().enumerate() {
        groups.entry(label).or_default().0.push(i);
    }
    for (i, &label) in b.labels.iter().enumerate() {
        groups.entry(label).or_default().1.push(i);
    }
    let mut unmatched_a = Vec::new();
    let mut unmatched_b = Vec::new();
    for (_, (mut in_a, mut in_b)) in groups {
        let budget = in_a.len().min(in_b.len());
        in_a.sort_by_key(|&i| (a.graph.nodes[i].benign, i));
        in_b.sort_by_key(|&i| (b.graph.nodes[i].benign, i));
        unmatched_a.extend(in_a.drain(budget..));
        unmatched_b.extend(in_b.drain(budget..));
    }
    unmatched_a.sort_unstable();
    unmatched_b.sort_unstable();
    (unmatched_a, unmatched_b)
}

/// Weighted mismatch count of one iteration: unmatched nodes pair up at
/// half their combined weight; an odd leftover counts at the cheapest
/// unmatched weight.
fn mismatch(
    a: &NodeRef<'_>,
    b: &NodeRef<'_>,
    unmatched_a: &[usize],
    unmatched_b: &[usize],
    beta: f64,
    weighted: bool,
) -> f64 {
    let weight_of = |graph: &NodeRef<'_>, i: usize| -> f64 {
        if weighted && graph.graph.nodes[i].benign {
            beta
        } else {
            1.0
        }
    };
    let mut total = 0.0;
    let mut cheapest = f64::INFINITY;
    let mut count = 0usize;
    for &i in unmatched_a {
        let w = weight_of(a, i);
        total += w;
        cheapest = cheapest.min(w);
        count += 1;
    }
    for &i in unmatched_b {
        let w = weight_of(b, i);
        total += w;
        cheapest = cheapest.min(w);
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    if count % 2 == 1 {
        total += cheapest;
    }
    total / 2.0
}

/// Runs the kernel over one pair of semantic graphs.
pub fn wl_kernel(old: &SemanticGraph, new: &SemanticGraph, config: &KernelConfig) -> KernelResult {
    let mut result = KernelResult {
        k: 0.0,
        per_iteration: vec![0.0; config.h],
        is_semb: false,
        unmatched_initial_old: BTreeSet::new(),
        unmatched_initial_new: BTreeSet::new(),
        unmatched_final_old: BTreeSet::new(),
        unmatched_final_new: BTreeSet::new(),
    };
    if old.is_empty() && new.is_empty() {
        return result;
    }
    if old.is_empty() || new.is_empty() {
        let nonempty = if old.is_empty() { new } else { old };
        let origins: BTreeSet<Origin> = nonempty.nodes.iter().map(|n| n.origin.clone()).collect();
        if old.is_empty() {
            result.unmatched_initial_new = origins.clone();
            result.unmatched_final_new = origins;
        } else {
            result.unmatched_initial_old = origins.clone();
            result.unmatched_final_old = origins;
        }
        result.k = 1.0;
        result.is_semb = result.k > config.threshold;
        return result;
    }

    let per_node = config.penalty_mode == PenaltyMode::PerNode;
    let mut a = NodeRef::new(old);
    let mut b = NodeRef::new(new);

    for iteration in 1..=config.h {
        let (unmatched_a, unmatched_b) = unmatched_nodes(&a, &b);
        if iteration == 1 {
            for &i in &unmatched_a {
                result
                    .unmatched_initial_old
                    .insert(a.graph.nodes[i].origin.clone());
                a.transparent[i] = per_node && a.graph.nodes[i].benign;
            }
            for &i in &unmatched_b {
                result
                    .unmatched_initial_new
                    .insert(b.graph.nodes[i].origin.clone());
                b.transparent[i] = per_node && b.graph.nodes[i].benign;
            }
        }
        if iteration == config.h {
            result.unmatched_final_old = unmatched_a
                .iter()
                .map(|&i| a.graph.nodes[i].origin.clone())
                .collect();
            result.unmatched_final_new = unmatched_b
                .iter()
                .map(|&i| b.graph.nodes[i].origin.clone())
                .collect();
        }
        result.per_iteration[iteration - 1] =
            mismatch(&a, &b, &unmatched_a, &unmatched_b, config.beta, per_node);
        if iteration < config.h {
            a.relabel(per_node);
            b.relabel(per_node);
        }
    }

    let h = config.h as f64;
    let mut weighted_sum = 0.0;
    for (index, m) in result.per_iteration.iter().enumerate() {
        let weight = (h - index as f64) / h;
        weighted_sum += m * weight;
    }
    let norm = old.len().min(new.len()) as f64;
    let mut k = weighted_sum / norm;
    if config.penalty_mode == PenaltyMode::Global {
        let fraction = new.benign_count() as f64 / new.len() as f64;
        k *= 1.0 - (1.0 - config.beta) * fraction;
    }
    result.k = k;
    result.is_semb = k > config.threshold;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Signature;

    fn graph(
        labels: &[&str],
        benign: &[bool],
        edges: &[(usize, usize, EdgeKind)],
    ) -> SemanticGraph {
        let sig = Signature::parse_str("T.m():void").unwrap();
        let nodes = labels
            .iter()
            .zip(benign)
            .enumerate()
            .map(|(i, (label, &benign))| SemanticNode {
                origin: Origin::new(sig.clone(), i),
                label: label.to_string(),
                benign,
            })
            .collect();
        SemanticGraph {
            nodes,
            edges: edges.iter().cloned().collect(),
        }
    }

    fn config(h: usize, beta: f64, penalty_mode: PenaltyMode) -> KernelConfig {
        KernelConfig {
            h,
            beta,
            penalty_mode,
            ..KernelConfig::default()
        }
    }

    #[test]
    fn diverging_path_tail_scores_two_thirds() {
        let old = graph(
            &["x", "y", "z"],
            &[false; 3],
            &[(0, 1, EdgeKind::DataDep), (1, 2, EdgeKind::DataDep)],
        );
        let new = graph(
            &["x", "y", "w"],
            &[false; 3],
            &[(0, 1, EdgeKind::DataDep), (1, 2, EdgeKind::DataDep)],
        );
        let result = wl_kernel(&old, &new, &config(2, 1.0, PenaltyMode::PerNode));
        assert_eq!(result.per_iteration, vec![1.0, 2.0]);
        assert_eq!(result.k, 2.0 / 3.0);
        assert!(result.is_semb);
        assert_eq!(result.unmatched_initial_old.len(), 1);
        assert_eq!(result.unmatched_initial_new.len(), 1);
        assert_eq!(result.unmatched_final_old.len(), 2);
    }

    #[test]
    fn identical_graphs_score_zero() {
        let g = graph(
            &["a", "b", "c", "a"],
            &[false; 4],
            &[
                (0, 1, EdgeKind::DataDep),
                (1, 2, EdgeKind::Guard),
                (2, 3, EdgeKind::ControlFlow),
                (3, 0, EdgeKind::DataDep),
            ],
        );
        let result = wl_kernel(&g, &g.clone(), &KernelConfig::default());
        assert_eq!(result.k, 0.0);
        assert!(!result.is_semb);
        assert!(result.unmatched_initial_old.is_empty());
        assert!(result.unmatched_final_new.is_empty());
    }

    #[test]
    fn empty_graph_rules() {
        let empty = SemanticGraph::default();
        let nonempty = graph(&["a"], &[false], &[]);
        let both = wl_kernel(&empty, &empty.clone(), &KernelConfig::default());
        assert_eq!(both.k, 0.0);
        assert!(!both.is_semb);
        let one = wl_kernel(&empty, &nonempty, &KernelConfig::default());
        assert_eq!(one.k, 1.0);
        assert!(one.is_semb);
        assert_eq!(one.unmatched_initial_new.len(), 1);
    }

    #[test]
    fn self_loop_on_ten_matched_nodes_lands_exactly_on_the_threshold() {
        let labels: Vec<String> = (0..10).map(|i| format!("n{i}")).collect();
        let label_refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let old = graph(&label_refs, &[false; 10], &[]);
        let new = graph(&label_refs, &[false; 10], &[(0, 0, EdgeKind::ControlFlow)]);
        let result = wl_kernel(&old, &new, &KernelConfig::default());
        assert_eq!(result.per_iteration, vec![0.0, 1.0, 1.0]);
        assert_eq!(result.k, 0.1);
        assert!(!result.is_semb);

        let nine_refs = &label_refs[..9];
        let old9 = graph(nine_refs, &[false; 9], &[]);
        let new9 = graph(nine_refs, &[false; 9], &[(0, 0, EdgeKind::ControlFlow)]);
        let result9 = wl_kernel(&old9, &new9, &KernelConfig::default());
        assert!(result9.k > 0.1);
        assert!(result9.is_semb);
    }

    #[test]
    fn transparent_benign_addition_stays_contained() {
        let old = graph(
            &["a", "b", "c", "d", "e"],
            &[false; 5],
            &[
                (0, 1, EdgeKind::DataDep),
                (1, 2, EdgeKind::DataDep),
                (2, 3, EdgeKind::DataDep),
                (3, 4, EdgeKind::DataDep),
            ],
        );
        let new = graph(
            &["a", "b", "c", "d", "e", "guard"],
            &[false, false, false, false, false, true],
            &[
                (0, 1, EdgeKind::DataDep),
                (1, 2, EdgeKind::DataDep),
                (2, 3, EdgeKind::DataDep),
                (3, 4, EdgeKind::DataDep),
                (5, 2, EdgeKind::Guard),
            ],
        );
        let damped = wl_kernel(&old, &new, &KernelConfig::default());
        assert_eq!(damped.per_iteration, vec![0.25, 0.25, 0.25]);
        assert!((damped.k - 0.1).abs() < 1e-12);
        assert!(!damped.is_semb);

        let undamped = wl_kernel(&old, &new, &config(3, 1.0, PenaltyMode::PerNode));
        assert!(undamped.k >= damped.k);
        assert!(undamped.is_semb);
    }

    #[test]
    fn global_mode_dampens_across_the_board() {
        let old = graph(
            &["a", "b", "c", "d", "e"],
            &[false; 5],
            &[
                (0, 1, EdgeKind::DataDep),
                (1, 2, EdgeKind::DataDep),
                (2, 3, EdgeKind::DataDep),
                (3, 4, EdgeKind::DataDep),
            ],
        );
        let new = graph(
            &["a", "b", "c", "d", "e", "guard"],
            &[false, false, false, false, false, true],
            &[
                (0, 1, EdgeKind::DataDep),
                (1, 2, EdgeKind::DataDep),
                (2, 3, EdgeKind::DataDep),
                (3, 4, EdgeKind::DataDep),
                (5, 2, EdgeKind::Guard),
            ],
        );
        let per_node = wl_kernel(&old, &new, &KernelConfig::default());
        let global = wl_kernel(&old, &new, &config(3, 0.25, PenaltyMode::Global));
        assert!(global.k > per_node.k);
        assert!(global.is_semb);
    }

    #[test]
    fn node_order_does_not_change_the_score() {
        let old = graph(
            &["p", "q", "r"],
            &[false; 3],
            &[(0, 1, EdgeKind::Guard), (1, 2, EdgeKind::DataDep)],
        );
        let new = graph(
            &["r", "q", "p"],
            &[false; 3],
            &[(2, 1, EdgeKind::Guard), (1, 0, EdgeKind::DataDep)],
        );
        let result = wl_kernel(&old, &new, &KernelConfig::default());
        assert_eq!(result.k, 0.0);
    }
}
