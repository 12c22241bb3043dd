//! Per-depth survivor counts, rejection rates and the search cost estimate.

use serde::{Deserialize, Serialize};

use super::tree::{NodeStatus, SearchTree};
use super::Expansion;

/// How the `m · N_{d-1}` child slots at one depth were used.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthSlots {
    pub depth: usize,
    pub parents: usize,
    pub capacity: usize,
    pub survivors: usize,
    pub pruned: usize,
    /// Proposals dropped before evaluation (malformed, duplicate, not deeper, not refining).
    pub discarded: usize,
    /// Slots the formulator left empty.
    pub unfilled: usize,
    /// Slots of surviving parents that were never expanded (final nodes).
    pub unexpanded: usize,
}

impl DepthSlots {
    pub fn rejected(&self) -> usize {
        self.pruned + self.discarded + self.unfilled + self.unexpanded
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub m: usize,
    /// Surviving nodes per tree depth; `n[0] = 1` is the root.
    pub n: Vec<usize>,
    /// Rejection rate for depth `d` at index `d - 1`.
    pub rho: Vec<f64>,
    pub slots: Vec<DepthSlots>,
    pub gen_calls: usize,
    pub eval_calls: usize,
    /// Expansion attempts that produced no deeper skeleton and were followed by a Detailed expansion.
    pub superseded_expansions: usize,
    /// Realized depth: the deepest level holding a surviving node.
    pub h: usize,
}

impl CostReport {
    pub(crate) fn build(tree: &SearchTree, expansions: &[Expansion]) -> Self {
        let m = tree.m;
        let depths: Vec<usize> = (0..tree.nodes.len()).map(|id| tree.depth(id)).collect();
        let max_depth = depths.iter().copied().max().unwrap_or(0);
        let mut n = vec![0usize; max_depth + 1];
        for (node, &d) in tree.nodes.iter().zip(&depths) {
            if node.status != NodeStatus::Pruned {
                n[d] += 1;
            }
        }
        let h = n.iter().rposition(|&c| c > 0).unwrap_or(0);
        n.truncate(h + 1);

        let mut slots: Vec<DepthSlots> = (1..=h + 1)
            .map(|d| DepthSlots { depth: d, parents: n[d - 1], capacity: m * n[d - 1], survivors: n.get(d).copied().unwrap_or(0), ..Default::default() })
            .collect();
        let mut expanded = vec![false; tree.nodes.len()];
        for e in expansions.iter().filter(|e| !e.superseded) {
            expanded[e.parent] = true;
            let s = &mut slots[depths[e.parent]];
            s.pruned += e.children.iter().filter(|c| tree.nodes[**c].status == NodeStatus::Pruned).count();
            s.discarded += e.discarded;
            s.unfilled += m - e.proposals;
        }
        for (node, &d) in tree.nodes.iter().zip(&depths) {
            if node.status != NodeStatus::Pruned && !expanded[node.id] && d <= h {
                slots[d].unexpanded += m;
            }
        }
        let rho = slots.iter().map(|s| if s.capacity == 0 { 0.0 } else { s.rejected() as f64 / s.capacity as f64 }).collect();
        CostReport {
            m,
            n,
            rho,
            slots,
            gen_calls: expansions.len(),
            eval_calls: tree.nodes.len() - 1,
            superseded_expansions: expansions.iter().filter(|e| e.superseded).count(),
            h,
        }
    }
}

/// Estimated wall time: one generation call and `m` evaluation calls per
/// surviving node at each depth below the realized depth (at least one level).
pub fn compute_cost(report: &CostReport, unit_gen: f64, unit_eval: f64) -> f64 {
    let per_node = unit_gen + report.m as f64 * unit_eval;
    (1..=report.h.max(1)).map(|d| report.n.get(d - 1).copied().unwrap_or(0) as f64 * per_node).sum()
}
