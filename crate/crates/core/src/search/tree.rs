use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agents::SearchPhase;
use crate::skeleton::{GranularityLevel, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodePhase {
    Root,
    Base,
    Expanded,
    DetailedStep1,
    DetailedStep2,
}

impl From<SearchPhase> for NodePhase {
    fn from(p: SearchPhase) -> Self {
        match p {
            SearchPhase::Base => NodePhase::Base,
            SearchPhase::Expanded => NodePhase::Expanded,
            SearchPhase::DetailedStep1 => NodePhase::DetailedStep1,
            SearchPhase::DetailedStep2 => NodePhase::DetailedStep2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    /// Passed evaluation and has at least one valid child (or is still open).
    Valid,
    /// Failed evaluation.
    Pruned,
    /// Passed evaluation and ends its path: a member of the candidate set.
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub phase: NodePhase,
    /// Step within the phase: 1 for Base and DetailedStep1, 2 for DetailedStep2,
    /// the expansion round for Expanded.
    pub step: usize,
    /// 1-based position among the parent's children.
    pub sibling: usize,
    pub skeleton: Option<Skeleton>,
    pub status: NodeStatus,
    pub children: Vec<usize>,
}

impl SearchNode {
    pub fn level(&self) -> Option<GranularityLevel> {
        self.skeleton.as_ref().map(Skeleton::level)
    }

    pub fn survived(&self) -> bool {
        self.status != NodeStatus::Pruned
    }
}

/// The search tree for one (database, question) pair. Node ids index `nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub db_id: String,
    pub question: String,
    pub m: usize,
    pub nodes: Vec<SearchNode>,
}

#[derive(Serialize)]
struct DumpRecord<'a> {
    id: usize,
    parent: Option<usize>,
    phase: NodePhase,
    step: usize,
    sibling: usize,
    level: Option<GranularityLevel>,
    status: NodeStatus,
    skeleton: Option<&'a str>,
}

impl SearchTree {
    pub(crate) fn new(db_id: &str, question: &str, m: usize) -> Self {
        let root =
            SearchNode { id: 0, parent: None, phase: NodePhase::Root, step: 0, sibling: 0, skeleton: None, status: NodeStatus::Valid, children: Vec::new() };
        SearchTree { db_id: db_id.into(), question: question.into(), m, nodes: vec![root] }
    }

    pub fn root(&self) -> &SearchNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    pub(crate) fn push(&mut self, parent: usize, phase: NodePhase, step: usize, skeleton: Skeleton, valid: bool) -> usize {
        let id = self.nodes.len();
        let sibling = self.nodes[parent].children.len() + 1;
        self.nodes.push(SearchNode {
            id,
            parent: Some(parent),
            phase,
            step,
            sibling,
            skeleton: Some(skeleton),
            status: if valid { NodeStatus::Valid } else { NodeStatus::Pruned },
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    /// Distance from the root.
    pub fn depth(&self, id: usize) -> usize {
        let mut d = 0;
        let mut cur = self.nodes[id].parent;
        while let Some(p) = cur {
            d += 1;
            cur = self.nodes[p].parent;
        }
        d
    }

    /// Leaf nodes in id order.
    pub fn leaves(&self) -> Vec<&SearchNode> {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Leaf).collect()
    }

    pub fn valid_children(&self, id: usize) -> impl Iterator<Item = &SearchNode> {
        self.nodes[id].children.iter().map(|c| &self.nodes[*c]).filter(|n| n.survived())
    }

    /// One JSON record per node, in id order.
    pub fn dump_jsonl(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let rec = DumpRecord {
                id: n.id,
                parent: n.parent,
                phase: n.phase,
                step: n.step,
                sibling: n.sibling,
                level: n.level(),
                status: n.status,
                skeleton: n.skeleton.as_ref().map(Skeleton::text),
            };
            let _ = writeln!(out, "{}", serde_json::to_string(&rec).expect("node record serializes"));
        }
        out
    }
}
