//! Layer-wise skeleton search: Base, then Expanded deepening, then two Detailed steps.

mod cost;
mod dispatch;
mod tree;


use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::agents::{evaluate, formulate, EvaluationVerdict, FormulationRequest, SearchPhase, SkeletonEvaluator, SkeletonFormulator};
use crate::normalize::Rule;
use crate::schema::DatabaseProfile;
use crate::skeleton::{refinement_check, Skeleton};

pub use cost::{compute_cost, CostReport, DepthSlots};
pub use dispatch::Dispatch;
pub use tree::{NodePhase, NodeStatus, SearchNode, SearchTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Children requested per expansion.
    pub m: usize,
    /// Most Expanded rounds along one path before it is routed to the Detailed phase.
    pub expanded_cap: usize,
    /// Calls slower than this are treated as failed.
    pub formulate_timeout_ms: Option<u64>,
    pub evaluate_timeout_ms: Option<u64>,
    /// Worker threads per pipeline stage; 1 runs everything inline.
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { m: 3, expanded_cap: 5, formulate_timeout_ms: None, evaluate_timeout_ms: None, workers: 1 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.m == 0 {
            return Err("m must be at least 1".into());
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn dispatch(&self) -> Dispatch {
        if self.workers <= 1 {
            Dispatch::Inline
        } else {
            Dispatch::Pipeline { workers: self.workers }
        }
    }
}

/// Why a proposal was dropped before evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscardReason {
    Rejected { rules: Vec<Rule>, message: Option<String> },
    Duplicate,
    NotDeeper,
    NotRefining,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardRecord {
    pub parent: usize,
    pub phase: SearchPhase,
    pub text: String,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub node: usize,
    pub skeleton: String,
    #[serde(flatten)]
    pub verdict: EvaluationVerdict,
}

/// One formulate call and what became of its proposals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expansion {
    pub parent: usize,
    pub phase: SearchPhase,
    /// Proposals returned, after truncation to `m`.
    pub proposals: usize,
    pub discarded: usize,
    pub children: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// An Expanded attempt with no deeper child, replaced by a Detailed expansion of the same parent.
    pub superseded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub tree: SearchTree,
    /// Ids of the leaf nodes, ascending.
    pub candidates: Vec<usize>,
    pub cost: CostReport,
    pub expansions: Vec<Expansion>,
    pub verdicts: Vec<VerdictRecord>,
    pub discards: Vec<DiscardRecord>,
}

impl SearchOutcome {
    pub fn candidate_skeletons(&self) -> Vec<&Skeleton> {
        self.candidates.iter().filter_map(|id| self.tree.node(*id).skeleton.as_ref()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("no base skeleton survived evaluation")]
    EmptySearch(Box<SearchOutcome>),
    #[error("base formulation failed: {message}")]
    Backend { message: String, partial: Box<SearchOutcome> },
    #[error("invalid search config: {0}")]
    Config(String),
}

impl SearchError {
    /// The tree built before the search stopped, if any.
    pub fn partial(&self) -> Option<&SearchOutcome> {
        match self {
            SearchError::EmptySearch(o) | SearchError::Backend { partial: o, .. } => Some(o),
            SearchError::Config(_) => None,
        }
    }
}

/// A skeleton that passed normalization and filtering, waiting for a verdict.
#[derive(Debug, Clone)]
struct Admitted {
    skeleton: Skeleton,
}

/// Result of formulating and filtering children for one parent.
#[derive(Debug)]
struct Prepared {
    proposals: usize,
    admitted: Vec<Admitted>,
    discards: Vec<(String, DiscardReason)>,
    error: Option<String>,
}

pub(crate) struct Job<'a> {
    parent: usize,
    skeleton: Option<&'a Skeleton>,
    phase: SearchPhase,
}

struct Context<'a> {
    schema: &'a DatabaseProfile,
    question: &'a str,
    formulator: &'a dyn SkeletonFormulator,
    evaluator: &'a dyn SkeletonEvaluator,
    config: &'a SearchConfig,
}

impl Context<'_> {
    fn prepare(&self, job: &Job<'_>) -> Prepared {
        let started = Instant::now();
        let texts =
            FormulationRequest::new(self.schema, self.question, job.skeleton, job.phase, self.config.m).and_then(|req| formulate(&req, self.formulator));
        let texts = match (texts, self.config.formulate_timeout_ms) {
            (Ok(_), Some(ms)) if started.elapsed() > Duration::from_millis(ms) => Err(format!("formulation exceeded {ms} ms")),
            (r, _) => r.map_err(|e| e.to_string()),
        };
        let texts = match texts {
            Ok(t) => t,
            Err(e) => return Prepared { proposals: 0, admitted: Vec::new(), discards: Vec::new(), error: Some(e) },
        };
        let mut seen = HashSet::new();
        let mut admitted = Vec::new();
        let mut discards = Vec::new();
        for text in &texts {
            match self.admit(job, text, &mut seen) {
                Ok(skeleton) => admitted.push(Admitted { skeleton }),
                Err(reason) => discards.push((text.clone(), reason)),
            }
        }
        Prepared { proposals: texts.len(), admitted, discards, error: None }
    }

    fn admit(&self, job: &Job<'_>, text: &str, seen: &mut HashSet<String>) -> Result<Skeleton, DiscardReason> {
        let report = job.phase.normalize(text);
        let Some(skeleton) = report.skeleton else {
            return Err(DiscardReason::Rejected { rules: report.reasons, message: report.message });
        };
        if !seen.insert(skeleton.text().to_string()) {
            return Err(DiscardReason::Duplicate);
        }
        if let Some(parent) = job.skeleton {
            let depth_ok = match job.phase {
                SearchPhase::Expanded => skeleton.nesting_depth() > parent.nesting_depth(),
                _ => skeleton.nesting_depth() == parent.nesting_depth(),
            };
            if !depth_ok && job.phase == SearchPhase::Expanded {
                return Err(DiscardReason::NotDeeper);
            }
            if !depth_ok || !refinement_check(parent, &skeleton).unwrap_or(false) {
                return Err(DiscardReason::NotRefining);
            }
        }
        Ok(skeleton)
    }

    fn judge(&self, candidate: &Skeleton) -> EvaluationVerdict {
        let started = Instant::now();
        let mut verdict = evaluate(self.schema, self.question, candidate, self.evaluator);
        if let Some(ms) = self.config.evaluate_timeout_ms {
            if started.elapsed() > Duration::from_millis(ms) {
                verdict.verdict = false;
                verdict.failure = Some(format!("evaluation exceeded {ms} ms"));
            }
        }
        verdict
    }
}

/// Mutable search state shared by the phases.
struct State {
    tree: SearchTree,
    expansions: Vec<Expansion>,
    verdicts: Vec<VerdictRecord>,
    discards: Vec<DiscardRecord>,
}

impl State {
    fn outcome(self) -> SearchOutcome {
        let cost = CostReport::build(&self.tree, &self.expansions);
        let candidates = self.tree.leaves().iter().map(|n| n.id).collect();
        SearchOutcome { tree: self.tree, candidates, cost, expansions: self.expansions, verdicts: self.verdicts, discards: self.discards }
    }

    /// Records one wave's results in job order; returns, per job, the new child ids.
    fn absorb(&mut self, jobs: &[Job<'_>], results: Vec<(Prepared, Vec<EvaluationVerdict>)>) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(jobs.len());
        for (job, (prep, verdicts)) in jobs.iter().zip(results) {
            let step = match job.phase {
                SearchPhase::Base | SearchPhase::DetailedStep1 => 1,
                SearchPhase::DetailedStep2 => 2,
                SearchPhase::Expanded => match job.skeleton {
                    Some(_) if self.tree.node(job.parent).phase == NodePhase::Expanded => self.tree.node(job.parent).step + 1,
                    _ => 1,
                },
            };
            for (text, reason) in prep.discards.iter().cloned() {
                self.discards.push(DiscardRecord { parent: job.parent, phase: job.phase, text, reason });
            }
            let mut children = Vec::new();
            for (adm, verdict) in prep.admitted.into_iter().zip(verdicts) {
                let text = adm.skeleton.text().to_string();
                let id = self.tree.push(job.parent, job.phase.into(), step, adm.skeleton, verdict.verdict);
                self.verdicts.push(VerdictRecord { node: id, skeleton: text, verdict });
                children.push(id);
            }
            self.expansions.push(Expansion {
                parent: job.parent,
                phase: job.phase,
                proposals: prep.proposals,
                discarded: prep.discards.len(),
                children: children.clone(),
                error: prep.error,
                superseded: false,
            });
            out.push(children);
        }
        out
    }

    fn survivors(&self, ids: &[usize]) -> Vec<usize> {
        ids.iter().copied().filter(|id| self.tree.node(*id).survived()).collect()
    }

    fn set_status(&mut self, id: usize, status: NodeStatus) {
        self.tree.nodes[id].status = status;
    }
}

/// Runs the full search for one question.
pub fn run_search(
    schema: &DatabaseProfile,
    question: &str,
    formulator: &dyn SkeletonFormulator,
    evaluator: &dyn SkeletonEvaluator,
    config: &SearchConfig,
) -> Result<SearchOutcome, SearchError> {
    config.validate().map_err(SearchError::Config)?;
    let ctx = Context { schema, question, formulator, evaluator, config };
    let dispatch = config.dispatch();
    let mut st = State { tree: SearchTree::new(&schema.db_id, question, config.m), expansions: Vec::new(), verdicts: Vec::new(), discards: Vec::new() };

    // Base
    let jobs = vec![Job { parent: 0, skeleton: None, phase: SearchPhase::Base }];
    let results = dispatch.run(&ctx, &jobs);
    let base_children = st.absorb(&jobs, results).remove(0);
    if let Some(message) = st.expansions[0].error.clone() {
        return Err(SearchError::Backend { message, partial: Box::new(st.outcome()) });
    }
    let mut frontier = st.survivors(&base_children);
    if frontier.is_empty() {
        return Err(SearchError::EmptySearch(Box::new(st.outcome())));
    }

    // Expanded deepening, one wave per round
    let mut ready = Vec::new();
    while !frontier.is_empty() {
        let (capped, open): (Vec<usize>, Vec<usize>) = frontier.iter().partition(|id| {
            let n = st.tree.node(**id);
            n.phase == NodePhase::Expanded && n.step >= config.expanded_cap
        });
        ready.extend(capped);
        let skeletons: Vec<Skeleton> = open.iter().map(|id| st.tree.node(*id).skeleton.clone().expect("non-root node")).collect();
        let jobs: Vec<Job<'_>> = open.iter().zip(&skeletons).map(|(id, s)| Job { parent: *id, skeleton: Some(s), phase: SearchPhase::Expanded }).collect();
        let first_expansion = st.expansions.len();
        let results = dispatch.run(&ctx, &jobs);
        let children = st.absorb(&jobs, results);
        let mut next = Vec::new();
        for (k, (parent, kids)) in open.iter().zip(children).enumerate() {
            let exp = &mut st.expansions[first_expansion + k];
            if exp.error.is_some() {
                st.set_status(*parent, NodeStatus::Leaf);
            } else if kids.is_empty() {
                exp.superseded = true;
                ready.push(*parent);
            } else {
                let alive = st.survivors(&kids);
                if alive.is_empty() {
                    st.set_status(*parent, NodeStatus::Leaf);
                }
                next.extend(alive);
            }
        }
        frontier = next;
    }
    ready.sort_unstable();

    // Detailed: clause bodies first, then joins
    let mut step2_parents = Vec::new();
    for (phase, parents) in [(SearchPhase::DetailedStep1, ready), (SearchPhase::DetailedStep2, Vec::new())] {
        let parents = if phase == SearchPhase::DetailedStep2 { std::mem::take(&mut step2_parents) } else { parents };
        let skeletons: Vec<Skeleton> = parents.iter().map(|id| st.tree.node(*id).skeleton.clone().expect("non-root node")).collect();
        let jobs: Vec<Job<'_>> = parents.iter().zip(&skeletons).map(|(id, s)| Job { parent: *id, skeleton: Some(s), phase }).collect();
        let results = dispatch.run(&ctx, &jobs);
        let children = st.absorb(&jobs, results);
        for (parent, kids) in parents.iter().zip(children) {
            let alive = st.survivors(&kids);
            if alive.is_empty() {
                st.set_status(*parent, NodeStatus::Leaf);
            }
            match phase {
                SearchPhase::DetailedStep1 => step2_parents.extend(alive),
                _ => alive.into_iter().for_each(|id| st.set_status(id, NodeStatus::Leaf)),
            }
        }
    }
    Ok(st.outcome())
}
