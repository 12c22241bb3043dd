use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BenchmarkItem;
use crate::gateway::{Stage, UsageTotals};
use crate::search::SearchOutcome;
use crate::select::{DecisionRule, DecisionTrace, ExecutionOutcome};
use crate::skeleton::GranularityLevel;
use crate::sqlgen::SqlCandidate;

/// Difficulty bucket for items the benchmark does not tag.
pub const UNSPECIFIED: &str = "unspecified";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemFlag {
    DatabaseUnavailable,
    GoldUnparsable,
    /// The gold query errored or returned no rows, so the item cannot be matched.
    GoldWithoutRows,
    EmptySearch,
    SearchFailed,
    ZeroShotFallback,
}

/// Everything that happened to one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTrace {
    pub id: String,
    pub db_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ItemFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchOutcome>,
    pub candidates: Vec<SqlCandidate>,
    pub outcomes: Vec<ExecutionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_sql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<ExecutionOutcome>,
    /// Final result matches the gold result.
    pub correct: bool,
    /// Some candidate's result matches the gold result.
    pub pass: bool,
    /// Candidates that produced rows.
    pub k: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub usage: BTreeMap<Stage, UsageTotals>,
}

impl ItemTrace {
    pub(super) fn new(item: &BenchmarkItem) -> Self {
        ItemTrace {
            id: item.id.clone(),
            db_id: item.db_id.clone(),
            question: item.question.clone(),
            difficulty: item.difficulty.clone(),
            flags: Vec::new(),
            error: None,
            search: None,
            candidates: Vec::new(),
            outcomes: Vec::new(),
            decision: None,
            final_sql: None,
            gold: None,
            correct: false,
            pass: false,
            k: 0,
            usage: BTreeMap::new(),
        }
    }

    /// Fills the metric fields; a gold query without rows matches nothing.
    pub(super) fn score(&mut self, gold: ExecutionOutcome) {
        let gold_fp = gold.fingerprint.clone().filter(|_| gold.is_valid());
        let valid: Vec<&ExecutionOutcome> = self.outcomes.iter().filter(|o| o.is_valid()).collect();
        self.k = valid.len();
        self.pass = gold_fp.is_some() && valid.iter().any(|o| o.fingerprint == gold_fp);
        if let Some(d) = &self.decision {
            self.final_sql = Some(self.candidates[d.chosen].sql.clone());
            self.correct = gold_fp.is_some() && d.chosen_fingerprint == gold_fp;
        }
        self.gold = Some(gold);
    }

    pub fn difficulty_key(&self) -> &str {
        self.difficulty.as_deref().unwrap_or(UNSPECIFIED)
    }

    /// Levels of the search's leaf skeletons, in node order.
    pub fn leaf_levels(&self) -> Vec<GranularityLevel> {
        let Some(s) = &self.search else { return Vec::new() };
        s.candidates.iter().filter_map(|&id| s.tree.node(id).level()).collect()
    }
}

/// Shares of Base, Expanded and Detailed leaves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelShares {
    pub base: f64,
    pub expanded: f64,
    pub detailed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyStats {
    pub items: usize,
    pub correct: usize,
    pub ex: f64,
    pub passed: usize,
    pub pass_at_k: f64,
    pub leaves: usize,
    /// Mean leaf-candidate count per item.
    pub mean_candidates: f64,
    /// Absent when no item produced a leaf.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<LevelShares>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl DifficultyStats {
    fn of<'a>(traces: impl IntoIterator<Item = &'a ItemTrace>) -> Self {
        let (mut items, mut correct, mut passed) = (0, 0, 0);
        let mut counts = [0usize; 3];
        for t in traces {
            items += 1;
            correct += usize::from(t.correct);
            passed += usize::from(t.pass);
            for l in t.leaf_levels() {
                counts[l as usize] += 1;
            }
        }
        let leaves: usize = counts.iter().sum();
        let levels =
            (leaves > 0).then(|| LevelShares { base: ratio(counts[0], leaves), expanded: ratio(counts[1], leaves), detailed: ratio(counts[2], leaves) });
        DifficultyStats {
            items,
            correct,
            ex: ratio(correct, items),
            passed,
            pass_at_k: ratio(passed, items),
            leaves,
            mean_candidates: ratio(leaves, items),
            levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub id: String,
    pub difficulty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_sql: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<DecisionRule>,
    pub correct: bool,
    pub pass: bool,
    pub k: usize,
    /// Leaf skeletons found by the search.
    pub leaves: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ItemFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub overall: DifficultyStats,
    pub by_difficulty: BTreeMap<String, DifficultyStats>,
    /// Items carrying each flag.
    pub flagged: BTreeMap<ItemFlag, usize>,
    pub formulate_calls: usize,
    pub evaluate_calls: usize,
    pub usage: BTreeMap<Stage, UsageTotals>,
    pub usage_total: UsageTotals,
    pub decisions: Vec<DecisionSummary>,
}

/// Per-difficulty level distribution, candidate counts and accuracy.
pub fn stats(traces: &[ItemTrace]) -> BTreeMap<String, DifficultyStats> {
    let mut buckets: BTreeMap<&str, Vec<&ItemTrace>> = BTreeMap::new();
    for t in traces {
        buckets.entry(t.difficulty_key()).or_default().push(t);
    }
    buckets.into_iter().map(|(k, ts)| (k.to_string(), DifficultyStats::of(ts))).collect()
}

/// Aggregates item traces into a report; depends on nothing else.
pub fn summarize(traces: &[ItemTrace]) -> RunReport {
    let mut flagged = BTreeMap::new();
    let mut usage: BTreeMap<Stage, UsageTotals> = BTreeMap::new();
    let (mut formulate_calls, mut evaluate_calls) = (0, 0);
    for t in traces {
        for f in &t.flags {
            *flagged.entry(*f).or_insert(0) += 1;
        }
        for (stage, u) in &t.usage {
            usage.entry(*stage).or_default().merge(u);
        }
        if let Some(s) = &t.search {
            formulate_calls += s.cost.gen_calls;
            evaluate_calls += s.cost.eval_calls;
        }
    }
    let mut usage_total = UsageTotals::default();
    for u in usage.values() {
        usage_total.merge(u);
    }
    let decisions = traces
        .iter()
        .map(|t| DecisionSummary {
            id: t.id.clone(),
            difficulty: t.difficulty_key().to_string(),
            final_sql: t.final_sql.clone(),
            rule: t.decision.as_ref().map(|d| d.rule),
            correct: t.correct,
            pass: t.pass,
            k: t.k,
            leaves: t.leaf_levels().len(),
            flags: t.flags.clone(),
        })
        .collect();
    RunReport { overall: DifficultyStats::of(traces), by_difficulty: stats(traces), flagged, formulate_calls, evaluate_calls, usage, usage_total, decisions }
}
