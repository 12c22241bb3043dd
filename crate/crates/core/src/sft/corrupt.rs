//! Structural corruption of skeletons, used to synthesize negative examples.
//!
//! Every operator enumerates its possible single edits on the canonical token
//! sequence; a seeded shuffle picks the first edit that survives normalization
//! at the target level and changes the skeleton.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::normalize::{normalize, Outcome};
use crate::skeleton::{GranularityLevel, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionOp {
    KeywordSubstitution,
    ClauseDeletion,
    ClauseInsertion,
    NestingFlattening,
    NestingInjection,
    PlaceholderRetyping,
    JoinToggle,
}

impl CorruptionOp {
    pub const ALL: [CorruptionOp; 7] = [
        CorruptionOp::KeywordSubstitution,
        CorruptionOp::ClauseDeletion,
        CorruptionOp::ClauseInsertion,
        CorruptionOp::NestingFlattening,
        CorruptionOp::NestingInjection,
        CorruptionOp::PlaceholderRetyping,
        CorruptionOp::JoinToggle,
    ];

    pub fn applies_to(self, level: GranularityLevel) -> bool {
        use CorruptionOp::*;
        match self {
            KeywordSubstitution | ClauseDeletion | ClauseInsertion => true,
            NestingFlattening | NestingInjection => level >= GranularityLevel::Expanded,
            PlaceholderRetyping | JoinToggle => level == GranularityLevel::Detailed,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionOp::KeywordSubstitution => "keyword-substitution",
            CorruptionOp::ClauseDeletion => "clause-deletion",
            CorruptionOp::ClauseInsertion => "clause-insertion",
            CorruptionOp::NestingFlattening => "nesting-flattening",
            CorruptionOp::NestingInjection => "nesting-injection",
            CorruptionOp::PlaceholderRetyping => "placeholder-retyping",
            CorruptionOp::JoinToggle => "join-toggle",
        }
    }
}

impl fmt::Display for CorruptionOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionStep {
    pub op: CorruptionOp,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecipe {
    pub steps: Vec<CorruptionStep>,
}

/// Clause keywords that open a body, as canonical token sequences.
const CLAUSES: [&[&str]; 5] = [&["WHERE"], &["GROUP", "BY"], &["HAVING"], &["ORDER", "BY"], &["LIMIT"]];
const SET_OPS: [&str; 3] = ["UNION", "INTERSECT", "EXCEPT"];
const LOGIC: [&str; 2] = ["AND", "OR"];
const COMPARISONS: [&str; 7] = ["=", "!=", ">", "<", ">=", "<=", "LIKE"];

struct Edit {
    tokens: Vec<String>,
    detail: String,
}

fn toks(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Paren depth outside each token: both parens of a group sit at the enclosing depth.
fn depths(t: &[String]) -> Vec<usize> {
    let mut d = 0usize;
    t.iter()
        .map(|x| {
            let here = if x == ")" { d.saturating_sub(1) } else { d };
            match x.as_str() {
                "(" => d += 1,
                ")" => d = d.saturating_sub(1),
                _ => {}
            }
            here
        })
        .collect()
}

fn clause_at(t: &[String], i: usize) -> Option<usize> {
    CLAUSES.iter().position(|kw| kw.iter().enumerate().all(|(k, w)| t.get(i + k).is_some_and(|x| x == w)))
}

fn is_boundary(t: &[String], i: usize) -> bool {
    clause_at(t, i).is_some() || SET_OPS.contains(&t[i].as_str())
}

/// End (exclusive) of the clause body starting after the keyword at `i`.
fn body_end(t: &[String], dep: &[usize], i: usize) -> usize {
    let d = dep[i];
    let kw_len = clause_at(t, i).map_or(1, |c| CLAUSES[c].len());
    (i + kw_len..t.len()).find(|&j| dep[j] < d || (dep[j] == d && is_boundary(t, j))).unwrap_or(t.len())
}

fn splice(t: &[String], start: usize, end: usize, with: &[&str]) -> Vec<String> {
    let mut out = t[..start].to_vec();
    out.extend(with.iter().map(|s| s.to_string()));
    out.extend_from_slice(&t[end..]);
    out
}

fn edits(op: CorruptionOp, sk: &Skeleton) -> Vec<Edit> {
    let t = toks(sk.text());
    let dep = depths(&t);
    let detailed = sk.level() == GranularityLevel::Detailed;
    let mut out = Vec::new();
    match op {
        CorruptionOp::KeywordSubstitution => {
            for i in 0..t.len() {
                if let Some(c) = clause_at(&t, i) {
                    let from = CLAUSES[c].join(" ");
                    for other in CLAUSES.iter().filter(|o| **o != CLAUSES[c]) {
                        out.push(Edit { tokens: splice(&t, i, i + CLAUSES[c].len(), other), detail: format!("{from} -> {}", other.join(" ")) });
                    }
                    continue;
                }
                for group in [&SET_OPS[..], &LOGIC[..], &COMPARISONS[..]] {
                    if group.contains(&t[i].as_str()) {
                        for other in group.iter().filter(|o| **o != t[i]) {
                            out.push(Edit { tokens: splice(&t, i, i + 1, &[other]), detail: format!("{} -> {other}", t[i]) });
                        }
                    }
                }
            }
        }
        CorruptionOp::ClauseDeletion => {
            for i in 0..t.len() {
                if let Some(c) = clause_at(&t, i) {
                    let end = body_end(&t, &dep, i);
                    out.push(Edit { tokens: splice(&t, i, end, &[]), detail: format!("drop {}", CLAUSES[c].join(" ")) });
                }
            }
        }
        CorruptionOp::ClauseInsertion => {
            let bodies: [&[&str]; 5] = if detailed {
                [&["[col]", "=", "[val]"], &["[col]"], &["[agg]", "(", "[col]", ")", ">", "[val]"], &["[col]"], &["[val]"]]
            } else {
                [&["_"], &["_"], &["_"], &["_"], &["_"]]
            };
            for s in (0..t.len()).filter(|&i| t[i] == "SELECT") {
                let d = dep[s];
                let end = (s + 1..t.len()).find(|&j| dep[j] < d || (dep[j] == d && SET_OPS.contains(&t[j].as_str()))).unwrap_or(t.len());
                let present: Vec<(usize, usize)> = (s..end).filter(|&j| dep[j] == d).filter_map(|j| clause_at(&t, j).map(|c| (c, j))).collect();
                for (c, kw) in CLAUSES.iter().enumerate() {
                    if present.iter().any(|(p, _)| *p == c) {
                        continue;
                    }
                    let at = present.iter().find(|(p, _)| *p > c).map_or(end, |(_, j)| *j);
                    let mut ins: Vec<&str> = kw.to_vec();
                    ins.extend_from_slice(bodies[c]);
                    out.push(Edit { tokens: splice(&t, at, at, &ins), detail: format!("add {}", kw.join(" ")) });
                }
            }
        }
        CorruptionOp::NestingFlattening => {
            let subs = subquery_spans(&t);
            if let Some(max) = subs.iter().map(|s| s.2).max() {
                let mut cur = t.clone();
                // innermost spans are disjoint; replace right to left so indices stay valid
                for (open, close, _) in subs.iter().rev().filter(|s| s.2 == max) {
                    let in_from = open.checked_sub(1).is_some_and(|p| matches!(t[p].as_str(), "FROM" | "JOIN" | ","));
                    let slot = match (detailed, in_from) {
                        (false, _) => "_",
                        (true, true) => "[tab]",
                        (true, false) => "[val]",
                    };
                    let prev = open.checked_sub(1).map(|p| t[p].as_str());
                    match prev {
                        Some("AS") => continue,
                        Some("IN") => cur = splice(&cur, *open, close + 1, &["(", slot, ")"]),
                        Some("EXISTS") => cur = splice(&cur, open - 1, close + 1, &[slot]),
                        _ => cur = splice(&cur, *open, close + 1, &[slot]),
                    }
                }
                if cur != t {
                    out.push(Edit { tokens: cur, detail: format!("flatten subqueries at depth {max}") });
                }
            }
        }
        CorruptionOp::NestingInjection => {
            let (sub, from_sub): (&[&str], &[&str]) = if detailed {
                (&["(", "SELECT", "[col]", "FROM", "[tab]", ")"], &["(", "SELECT", "[col]", "FROM", "[tab]", ")"])
            } else {
                (&["_", "IN", "(", "SELECT", "_", "FROM", "_", ")"], &["(", "SELECT", "_", "FROM", "_", ")"])
            };
            for i in 0..t.len() {
                let in_from = i.checked_sub(1).is_some_and(|p| matches!(t[p].as_str(), "FROM" | "JOIN"));
                let with = match (t[i].as_str(), in_from, detailed) {
                    ("_", true, false) | ("[tab]", true, true) => from_sub,
                    ("_", false, false) | ("[val]", false, true) => sub,
                    _ => continue,
                };
                out.push(Edit { tokens: splice(&t, i, i + 1, with), detail: format!("nest a subquery at token {i}") });
            }
        }
        CorruptionOp::PlaceholderRetyping => {
            for i in 0..t.len() {
                let to = match t[i].as_str() {
                    "[col]" => "[val]",
                    "[val]" => "[col]",
                    _ => continue,
                };
                out.push(Edit { tokens: splice(&t, i, i + 1, &[to]), detail: format!("{} -> {to} at token {i}", t[i]) });
            }
        }
        CorruptionOp::JoinToggle => {
            let flat = sk.without_joins();
            if flat != *sk {
                out.push(Edit { tokens: toks(flat.text()), detail: "dissolve explicit joins".into() });
            }
            for i in 0..t.len() {
                if t[i] == "[tab]" && i > 0 && matches!(t[i - 1].as_str(), "FROM" | "JOIN" | ",") {
                    out.push(Edit {
                        tokens: splice(&t, i + 1, i + 1, &["JOIN", "[tab]", "ON", "[col]", "=", "[col]"]),
                        detail: format!("add a join after token {i}"),
                    });
                }
            }
        }
    }
    out
}

/// Subquery spans `( SELECT ... )` as (open index, close index, nesting depth).
fn subquery_spans(t: &[String]) -> Vec<(usize, usize, usize)> {
    let mut stack: Vec<(usize, bool)> = Vec::new();
    let mut out = Vec::new();
    for (i, x) in t.iter().enumerate() {
        match x.as_str() {
            "(" => stack.push((i, t.get(i + 1).is_some_and(|n| n == "SELECT" || n == "WITH"))),
            ")" => {
                if let Some((open, is_sub)) = stack.pop() {
                    if is_sub {
                        let depth = 1 + stack.iter().filter(|(_, s)| *s).count();
                        out.push((open, i, depth));
                    }
                }
            }
            _ => {}
        }
    }
    out.sort_unstable();
    out
}

/// Applies `op` once, returning the corrupted skeleton and a description.
pub fn apply_op(op: CorruptionOp, sk: &Skeleton, rng: &mut impl Rng) -> Option<(Skeleton, String)> {
    if !op.applies_to(sk.level()) {
        return None;
    }
    let mut candidates = edits(op, sk);
    candidates.shuffle(rng);
    candidates.into_iter().find_map(|e| {
        let report = normalize(&e.tokens.join(" "), sk.level());
        let out = report.skeleton.filter(|_| report.outcome != Outcome::Rejected)?;
        let depth_ok = match op {
            CorruptionOp::NestingFlattening => out.nesting_depth() + 1 == sk.nesting_depth(),
            CorruptionOp::NestingInjection => out.nesting_depth() > sk.nesting_depth(),
            _ => true,
        };
        (out != *sk && depth_ok).then_some((out, e.detail))
    })
}

/// Applies one or two operators drawn uniformly from those applicable at the skeleton's level.
pub fn corrupt(gold: &Skeleton, rng: &mut impl Rng) -> Option<(Skeleton, CorruptionRecipe)> {
    const ATTEMPTS: usize = 8;
    let ops: Vec<CorruptionOp> = CorruptionOp::ALL.into_iter().filter(|o| o.applies_to(gold.level())).collect();
    for _ in 0..ATTEMPTS {
        let n = rng.random_range(1..=2);
        let mut cur = gold.clone();
        let mut steps = Vec::new();
        for _ in 0..n {
            let op = ops[rng.random_range(0..ops.len())];
            if let Some((next, detail)) = apply_op(op, &cur, rng) {
                steps.push(CorruptionStep { op, detail });
                cur = next;
            }
        }
        if !steps.is_empty() && cur != *gold {
            return Some((cur, CorruptionRecipe { steps }));
        }
    }
    None
}
