//! Coercion of free-form agent output into canonical skeletons.

use serde::{Deserialize, Serialize};

use crate::skeleton::walk::{query_depth, query_has_placeholder, walk_query, Node};
use crate::skeleton::{extract_skeleton, ClauseTree, GranularityLevel, Skeleton};
use crate::sql::ast::{Expr, Name, Operand, TableFactor, With};
use crate::sql::{parse_statement, tokenize, LexMode, Placeholder, TokenKind};

/// Longest agent output, in tokens, that is considered at all.
pub const MAX_SKELETON_TOKENS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accepted,
    Coerced,
    Rejected,
}

/// Rules that can fire while normalizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    CaseFold,
    Whitespace,
    ReplaceIdentifiers,
    EraseDetail,
    EraseStructure,
    EraseJoins,
    Canonicalize,
    TooLong,
    Grammar,
    UnderDetailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub outcome: Outcome,
    pub skeleton: Option<Skeleton>,
    pub reasons: Vec<Rule>,
    /// Human-readable detail for rejections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl NormalizationReport {
    fn rejected(rule: Rule, message: impl Into<String>) -> Self {
        NormalizationReport { outcome: Outcome::Rejected, skeleton: None, reasons: vec![rule], message: Some(message.into()) }
    }
}

pub fn normalize(agent_text: &str, target: GranularityLevel) -> NormalizationReport {
    normalize_with(agent_text, target, false)
}

/// Like [`normalize`], additionally dissolving explicit joins for Detailed targets.
pub fn normalize_joinless(agent_text: &str) -> NormalizationReport {
    normalize_with(agent_text, GranularityLevel::Detailed, true)
}

fn normalize_with(agent_text: &str, target: GranularityLevel, joinless: bool) -> NormalizationReport {
    let text = agent_text.trim().trim_end_matches(';').trim_end();
    let tokens = match tokenize(text, LexMode::Skeleton) {
        Ok(t) => t,
        Err(e) => return NormalizationReport::rejected(Rule::Grammar, e.to_string()),
    };
    if tokens.len() > MAX_SKELETON_TOKENS {
        return NormalizationReport::rejected(Rule::TooLong, format!("{} tokens", tokens.len()));
    }
    let ast = match parse_statement(text, LexMode::Skeleton) {
        Ok(q) => q,
        Err(e) => return NormalizationReport::rejected(Rule::Grammar, e.to_string()),
    };
    if target > GranularityLevel::Base && has_blank_structure(&ast) {
        return NormalizationReport::rejected(Rule::UnderDetailed, "placeholder in place of a query or clause list");
    }
    if target == GranularityLevel::Detailed && query_has_placeholder(&ast, Placeholder::Blank) {
        return NormalizationReport::rejected(Rule::UnderDetailed, "untyped `_` slot in a Detailed skeleton");
    }

    let tree = ClauseTree::from_ast(&ast);
    let mut skeleton = extract_skeleton(&tree, target);
    let mut reasons = Vec::new();
    if joinless {
        let stripped = skeleton.without_joins();
        if stripped != skeleton {
            reasons.push(Rule::EraseJoins);
            skeleton = stripped;
        }
    }
    if skeleton.text() == agent_text {
        return NormalizationReport { outcome: Outcome::Accepted, skeleton: Some(skeleton), reasons: Vec::new(), message: None };
    }

    if has_identifiers(&ast) {
        reasons.push(Rule::ReplaceIdentifiers);
    }
    let typed = [Placeholder::Col, Placeholder::Tab, Placeholder::Val, Placeholder::Agg].into_iter().any(|p| query_has_placeholder(&ast, p));
    if target < GranularityLevel::Detailed && typed {
        reasons.push(Rule::EraseDetail);
    }
    if target == GranularityLevel::Base && query_depth(&ast) > skeleton.nesting_depth() {
        reasons.push(Rule::EraseStructure);
    }
    if tokens.iter().any(|t| matches!(&t.kind, TokenKind::Word(w) if w.chars().any(|c| c.is_ascii_lowercase()))) {
        reasons.push(Rule::CaseFold);
    }
    if agent_text.split_whitespace().collect::<Vec<_>>().join(" ") != agent_text {
        reasons.push(Rule::Whitespace);
    }
    let cosmetic_only = reasons.iter().all(|r| matches!(r, Rule::CaseFold | Rule::Whitespace));
    if cosmetic_only && !respaced_matches(agent_text, skeleton.text()) {
        reasons.push(Rule::Canonicalize);
    }
    reasons.sort();
    reasons.dedup();
    NormalizationReport { outcome: Outcome::Coerced, skeleton: Some(skeleton), reasons, message: None }
}

/// Whether the text differs from `canonical` only in case and spacing.
fn respaced_matches(input: &str, canonical: &str) -> bool {
    let squash = |s: &str| s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_uppercase();
    squash(input) == squash(canonical)
}

fn has_identifiers(q: &crate::sql::ast::Query) -> bool {
    let mut found = false;
    let mut nodes = false;
    walk_query(
        q,
        &mut |e| {
            if matches!(e, Expr::Column { .. } | Expr::Literal(_) | Expr::Param) || matches!(e, Expr::Function(f) if matches!(f.name, Name::Ident(_))) {
                found = true;
            }
        },
        &mut |n| {
            if matches!(n, Node::Factor(TableFactor::Table { .. }) | Node::Using(Name::Ident(_))) {
                nodes = true;
            }
        },
    );
    found || nodes
}

/// Placeholders standing for a whole query, a compound operand or a CTE list.
fn has_blank_structure(q: &crate::sql::ast::Query) -> bool {
    let mut found = false;
    walk_query(q, &mut |_| {}, &mut |n| {
        if matches!(n, Node::Operand(Operand::Placeholder(_)) | Node::With(With::Placeholder(_))) {
            found = true;
        }
    });
    found
}
