//! Three-level SQL skeletons derived from the parsed query.
//!
//! A [`ClauseTree`] is the Detailed projection of a query: keywords and
//! structure are kept, identifiers and literals become typed placeholders.
//! Expanded and Base skeletons are erasures of that tree.

mod coarsen;
mod project;
mod render;
pub mod walk;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::sql::ast::{self, Query};
use crate::sql::{parse_statement, LexMode, Placeholder, SqlQuery, SyntaxError};

pub use render::render;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GranularityLevel {
    Base,
    Expanded,
    Detailed,
}

impl GranularityLevel {
    pub const ALL: [GranularityLevel; 3] = [GranularityLevel::Base, GranularityLevel::Expanded, GranularityLevel::Detailed];

    pub fn as_str(self) -> &'static str {
        match self {
            GranularityLevel::Base => "base",
            GranularityLevel::Expanded => "expanded",
            GranularityLevel::Detailed => "detailed",
        }
    }
}

impl fmt::Display for GranularityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GranularityLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "base" => Ok(GranularityLevel::Base),
            "expanded" => Ok(GranularityLevel::Expanded),
            "detailed" => Ok(GranularityLevel::Detailed),
            other => Err(format!("unknown granularity level '{other}'")),
        }
    }
}

/// Clause keywords that can label a clause node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseKeyword {
    With,
    Select,
    SelectDistinct,
    From,
    Where,
    GroupBy,
    Having,
    OrderBy,
    Limit,
    Union,
    UnionAll,
    Intersect,
    Except,
}

/// One clause of a query together with the queries nested in its body.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseNode {
    pub keyword: ClauseKeyword,
    pub nested: Vec<NestedQuery>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedQuery {
    pub depth: usize,
    pub clauses: Vec<ClauseNode>,
}

/// Clause-level projection of a parsed query.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseTree {
    root: Query,
    depth: usize,
}

impl ClauseTree {
    /// Projects any parsed statement, including skeleton text, onto the skeleton grammar.
    pub fn from_ast(q: &Query) -> Self {
        let root = project::project_query(q);
        let depth = walk::query_depth(&root);
        ClauseTree { root, depth }
    }

    pub fn root(&self) -> &Query {
        &self.root
    }

    pub fn nesting_depth(&self) -> usize {
        self.depth
    }

    /// Top-level clause nodes in source order.
    pub fn clauses(&self) -> Vec<ClauseNode> {
        clause_nodes(&self.root, 0)
    }
}

fn clause_nodes(q: &Query, depth: usize) -> Vec<ClauseNode> {
    use ast::*;
    let nested_in_expr = |e: &Expr| -> Vec<NestedQuery> {
        let mut out = Vec::new();
        collect_expr_queries(e, &mut |sub| out.push(NestedQuery { depth: depth + 1, clauses: clause_nodes(sub, depth + 1) }));
        out
    };
    let mut out = Vec::new();
    match &q.with {
        Some(With::Ctes(ctes)) => out.push(ClauseNode {
            keyword: ClauseKeyword::With,
            nested: ctes.iter().map(|c| NestedQuery { depth: depth + 1, clauses: clause_nodes(&c.query, depth + 1) }).collect(),
        }),
        Some(With::Placeholder(_)) => out.push(ClauseNode { keyword: ClauseKeyword::With, nested: Vec::new() }),
        None => {}
    }
    for (i, operand) in walk::operands(&q.body).enumerate() {
        if i > 0 {
            let keyword = match q.body.rest[i - 1].0 {
                SetOp::Union => ClauseKeyword::Union,
                SetOp::UnionAll => ClauseKeyword::UnionAll,
                SetOp::Intersect => ClauseKeyword::Intersect,
                SetOp::Except => ClauseKeyword::Except,
            };
            out.push(ClauseNode { keyword, nested: Vec::new() });
        }
        let Operand::Select(s) = operand else { continue };
        let keyword = if s.distinct { ClauseKeyword::SelectDistinct } else { ClauseKeyword::Select };
        let mut nested = Vec::new();
        for item in &s.items {
            if let SelectItem::Expr { expr, .. } = item {
                nested.extend(nested_in_expr(expr));
            }
        }
        out.push(ClauseNode { keyword, nested });
        if !s.from.is_empty() {
            let mut nested = Vec::new();
            for chain in &s.from {
                let joins = chain.joins.iter();
                let factor = |f: &TableFactor, nested: &mut Vec<NestedQuery>| {
                    if let TableFactor::Derived { query, .. } = f {
                        nested.push(NestedQuery { depth: depth + 1, clauses: clause_nodes(query, depth + 1) });
                    }
                };
                factor(&chain.relation, &mut nested);
                for j in joins {
                    factor(&j.relation, &mut nested);
                    if let JoinConstraint::On(e) = &j.constraint {
                        nested.extend(nested_in_expr(e));
                    }
                }
            }
            out.push(ClauseNode { keyword: ClauseKeyword::From, nested });
        }
        if let Some(e) = &s.selection {
            out.push(ClauseNode { keyword: ClauseKeyword::Where, nested: nested_in_expr(e) });
        }
        if !s.group_by.is_empty() {
            let nested = s.group_by.iter().flat_map(&nested_in_expr).collect();
            out.push(ClauseNode { keyword: ClauseKeyword::GroupBy, nested });
        }
        if let Some(e) = &s.having {
            out.push(ClauseNode { keyword: ClauseKeyword::Having, nested: nested_in_expr(e) });
        }
    }
    if !q.order_by.is_empty() {
        let nested = q.order_by.iter().flat_map(|o| nested_in_expr(&o.expr)).collect();
        out.push(ClauseNode { keyword: ClauseKeyword::OrderBy, nested });
    }
    if let Some(l) = &q.limit {
        let mut nested = nested_in_expr(&l.count);
        if let Some(off) = &l.offset {
            nested.extend(nested_in_expr(off));
        }
        out.push(ClauseNode { keyword: ClauseKeyword::Limit, nested });
    }
    out
}

fn collect_expr_queries<'a>(e: &'a ast::Expr, f: &mut dyn FnMut(&'a Query)) {
    let mut subs = Vec::new();
    let mut queries = Vec::new();
    walk::visit_children(e, &mut |x| subs.push(x), &mut |q| queries.push(q));
    for x in subs {
        collect_expr_queries(x, f);
    }
    for q in queries {
        f(q);
    }
}

/// Parses SQL and projects it onto the skeleton grammar.
pub fn parse_query(q: &SqlQuery) -> Result<ClauseTree, SyntaxError> {
    Ok(ClauseTree::from_ast(&q.parse()?))
}

pub fn nesting_depth(tree: &ClauseTree) -> usize {
    tree.depth
}

pub fn extract_skeleton(tree: &ClauseTree, level: GranularityLevel) -> Skeleton {
    let q = match level {
        GranularityLevel::Base => coarsen::base(&tree.root),
        GranularityLevel::Expanded => coarsen::expanded(&tree.root, usize::MAX),
        GranularityLevel::Detailed => tree.root.clone(),
    };
    Skeleton::from_tree(level, q)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("coarse skeleton is {coarse}, finer than {fine}")]
pub struct LevelOrderError {
    pub coarse: GranularityLevel,
    pub fine: GranularityLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkeletonError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("not canonical {level} skeleton text (canonical form: {canonical})")]
    NotCanonical { level: GranularityLevel, canonical: String },
}

/// A canonical skeleton at a given granularity.
#[derive(Debug, Clone)]
pub struct Skeleton {
    level: GranularityLevel,
    text: String,
    tree: Query,
    nesting_depth: usize,
}

impl PartialEq for Skeleton {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.text == other.text
    }
}

impl Eq for Skeleton {}

impl std::hash::Hash for Skeleton {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.level.hash(state);
        self.text.hash(state);
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Skeleton {
    fn from_tree(level: GranularityLevel, tree: Query) -> Self {
        let text = render(&tree);
        let nesting_depth = walk::query_depth(&tree);
        Skeleton { level, text, tree, nesting_depth }
    }

    /// Parses text that must already be canonical at `level`.
    pub fn parse(text: &str, level: GranularityLevel) -> Result<Self, SkeletonError> {
        let ast = parse_statement(text, LexMode::Skeleton)?;
        let projected = ClauseTree::from_ast(&ast);
        let canonical = extract_skeleton(&projected, level);
        if canonical.text != text || (level == GranularityLevel::Detailed && walk::query_has_placeholder(&canonical.tree, Placeholder::Blank)) {
            return Err(SkeletonError::NotCanonical { level, canonical: canonical.text });
        }
        Ok(canonical)
    }

    pub fn level(&self) -> GranularityLevel {
        self.level
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tree(&self) -> &Query {
        &self.tree
    }

    pub fn nesting_depth(&self) -> usize {
        self.nesting_depth
    }

    /// Erases this skeleton to a coarser (or equal) level.
    pub fn coarsen(&self, level: GranularityLevel) -> Result<Skeleton, LevelOrderError> {
        if level > self.level {
            return Err(LevelOrderError { coarse: self.level, fine: level });
        }
        Ok(match level {
            GranularityLevel::Base => Skeleton::from_tree(level, coarsen::base(&self.tree)),
            GranularityLevel::Expanded => Skeleton::from_tree(level, coarsen::expanded(&self.tree, usize::MAX)),
            GranularityLevel::Detailed => self.clone(),
        })
    }

    /// Expanded skeleton keeping nested queries only down to `depth`.
    pub fn truncate(&self, depth: usize) -> Skeleton {
        match self.level {
            GranularityLevel::Base => self.clone(),
            _ => Skeleton::from_tree(GranularityLevel::Expanded, coarsen::expanded(&self.tree, depth)),
        }
    }

    /// Detailed skeleton with explicit joins dissolved into comma-separated tables.
    pub fn without_joins(&self) -> Skeleton {
        match self.level {
            GranularityLevel::Detailed => Skeleton::from_tree(self.level, coarsen::joinless(&self.tree)),
            _ => self.clone(),
        }
    }

    pub fn has_explicit_joins(&self) -> bool {
        *self != self.without_joins()
    }
}

impl Serialize for Skeleton {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            level: GranularityLevel,
            text: &'a str,
        }
        Repr { level: self.level, text: &self.text }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Skeleton {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            level: GranularityLevel,
            text: String,
        }
        let r = Repr::deserialize(deserializer)?;
        Skeleton::parse(&r.text, r.level).map_err(serde::de::Error::custom)
    }
}

/// Whether `fine`, erased to the granularity of `coarse`, is exactly `coarse`.
///
/// Expanded skeletons compare at the coarse skeleton's nesting depth, so a
/// shallower Expanded skeleton refines into a deeper one. A Detailed skeleton
/// refines into itself with explicit joins added.
pub fn refinement_check(coarse: &Skeleton, fine: &Skeleton) -> Result<bool, LevelOrderError> {
    use GranularityLevel::*;
    if coarse.level > fine.level {
        return Err(LevelOrderError { coarse: coarse.level, fine: fine.level });
    }
    Ok(match (coarse.level, fine.level) {
        (Base, _) => render(&coarsen::base(&fine.tree)) == coarse.text,
        (Expanded, _) => render(&coarsen::expanded(&fine.tree, coarse.nesting_depth)) == coarse.text,
        (Detailed, _) => fine.text == coarse.text || render(&coarsen::joinless(&fine.tree)) == coarse.text,
    })
}

#[cfg(test)]
mod tests;
