//! Skeleton extraction written against `sqlparser`'s AST, used to cross-check
//! the crate's own parser and extractor.
//!
//! Rules, per level:
//! - Base keeps the top-level clause keywords with a single `_` body each;
//!   compound selects become `_ UNION _` and so on.
//! - Expanded keeps every expression that contains a subquery, with `_` in
//!   place of everything else; adjacent `_` list items collapse into one and
//!   ordering directions are dropped.
//! - Detailed types every slot: `[col]`, `[tab]`, `[val]`, `[agg]`, and keeps
//!   explicit joins. Scalar computations collapse to `[val]` unless they carry
//!   a subquery, in which case their operands are listed under a `[val]` head.

use sqlparser::ast::{
    BinaryOperator, Distinct, Expr, Function, FunctionArg, FunctionArgExpr, FunctionArguments, GroupByExpr, JoinConstraint, JoinOperator, Query, Select,
    SelectItem, SetExpr, SetOperator, SetQuantifier, TableFactor, TableWithJoins, UnaryOperator, Value,
};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;

pub struct Oracle {
    pub base: String,
    pub expanded: String,
    pub detailed: String,
    pub depth: usize,
}

pub fn extract(sql: &str) -> Result<Oracle, String> {
    let mut stmts = Parser::parse_sql(&SQLiteDialect {}, sql).map_err(|e| e.to_string())?;
    if stmts.len() != 1 {
        return Err(format!("{} statements", stmts.len()));
    }
    let sqlparser::ast::Statement::Query(q) = stmts.remove(0) else {
        return Err("not a query".into());
    };
    let mut b = Vec::new();
    base(&q, &mut b);
    Ok(Oracle { base: b.join(" "), expanded: Expanded.query(&q).text, detailed: Detailed.query(&q).text, depth: depth(&q) })
}

/// A rendered fragment; `atomic` fragments (a lone slot or a bare subquery)
/// lose their surrounding parentheses.
struct Piece {
    text: String,
    atomic: bool,
}

impl Piece {
    fn atom(text: &str) -> Self {
        Piece { text: text.to_string(), atomic: true }
    }
    fn compound(parts: &[&str]) -> Self {
        Piece { text: parts.iter().filter(|p| !p.is_empty()).copied().collect::<Vec<_>>().join(" "), atomic: false }
    }
}

fn join_list(items: Vec<Piece>) -> String {
    items.into_iter().map(|p| p.text).collect::<Vec<_>>().join(" , ")
}

fn merged(items: Vec<Piece>) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::new();
    for p in items {
        if p.text == "_" && out.last().is_some_and(|l| l.text == "_") {
            continue;
        }
        out.push(p);
    }
    out
}

fn base(q: &Query, out: &mut Vec<String>) {
    let mut push = |s: &str| out.push(s.to_string());
    if q.with.is_some() {
        push("WITH");
        push("_");
    }
    match q.body.as_ref() {
        SetExpr::Select(s) => {
            push(if s.distinct.is_some() { "SELECT DISTINCT" } else { "SELECT" });
            push("_");
            if !s.from.is_empty() {
                push("FROM _");
            }
            if s.selection.is_some() {
                push("WHERE _");
            }
            if !group_by(s).is_empty() {
                push("GROUP BY _");
            }
            if s.having.is_some() {
                push("HAVING _");
            }
        }
        body => {
            let mut ops = Vec::new();
            set_ops(body, &mut ops);
            push("_");
            for op in ops {
                push(op);
                push("_");
            }
        }
    }
    if q.order_by.as_ref().is_some_and(|o| !o.exprs.is_empty()) {
        push("ORDER BY _");
    }
    if q.limit.is_some() {
        push("LIMIT _");
    }
}

fn set_op_token(op: &SetOperator, quantifier: &SetQuantifier) -> &'static str {
    match (op, quantifier) {
        (SetOperator::Union, SetQuantifier::All) => "UNION ALL",
        (SetOperator::Union, _) => "UNION",
        (SetOperator::Intersect, _) => "INTERSECT",
        (SetOperator::Except, _) => "EXCEPT",
    }
}

fn set_ops(body: &SetExpr, ops: &mut Vec<&'static str>) {
    if let SetExpr::SetOperation { op, set_quantifier, left, right } = body {
        set_ops(left, ops);
        ops.push(set_op_token(op, set_quantifier));
        set_ops(right, ops);
    }
}

fn group_by(s: &Select) -> &[Expr] {
    match &s.group_by {
        GroupByExpr::Expressions(exprs, _) => exprs,
        GroupByExpr::All(_) => panic!("GROUP BY ALL"),
    }
}

fn function_args(f: &Function) -> Vec<&FunctionArgExpr> {
    match &f.args {
        FunctionArguments::None => Vec::new(),
        FunctionArguments::List(list) => list
            .args
            .iter()
            .map(|a| match a {
                FunctionArg::Unnamed(x) | FunctionArg::Named { arg: x, .. } => x,
            })
            .collect(),
        FunctionArguments::Subquery(_) => panic!("subquery argument list"),
    }
}

fn is_distinct_call(f: &Function) -> bool {
    matches!(&f.args, FunctionArguments::List(l) if l.duplicate_treatment == Some(sqlparser::ast::DuplicateTreatment::Distinct))
}

fn is_aggregate(f: &Function) -> bool {
    let name = f.name.to_string().to_ascii_lowercase();
    if f.over.is_some() {
        return false;
    }
    match name.as_str() {
        "count" | "sum" | "avg" | "total" | "group_concat" => true,
        "min" | "max" => function_args(f).len() == 1,
        _ => false,
    }
}

fn is_arithmetic(op: &BinaryOperator) -> bool {
    matches!(
        op,
        BinaryOperator::Plus
            | BinaryOperator::Minus
            | BinaryOperator::Multiply
            | BinaryOperator::Divide
            | BinaryOperator::Modulo
            | BinaryOperator::StringConcat
            | BinaryOperator::BitwiseAnd
            | BinaryOperator::BitwiseOr
            | BinaryOperator::PGBitwiseShiftLeft
            | BinaryOperator::PGBitwiseShiftRight
    )
}

fn op_token(op: &BinaryOperator) -> &'static str {
    match op {
        BinaryOperator::And => "AND",
        BinaryOperator::Or => "OR",
        BinaryOperator::Eq => "=",
        BinaryOperator::NotEq => "!=",
        BinaryOperator::Lt => "<",
        BinaryOperator::LtEq => "<=",
        BinaryOperator::Gt => ">",
        BinaryOperator::GtEq => ">=",
        BinaryOperator::Plus => "+",
        BinaryOperator::Minus => "-",
        BinaryOperator::Multiply => "*",
        BinaryOperator::Divide => "/",
        BinaryOperator::Modulo => "%",
        BinaryOperator::StringConcat => "||",
        BinaryOperator::BitwiseAnd => "&",
        BinaryOperator::BitwiseOr => "|",
        BinaryOperator::PGBitwiseShiftLeft => "<<",
        BinaryOperator::PGBitwiseShiftRight => ">>",
        other => panic!("operator {other}"),
    }
}

fn join_token(op: &JoinOperator) -> (&'static str, Option<&JoinConstraint>) {
    match op {
        JoinOperator::Inner(JoinConstraint::Natural) => ("NATURAL JOIN", None),
        JoinOperator::Inner(c) => ("JOIN", Some(c)),
        JoinOperator::LeftOuter(c) => ("LEFT JOIN", Some(c)),
        JoinOperator::RightOuter(c) => ("RIGHT JOIN", Some(c)),
        JoinOperator::FullOuter(c) => ("FULL JOIN", Some(c)),
        JoinOperator::CrossJoin => ("CROSS JOIN", None),
        other => panic!("join {other:?}"),
    }
}

/// Subqueries directly reachable from an expression, in source order.
fn subqueries(e: &Expr) -> Vec<&Query> {
    let mut out = Vec::new();
    collect(e, &mut out);
    out
}

fn collect<'a>(e: &'a Expr, out: &mut Vec<&'a Query>) {
    match e {
        Expr::Identifier(_) | Expr::CompoundIdentifier(_) | Expr::Value(_) | Expr::Wildcard => {}
        Expr::Subquery(q) | Expr::Exists { subquery: q, .. } => out.push(q),
        Expr::InSubquery { expr, subquery, .. } => {
            collect(expr, out);
            out.push(subquery);
        }
        Expr::IsNull(x) | Expr::IsNotNull(x) | Expr::Nested(x) | Expr::UnaryOp { expr: x, .. } | Expr::Cast { expr: x, .. } | Expr::Collate { expr: x, .. } => {
            collect(x, out)
        }
        Expr::BinaryOp { left, right, .. } => {
            collect(left, out);
            collect(right, out);
        }
        Expr::Like { expr, pattern, .. } | Expr::ILike { expr, pattern, .. } => {
            collect(expr, out);
            collect(pattern, out);
        }
        Expr::Between { expr, low, high, .. } => {
            collect(expr, out);
            collect(low, out);
            collect(high, out);
        }
        Expr::InList { expr, list, .. } => {
            collect(expr, out);
            list.iter().for_each(|x| collect(x, out));
        }
        Expr::Function(f) => {
            for a in function_args(f) {
                if let FunctionArgExpr::Expr(x) = a {
                    collect(x, out);
                }
            }
        }
        Expr::Case { operand, conditions, results, else_result } => {
            operand.iter().for_each(|x| collect(x, out));
            for (c, r) in conditions.iter().zip(results) {
                collect(c, out);
                collect(r, out);
            }
            else_result.iter().for_each(|x| collect(x, out));
        }
        Expr::Substring { expr, substring_from, substring_for, .. } => {
            collect(expr, out);
            substring_from.iter().for_each(|x| collect(x, out));
            substring_for.iter().for_each(|x| collect(x, out));
        }
        other => panic!("expression {other:?}"),
    }
}

fn has_sub(e: &Expr) -> bool {
    !subqueries(e).is_empty()
}

fn factor_queries(f: &TableFactor) -> Vec<&Query> {
    match f {
        TableFactor::Derived { subquery, .. } => vec![subquery],
        TableFactor::Table { .. } => Vec::new(),
        other => panic!("table factor {other:?}"),
    }
}

fn chain_queries(c: &TableWithJoins) -> Vec<&Query> {
    let mut out = factor_queries(&c.relation);
    for j in &c.joins {
        out.extend(factor_queries(&j.relation));
        if let (_, Some(JoinConstraint::On(e))) = join_token(&j.join_operator) {
            out.extend(subqueries(e));
        }
    }
    out
}

fn select_queries(s: &Select) -> Vec<&Query> {
    let mut out = Vec::new();
    for item in &s.projection {
        if let SelectItem::UnnamedExpr(e) | SelectItem::ExprWithAlias { expr: e, .. } = item {
            out.extend(subqueries(e));
        }
    }
    for c in &s.from {
        out.extend(chain_queries(c));
    }
    for e in s.selection.iter().chain(group_by(s)).chain(s.having.iter()) {
        out.extend(subqueries(e));
    }
    out
}

fn body_queries(body: &SetExpr) -> Vec<&Query> {
    match body {
        SetExpr::Select(s) => select_queries(s),
        SetExpr::SetOperation { left, right, .. } => {
            let mut v = body_queries(left);
            v.extend(body_queries(right));
            v
        }
        other => panic!("query body {other:?}"),
    }
}

/// Nested-query depth: subqueries, derived tables and CTE bodies each add one level.
pub fn depth(q: &Query) -> usize {
    let mut children: Vec<&Query> = Vec::new();
    if let Some(w) = &q.with {
        children.extend(w.cte_tables.iter().map(|c| c.query.as_ref()));
    }
    children.extend(body_queries(&q.body));
    if let Some(o) = &q.order_by {
        for item in &o.exprs {
            children.extend(subqueries(&item.expr));
        }
    }
    if let Some(l) = &q.limit {
        children.extend(subqueries(l));
    }
    if let Some(o) = &q.offset {
        children.extend(subqueries(&o.value));
    }
    children.into_iter().map(|c| 1 + depth(c)).max().unwrap_or(0)
}

/// Shared walk for the two structured levels.
trait Level {
    const SLOT: &'static str;
    fn expr(&self, e: &Expr) -> Piece;
    fn list(&self, items: Vec<Piece>) -> Vec<Piece>;
    fn cte_name(&self) -> &'static str;
    fn select_items(&self, s: &Select) -> Vec<Piece>;
    fn from(&self, from: &[TableWithJoins]) -> Vec<String>;
    fn order_item(&self, e: &Expr, desc: bool) -> Piece;
    fn keep_offset(&self, e: &Expr) -> bool;

    fn query(&self, q: &Query) -> Piece {
        let mut parts: Vec<String> = Vec::new();
        if let Some(w) = &q.with {
            let ctes: Vec<Piece> = w.cte_tables.iter().map(|c| Piece::compound(&[self.cte_name(), "AS (", &self.query(&c.query).text, ")"])).collect();
            parts.push(format!("WITH {}", join_list(ctes)));
        }
        self.body(&q.body, &mut parts);
        if let Some(o) = q.order_by.as_ref().filter(|o| !o.exprs.is_empty()) {
            let items = o.exprs.iter().map(|x| self.order_item(&x.expr, x.asc == Some(false))).collect();
            parts.push(format!("ORDER BY {}", join_list(self.list(items))));
        }
        if let Some(l) = &q.limit {
            parts.push(format!("LIMIT {}", self.expr(l).text));
            if let Some(o) = q.offset.as_ref().filter(|o| self.keep_offset(&o.value)) {
                parts.push(format!("OFFSET {}", self.expr(&o.value).text));
            }
        }
        Piece { text: parts.join(" "), atomic: false }
    }

    fn body(&self, body: &SetExpr, parts: &mut Vec<String>) {
        match body {
            SetExpr::Select(s) => parts.push(self.select(s)),
            SetExpr::SetOperation { op, set_quantifier, left, right } => {
                self.body(left, parts);
                parts.push(set_op_token(op, set_quantifier).to_string());
                self.body(right, parts);
            }
            other => panic!("query body {other:?}"),
        }
    }

    fn select(&self, s: &Select) -> String {
        let mut parts = vec![match &s.distinct {
            None => "SELECT".to_string(),
            Some(Distinct::Distinct) => "SELECT DISTINCT".to_string(),
            Some(Distinct::On(_)) => panic!("DISTINCT ON"),
        }];
        parts.push(join_list(self.select_items(s)));
        if !s.from.is_empty() {
            parts.push(format!("FROM {}", self.from(&s.from).join(" , ")));
        }
        if let Some(w) = &s.selection {
            parts.push(format!("WHERE {}", self.expr(w).text));
        }
        let groups = group_by(s);
        if !groups.is_empty() {
            let items = groups.iter().map(|g| self.expr(g)).collect();
            parts.push(format!("GROUP BY {}", join_list(self.list(items))));
        }
        if let Some(h) = &s.having {
            parts.push(format!("HAVING {}", self.expr(h).text));
        }
        parts.join(" ")
    }

    /// Structure common to both levels; `None` means the level decides.
    fn common(&self, e: &Expr) -> Option<Piece> {
        let p = |x: &Expr| self.expr(x).text;
        let sub = |q: &Query| format!("( {} )", self.query(q).text);
        Some(match e {
            Expr::Subquery(q) => Piece { text: sub(q), atomic: true },
            Expr::Exists { subquery, negated } => Piece::compound(&[if *negated { "NOT EXISTS" } else { "EXISTS" }, &sub(subquery)]),
            Expr::InSubquery { expr, subquery, negated } => Piece::compound(&[&p(expr), if *negated { "NOT IN" } else { "IN" }, &sub(subquery)]),
            Expr::InList { expr, list, negated } => {
                let items = self.list(list.iter().map(|x| self.expr(x)).collect());
                Piece::compound(&[&p(expr), if *negated { "NOT IN" } else { "IN" }, "(", &join_list(items), ")"])
            }
            Expr::Between { expr, negated, low, high } => {
                Piece::compound(&[&p(expr), if *negated { "NOT BETWEEN" } else { "BETWEEN" }, &p(low), "AND", &p(high)])
            }
            Expr::IsNull(x) => Piece::compound(&[&p(x), "IS NULL"]),
            Expr::IsNotNull(x) => Piece::compound(&[&p(x), "IS NOT NULL"]),
            Expr::Like { negated, expr, pattern, escape_char: None, any: false } => {
                Piece::compound(&[&p(expr), if *negated { "NOT LIKE" } else { "LIKE" }, &p(pattern)])
            }
            Expr::UnaryOp { op: UnaryOperator::Not, expr } => Piece::compound(&["NOT", &p(expr)]),
            Expr::Collate { expr, .. } => self.expr(expr),
            Expr::Nested(inner) => {
                let x = self.expr(inner);
                if x.atomic {
                    x
                } else {
                    Piece::compound(&["(", &x.text, ")"])
                }
            }
            _ => return None,
        })
    }

    fn call(&self, head: &str, distinct: bool, args: Vec<Piece>) -> Piece {
        let args = join_list(self.list(args));
        Piece::compound(&[head, "(", if distinct { "DISTINCT" } else { "" }, &args, ")"])
    }
}

struct Expanded;

impl Level for Expanded {
    const SLOT: &'static str = "_";

    fn expr(&self, e: &Expr) -> Piece {
        if !has_sub(e) {
            return Piece::atom(Self::SLOT);
        }
        if let Some(p) = self.common(e) {
            return p;
        }
        match e {
            Expr::BinaryOp { left, op, right } => Piece::compound(&[&self.expr(left).text, op_token(op), &self.expr(right).text]),
            Expr::UnaryOp { expr, .. } | Expr::Cast { expr, .. } => self.expr(expr),
            Expr::Function(f) => {
                let args = function_args(f)
                    .into_iter()
                    .map(|a| match a {
                        FunctionArgExpr::Expr(x) => self.expr(x),
                        _ => Piece::atom(Self::SLOT),
                    })
                    .collect();
                self.call(Self::SLOT, false, args)
            }
            Expr::Case { operand, conditions, results, else_result } => {
                self.call(Self::SLOT, false, case_args(operand, conditions, results, else_result).map(|x| self.expr(x)).collect())
            }
            other => panic!("expanded {other:?}"),
        }
    }

    fn list(&self, items: Vec<Piece>) -> Vec<Piece> {
        merged(items)
    }

    fn cte_name(&self) -> &'static str {
        Self::SLOT
    }

    fn select_items(&self, s: &Select) -> Vec<Piece> {
        let items = s
            .projection
            .iter()
            .map(|item| match item {
                SelectItem::UnnamedExpr(e) | SelectItem::ExprWithAlias { expr: e, .. } => self.expr(e),
                _ => Piece::atom(Self::SLOT),
            })
            .collect();
        merged(items)
    }

    fn from(&self, from: &[TableWithJoins]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for chain in from {
            let text = if chain_queries(chain).is_empty() {
                Self::SLOT.to_string()
            } else {
                let mut parts = vec![self.factor(&chain.relation)];
                for j in &chain.joins {
                    let (tok, constraint) = join_token(&j.join_operator);
                    parts.push(tok.to_string());
                    parts.push(self.factor(&j.relation));
                    match constraint {
                        Some(JoinConstraint::On(e)) => parts.push(format!("ON {}", self.expr(e).text)),
                        Some(JoinConstraint::Using(_)) => parts.push("USING ( _ )".to_string()),
                        _ => {}
                    }
                }
                parts.join(" ")
            };
            if text == Self::SLOT && out.last().is_some_and(|l| l == Self::SLOT) {
                continue;
            }
            out.push(text);
        }
        out
    }

    fn order_item(&self, e: &Expr, _desc: bool) -> Piece {
        self.expr(e)
    }

    fn keep_offset(&self, e: &Expr) -> bool {
        has_sub(e)
    }
}

impl Expanded {
    fn factor(&self, f: &TableFactor) -> String {
        match f {
            TableFactor::Derived { subquery, .. } => format!("( {} )", self.query(subquery).text),
            _ => Self::SLOT.to_string(),
        }
    }
}

fn case_args<'a>(
    operand: &'a Option<Box<Expr>>,
    conditions: &'a [Expr],
    results: &'a [Expr],
    else_result: &'a Option<Box<Expr>>,
) -> impl Iterator<Item = &'a Expr> {
    operand.iter().map(|b| b.as_ref()).chain(conditions.iter().zip(results).flat_map(|(c, r)| [c, r])).chain(else_result.iter().map(|b| b.as_ref()))
}

struct Detailed;

impl Level for Detailed {
    const SLOT: &'static str = "[val]";

    fn expr(&self, e: &Expr) -> Piece {
        if let Some(p) = self.common(e) {
            return p;
        }
        let nested = has_sub(e);
        match e {
            // double-quoted text is typed as a string literal
            Expr::Identifier(id) if id.quote_style == Some('"') => Piece::atom("[val]"),
            Expr::Identifier(_) | Expr::CompoundIdentifier(_) => Piece::atom("[col]"),
            Expr::Value(Value::Placeholder(_)) | Expr::Value(_) => Piece::atom("[val]"),
            Expr::BinaryOp { left, op, right } => {
                if is_arithmetic(op) && !nested {
                    Piece::atom("[val]")
                } else {
                    Piece::compound(&[&self.expr(left).text, op_token(op), &self.expr(right).text])
                }
            }
            Expr::UnaryOp { expr, .. } | Expr::Cast { expr, .. } => {
                if nested {
                    self.expr(expr)
                } else {
                    Piece::atom("[val]")
                }
            }
            Expr::Function(f) if is_aggregate(f) => {
                let args = function_args(f)
                    .into_iter()
                    .map(|a| match a {
                        FunctionArgExpr::Expr(x) => self.expr(x),
                        _ => Piece::atom("[col]"),
                    })
                    .collect();
                self.call("[agg]", is_distinct_call(f), args)
            }
            Expr::Function(f) => {
                if !nested {
                    return Piece::atom("[val]");
                }
                let args = function_args(f)
                    .into_iter()
                    .filter_map(|a| match a {
                        FunctionArgExpr::Expr(x) => Some(self.expr(x)),
                        _ => None,
                    })
                    .collect();
                self.call("[val]", false, args)
            }
            Expr::Case { operand, conditions, results, else_result } => {
                if !nested {
                    return Piece::atom("[val]");
                }
                self.call("[val]", false, case_args(operand, conditions, results, else_result).map(|x| self.expr(x)).collect())
            }
            Expr::Substring { .. } if !nested => Piece::atom("[val]"),
            other => panic!("detailed {other:?}"),
        }
    }

    fn list(&self, items: Vec<Piece>) -> Vec<Piece> {
        items
    }

    fn cte_name(&self) -> &'static str {
        "[tab]"
    }

    fn select_items(&self, s: &Select) -> Vec<Piece> {
        s.projection
            .iter()
            .map(|item| match item {
                SelectItem::UnnamedExpr(e) | SelectItem::ExprWithAlias { expr: e, .. } => self.expr(e),
                _ => Piece::atom("[col]"),
            })
            .collect()
    }

    fn from(&self, from: &[TableWithJoins]) -> Vec<String> {
        from.iter()
            .map(|chain| {
                let mut parts = vec![self.factor(&chain.relation)];
                for j in &chain.joins {
                    let (tok, constraint) = join_token(&j.join_operator);
                    parts.push(tok.to_string());
                    parts.push(self.factor(&j.relation));
                    match constraint {
                        Some(JoinConstraint::On(e)) => parts.push(format!("ON {}", self.expr(e).text)),
                        Some(JoinConstraint::Using(ids)) => parts.push(format!("USING ( {} )", vec!["[col]"; ids.len()].join(" , "))),
                        _ => {}
                    }
                }
                parts.join(" ")
            })
            .collect()
    }

    fn order_item(&self, e: &Expr, desc: bool) -> Piece {
        let x = self.expr(e);
        if desc {
            Piece::compound(&[&x.text, "DESC"])
        } else {
            x
        }
    }

    fn keep_offset(&self, _e: &Expr) -> bool {
        true
    }
}

impl Detailed {
    fn factor(&self, f: &TableFactor) -> String {
        match f {
            TableFactor::Derived { subquery, .. } => format!("( {} )", self.query(subquery).text),
            TableFactor::Table { .. } => "[tab]".to_string(),
            other => panic!("table factor {other:?}"),
        }
    }
}
