//! Erasure from Detailed trees down to Expanded and Base trees.

use super::walk::{chain_depth, expr_depth};
use crate::sql::ast::*;
use crate::sql::Placeholder;

const BLANK: Placeholder = Placeholder::Blank;

fn blank() -> Expr {
    Expr::Placeholder(BLANK)
}

/// Expanded form of a projected tree, keeping nested queries up to absolute
/// depth `limit` and treating deeper ones as opaque expressions.
pub fn expanded(q: &Query, limit: usize) -> Query {
    coarsen_query(q, 0, limit)
}

fn coarsen_query(q: &Query, depth: usize, limit: usize) -> Query {
    let with = q.with.as_ref().map(|w| match w {
        With::Ctes(ctes) if depth < limit => With::Ctes(
            ctes.iter()
                .map(|c| Cte { name: Name::Placeholder(BLANK), columns: Vec::new(), query: Box::new(coarsen_query(&c.query, depth + 1, limit)) })
                .collect(),
        ),
        _ => With::Placeholder(BLANK),
    });
    let body = SetExpr {
        first: coarsen_operand(&q.body.first, depth, limit),
        rest: q.body.rest.iter().map(|(op, o)| (*op, coarsen_operand(o, depth, limit))).collect(),
    };
    let order_by =
        merge(q.order_by.iter().map(|o| coarsen_expr(&o.expr, depth, limit)).collect()).into_iter().map(|expr| OrderItem { expr, desc: false }).collect();
    let limit_clause = q.limit.as_ref().map(|l| Limit {
        count: coarsen_expr(&l.count, depth, limit),
        offset: l.offset.as_ref().filter(|o| keeps(o, depth, limit)).map(|o| coarsen_expr(o, depth, limit)),
    });
    Query { with, body, order_by, limit: limit_clause }
}

fn coarsen_operand(o: &Operand, depth: usize, limit: usize) -> Operand {
    match o {
        Operand::Placeholder(_) => Operand::Placeholder(BLANK),
        Operand::Select(s) => Operand::Select(Box::new(Select {
            distinct: s.distinct,
            items: merge(
                s.items
                    .iter()
                    .map(|item| match item {
                        SelectItem::Expr { expr, .. } => coarsen_expr(expr, depth, limit),
                        _ => blank(),
                    })
                    .collect(),
            )
            .into_iter()
            .map(|expr| SelectItem::Expr { expr, alias: None })
            .collect(),
            from: coarsen_from(&s.from, depth, limit),
            selection: s.selection.as_ref().map(|e| coarsen_expr(e, depth, limit)),
            group_by: merge(s.group_by.iter().map(|e| coarsen_expr(e, depth, limit)).collect()),
            having: s.having.as_ref().map(|e| coarsen_expr(e, depth, limit)),
        })),
    }
}

fn blank_chain() -> TableWithJoins {
    TableWithJoins { relation: TableFactor::Placeholder(BLANK), joins: Vec::new() }
}

fn is_blank_chain(c: &TableWithJoins) -> bool {
    c.joins.is_empty() && c.relation == TableFactor::Placeholder(BLANK)
}

fn coarsen_from(from: &[TableWithJoins], depth: usize, limit: usize) -> Vec<TableWithJoins> {
    let mut out: Vec<TableWithJoins> = Vec::new();
    for chain in from {
        let c = if chain_depth(chain) > 0 && depth < limit {
            TableWithJoins {
                relation: coarsen_factor(&chain.relation, depth, limit),
                joins: chain
                    .joins
                    .iter()
                    .map(|j| Join {
                        op: j.op,
                        relation: coarsen_factor(&j.relation, depth, limit),
                        constraint: match &j.constraint {
                            JoinConstraint::None => JoinConstraint::None,
                            JoinConstraint::On(e) => JoinConstraint::On(coarsen_expr(e, depth, limit)),
                            JoinConstraint::Using(_) => JoinConstraint::Using(vec![Name::Placeholder(BLANK)]),
                        },
                    })
                    .collect(),
            }
        } else {
            blank_chain()
        };
        if is_blank_chain(&c) && out.last().is_some_and(is_blank_chain) {
            continue;
        }
        out.push(c);
    }
    out
}

fn coarsen_factor(f: &TableFactor, depth: usize, limit: usize) -> TableFactor {
    match f {
        TableFactor::Derived { query, .. } if depth < limit => TableFactor::Derived { query: Box::new(coarsen_query(query, depth + 1, limit)), alias: None },
        _ => TableFactor::Placeholder(BLANK),
    }
}

/// Whether an expression at query depth `depth` keeps any structure.
fn keeps(e: &Expr, depth: usize, limit: usize) -> bool {
    depth < limit && expr_depth(e) > 0
}

/// Collapses runs of adjacent `_` items into one.
fn merge(items: Vec<Expr>) -> Vec<Expr> {
    let mut out: Vec<Expr> = Vec::with_capacity(items.len());
    for e in items {
        if e == blank() && out.last() == Some(&blank()) {
            continue;
        }
        out.push(e);
    }
    out
}

fn coarsen_expr(e: &Expr, depth: usize, limit: usize) -> Expr {
    if !keeps(e, depth, limit) {
        return blank();
    }
    let sub = |x: &Expr| Box::new(coarsen_expr(x, depth, limit));
    let nested = |q: &Query| Box::new(coarsen_query(q, depth + 1, limit));
    match e {
        Expr::Unary { op, expr } => Expr::Unary { op: *op, expr: sub(expr) },
        Expr::Binary { op, left, right } => Expr::Binary { op: *op, left: sub(left), right: sub(right) },
        Expr::Between { negated, expr, low, high } => Expr::Between { negated: *negated, expr: sub(expr), low: sub(low), high: sub(high) },
        Expr::InList { negated, expr, list } => {
            Expr::InList { negated: *negated, expr: sub(expr), list: merge(list.iter().map(|x| coarsen_expr(x, depth, limit)).collect()) }
        }
        Expr::InSubquery { negated, expr, query } => Expr::InSubquery { negated: *negated, expr: sub(expr), query: nested(query) },
        Expr::IsNull { negated, expr } => Expr::IsNull { negated: *negated, expr: sub(expr) },
        Expr::Exists { negated, query } => Expr::Exists { negated: *negated, query: nested(query) },
        Expr::Subquery(query) => Expr::Subquery(nested(query)),
        Expr::Function(f) => Expr::Function(Function {
            name: Name::Placeholder(BLANK),
            distinct: false,
            args: FunctionArgs::List(match &f.args {
                FunctionArgs::Star => Vec::new(),
                FunctionArgs::List(args) => merge(args.iter().map(|x| coarsen_expr(x, depth, limit)).collect()),
            }),
            over: false,
        }),
        Expr::Nested(inner) => match coarsen_expr(inner, depth, limit) {
            x @ (Expr::Placeholder(_) | Expr::Subquery(_)) => x,
            x => Expr::Nested(Box::new(x)),
        },
        Expr::Cast { expr, .. } | Expr::Collate { expr, .. } => coarsen_expr(expr, depth, limit),
        // the projection turns these into calls before coarsening
        Expr::Case { .. } | Expr::Column { .. } | Expr::Literal(_) | Expr::Param | Expr::Placeholder(_) => blank(),
    }
}

/// Base form: the top-level clause keywords with `_` bodies.
pub fn base(q: &Query) -> Query {
    let body = if q.body.rest.is_empty() {
        match &q.body.first {
            Operand::Select(s) => Operand::Select(Box::new(Select {
                distinct: s.distinct,
                items: vec![SelectItem::Expr { expr: blank(), alias: None }],
                from: if s.from.is_empty() { Vec::new() } else { vec![blank_chain()] },
                selection: s.selection.as_ref().map(|_| blank()),
                group_by: if s.group_by.is_empty() { Vec::new() } else { vec![blank()] },
                having: s.having.as_ref().map(|_| blank()),
            })),
            Operand::Placeholder(_) => Operand::Placeholder(BLANK),
        }
    } else {
        Operand::Placeholder(BLANK)
    };
    Query {
        with: q.with.as_ref().map(|_| With::Placeholder(BLANK)),
        body: SetExpr { first: body, rest: q.body.rest.iter().map(|(op, _)| (*op, Operand::Placeholder(BLANK))).collect() },
        order_by: if q.order_by.is_empty() { Vec::new() } else { vec![OrderItem { expr: blank(), desc: false }] },
        limit: q.limit.as_ref().map(|_| Limit { count: blank(), offset: None }),
    }
}

/// Detailed form with explicit joins dissolved: every FROM item whose join
/// chain holds no nested query becomes a comma-separated list of its tables.
pub fn joinless(q: &Query) -> Query {
    let mut q = q.clone();
    joinless_in_place(&mut q);
    q
}

fn joinless_in_place(q: &mut Query) {
    if let Some(With::Ctes(ctes)) = &mut q.with {
        for cte in ctes {
            joinless_in_place(&mut cte.query);
        }
    }
    let rest = q.body.rest.iter_mut().map(|(_, o)| o);
    for op in std::iter::once(&mut q.body.first).chain(rest) {
        let Operand::Select(s) = op else { continue };
        let mut from = Vec::with_capacity(s.from.len());
        for mut chain in std::mem::take(&mut s.from) {
            if chain_depth(&chain) > 0 {
                from.push(chain);
                continue;
            }
            let joins = std::mem::take(&mut chain.joins);
            from.push(chain);
            from.extend(joins.into_iter().map(|j| TableWithJoins { relation: j.relation, joins: Vec::new() }));
        }
        s.from = from;
        visit_nested_mut(s, &mut |nested| joinless_in_place(nested));
    }
}

/// Applies `f` to every query nested directly or indirectly in expressions and derived tables of `s`.
fn visit_nested_mut(s: &mut Select, f: &mut dyn FnMut(&mut Query)) {
    for item in &mut s.items {
        if let SelectItem::Expr { expr, .. } = item {
            expr_queries_mut(expr, f);
        }
    }
    for chain in &mut s.from {
        let joins = chain.joins.iter_mut();
        if let TableFactor::Derived { query, .. } = &mut chain.relation {
            f(query);
        }
        for j in joins {
            if let TableFactor::Derived { query, .. } = &mut j.relation {
                f(query);
            }
            if let JoinConstraint::On(e) = &mut j.constraint {
                expr_queries_mut(e, f);
            }
        }
    }
    for e in s.selection.iter_mut().chain(s.group_by.iter_mut()).chain(s.having.iter_mut()) {
        expr_queries_mut(e, f);
    }
}

fn expr_queries_mut(e: &mut Expr, f: &mut dyn FnMut(&mut Query)) {
    match e {
        Expr::Column { .. } | Expr::Literal(_) | Expr::Param | Expr::Placeholder(_) => {}
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } | Expr::Collate { expr, .. } | Expr::Nested(expr) => {
            expr_queries_mut(expr, f)
        }
        Expr::Binary { left, right, .. } => {
            expr_queries_mut(left, f);
            expr_queries_mut(right, f);
        }
        Expr::Between { expr, low, high, .. } => {
            expr_queries_mut(expr, f);
            expr_queries_mut(low, f);
            expr_queries_mut(high, f);
        }
        Expr::InList { expr, list, .. } => {
            expr_queries_mut(expr, f);
            list.iter_mut().for_each(|x| expr_queries_mut(x, f));
        }
        Expr::InSubquery { expr, query, .. } => {
            expr_queries_mut(expr, f);
            f(query);
        }
        Expr::Exists { query, .. } | Expr::Subquery(query) => f(query),
        Expr::Function(func) => {
            if let FunctionArgs::List(args) = &mut func.args {
                args.iter_mut().for_each(|x| expr_queries_mut(x, f));
            }
        }
        Expr::Case { operand, whens, else_result } => {
            if let Some(o) = operand {
                expr_queries_mut(o, f);
            }
            for (c, r) in whens {
                expr_queries_mut(c, f);
                expr_queries_mut(r, f);
            }
            if let Some(x) = else_result {
                expr_queries_mut(x, f);
            }
        }
    }
}
