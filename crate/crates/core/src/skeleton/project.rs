//! Projection of a parsed query onto the Detailed skeleton grammar.
//!
//! Identifiers become `[col]`/`[tab]`, literals and opaque scalar expressions
//! become `[val]`, aggregate calls keep their shape under an `[agg]` head, and
//! every nested query is projected recursively. Projection is idempotent, so
//! skeleton text can be re-projected after parsing.

use super::walk::expr_depth;
use crate::sql::ast::*;
use crate::sql::Placeholder;

fn slot(p: Placeholder) -> Expr {
    Expr::Placeholder(p)
}

pub fn project_query(q: &Query) -> Query {
    Query {
        with: q.with.as_ref().map(|w| match w {
            With::Placeholder(p) => With::Placeholder(*p),
            With::Ctes(ctes) => With::Ctes(
                ctes.iter()
                    .map(|c| Cte {
                        name: match c.name {
                            Name::Placeholder(p) => Name::Placeholder(p),
                            Name::Ident(_) => Name::Placeholder(Placeholder::Tab),
                        },
                        columns: Vec::new(),
                        query: Box::new(project_query(&c.query)),
                    })
                    .collect(),
            ),
        }),
        body: SetExpr { first: project_operand(&q.body.first), rest: q.body.rest.iter().map(|(op, o)| (*op, project_operand(o))).collect() },
        order_by: q.order_by.iter().map(|o| OrderItem { expr: project_expr(&o.expr), desc: o.desc }).collect(),
        limit: q.limit.as_ref().map(|l| Limit { count: project_expr(&l.count), offset: l.offset.as_ref().map(project_expr) }),
    }
}

fn project_operand(o: &Operand) -> Operand {
    match o {
        Operand::Placeholder(p) => Operand::Placeholder(*p),
        Operand::Select(s) => Operand::Select(Box::new(project_select(s))),
    }
}

fn project_select(s: &Select) -> Select {
    Select {
        distinct: s.distinct,
        items: s
            .items
            .iter()
            .map(|item| {
                let expr = match item {
                    SelectItem::Wildcard | SelectItem::QualifiedWildcard(_) => slot(Placeholder::Col),
                    SelectItem::Expr { expr, .. } => project_expr(expr),
                };
                SelectItem::Expr { expr, alias: None }
            })
            .collect(),
        from: s.from.iter().map(project_chain).collect(),
        selection: s.selection.as_ref().map(project_expr),
        group_by: s.group_by.iter().map(project_expr).collect(),
        having: s.having.as_ref().map(project_expr),
    }
}

fn project_chain(chain: &TableWithJoins) -> TableWithJoins {
    TableWithJoins {
        relation: project_factor(&chain.relation),
        joins: chain
            .joins
            .iter()
            .map(|j| Join {
                op: j.op,
                relation: project_factor(&j.relation),
                constraint: match &j.constraint {
                    JoinConstraint::None => JoinConstraint::None,
                    JoinConstraint::On(e) => JoinConstraint::On(project_expr(e)),
                    JoinConstraint::Using(names) => JoinConstraint::Using(
                        names
                            .iter()
                            .map(|n| match n {
                                Name::Placeholder(p) => Name::Placeholder(*p),
                                Name::Ident(_) => Name::Placeholder(Placeholder::Col),
                            })
                            .collect(),
                    ),
                },
            })
            .collect(),
    }
}

fn project_factor(f: &TableFactor) -> TableFactor {
    match f {
        TableFactor::Table { .. } => TableFactor::Placeholder(Placeholder::Tab),
        TableFactor::Placeholder(p) => TableFactor::Placeholder(*p),
        TableFactor::Derived { query, .. } => TableFactor::Derived { query: Box::new(project_query(query)), alias: None },
    }
}

fn boxed(e: &Expr) -> Box<Expr> {
    Box::new(project_expr(e))
}

pub fn project_expr(e: &Expr) -> Expr {
    let nested = expr_depth(e) > 0;
    match e {
        Expr::Column { .. } => slot(Placeholder::Col),
        Expr::Literal(_) | Expr::Param => slot(Placeholder::Val),
        Expr::Placeholder(p) => slot(*p),
        Expr::Unary { op: UnaryOp::Not, expr } => Expr::Unary { op: UnaryOp::Not, expr: boxed(expr) },
        Expr::Unary { expr, .. } | Expr::Cast { expr, .. } => {
            if nested {
                project_expr(expr)
            } else {
                slot(Placeholder::Val)
            }
        }
        Expr::Collate { expr, .. } => project_expr(expr),
        Expr::Binary { op, left, right } => {
            if op.is_arithmetic() && !nested {
                slot(Placeholder::Val)
            } else {
                Expr::Binary { op: *op, left: boxed(left), right: boxed(right) }
            }
        }
        Expr::Between { negated, expr, low, high } => Expr::Between { negated: *negated, expr: boxed(expr), low: boxed(low), high: boxed(high) },
        Expr::InList { negated, expr, list } => Expr::InList { negated: *negated, expr: boxed(expr), list: list.iter().map(project_expr).collect() },
        Expr::InSubquery { negated, expr, query } => Expr::InSubquery { negated: *negated, expr: boxed(expr), query: Box::new(project_query(query)) },
        Expr::IsNull { negated, expr } => Expr::IsNull { negated: *negated, expr: boxed(expr) },
        Expr::Exists { negated, query } => Expr::Exists { negated: *negated, query: Box::new(project_query(query)) },
        Expr::Subquery(query) => Expr::Subquery(Box::new(project_query(query))),
        Expr::Function(f) if f.is_aggregate() => Expr::Function(Function {
            name: Name::Placeholder(Placeholder::Agg),
            distinct: f.distinct,
            args: FunctionArgs::List(match &f.args {
                FunctionArgs::Star => vec![slot(Placeholder::Col)],
                FunctionArgs::List(args) => args.iter().map(project_expr).collect(),
            }),
            over: false,
        }),
        Expr::Function(f) => {
            if !nested {
                return slot(Placeholder::Val);
            }
            let args = match &f.args {
                FunctionArgs::Star => Vec::new(),
                FunctionArgs::List(args) => args.iter().map(project_expr).collect(),
            };
            opaque_call(args)
        }
        Expr::Case { operand, whens, else_result } => {
            if !nested {
                return slot(Placeholder::Val);
            }
            let mut args = Vec::new();
            if let Some(o) = operand {
                args.push(project_expr(o));
            }
            for (c, r) in whens {
                args.push(project_expr(c));
                args.push(project_expr(r));
            }
            if let Some(x) = else_result {
                args.push(project_expr(x));
            }
            opaque_call(args)
        }
        Expr::Nested(inner) => match project_expr(inner) {
            x @ (Expr::Placeholder(_) | Expr::Subquery(_)) => x,
            x => Expr::Nested(Box::new(x)),
        },
    }
}

/// Scalar computation that carries a subquery: its operands stay visible
/// under a `[val]` head so the nested query is not lost.
fn opaque_call(args: Vec<Expr>) -> Expr {
    Expr::Function(Function { name: Name::Placeholder(Placeholder::Val), distinct: false, args: FunctionArgs::List(args), over: false })
}
