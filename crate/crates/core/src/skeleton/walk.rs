//! Depth and placeholder queries over the syntax tree.

use std::cell::Cell;

use crate::sql::ast::*;
use crate::sql::Placeholder;

/// Maximum nested-query depth below `q` (0 when `q` has no subqueries).
pub fn query_depth(q: &Query) -> usize {
    let mut d = 0;
    if let Some(With::Ctes(ctes)) = &q.with {
        for cte in ctes {
            d = d.max(1 + query_depth(&cte.query));
        }
    }
    for op in operands(&q.body) {
        if let Operand::Select(s) = op {
            d = d.max(select_depth(s));
        }
    }
    for item in &q.order_by {
        d = d.max(expr_depth(&item.expr));
    }
    if let Some(limit) = &q.limit {
        d = d.max(expr_depth(&limit.count));
        if let Some(off) = &limit.offset {
            d = d.max(expr_depth(off));
        }
    }
    d
}

pub fn operands(body: &SetExpr) -> impl Iterator<Item = &Operand> {
    std::iter::once(&body.first).chain(body.rest.iter().map(|(_, o)| o))
}

fn select_depth(s: &Select) -> usize {
    let mut d = 0;
    for item in &s.items {
        if let SelectItem::Expr { expr, .. } = item {
            d = d.max(expr_depth(expr));
        }
    }
    for chain in &s.from {
        d = d.max(chain_depth(chain));
    }
    for e in s.selection.iter().chain(&s.group_by).chain(&s.having) {
        d = d.max(expr_depth(e));
    }
    d
}

pub fn chain_depth(chain: &TableWithJoins) -> usize {
    let mut d = factor_depth(&chain.relation);
    for j in &chain.joins {
        d = d.max(factor_depth(&j.relation));
        if let JoinConstraint::On(e) = &j.constraint {
            d = d.max(expr_depth(e));
        }
    }
    d
}

fn factor_depth(f: &TableFactor) -> usize {
    match f {
        TableFactor::Derived { query, .. } => 1 + query_depth(query),
        _ => 0,
    }
}

/// Nested depth contributed by subqueries inside `e`, relative to the
/// query that owns `e`. Zero means the expression holds no subquery.
pub fn expr_depth(e: &Expr) -> usize {
    let d = Cell::new(0);
    visit_children(e, &mut |child| d.set(d.get().max(expr_depth(child))), &mut |q| d.set(d.get().max(1 + query_depth(q))));
    d.get()
}

/// Calls `on_expr` for direct sub-expressions and `on_query` for directly nested queries.
pub fn visit_children<'a>(e: &'a Expr, on_expr: &mut dyn FnMut(&'a Expr), on_query: &mut dyn FnMut(&'a Query)) {
    match e {
        Expr::Column { .. } | Expr::Literal(_) | Expr::Param | Expr::Placeholder(_) => {}
        Expr::Unary { expr, .. } | Expr::IsNull { expr, .. } | Expr::Cast { expr, .. } | Expr::Collate { expr, .. } => on_expr(expr),
        Expr::Nested(expr) => on_expr(expr),
        Expr::Binary { left, right, .. } => {
            on_expr(left);
            on_expr(right);
        }
        Expr::Between { expr, low, high, .. } => {
            on_expr(expr);
            on_expr(low);
            on_expr(high);
        }
        Expr::InList { expr, list, .. } => {
            on_expr(expr);
            list.iter().for_each(&mut *on_expr);
        }
        Expr::InSubquery { expr, query, .. } => {
            on_expr(expr);
            on_query(query);
        }
        Expr::Exists { query, .. } | Expr::Subquery(query) => on_query(query),
        Expr::Function(f) => {
            if let FunctionArgs::List(args) = &f.args {
                args.iter().for_each(&mut *on_expr);
            }
        }
        Expr::Case { operand, whens, else_result } => {
            if let Some(o) = operand {
                on_expr(o);
            }
            for (c, r) in whens {
                on_expr(c);
                on_expr(r);
            }
            if let Some(e) = else_result {
                on_expr(e);
            }
        }
    }
}

/// Whether any placeholder of kind `p` occurs anywhere in `q`.
pub fn query_has_placeholder(q: &Query, p: Placeholder) -> bool {
    let found = Cell::new(false);
    walk_query(
        q,
        &mut |e| match e {
            Expr::Placeholder(x) | Expr::Function(Function { name: Name::Placeholder(x), .. }) if *x == p => found.set(true),
            _ => {}
        },
        &mut |node| {
            if node_has_placeholder(node, p) {
                found.set(true)
            }
        },
    );
    found.get()
}

/// Non-expression positions a placeholder can occupy.
pub enum Node<'a> {
    With(&'a With),
    Cte(&'a Cte),
    Operand(&'a Operand),
    Factor(&'a TableFactor),
    Using(&'a Name),
}

fn node_has_placeholder(node: Node<'_>, p: Placeholder) -> bool {
    match node {
        Node::With(With::Placeholder(x)) | Node::Operand(Operand::Placeholder(x)) => *x == p,
        Node::Factor(TableFactor::Placeholder(x)) => *x == p,
        Node::Cte(Cte { name: Name::Placeholder(x), .. }) | Node::Using(Name::Placeholder(x)) => *x == p,
        _ => false,
    }
}

/// Pre-order walk over every expression and structural node of `q`, including nested queries.
pub fn walk_query<'a>(q: &'a Query, on_expr: &mut dyn FnMut(&'a Expr), on_node: &mut dyn FnMut(Node<'a>)) {
    if let Some(w) = &q.with {
        on_node(Node::With(w));
        if let With::Ctes(ctes) = w {
            for cte in ctes {
                on_node(Node::Cte(cte));
                walk_query(&cte.query, on_expr, on_node);
            }
        }
    }
    for op in operands(&q.body) {
        on_node(Node::Operand(op));
        let Operand::Select(s) = op else { continue };
        for item in &s.items {
            if let SelectItem::Expr { expr, .. } = item {
                walk_expr(expr, on_expr, on_node);
            }
        }
        for chain in &s.from {
            walk_factor(&chain.relation, on_expr, on_node);
            for j in &chain.joins {
                walk_factor(&j.relation, on_expr, on_node);
                match &j.constraint {
                    JoinConstraint::On(e) => walk_expr(e, on_expr, on_node),
                    JoinConstraint::Using(names) => names.iter().for_each(|n| on_node(Node::Using(n))),
                    JoinConstraint::None => {}
                }
            }
        }
        for e in s.selection.iter().chain(&s.group_by).chain(&s.having) {
            walk_expr(e, on_expr, on_node);
        }
    }
    for item in &q.order_by {
        walk_expr(&item.expr, on_expr, on_node);
    }
    if let Some(limit) = &q.limit {
        walk_expr(&limit.count, on_expr, on_node);
        if let Some(off) = &limit.offset {
            walk_expr(off, on_expr, on_node);
        }
    }
}

fn walk_factor<'a>(f: &'a TableFactor, on_expr: &mut dyn FnMut(&'a Expr), on_node: &mut dyn FnMut(Node<'a>)) {
    on_node(Node::Factor(f));
    if let TableFactor::Derived { query, .. } = f {
        walk_query(query, on_expr, on_node);
    }
}

pub fn walk_expr<'a>(e: &'a Expr, on_expr: &mut dyn FnMut(&'a Expr), on_node: &mut dyn FnMut(Node<'a>)) {
    on_expr(e);
    let mut subs: Vec<&'a Expr> = Vec::new();
    let mut queries: Vec<&'a Query> = Vec::new();
    visit_children(e, &mut |x| subs.push(x), &mut |q| queries.push(q));
    for x in subs {
        walk_expr(x, on_expr, on_node);
    }
    for q in queries {
        walk_query(q, on_expr, on_node);
    }
}
