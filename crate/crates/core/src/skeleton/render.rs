//! Canonical text: uppercase keywords, one space between tokens, and
//! parentheses and commas as standalone tokens.

use crate::sql::ast::*;

pub fn render(q: &Query) -> String {
    let mut out = Out(String::new());
    out.query(q);
    out.0
}

struct Out(String);

impl Out {
    fn tok(&mut self, t: &str) {
        if !self.0.is_empty() {
            self.0.push(' ');
        }
        self.0.push_str(t);
    }

    fn list<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) {
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                self.tok(",");
            }
            each(self, item);
        }
    }

    fn query(&mut self, q: &Query) {
        match &q.with {
            Some(With::Placeholder(p)) => {
                self.tok("WITH");
                self.tok(p.token());
            }
            Some(With::Ctes(ctes)) => {
                self.tok("WITH");
                self.list(ctes, |o, c| {
                    o.name(&c.name);
                    if !c.columns.is_empty() {
                        o.tok("(");
                        o.list(&c.columns, |o, col| o.tok(col));
                        o.tok(")");
                    }
                    o.tok("AS");
                    o.tok("(");
                    o.query(&c.query);
                    o.tok(")");
                });
            }
            None => {}
        }
        self.operand(&q.body.first);
        for (op, operand) in &q.body.rest {
            self.tok(match op {
                SetOp::Union => "UNION",
                SetOp::UnionAll => "UNION ALL",
                SetOp::Intersect => "INTERSECT",
                SetOp::Except => "EXCEPT",
            });
            self.operand(operand);
        }
        if !q.order_by.is_empty() {
            self.tok("ORDER BY");
            self.list(&q.order_by, |o, item| {
                o.expr(&item.expr);
                if item.desc {
                    o.tok("DESC");
                }
            });
        }
        if let Some(limit) = &q.limit {
            self.tok("LIMIT");
            self.expr(&limit.count);
            if let Some(off) = &limit.offset {
                self.tok("OFFSET");
                self.expr(off);
            }
        }
    }

    fn name(&mut self, n: &Name) {
        match n {
            Name::Ident(s) => self.tok(s),
            Name::Placeholder(p) => self.tok(p.token()),
        }
    }

    fn operand(&mut self, o: &Operand) {
        match o {
            Operand::Placeholder(p) => self.tok(p.token()),
            Operand::Select(s) => self.select(s),
        }
    }

    fn select(&mut self, s: &Select) {
        self.tok(if s.distinct { "SELECT DISTINCT" } else { "SELECT" });
        self.list(&s.items, |o, item| match item {
            SelectItem::Wildcard => o.tok("*"),
            SelectItem::QualifiedWildcard(t) => o.tok(&format!("{t}.*")),
            SelectItem::Expr { expr, alias } => {
                o.expr(expr);
                if let Some(a) = alias {
                    o.tok("AS");
                    o.tok(a);
                }
            }
        });
        if !s.from.is_empty() {
            self.tok("FROM");
            self.list(&s.from, |o, chain| {
                o.factor(&chain.relation);
                for j in &chain.joins {
                    o.tok(match j.op {
                        JoinOp::Inner => "JOIN",
                        JoinOp::Left => "LEFT JOIN",
                        JoinOp::Right => "RIGHT JOIN",
                        JoinOp::Full => "FULL JOIN",
                        JoinOp::Cross => "CROSS JOIN",
                        JoinOp::Natural => "NATURAL JOIN",
                    });
                    o.factor(&j.relation);
                    match &j.constraint {
                        JoinConstraint::None => {}
                        JoinConstraint::On(e) => {
                            o.tok("ON");
                            o.expr(e);
                        }
                        JoinConstraint::Using(names) => {
                            o.tok("USING");
                            o.tok("(");
                            o.list(names, |o, n| o.name(n));
                            o.tok(")");
                        }
                    }
                }
            });
        }
        if let Some(e) = &s.selection {
            self.tok("WHERE");
            self.expr(e);
        }
        if !s.group_by.is_empty() {
            self.tok("GROUP BY");
            self.list(&s.group_by, |o, e| o.expr(e));
        }
        if let Some(e) = &s.having {
            self.tok("HAVING");
            self.expr(e);
        }
    }

    fn factor(&mut self, f: &TableFactor) {
        match f {
            TableFactor::Placeholder(p) => self.tok(p.token()),
            TableFactor::Table { name, alias } => {
                self.tok(name);
                if let Some(a) = alias {
                    self.tok("AS");
                    self.tok(a);
                }
            }
            TableFactor::Derived { query, alias } => {
                self.tok("(");
                self.query(query);
                self.tok(")");
                if let Some(a) = alias {
                    self.tok("AS");
                    self.tok(a);
                }
            }
        }
    }

    fn sub(&mut self, q: &Query) {
        self.tok("(");
        self.query(q);
        self.tok(")");
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Column { table, name } => match table {
                Some(t) => self.tok(&format!("{t}.{name}")),
                None => self.tok(name),
            },
            Expr::Literal(lit) => match lit {
                Literal::Number(n) => self.tok(n),
                Literal::String(s) => self.tok(&format!("'{}'", s.replace('\'', "''"))),
                Literal::Null => self.tok("NULL"),
                Literal::Bool(b) => self.tok(if *b { "TRUE" } else { "FALSE" }),
                Literal::Keyword(k) => self.tok(k),
            },
            Expr::Param => self.tok("?"),
            Expr::Placeholder(p) => self.tok(p.token()),
            Expr::Unary { op, expr } => {
                self.tok(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Plus => "+",
                    UnaryOp::BitNot => "~",
                    UnaryOp::Not => "NOT",
                });
                self.expr(expr);
            }
            Expr::Binary { op, left, right } => {
                self.expr(left);
                self.tok(binary_token(*op));
                self.expr(right);
            }
            Expr::Between { negated, expr, low, high } => {
                self.expr(expr);
                self.tok(if *negated { "NOT BETWEEN" } else { "BETWEEN" });
                self.expr(low);
                self.tok("AND");
                self.expr(high);
            }
            Expr::InList { negated, expr, list } => {
                self.expr(expr);
                self.tok(if *negated { "NOT IN" } else { "IN" });
                self.tok("(");
                self.list(list, |o, x| o.expr(x));
                self.tok(")");
            }
            Expr::InSubquery { negated, expr, query } => {
                self.expr(expr);
                self.tok(if *negated { "NOT IN" } else { "IN" });
                self.sub(query);
            }
            Expr::IsNull { negated, expr } => {
                self.expr(expr);
                self.tok(if *negated { "IS NOT NULL" } else { "IS NULL" });
            }
            Expr::Exists { negated, query } => {
                self.tok(if *negated { "NOT EXISTS" } else { "EXISTS" });
                self.sub(query);
            }
            Expr::Subquery(q) => self.sub(q),
            Expr::Function(f) => {
                self.name(&f.name);
                self.tok("(");
                if f.distinct {
                    self.tok("DISTINCT");
                }
                match &f.args {
                    FunctionArgs::Star => self.tok("*"),
                    FunctionArgs::List(args) => self.list(args, |o, x| o.expr(x)),
                }
                self.tok(")");
                if f.over {
                    self.tok("OVER ( )");
                }
            }
            Expr::Cast { expr, type_name } => {
                self.tok("CAST");
                self.tok("(");
                self.expr(expr);
                self.tok("AS");
                self.tok(type_name);
                self.tok(")");
            }
            Expr::Case { operand, whens, else_result } => {
                self.tok("CASE");
                if let Some(o) = operand {
                    self.expr(o);
                }
                for (c, r) in whens {
                    self.tok("WHEN");
                    self.expr(c);
                    self.tok("THEN");
                    self.expr(r);
                }
                if let Some(x) = else_result {
                    self.tok("ELSE");
                    self.expr(x);
                }
                self.tok("END");
            }
            Expr::Collate { expr, collation } => {
                self.expr(expr);
                self.tok("COLLATE");
                self.tok(collation);
            }
            Expr::Nested(inner) => {
                self.tok("(");
                self.expr(inner);
                self.tok(")");
            }
        }
    }
}

pub fn binary_token(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::Or => "OR",
        BinaryOp::And => "AND",
        BinaryOp::Eq => "=",
        BinaryOp::NotEq => "!=",
        BinaryOp::Lt => "<",
        BinaryOp::LtEq => "<=",
        BinaryOp::Gt => ">",
        BinaryOp::GtEq => ">=",
        BinaryOp::Is => "IS",
        BinaryOp::IsNot => "IS NOT",
        BinaryOp::Like => "LIKE",
        BinaryOp::NotLike => "NOT LIKE",
        BinaryOp::Glob => "GLOB",
        BinaryOp::NotGlob => "NOT GLOB",
        BinaryOp::Concat => "||",
        BinaryOp::Plus => "+",
        BinaryOp::Minus => "-",
        BinaryOp::Multiply => "*",
        BinaryOp::Divide => "/",
        BinaryOp::Modulo => "%",
        BinaryOp::BitAnd => "&",
        BinaryOp::BitOr => "|",
        BinaryOp::ShiftLeft => "<<",
        BinaryOp::ShiftRight => ">>",
    }
}
