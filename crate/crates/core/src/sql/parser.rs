use super::ast::*;
use super::lexer::{tokenize, LexMode, Placeholder, Token, TokenKind};
use super::SyntaxError;

/// Words that cannot be used as bare identifiers or implicit aliases.
const RESERVED: &[&str] = &[
    "all",
    "and",
    "as",
    "asc",
    "between",
    "by",
    "case",
    "cast",
    "collate",
    "cross",
    "desc",
    "distinct",
    "else",
    "end",
    "escape",
    "except",
    "exists",
    "from",
    "full",
    "glob",
    "group",
    "having",
    "in",
    "inner",
    "intersect",
    "is",
    "isnull",
    "join",
    "left",
    "like",
    "limit",
    "match",
    "natural",
    "not",
    "notnull",
    "null",
    "offset",
    "on",
    "or",
    "order",
    "outer",
    "regexp",
    "right",
    "select",
    "then",
    "union",
    "using",
    "when",
    "where",
    "with",
];

pub fn is_reserved(word: &str) -> bool {
    let lower = word.to_ascii_lowercase();
    RESERVED.contains(&lower.as_str())
}

/// Parse one statement. Placeholders are accepted only in [`LexMode::Skeleton`].
pub fn parse_statement(src: &str, mode: LexMode) -> Result<Query, SyntaxError> {
    let tokens = tokenize(src, mode)?;
    let mut p = Parser { tokens, pos: 0, end: src.len() };
    if p.tokens.is_empty() {
        return Err(SyntaxError::new(0, "empty statement"));
    }
    let q = p.query()?;
    while p.eat_sym(";") {}
    if let Some(t) = p.peek() {
        return Err(SyntaxError::new(t.offset, format!("unexpected trailing token {}", describe(t))));
    }
    Ok(q)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

fn describe(t: &Token) -> String {
    match &t.kind {
        TokenKind::Word(w) => format!("'{w}'"),
        TokenKind::QuotedIdent(w) => format!("identifier '{w}'"),
        TokenKind::DoubleQuoted(w) => format!("\"{w}\""),
        TokenKind::Str(s) => format!("string '{s}'"),
        TokenKind::Number(n) => format!("number {n}"),
        TokenKind::Param => "parameter".into(),
        TokenKind::Placeholder(p) => format!("placeholder {p}"),
        TokenKind::Sym(s) => format!("'{s}'"),
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        let msg = msg.into();
        match self.peek() {
            Some(t) => Err(SyntaxError::new(t.offset, format!("{msg}, found {}", describe(t)))),
            None => Err(SyntaxError::new(self.end, format!("{msg}, found end of input"))),
        }
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn peek_word(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(kw))
    }

    fn peek_sym(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_sym(s))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek_word(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            self.err(format!("expected {}", kw.to_ascii_uppercase()))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SyntaxError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn peek_placeholder(&self) -> Option<Placeholder> {
        match self.peek()?.kind {
            TokenKind::Placeholder(p) => Some(p),
            _ => None,
        }
    }

    fn starts_query(&self) -> bool {
        self.peek_word("select") || self.peek_word("with")
    }

    fn query(&mut self) -> Result<Query, SyntaxError> {
        let with = if self.eat_word("with") { Some(self.with_clause()?) } else { None };
        let body = self.set_expr()?;
        let mut order_by = Vec::new();
        if self.eat_word("order") {
            self.expect_word("by")?;
            loop {
                let expr = self.expr()?;
                let desc = if self.eat_word("desc") {
                    true
                } else {
                    self.eat_word("asc");
                    false
                };
                if self.eat_word("nulls") && !(self.eat_word("first") || self.eat_word("last")) {
                    return self.err("expected FIRST or LAST");
                }
                order_by.push(OrderItem { expr, desc });
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let limit = if self.eat_word("limit") {
            let first = self.expr()?;
            if self.eat_word("offset") {
                Some(Limit { count: first, offset: Some(self.expr()?) })
            } else if self.eat_sym(",") {
                // LIMIT <offset>, <count>
                let count = self.expr()?;
                Some(Limit { count, offset: Some(first) })
            } else {
                Some(Limit { count: first, offset: None })
            }
        } else {
            None
        };
        Ok(Query { with, body, order_by, limit })
    }

    fn with_clause(&mut self) -> Result<With, SyntaxError> {
        self.eat_word("recursive");
        if let Some(p) = self.peek_placeholder() {
            let follows_cte = self.peek_at(1).is_some_and(|t| t.is_word("as") || t.is_sym("("));
            if !follows_cte {
                self.pos += 1;
                return Ok(With::Placeholder(p));
            }
        }
        let mut ctes = Vec::new();
        loop {
            let name = self.name()?;
            let mut columns = Vec::new();
            if self.eat_sym("(") {
                loop {
                    columns.push(self.ident()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
            }
            self.expect_word("as")?;
            if self.eat_word("not") {
                self.expect_word("materialized")?;
            } else {
                self.eat_word("materialized");
            }
            self.expect_sym("(")?;
            let query = Box::new(self.query()?);
            self.expect_sym(")")?;
            ctes.push(Cte { name, columns, query });
            if !self.eat_sym(",") {
                break;
            }
        }
        Ok(With::Ctes(ctes))
    }

    fn set_expr(&mut self) -> Result<SetExpr, SyntaxError> {
        let first = self.operand()?;
        let mut rest = Vec::new();
        loop {
            let op = if self.eat_word("union") {
                if self.eat_word("all") {
                    SetOp::UnionAll
                } else {
                    SetOp::Union
                }
            } else if self.eat_word("intersect") {
                SetOp::Intersect
            } else if self.eat_word("except") {
                SetOp::Except
            } else {
                break;
            };
            rest.push((op, self.operand()?));
        }
        if matches!(first, Operand::Placeholder(_)) && rest.is_empty() {
            return self.err("expected a set operator after placeholder operand");
        }
        Ok(SetExpr { first, rest })
    }

    fn operand(&mut self) -> Result<Operand, SyntaxError> {
        if let Some(p) = self.peek_placeholder() {
            self.pos += 1;
            return Ok(Operand::Placeholder(p));
        }
        if !self.peek_word("select") {
            return self.err("expected SELECT");
        }
        Ok(Operand::Select(Box::new(self.select()?)))
    }

    fn select(&mut self) -> Result<Select, SyntaxError> {
        self.expect_word("select")?;
        let distinct = if self.eat_word("distinct") {
            true
        } else {
            self.eat_word("all");
            false
        };
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat_sym(",") {
                break;
            }
        }
        let mut from = Vec::new();
        if self.eat_word("from") {
            loop {
                from.push(self.table_with_joins()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let selection = if self.eat_word("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_word("group") {
            self.expect_word("by")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        let having = if self.eat_word("having") { Some(self.expr()?) } else { None };
        Ok(Select { distinct, items, from, selection, group_by, having })
    }

    fn select_item(&mut self) -> Result<SelectItem, SyntaxError> {
        if self.eat_sym("*") {
            return Ok(SelectItem::Wildcard);
        }
        if self.peek_at(1).is_some_and(|t| t.is_sym(".")) && self.peek_at(2).is_some_and(|t| t.is_sym("*")) {
            let table = self.ident()?;
            self.pos += 2;
            return Ok(SelectItem::QualifiedWildcard(table));
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    fn alias(&mut self) -> Result<Option<String>, SyntaxError> {
        if self.eat_word("as") {
            return match self.next().map(|t| t.kind) {
                Some(TokenKind::Word(w) | TokenKind::QuotedIdent(w) | TokenKind::DoubleQuoted(w) | TokenKind::Str(w)) => Ok(Some(w)),
                Some(TokenKind::Placeholder(p)) => Ok(Some(p.token().to_string())),
                _ => {
                    self.pos -= 1;
                    self.err("expected alias after AS")
                }
            };
        }
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Word(w)) if !is_reserved(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(Some(w))
            }
            Some(TokenKind::QuotedIdent(w) | TokenKind::DoubleQuoted(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(Some(w))
            }
            _ => Ok(None),
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::Word(w)) if !is_reserved(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            Some(TokenKind::QuotedIdent(w) | TokenKind::DoubleQuoted(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn name(&mut self) -> Result<Name, SyntaxError> {
        if let Some(p) = self.peek_placeholder() {
            self.pos += 1;
            return Ok(Name::Placeholder(p));
        }
        Ok(Name::Ident(self.ident()?))
    }

    fn table_with_joins(&mut self) -> Result<TableWithJoins, SyntaxError> {
        let relation = self.table_factor()?;
        let mut joins = Vec::new();
        loop {
            let save = self.pos;
            let natural = self.eat_word("natural");
            let op = if self.eat_word("left") {
                self.eat_word("outer");
                JoinOp::Left
            } else if self.eat_word("right") {
                self.eat_word("outer");
                JoinOp::Right
            } else if self.eat_word("full") {
                self.eat_word("outer");
                JoinOp::Full
            } else if self.eat_word("cross") {
                JoinOp::Cross
            } else {
                self.eat_word("inner");
                JoinOp::Inner
            };
            if !self.eat_word("join") {
                if self.pos != save {
                    return self.err("expected JOIN");
                }
                break;
            }
            let op = if natural { JoinOp::Natural } else { op };
            let relation = self.table_factor()?;
            let constraint = if self.eat_word("on") {
                JoinConstraint::On(self.expr()?)
            } else if self.eat_word("using") {
                self.expect_sym("(")?;
                let mut cols = Vec::new();
                loop {
                    cols.push(self.name()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
                self.expect_sym(")")?;
                JoinConstraint::Using(cols)
            } else {
                JoinConstraint::None
            };
            joins.push(Join { op, relation, constraint });
        }
        Ok(TableWithJoins { relation, joins })
    }

    fn table_factor(&mut self) -> Result<TableFactor, SyntaxError> {
        if let Some(p) = self.peek_placeholder() {
            self.pos += 1;
            // skeleton writers sometimes keep an alias after a placeholder
            self.alias()?;
            return Ok(TableFactor::Placeholder(p));
        }
        if self.eat_sym("(") {
            if !self.starts_query() {
                return self.err("expected subquery");
            }
            let query = Box::new(self.query()?);
            self.expect_sym(")")?;
            let alias = self.alias()?;
            return Ok(TableFactor::Derived { query, alias });
        }
        let mut name = self.ident()?;
        if self.eat_sym(".") {
            name = self.ident()?;
        }
        let alias = self.alias()?;
        Ok(TableFactor::Table { name, alias })
    }

    pub fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.expr_bp(1)
    }

    fn expr_bp(&mut self, min: u8) -> Result<Expr, SyntaxError> {
        let mut left = self.prefix()?;
        while let Some(tok) = self.peek() {
            // postfix and infix operators with their precedence
            let prec = if tok.is_word("or") {
                1
            } else if tok.is_word("and") {
                2
            } else if tok.is_sym("=")
                || tok.is_sym("==")
                || tok.is_sym("!=")
                || tok.is_sym("<>")
                || tok.is_word("is")
                || tok.is_word("in")
                || tok.is_word("like")
                || tok.is_word("glob")
                || tok.is_word("between")
                || tok.is_word("isnull")
                || tok.is_word("notnull")
                || (tok.is_word("not")
                    && self.peek_at(1).is_some_and(|t| t.is_word("in") || t.is_word("like") || t.is_word("glob") || t.is_word("between") || t.is_word("null")))
            {
                4
            } else if tok.is_sym("<") || tok.is_sym("<=") || tok.is_sym(">") || tok.is_sym(">=") {
                5
            } else if tok.is_sym("&") || tok.is_sym("|") || tok.is_sym("<<") || tok.is_sym(">>") {
                6
            } else if tok.is_sym("+") || tok.is_sym("-") {
                7
            } else if tok.is_sym("*") || tok.is_sym("/") || tok.is_sym("%") {
                8
            } else if tok.is_sym("||") {
                9
            } else if tok.is_word("collate") {
                10
            } else {
                break;
            };
            if prec < min {
                break;
            }
            left = self.infix(left, prec)?;
        }
        Ok(left)
    }

    fn infix(&mut self, left: Expr, prec: u8) -> Result<Expr, SyntaxError> {
        let tok = self.next().expect("peeked");
        let bin = |op: BinaryOp, p: &mut Parser| -> Result<Expr, SyntaxError> {
            let right = p.expr_bp(prec + 1)?;
            Ok(Expr::Binary { op, left: Box::new(left.clone()), right: Box::new(right) })
        };
        match &tok.kind {
            TokenKind::Sym(s) => {
                let op = match *s {
                    "=" | "==" => BinaryOp::Eq,
                    "!=" | "<>" => BinaryOp::NotEq,
                    "<" => BinaryOp::Lt,
                    "<=" => BinaryOp::LtEq,
                    ">" => BinaryOp::Gt,
                    ">=" => BinaryOp::GtEq,
                    "&" => BinaryOp::BitAnd,
                    "|" => BinaryOp::BitOr,
                    "<<" => BinaryOp::ShiftLeft,
                    ">>" => BinaryOp::ShiftRight,
                    "+" => BinaryOp::Plus,
                    "-" => BinaryOp::Minus,
                    "*" => BinaryOp::Multiply,
                    "/" => BinaryOp::Divide,
                    "%" => BinaryOp::Modulo,
                    "||" => BinaryOp::Concat,
                    _ => unreachable!("operator table and precedence table agree"),
                };
                bin(op, self)
            }
            TokenKind::Word(w) => match w.to_ascii_lowercase().as_str() {
                "or" => bin(BinaryOp::Or, self),
                "and" => bin(BinaryOp::And, self),
                "collate" => {
                    let collation = self.ident()?;
                    Ok(Expr::Collate { expr: Box::new(left), collation })
                }
                "isnull" => Ok(Expr::IsNull { negated: false, expr: Box::new(left) }),
                "notnull" => Ok(Expr::IsNull { negated: true, expr: Box::new(left) }),
                "is" => {
                    let negated = self.eat_word("not");
                    if self.eat_word("null") {
                        return Ok(Expr::IsNull { negated, expr: Box::new(left) });
                    }
                    bin(if negated { BinaryOp::IsNot } else { BinaryOp::Is }, self)
                }
                "not" => {
                    if self.eat_word("null") {
                        return Ok(Expr::IsNull { negated: true, expr: Box::new(left) });
                    }
                    self.negatable(left, true, prec)
                }
                _ => {
                    self.pos -= 1;
                    self.negatable(left, false, prec)
                }
            },
            _ => unreachable!("only words and symbols have precedence"),
        }
    }

    fn negatable(&mut self, left: Expr, negated: bool, prec: u8) -> Result<Expr, SyntaxError> {
        if self.eat_word("in") {
            self.expect_sym("(")?;
            if self.starts_query() {
                let query = Box::new(self.query()?);
                self.expect_sym(")")?;
                return Ok(Expr::InSubquery { negated, expr: Box::new(left), query });
            }
            let mut list = Vec::new();
            if !self.peek_sym(")") {
                loop {
                    list.push(self.expr()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym(")")?;
            return Ok(Expr::InList { negated, expr: Box::new(left), list });
        }
        if self.eat_word("between") {
            let low = self.expr_bp(prec + 1)?;
            self.expect_word("and")?;
            let high = self.expr_bp(prec + 1)?;
            return Ok(Expr::Between { negated, expr: Box::new(left), low: Box::new(low), high: Box::new(high) });
        }
        let op = if self.eat_word("like") {
            if negated {
                BinaryOp::NotLike
            } else {
                BinaryOp::Like
            }
        } else if self.eat_word("glob") {
            if negated {
                BinaryOp::NotGlob
            } else {
                BinaryOp::Glob
            }
        } else {
            return self.err("expected IN, BETWEEN, LIKE or GLOB");
        };
        let right = self.expr_bp(prec + 1)?;
        // ESCAPE is accepted but carries no structure
        if self.eat_word("escape") {
            self.expr_bp(prec + 1)?;
        }
        Ok(Expr::Binary { op, left: Box::new(left), right: Box::new(right) })
    }

    fn prefix(&mut self) -> Result<Expr, SyntaxError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("expected expression");
        };
        match tok.kind {
            TokenKind::Number(n) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::Number(n)))
            }
            TokenKind::Str(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::String(s)))
            }
            TokenKind::DoubleQuoted(s) => {
                self.pos += 1;
                Ok(Expr::Literal(Literal::String(s)))
            }
            TokenKind::Param => {
                self.pos += 1;
                Ok(Expr::Param)
            }
            TokenKind::Placeholder(p) => {
                self.pos += 1;
                if self.peek_sym("(") {
                    return self.function_call(Name::Placeholder(p));
                }
                Ok(Expr::Placeholder(p))
            }
            TokenKind::Sym("(") => {
                self.pos += 1;
                if self.starts_query() {
                    let q = self.query()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::Subquery(Box::new(q)));
                }
                let inner = self.expr()?;
                if self.peek_sym(",") {
                    return self.err("row values are not supported");
                }
                self.expect_sym(")")?;
                Ok(Expr::Nested(Box::new(inner)))
            }
            TokenKind::Sym(s @ ("-" | "+" | "~")) => {
                self.pos += 1;
                let op = match s {
                    "-" => UnaryOp::Neg,
                    "+" => UnaryOp::Plus,
                    _ => UnaryOp::BitNot,
                };
                let expr = self.expr_bp(10)?;
                Ok(Expr::Unary { op, expr: Box::new(expr) })
            }
            TokenKind::QuotedIdent(_) => self.column_or_call(),
            TokenKind::Word(w) => {
                let lower = w.to_ascii_lowercase();
                match lower.as_str() {
                    "null" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Null))
                    }
                    "true" | "false" if !self.peek_at(1).is_some_and(|t| t.is_sym("(") || t.is_sym(".")) => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Bool(lower == "true")))
                    }
                    "current_date" | "current_time" | "current_timestamp" => {
                        self.pos += 1;
                        Ok(Expr::Literal(Literal::Keyword(lower.to_ascii_uppercase())))
                    }
                    "not" => {
                        self.pos += 1;
                        if self.eat_word("exists") {
                            return self.exists(true);
                        }
                        let expr = self.expr_bp(3)?;
                        Ok(Expr::Unary { op: UnaryOp::Not, expr: Box::new(expr) })
                    }
                    "exists" => {
                        self.pos += 1;
                        self.exists(false)
                    }
                    "case" => {
                        self.pos += 1;
                        self.case()
                    }
                    "cast" => {
                        self.pos += 1;
                        self.expect_sym("(")?;
                        let expr = self.expr()?;
                        self.expect_word("as")?;
                        let mut type_name = Vec::new();
                        while let Some(TokenKind::Word(w)) = self.peek().map(|t| &t.kind) {
                            type_name.push(w.to_ascii_uppercase());
                            self.pos += 1;
                        }
                        if type_name.is_empty() {
                            return self.err("expected type name");
                        }
                        if self.eat_sym("(") {
                            while !self.eat_sym(")") {
                                if self.next().is_none() {
                                    return self.err("unterminated type arguments");
                                }
                            }
                        }
                        self.expect_sym(")")?;
                        Ok(Expr::Cast { expr: Box::new(expr), type_name: type_name.join(" ") })
                    }
                    _ if is_reserved(&w) => self.err("expected expression"),
                    _ => self.column_or_call(),
                }
            }
            _ => self.err("expected expression"),
        }
    }

    fn exists(&mut self, negated: bool) -> Result<Expr, SyntaxError> {
        self.expect_sym("(")?;
        let query = Box::new(self.query()?);
        self.expect_sym(")")?;
        Ok(Expr::Exists { negated, query })
    }

    fn case(&mut self) -> Result<Expr, SyntaxError> {
        let operand = if self.peek_word("when") { None } else { Some(Box::new(self.expr()?)) };
        let mut whens = Vec::new();
        while self.eat_word("when") {
            let cond = self.expr()?;
            self.expect_word("then")?;
            let result = self.expr()?;
            whens.push((cond, result));
        }
        if whens.is_empty() {
            return self.err("expected WHEN");
        }
        let else_result = if self.eat_word("else") { Some(Box::new(self.expr()?)) } else { None };
        self.expect_word("end")?;
        Ok(Expr::Case { operand, whens, else_result })
    }

    fn column_or_call(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.ident()?;
        if self.peek_sym("(") {
            return self.function_call(Name::Ident(first));
        }
        if self.peek_sym(".") && !self.peek_at(1).is_some_and(|t| t.is_sym("*")) {
            self.pos += 1;
            let second = self.ident()?;
            if self.eat_sym(".") {
                // schema.table.column
                let third = self.ident()?;
                return Ok(Expr::Column { table: Some(second), name: third });
            }
            return Ok(Expr::Column { table: Some(first), name: second });
        }
        Ok(Expr::Column { table: None, name: first })
    }

    fn function_call(&mut self, name: Name) -> Result<Expr, SyntaxError> {
        self.expect_sym("(")?;
        let mut distinct = false;
        let args = if self.eat_sym("*") {
            FunctionArgs::Star
        } else {
            distinct = self.eat_word("distinct");
            let mut list = Vec::new();
            if !self.peek_sym(")") {
                loop {
                    list.push(self.expr()?);
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            FunctionArgs::List(list)
        };
        self.expect_sym(")")?;
        if self.eat_word("filter") {
            self.expect_sym("(")?;
            self.expect_word("where")?;
            self.expr()?;
            self.expect_sym(")")?;
        }
        let mut over = false;
        if self.eat_word("over") {
            over = true;
            if self.eat_sym("(") {
                let mut depth = 1usize;
                while depth > 0 {
                    match self.next() {
                        Some(t) if t.is_sym("(") => depth += 1,
                        Some(t) if t.is_sym(")") => depth -= 1,
                        Some(_) => {}
                        None => return self.err("unterminated window specification"),
                    }
                }
            } else {
                self.ident()?;
            }
        }
        Ok(Expr::Function(Function { name, distinct, args, over }))
    }
}
