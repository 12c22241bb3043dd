//! Syntax tree for the SQLite `SELECT` subset used by the text-to-SQL benchmarks.
//!
//! Skeleton text parses into the same tree: placeholder tokens appear as
//! [`Expr::Placeholder`], [`TableFactor::Placeholder`] and friends.

use super::lexer::Placeholder;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub with: Option<With>,
    pub body: SetExpr,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<Limit>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum With {
    Ctes(Vec<Cte>),
    Placeholder(Placeholder),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cte {
    pub name: Name,
    pub columns: Vec<String>,
    pub query: Box<Query>,
}

/// A compound chain `a UNION b EXCEPT c`, evaluated left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct SetExpr {
    pub first: Operand,
    pub rest: Vec<(SetOp, Operand)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Select(Box<Select>),
    Placeholder(Placeholder),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOp {
    Union,
    UnionAll,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: Vec<TableWithJoins>,
    pub selection: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub having: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard,
    QualifiedWildcard(String),
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableWithJoins {
    pub relation: TableFactor,
    pub joins: Vec<Join>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableFactor {
    Table { name: String, alias: Option<String> },
    Derived { query: Box<Query>, alias: Option<String> },
    Placeholder(Placeholder),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join {
    pub op: JoinOp,
    pub relation: TableFactor,
    pub constraint: JoinConstraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JoinOp {
    Inner,
    Left,
    Right,
    Full,
    Cross,
    Natural,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JoinConstraint {
    None,
    On(Expr),
    Using(Vec<Name>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Limit {
    pub count: Expr,
    pub offset: Option<Expr>,
}

/// An identifier slot that may also be a skeleton placeholder.
#[derive(Debug, Clone, PartialEq)]
pub enum Name {
    Ident(String),
    Placeholder(Placeholder),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Number(String),
    String(String),
    Null,
    Bool(bool),
    /// `CURRENT_DATE` and friends.
    Keyword(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Is,
    IsNot,
    Like,
    NotLike,
    Glob,
    NotGlob,
    Concat,
    Plus,
    Minus,
    Multiply,
    Divide,
    Modulo,
    BitAnd,
    BitOr,
    ShiftLeft,
    ShiftRight,
}

impl BinaryOp {
    pub fn is_arithmetic(self) -> bool {
        matches!(
            self,
            BinaryOp::Concat
                | BinaryOp::Plus
                | BinaryOp::Minus
                | BinaryOp::Multiply
                | BinaryOp::Divide
                | BinaryOp::Modulo
                | BinaryOp::BitAnd
                | BinaryOp::BitOr
                | BinaryOp::ShiftLeft
                | BinaryOp::ShiftRight
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Plus,
    BitNot,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column { table: Option<String>, name: String },
    Literal(Literal),
    Param,
    Placeholder(Placeholder),
    Unary { op: UnaryOp, expr: Box<Expr> },
    Binary { op: BinaryOp, left: Box<Expr>, right: Box<Expr> },
    Between { negated: bool, expr: Box<Expr>, low: Box<Expr>, high: Box<Expr> },
    InList { negated: bool, expr: Box<Expr>, list: Vec<Expr> },
    InSubquery { negated: bool, expr: Box<Expr>, query: Box<Query> },
    IsNull { negated: bool, expr: Box<Expr> },
    Exists { negated: bool, query: Box<Query> },
    Subquery(Box<Query>),
    Function(Function),
    Cast { expr: Box<Expr>, type_name: String },
    Case { operand: Option<Box<Expr>>, whens: Vec<(Expr, Expr)>, else_result: Option<Box<Expr>> },
    Collate { expr: Box<Expr>, collation: String },
    Nested(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Function {
    pub name: Name,
    pub distinct: bool,
    pub args: FunctionArgs,
    pub over: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionArgs {
    Star,
    List(Vec<Expr>),
}

const AGGREGATES: &[&str] = &["count", "sum", "avg", "min", "max", "total", "group_concat"];

impl Function {
    /// Aggregate call in the SQLite sense: a known aggregate name, not a window
    /// call, and for `min`/`max` exactly one argument (two-argument forms are scalar).
    pub fn is_aggregate(&self) -> bool {
        let Name::Ident(name) = &self.name else {
            return matches!(self.name, Name::Placeholder(Placeholder::Agg)) && !self.over;
        };
        let lower = name.to_ascii_lowercase();
        if self.over || !AGGREGATES.contains(&lower.as_str()) {
            return false;
        }
        match (&self.args, lower.as_str()) {
            (FunctionArgs::List(args), "min" | "max") => args.len() == 1,
            _ => true,
        }
    }
}
