//! SQLite `SELECT` front end shared by SQL parsing and skeleton parsing.

pub mod ast;
mod lexer;
mod parser;

use serde::{Deserialize, Serialize};

pub use lexer::{tokenize, LexMode, Placeholder, Token, TokenKind};
pub use parser::{is_reserved, parse_statement};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    /// Byte offset into the source text.
    pub offset: usize,
    pub message: String,
}

impl SyntaxError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        SyntaxError { offset, message: message.into() }
    }
}

/// Only SQLite is accepted; the benchmark databases ship in that format.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    #[default]
    Sqlite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlQuery {
    pub text: String,
    #[serde(default)]
    pub dialect: Dialect,
}

impl SqlQuery {
    pub fn new(text: impl Into<String>) -> Self {
        SqlQuery { text: text.into(), dialect: Dialect::Sqlite }
    }

    pub fn parse(&self) -> Result<ast::Query, SyntaxError> {
        if self.text.trim().is_empty() {
            return Err(SyntaxError::new(0, "empty query text"));
        }
        parse_statement(&self.text, LexMode::Sql)
    }
}
