use std::fmt;

use super::SyntaxError;

/// Placeholder tokens understood by the skeleton grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placeholder {
    /// `_`, the untyped slot used by Base and Expanded skeletons.
    Blank,
    /// `[col]`
    Col,
    /// `[tab]`
    Tab,
    /// `[val]`
    Val,
    /// `[agg]`
    Agg,
}

impl Placeholder {
    pub fn token(self) -> &'static str {
        match self {
            Placeholder::Blank => "_",
            Placeholder::Col => "[col]",
            Placeholder::Tab => "[tab]",
            Placeholder::Val => "[val]",
            Placeholder::Agg => "[agg]",
        }
    }

    pub fn is_typed(self) -> bool {
        self != Placeholder::Blank
    }

    fn from_bracket(inner: &str) -> Option<Self> {
        match inner.to_ascii_lowercase().as_str() {
            "col" => Some(Placeholder::Col),
            "tab" => Some(Placeholder::Tab),
            "val" => Some(Placeholder::Val),
            "agg" => Some(Placeholder::Agg),
            _ => None,
        }
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Bare word; keywords are recognised by the parser, case-insensitively.
    Word(String),
    /// `"x"`, `` `x` `` or `[x]` in SQL mode.
    QuotedIdent(String),
    /// Double-quoted text. SQLite resolves these late; we keep them apart.
    DoubleQuoted(String),
    Str(String),
    Number(String),
    Param,
    Placeholder(Placeholder),
    Sym(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub offset: usize,
}

impl Token {
    pub fn is_word(&self, kw: &str) -> bool {
        matches!(&self.kind, TokenKind::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    pub fn is_sym(&self, s: &str) -> bool {
        matches!(&self.kind, TokenKind::Sym(x) if *x == s)
    }
}

/// Whether `_` and `[col]`-style tokens lex as placeholders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexMode {
    Sql,
    Skeleton,
}

const SYMBOLS: &[&str] = &["<>", "!=", "<=", ">=", "==", "||", "<<", ">>", "=", "<", ">", "+", "-", "*", "/", "%", ",", "(", ")", ".", ";", "&", "|", "~"];

pub fn tokenize(src: &str, mode: LexMode) -> Result<Vec<Token>, SyntaxError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'-' && bytes.get(i + 1) == Some(&b'-') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(SyntaxError::new(start, "unterminated block comment"));
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        match c {
            b'\'' => {
                let (text, next) = quoted(src, i, b'\'')?;
                out.push(Token { kind: TokenKind::Str(text), offset: start });
                i = next;
            }
            b'"' => {
                let (text, next) = quoted(src, i, b'"')?;
                out.push(Token { kind: TokenKind::DoubleQuoted(text), offset: start });
                i = next;
            }
            b'`' => {
                let (text, next) = quoted(src, i, b'`')?;
                out.push(Token { kind: TokenKind::QuotedIdent(text), offset: start });
                i = next;
            }
            b'[' => {
                let close = src[i + 1..].find(']').ok_or_else(|| SyntaxError::new(start, "unterminated bracket identifier"))?;
                let inner = &src[i + 1..i + 1 + close];
                let kind = match (mode, Placeholder::from_bracket(inner)) {
                    (LexMode::Skeleton, Some(p)) => TokenKind::Placeholder(p),
                    _ => TokenKind::QuotedIdent(inner.to_string()),
                };
                out.push(Token { kind, offset: start });
                i += close + 2;
            }
            b'?' => {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push(Token { kind: TokenKind::Param, offset: start });
            }
            b'0'..=b'9' => {
                i = number_end(bytes, i);
                out.push(Token { kind: TokenKind::Number(src[start..i].to_string()), offset: start });
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                i = number_end(bytes, i);
                out.push(Token { kind: TokenKind::Number(src[start..i].to_string()), offset: start });
            }
            _ if c == b'_' || c.is_ascii_alphabetic() || c >= 0x80 => {
                while i < bytes.len() && (bytes[i] == b'_' || bytes[i] == b'$' || bytes[i].is_ascii_alphanumeric() || bytes[i] >= 0x80) {
                    i += 1;
                }
                let word = &src[start..i];
                let kind =
                    if mode == LexMode::Skeleton && word == "_" { TokenKind::Placeholder(Placeholder::Blank) } else { TokenKind::Word(word.to_string()) };
                out.push(Token { kind, offset: start });
            }
            _ => {
                let sym = SYMBOLS
                    .iter()
                    .find(|s| src[i..].starts_with(**s))
                    .ok_or_else(|| SyntaxError::new(start, format!("unexpected character {:?}", c as char)))?;
                // `::` casts and similar foreign syntax are not SQLite
                if *sym == "." && bytes.get(i + 1) == Some(&b'.') {
                    return Err(SyntaxError::new(start, "unexpected '..'"));
                }
                out.push(Token { kind: TokenKind::Sym(sym), offset: start });
                i += sym.len();
            }
        }
    }
    Ok(out)
}

fn quoted(src: &str, start: usize, q: u8) -> Result<(String, usize), SyntaxError> {
    let bytes = src.as_bytes();
    let mut i = start + 1;
    let mut text = String::new();
    let mut seg = i;
    loop {
        if i >= bytes.len() {
            return Err(SyntaxError::new(start, "unterminated quoted token"));
        }
        if bytes[i] == q {
            if bytes.get(i + 1) == Some(&q) {
                text.push_str(&src[seg..=i]);
                i += 2;
                seg = i;
                continue;
            }
            text.push_str(&src[seg..i]);
            return Ok((text, i + 1));
        }
        i += 1;
    }
}

fn number_end(bytes: &[u8], mut i: usize) -> usize {
    if bytes[i] == b'0' && matches!(bytes.get(i + 1), Some(b'x' | b'X')) {
        i += 2;
        while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
            i += 1;
        }
        return i;
    }
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
        let mut j = i + 1;
        if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
            j += 1;
        }
        if j < bytes.len() && bytes[j].is_ascii_digit() {
            i = j;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
    }
    i
}
