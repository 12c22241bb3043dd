//! SQL generation guided by a skeleton.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentError, AgentReply, GoldBook};
use crate::gateway::{Gateway, Stage, UsageEntry};
use crate::prompt::{TemplateError, Templates};
use crate::schema::{render_mschema, DatabaseProfile};
use crate::skeleton::Skeleton;
use crate::sql::{tokenize, LexMode, TokenKind};

/// Writes SQL for a question, following the skeleton when one is given.
pub trait SqlGenerator: Send + Sync {
    fn write_sql(&self, schema: &DatabaseProfile, question: &str, skeleton: Option<&Skeleton>) -> Result<AgentReply, AgentError>;
}

impl<F> SqlGenerator for F
where
    F: Fn(&DatabaseProfile, &str, Option<&Skeleton>) -> Result<AgentReply, AgentError> + Send + Sync,
{
    fn write_sql(&self, schema: &DatabaseProfile, question: &str, skeleton: Option<&Skeleton>) -> Result<AgentReply, AgentError> {
        self(schema, question, skeleton)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SqlCandidate {
    pub sql: String,
    /// Search-tree node of the source skeleton; absent for zero-shot fallback candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skeleton: Option<Skeleton>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<UsageEntry>,
    /// Set when generation failed; such candidates are never executed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SqlCandidate {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

pub fn build_generation_prompt(templates: &Templates, schema: &DatabaseProfile, question: &str, skeleton: Option<&Skeleton>) -> Result<String, TemplateError> {
    let rendered = render_mschema(schema);
    match skeleton {
        Some(s) => templates.render("generate", &[("schema", rendered.trim_end()), ("question", question), ("skeleton", s.text())]),
        None => templates.render("generate_plain", &[("schema", rendered.trim_end()), ("question", question)]),
    }
}

/// Strips a Markdown code fence if present and returns the first complete statement.
pub fn extract_sql(reply: &str) -> Option<String> {
    let body = fenced_body(reply).unwrap_or(reply);
    let stmt = first_statement(body);
    let stmt = stmt.trim();
    (!stmt.is_empty()).then(|| stmt.to_string())
}

fn fenced_body(reply: &str) -> Option<&str> {
    let start = reply.find("```")?;
    let after = &reply[start + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    Some(body.find("```").map_or(body, |end| &body[..end]))
}

fn first_statement(text: &str) -> &str {
    // the lexer skips quoted text and comments, so a ';' symbol token is a real terminator
    match tokenize(text, LexMode::Sql) {
        Ok(tokens) => tokens.iter().find(|t| matches!(t.kind, TokenKind::Sym(";"))).map_or(text, |t| &text[..t.offset]),
        Err(_) => text.split(';').next().unwrap_or(text),
    }
}

/// Generates one candidate; backend failures yield a failed candidate.
pub fn generate_sql(schema: &DatabaseProfile, question: &str, node: Option<usize>, skeleton: Option<&Skeleton>, backend: &dyn SqlGenerator) -> SqlCandidate {
    let mut cand = SqlCandidate { sql: String::new(), node, skeleton: skeleton.cloned(), usage: None, failure: None };
    match backend.write_sql(schema, question, skeleton) {
        Ok(reply) => {
            cand.usage = reply.usage;
            match extract_sql(&reply.text) {
                Some(sql) => cand.sql = sql,
                None => cand.failure = Some("reply contains no SQL statement".into()),
            }
        }
        Err(e) => cand.failure = Some(e.to_string()),
    }
    cand
}

/// One candidate per (node id, skeleton), returned in ascending node order.
pub fn generate_all(
    schema: &DatabaseProfile,
    question: &str,
    skeletons: &[(usize, &Skeleton)],
    backend: &dyn SqlGenerator,
    workers: usize,
) -> Vec<SqlCandidate> {
    let mut sorted = skeletons.to_vec();
    sorted.sort_by_key(|(id, _)| *id);
    crate::par::par_map(&sorted, workers, |(id, sk)| generate_sql(schema, question, Some(*id), Some(sk), backend))
}

pub struct LlmGenerator {
    pub gateway: Arc<Gateway>,
    pub templates: Arc<Templates>,
}

impl SqlGenerator for LlmGenerator {
    fn write_sql(&self, schema: &DatabaseProfile, question: &str, skeleton: Option<&Skeleton>) -> Result<AgentReply, AgentError> {
        let prompt = build_generation_prompt(&self.templates, schema, question, skeleton)?;
        let reply = self.gateway.complete(Stage::Generation, &prompt)?;
        Ok(AgentReply { text: reply.text, usage: Some(reply.usage) })
    }
}

/// Returns the gold query regardless of the skeleton.
#[derive(Debug, Clone)]
pub struct GoldEchoGenerator(pub GoldBook);

impl SqlGenerator for GoldEchoGenerator {
    fn write_sql(&self, schema: &DatabaseProfile, question: &str, _: Option<&Skeleton>) -> Result<AgentReply, AgentError> {
        let sql = self.0.sql(&schema.db_id, question).ok_or_else(|| AgentError::Backend(format!("no gold query for question in {}", schema.db_id)))?;
        Ok(sql.to_string().into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRule {
    #[serde(default = "wildcard")]
    pub question: String,
    /// Skeleton text, `"*"` for any, or `""` for zero-shot requests.
    #[serde(default = "wildcard")]
    pub skeleton: String,
    #[serde(default)]
    pub reply: String,
    #[serde(default)]
    pub error: bool,
}

fn wildcard() -> String {
    crate::agents::WILDCARD.to_string()
}

/// Table-driven generator; the first matching rule wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedGenerator {
    pub rules: Vec<GenerateRule>,
}

impl ScriptedGenerator {
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Backend(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AgentError::Backend(format!("{}: {e}", path.display())))
    }
}

impl SqlGenerator for ScriptedGenerator {
    fn write_sql(&self, _: &DatabaseProfile, question: &str, skeleton: Option<&Skeleton>) -> Result<AgentReply, AgentError> {
        let sk = skeleton.map_or("", Skeleton::text);
        let hit = |pat: &str, v: &str| pat == crate::agents::WILDCARD || pat == v;
        match self.rules.iter().find(|r| hit(&r.question, question) && hit(&r.skeleton, sk)) {
            Some(r) if r.error => Err(AgentError::Backend("scripted generation failure".into())),
            Some(r) => Ok(r.reply.clone().into()),
            None => Err(AgentError::Backend(format!("no scripted SQL for question: {question}"))),
        }
    }
}
