//! Table-driven agents for tests and offline runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{verdict_line, AgentError, AgentReply, FormulationRequest, SearchPhase, SkeletonEvaluator, SkeletonFormulator};
use crate::schema::DatabaseProfile;
use crate::skeleton::Skeleton;

/// `"*"` in `question` or `parent` matches anything.
pub const WILDCARD: &str = "*";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulateRule {
    #[serde(default = "wildcard")]
    pub question: String,
    pub phase: SearchPhase,
    /// Parent skeleton text; omitted for the base phase.
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub children: Vec<String>,
    /// Simulates a backend failure.
    #[serde(default)]
    pub error: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateRule {
    #[serde(default = "wildcard")]
    pub question: String,
    #[serde(default = "wildcard")]
    pub skeleton: String,
    #[serde(default)]
    pub verdict: bool,
    /// Verbatim reply, overriding `verdict`.
    #[serde(default)]
    pub reply: Option<String>,
    #[serde(default)]
    pub error: bool,
}

fn wildcard() -> String {
    WILDCARD.to_string()
}

/// Scripted responses; the first matching rule wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptTable {
    #[serde(default)]
    pub formulate: Vec<FormulateRule>,
    #[serde(default)]
    pub evaluate: Vec<EvaluateRule>,
    /// Verdict for candidates no rule covers.
    #[serde(default)]
    pub default_verdict: bool,
}

impl ScriptTable {
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path).map_err(|e| AgentError::Backend(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| AgentError::Backend(format!("{}: {e}", path.display())))
    }

    fn matches(pattern: &str, value: &str) -> bool {
        pattern == WILDCARD || pattern == value
    }

    fn formulate_rule(&self, req: &FormulationRequest<'_>) -> Option<&FormulateRule> {
        self.formulate.iter().find(|r| {
            Self::matches(&r.question, req.question)
                && r.phase == req.phase
                && match (&r.parent, req.parent) {
                    (None, None) => true,
                    (Some(p), Some(parent)) => Self::matches(p, parent.text()),
                    (Some(p), None) => p == WILDCARD,
                    (None, Some(_)) => false,
                }
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedFormulator(pub ScriptTable);

impl SkeletonFormulator for ScriptedFormulator {
    fn propose(&self, req: &FormulationRequest<'_>) -> Result<Vec<String>, AgentError> {
        match self.0.formulate_rule(req) {
            Some(r) if r.error => Err(AgentError::Backend(format!("scripted failure at {} phase", req.phase))),
            Some(r) => Ok(r.children.clone()),
            None => Ok(Vec::new()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedEvaluator(pub ScriptTable);

impl SkeletonEvaluator for ScriptedEvaluator {
    fn judge(&self, _schema: &DatabaseProfile, question: &str, candidate: &Skeleton) -> Result<AgentReply, AgentError> {
        let rule = self.0.evaluate.iter().find(|r| ScriptTable::matches(&r.question, question) && ScriptTable::matches(&r.skeleton, candidate.text()));
        match rule {
            Some(r) if r.error => Err(AgentError::Backend("scripted evaluation failure".into())),
            Some(r) => Ok(r.reply.clone().unwrap_or_else(|| verdict_line(r.verdict)).into()),
            None => Ok(verdict_line(self.0.default_verdict).into()),
        }
    }
}
