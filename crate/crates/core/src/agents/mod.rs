//! Skeleton formulation and evaluation agents.

mod gold;
mod llm;
mod scripted;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, UsageEntry};
use crate::normalize::{normalize, normalize_joinless, NormalizationReport};
use crate::prompt::{TemplateError, Templates};
use crate::schema::{render_mschema, DatabaseProfile};
use crate::skeleton::{GranularityLevel, Skeleton};

pub use gold::{GoldBook, GoldEvaluator, GoldFormulator};
pub use llm::{parse_skeleton_lines, LlmEvaluator, LlmFormulator};
pub use scripted::{ScriptTable, ScriptedEvaluator, ScriptedFormulator, WILDCARD};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPhase {
    #[default]
    Base,
    Expanded,
    DetailedStep1,
    DetailedStep2,
}

impl SearchPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            SearchPhase::Base => "base",
            SearchPhase::Expanded => "expanded",
            SearchPhase::DetailedStep1 => "detailed_step1",
            SearchPhase::DetailedStep2 => "detailed_step2",
        }
    }

    pub fn target_level(self) -> GranularityLevel {
        match self {
            SearchPhase::Base => GranularityLevel::Base,
            SearchPhase::Expanded => GranularityLevel::Expanded,
            SearchPhase::DetailedStep1 | SearchPhase::DetailedStep2 => GranularityLevel::Detailed,
        }
    }

    /// Normalizes agent output to this phase's target form.
    pub fn normalize(self, text: &str) -> NormalizationReport {
        match self {
            SearchPhase::DetailedStep1 => normalize_joinless(text),
            other => normalize(text, other.target_level()),
        }
    }

    fn template(self) -> &'static str {
        match self {
            SearchPhase::Base => "phase_base",
            SearchPhase::Expanded => "phase_expanded",
            SearchPhase::DetailedStep1 => "phase_detailed_step1",
            SearchPhase::DetailedStep2 => "phase_detailed_step2",
        }
    }
}

impl fmt::Display for SearchPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SearchPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "base" => Ok(SearchPhase::Base),
            "expanded" => Ok(SearchPhase::Expanded),
            "detailed_step1" => Ok(SearchPhase::DetailedStep1),
            "detailed_step2" => Ok(SearchPhase::DetailedStep2),
            other => Err(format!("unknown search phase '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FormulationRequest<'a> {
    pub schema: &'a DatabaseProfile,
    pub question: &'a str,
    pub parent: Option<&'a Skeleton>,
    pub phase: SearchPhase,
    pub max_children: usize,
}

impl<'a> FormulationRequest<'a> {
    pub fn new(
        schema: &'a DatabaseProfile,
        question: &'a str,
        parent: Option<&'a Skeleton>,
        phase: SearchPhase,
        max_children: usize,
    ) -> Result<Self, AgentError> {
        if parent.is_some() == (phase == SearchPhase::Base) {
            return Err(AgentError::InvalidRequest("a parent skeleton is required exactly when the phase is not base".into()));
        }
        if max_children == 0 {
            return Err(AgentError::InvalidRequest("max_children must be at least 1".into()));
        }
        Ok(FormulationRequest { schema, question, parent, phase, max_children })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("backend error: {0}")]
    Backend(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// The three reasoning stages of an evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub question: String,
    pub skeleton: String,
    pub alignment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationVerdict {
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<Analysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<UsageEntry>,
    /// Why the verdict was forced to false, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

/// Raw backend reply with optional usage accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub text: String,
    pub usage: Option<UsageEntry>,
}

impl From<String> for AgentReply {
    fn from(text: String) -> Self {
        AgentReply { text, usage: None }
    }
}

/// Proposes child skeleton texts for a node.
pub trait SkeletonFormulator: Send + Sync {
    fn propose(&self, req: &FormulationRequest<'_>) -> Result<Vec<String>, AgentError>;
}

/// Judges a candidate skeleton; the reply must end with a verdict marker.
pub trait SkeletonEvaluator: Send + Sync {
    fn judge(&self, schema: &DatabaseProfile, question: &str, candidate: &Skeleton) -> Result<AgentReply, AgentError>;
}

impl<F> SkeletonFormulator for F
where
    F: Fn(&FormulationRequest<'_>) -> Result<Vec<String>, AgentError> + Send + Sync,
{
    fn propose(&self, req: &FormulationRequest<'_>) -> Result<Vec<String>, AgentError> {
        self(req)
    }
}

impl<F> SkeletonEvaluator for F
where
    F: Fn(&DatabaseProfile, &str, &Skeleton) -> Result<AgentReply, AgentError> + Send + Sync,
{
    fn judge(&self, schema: &DatabaseProfile, question: &str, candidate: &Skeleton) -> Result<AgentReply, AgentError> {
        self(schema, question, candidate)
    }
}

/// Evaluator returning the same verdict for every candidate.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEvaluator(pub bool);

impl SkeletonEvaluator for ConstantEvaluator {
    fn judge(&self, _: &DatabaseProfile, _: &str, _: &Skeleton) -> Result<AgentReply, AgentError> {
        Ok(verdict_line(self.0).into())
    }
}

pub fn verdict_line(v: bool) -> String {
    format!("VERDICT: {}", if v { "True" } else { "False" })
}

/// Asks the backend for children and keeps at most `max_children` of them.
pub fn formulate(req: &FormulationRequest<'_>, backend: &dyn SkeletonFormulator) -> Result<Vec<String>, AgentError> {
    let mut texts = backend.propose(req)?;
    texts.truncate(req.max_children);
    Ok(texts)
}

/// Never fails: backend errors and unparsable replies yield a false verdict.
pub fn evaluate(schema: &DatabaseProfile, question: &str, candidate: &Skeleton, backend: &dyn SkeletonEvaluator) -> EvaluationVerdict {
    match backend.judge(schema, question, candidate) {
        Ok(reply) => {
            let (verdict, analysis) = parse_verdict(&reply.text);
            EvaluationVerdict {
                verdict: verdict.unwrap_or(false),
                analysis,
                usage: reply.usage,
                failure: verdict.is_none().then(|| "no verdict marker in reply".to_string()),
            }
        }
        Err(e) => EvaluationVerdict { verdict: false, analysis: None, usage: None, failure: Some(e.to_string()) },
    }
}

const MARKER: &str = "VERDICT:";

/// Reads the last `VERDICT: True|False` marker and the optional three-stage analysis.
pub fn parse_verdict(text: &str) -> (Option<bool>, Option<Analysis>) {
    let verdict = text.rfind(MARKER).and_then(|i| {
        let word: String = text[i + MARKER.len()..].trim_start().chars().take_while(|c| c.is_ascii_alphabetic()).collect();
        match word.to_ascii_lowercase().as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        }
    });
    (verdict, parse_analysis(text))
}

fn parse_analysis(text: &str) -> Option<Analysis> {
    const LABELS: [&str; 3] = ["Question analysis:", "Skeleton analysis:", "Alignment analysis:"];
    let starts: Vec<usize> = LABELS.iter().map(|l| text.find(l)).collect::<Option<_>>()?;
    if !(starts[0] < starts[1] && starts[1] < starts[2]) {
        return None;
    }
    let end = text[starts[2]..].rfind(MARKER).map_or(text.len(), |i| starts[2] + i);
    let section = |k: usize, stop: usize| text[starts[k] + LABELS[k].len()..stop].trim().to_string();
    Some(Analysis { question: section(0, starts[1]), skeleton: section(1, starts[2]), alignment: section(2, end) })
}

pub fn build_formulation_prompt(templates: &Templates, req: &FormulationRequest<'_>) -> Result<String, TemplateError> {
    let schema = render_mschema(req.schema);
    let parent_section = match req.parent {
        Some(p) => templates.render("parent", &[("level", p.level().as_str()), ("parent", p.text())])?,
        None => String::new(),
    };
    let instructions = templates.raw(req.phase.template())?.trim_end().to_string();
    let m = req.max_children.to_string();
    templates.render(
        "formulate",
        &[
            ("schema", schema.trim_end()),
            ("question", req.question),
            ("phase", req.phase.as_str()),
            ("parent_section", &parent_section),
            ("instructions", &instructions),
            ("max_children", &m),
        ],
    )
}

pub fn build_evaluation_prompt(templates: &Templates, schema: &DatabaseProfile, question: &str, skeleton: &Skeleton) -> Result<String, TemplateError> {
    let rendered = render_mschema(schema);
    templates
        .render("evaluate", &[("schema", rendered.trim_end()), ("question", question), ("level", skeleton.level().as_str()), ("skeleton", skeleton.text())])
}
