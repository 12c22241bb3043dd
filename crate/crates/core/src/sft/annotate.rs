//! Three-stage analyses explaining a known label.

use std::sync::Arc;

use super::CorruptionRecipe;
use crate::agents::{AgentError, AgentReply};
use crate::gateway::{Gateway, Stage};
use crate::prompt::{TemplateError, Templates};
use crate::skeleton::Skeleton;

pub struct AnnotationRequest<'a> {
    pub schema_text: &'a str,
    pub question: &'a str,
    pub gold: &'a Skeleton,
    pub candidate: &'a Skeleton,
    pub label: bool,
    pub recipe: Option<&'a CorruptionRecipe>,
}

/// Writes the analysis for one example; the reply must end with the label's verdict line.
pub trait Annotator: Send + Sync {
    fn annotate(&self, req: &AnnotationRequest<'_>) -> Result<AgentReply, AgentError>;
}

pub fn label_text(label: bool) -> &'static str {
    if label {
        "True"
    } else {
        "False"
    }
}

pub fn build_annotation_prompt(templates: &Templates, req: &AnnotationRequest<'_>) -> Result<String, TemplateError> {
    templates.render(
        "annotate",
        &[
            ("schema", req.schema_text.trim_end()),
            ("question", req.question),
            ("level", req.candidate.level().as_str()),
            ("skeleton", req.candidate.text()),
            ("label", label_text(req.label)),
        ],
    )
}

pub struct LlmAnnotator {
    pub gateway: Arc<Gateway>,
    pub templates: Arc<Templates>,
}

impl Annotator for LlmAnnotator {
    fn annotate(&self, req: &AnnotationRequest<'_>) -> Result<AgentReply, AgentError> {
        let prompt = build_annotation_prompt(&self.templates, req)?;
        let reply = self.gateway.complete(Stage::Annotation, &prompt)?;
        Ok(AgentReply { text: reply.text, usage: Some(reply.usage) })
    }
}

/// Structural features read off a skeleton's canonical tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Features {
    parts: Vec<(&'static str, usize)>,
    depth: usize,
}

const FEATURES: [(&str, &[&str]); 9] = [
    ("WHERE filter", &["WHERE"]),
    ("GROUP BY grouping", &["GROUP"]),
    ("HAVING condition", &["HAVING"]),
    ("ORDER BY sort", &["ORDER"]),
    ("LIMIT", &["LIMIT"]),
    ("set operation", &["UNION", "INTERSECT", "EXCEPT"]),
    ("explicit join", &["JOIN"]),
    ("aggregate call", &["[agg]"]),
    ("DISTINCT", &["DISTINCT"]),
];

impl Features {
    fn of(s: &Skeleton) -> Self {
        let tokens: Vec<&str> = s.text().split_whitespace().collect();
        let parts = FEATURES.iter().map(|(name, words)| (*name, tokens.iter().filter(|t| words.contains(t)).count())).filter(|(_, n)| *n > 0).collect();
        Features { parts, depth: s.nesting_depth() }
    }

    fn count(&self, name: &str) -> usize {
        self.parts.iter().find(|(n, _)| *n == name).map_or(0, |(_, c)| *c)
    }

    fn describe(&self) -> String {
        let mut items: Vec<String> = self.parts.iter().map(|(n, c)| if *c == 1 { format!("one {n}") } else { format!("{c} x {n}") }).collect();
        items.push(match self.depth {
            0 => "no nested query".to_string(),
            d => format!("subqueries nested {d} level(s) deep"),
        });
        items.join(", ")
    }
}

/// Deterministic slot-filled annotations, usable without model access.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateAnnotator;

impl Annotator for TemplateAnnotator {
    fn annotate(&self, req: &AnnotationRequest<'_>) -> Result<AgentReply, AgentError> {
        let (g, c) = (Features::of(req.gold), Features::of(req.candidate));
        let question = format!("The question \"{}\" calls for a query with {}.", req.question.trim(), g.describe());
        let skeleton = format!("The {} skeleton `{}` has {}.", req.candidate.level(), req.candidate.text(), c.describe());
        let alignment = if req.label {
            "Every structure the question calls for appears in the skeleton, in the right place, and nothing extra is added.".to_string()
        } else {
            let mut diffs = Vec::new();
            for (name, _) in FEATURES {
                let (want, have) = (g.count(name), c.count(name));
                if have < want {
                    diffs.push(format!("it is missing {} {name}", want - have));
                } else if have > want {
                    diffs.push(format!("it adds {} {name} the question does not need", have - want));
                }
            }
            if g.depth != c.depth {
                diffs.push(format!("its nesting depth is {} where {} is needed", c.depth, g.depth));
            }
            if diffs.is_empty() {
                let ops: Vec<&str> = req.recipe.map_or_else(Vec::new, |r| r.steps.iter().map(|s| s.op.as_str()).collect());
                diffs.push(format!(
                    "its clause contents do not fit the question ({})",
                    if ops.is_empty() { "structure differs".into() } else { ops.join(", ") }
                ));
            }
            format!("The skeleton does not answer the question: {}.", diffs.join("; "))
        };
        Ok(format!("Question analysis: {question}\nSkeleton analysis: {skeleton}\nAlignment analysis: {alignment}\nVERDICT: {}", label_text(req.label)).into())
    }
}
