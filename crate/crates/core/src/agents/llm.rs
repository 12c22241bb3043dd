//! Agents backed by a chat-completion gateway.

use std::sync::Arc;

use super::{build_evaluation_prompt, build_formulation_prompt, AgentError, AgentReply, FormulationRequest, SkeletonEvaluator, SkeletonFormulator};
use crate::gateway::{Gateway, Stage};
use crate::prompt::Templates;
use crate::schema::DatabaseProfile;
use crate::skeleton::Skeleton;

const PREFIX: &str = "SKELETON:";

/// Extracts `SKELETON: ...` lines; falls back to the lines of the first code block.
pub fn parse_skeleton_lines(reply: &str) -> Vec<String> {
    let tagged: Vec<String> = reply
        .lines()
        .filter_map(|l| {
            let l = l.trim().trim_start_matches(['-', '*', ' ']);
            let head = l.get(..PREFIX.len())?;
            head.eq_ignore_ascii_case(PREFIX).then(|| l[PREFIX.len()..].trim().trim_matches('`').trim().to_string())
        })
        .filter(|s| !s.is_empty())
        .collect();
    if !tagged.is_empty() {
        return tagged;
    }
    let mut in_block = false;
    let mut out = Vec::new();
    for line in reply.lines() {
        if line.trim_start().starts_with("```") {
            if in_block {
                break;
            }
            in_block = true;
            continue;
        }
        if in_block && !line.trim().is_empty() {
            out.push(line.trim().to_string());
        }
    }
    out
}

pub struct LlmFormulator {
    pub gateway: Arc<Gateway>,
    pub templates: Arc<Templates>,
}

impl SkeletonFormulator for LlmFormulator {
    fn propose(&self, req: &FormulationRequest<'_>) -> Result<Vec<String>, AgentError> {
        let prompt = build_formulation_prompt(&self.templates, req)?;
        let reply = self.gateway.complete(Stage::Formulation, &prompt)?;
        Ok(parse_skeleton_lines(&reply.text))
    }
}

pub struct LlmEvaluator {
    pub gateway: Arc<Gateway>,
    pub templates: Arc<Templates>,
}

impl SkeletonEvaluator for LlmEvaluator {
    fn judge(&self, schema: &DatabaseProfile, question: &str, candidate: &Skeleton) -> Result<AgentReply, AgentError> {
        let prompt = build_evaluation_prompt(&self.templates, schema, question, candidate)?;
        let reply = self.gateway.complete(Stage::Evaluation, &prompt)?;
        Ok(AgentReply { text: reply.text, usage: Some(reply.usage) })
    }
}
