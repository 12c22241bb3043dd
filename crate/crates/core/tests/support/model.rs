//! A deterministic stand-in for a chat model, answering prompts from gold queries.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use leafsql_core::agents::{verdict_line, FormulationRequest, GoldBook, GoldFormulator, SearchPhase, SkeletonFormulator};
use leafsql_core::bench::{load_dataset, load_profiles, BenchmarkItem};
use leafsql_core::gateway::{ChatRequest, ChatResponse, Transport, TransportError};
use leafsql_core::schema::DatabaseProfile;
use leafsql_core::skeleton::{refinement_check, GranularityLevel, Skeleton};

const DISTRACTOR: &str = "SELECT _ FROM _";

pub struct GoldModel {
    book: GoldBook,
    /// Prompt question to (db id, profile).
    questions: HashMap<String, (String, Arc<DatabaseProfile>)>,
}

impl GoldModel {
    pub fn new(items: &[BenchmarkItem], db_dir: &Path) -> GoldModel {
        let profiles = load_profiles(db_dir, items.iter().map(|i| i.db_id.as_str()));
        let mut book = GoldBook::new();
        let mut questions = HashMap::new();
        for item in items {
            let q = item.prompt_question();
            book.insert(&item.db_id, &q, &item.gold_sql).expect("gold parses");
            let profile = profiles[&item.db_id].clone().expect("profile loads");
            questions.insert(q, (item.db_id.clone(), profile));
        }
        GoldModel { book, questions }
    }

    pub fn load(dataset: &Path, db_dir: &Path) -> GoldModel {
        GoldModel::new(&load_dataset(dataset).expect("dataset"), db_dir)
    }

    fn answer(&self, prompt: &str) -> Result<String, String> {
        let question = section(prompt, "### Question\n").ok_or("prompt has no question")?;
        let (db_id, profile) = self.questions.get(question).ok_or_else(|| format!("unknown question: {question}"))?;
        let gold = self.book.get(db_id, question).expect("question is in the book");

        if prompt.contains("\n### Options\n") {
            return Ok("Option 1 matches the question.\nANSWER: 1".into());
        }
        if let Some(header) = prompt.find("\n### Candidate skeleton (") {
            let (level, text) = headed(&prompt[header + 1..], "### Candidate skeleton (")?;
            let candidate = Skeleton::parse(text, level).map_err(|e| e.to_string())?;
            let ok = refinement_check(&candidate, gold).unwrap_or(false);
            return Ok(format!(
                "Question analysis: {question}\nSkeleton analysis: {}\nAlignment analysis: {}\n{}",
                candidate.text(),
                if ok { "the structure fits" } else { "the structure does not fit" },
                verdict_line(ok)
            ));
        }
        if let Some(phase) = section(prompt, "### Phase\n") {
            let phase: SearchPhase = phase.parse()?;
            let parent = match prompt.find("\n### Parent skeleton (") {
                Some(i) => {
                    let (level, text) = headed(&prompt[i + 1..], "### Parent skeleton (")?;
                    Some(Skeleton::parse(text, level).map_err(|e| e.to_string())?)
                }
                None => None,
            };
            let req = FormulationRequest::new(profile, question, parent.as_ref(), phase, 3).map_err(|e| e.to_string())?;
            let mut lines = GoldFormulator(self.book.clone()).propose(&req).map_err(|e| e.to_string())?;
            if phase == SearchPhase::Base && lines.iter().all(|l| l != DISTRACTOR) {
                lines.push(DISTRACTOR.into());
            }
            if lines.is_empty() {
                return Ok("No deeper nesting is needed.".into());
            }
            return Ok(lines.iter().map(|l| format!("SKELETON: {l}\n")).collect());
        }
        if prompt.starts_with("You are a SQLite expert") {
            let sql = self.book.sql(db_id, question).expect("question is in the book");
            return Ok(format!("```sql\n{sql}\n```"));
        }
        Err("unrecognised prompt".into())
    }
}

/// Body of a `### ` section: the text after `header` up to the next blank-line-separated header.
fn section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.find(header)? + header.len();
    let rest = &prompt[start..];
    Some(rest[..rest.find("\n\n###").or_else(|| rest.find("\n###")).unwrap_or(rest.len())].trim_end())
}

/// Parses `### Name (<level>)\n<text>` at the start of `s`.
fn headed<'a>(s: &'a str, header: &str) -> Result<(GranularityLevel, &'a str), String> {
    let s = &s[header.len()..];
    let close = s.find(")\n").ok_or("unterminated level")?;
    let level = GranularityLevel::ALL.into_iter().find(|l| l.as_str() == &s[..close]).ok_or("unknown level")?;
    let body = &s[close + 2..];
    Ok((level, body[..body.find('\n').unwrap_or(body.len())].trim()))
}

impl Transport for GoldModel {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, TransportError> {
        let text = self.answer(&req.prompt).map_err(TransportError::Malformed)?;
        Ok(ChatResponse { prompt_tokens: req.prompt.len() as u64 / 4, completion_tokens: text.len() as u64 / 4, text })
    }
}
