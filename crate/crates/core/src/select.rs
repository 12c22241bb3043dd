//! Execution of SQL candidates, result grouping, majority vote and tie arbitration.

use std::cmp::Reverse;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{AgentError, AgentReply};
use crate::gateway::{Gateway, Stage, UsageEntry};
use crate::prompt::{TemplateError, Templates};
use crate::schema::{render_mschema, DatabaseProfile};
use crate::skeleton::GranularityLevel;
use crate::sql::{parse_statement, LexMode};
use crate::sqlgen::SqlCandidate;

/// Rows shown to the arbitrator per option.
pub const PREVIEW_ROWS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecutionLimits {
    pub timeout_ms: u64,
    pub max_rows: usize,
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        ExecutionLimits { timeout_ms: 30_000, max_rows: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Rows,
    Empty,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub rows: usize,
    /// Leading canonical rows, for arbitration prompts.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preview: Vec<Vec<String>>,
    /// Wall time; kept out of persisted records so they stay reproducible.
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ExecutionOutcome {
    pub fn error(message: impl Into<String>) -> Self {
        ExecutionOutcome { status: ExecStatus::Error, fingerprint: None, error: Some(message.into()), rows: 0, preview: Vec::new(), elapsed: Duration::ZERO }
    }

    pub fn is_valid(&self) -> bool {
        self.status == ExecStatus::Rows
    }
}

/// Canonical text of one cell. Integral reals collapse to integers; other reals keep 7 significant digits.
pub fn canonical_cell(v: ValueRef<'_>) -> String {
    match v {
        ValueRef::Null => "NULL".into(),
        ValueRef::Integer(i) => format!("i:{i}"),
        ValueRef::Real(r) => canonical_real(r),
        ValueRef::Text(t) => format!("t:{}", String::from_utf8_lossy(t)),
        ValueRef::Blob(b) => format!("b:{}", hex::encode(b)),
    }
}

fn canonical_real(r: f64) -> String {
    if r.is_finite() && r.fract() == 0.0 && r.abs() < 9.007_199_254_740_992e15 {
        return format!("i:{}", r as i64);
    }
    format!("r:{r:.6e}")
}

/// Digest of canonical rows: as a multiset, or as a sequence when `ordered`.
pub fn fingerprint(rows: &[Vec<String>], ordered: bool) -> String {
    let mut encoded: Vec<String> = rows.iter().map(|r| r.join("\u{1f}")).collect();
    if !ordered {
        encoded.sort_unstable();
    }
    let mut h = Sha256::new();
    h.update(if ordered { b"seq\n" } else { b"bag\n" });
    for row in &encoded {
        h.update(row.as_bytes());
        h.update(b"\x1e");
    }
    hex::encode(h.finalize())
}

/// Whether the outermost query carries ORDER BY; unparsable text counts as unordered.
pub fn has_outer_order_by(sql: &str) -> bool {
    parse_statement(sql.trim().trim_end_matches(';'), LexMode::Sql).is_ok_and(|q| !q.order_by.is_empty())
}

/// Runs `sql` read-only against the database at `db`. Never fails: problems become `ExecStatus::Error`.
pub fn execute_sql(db: &Path, sql: &str, limits: &ExecutionLimits) -> ExecutionOutcome {
    let started = Instant::now();
    let mut out = match run_rows(db, sql, limits) {
        Ok(rows) if rows.is_empty() => {
            ExecutionOutcome { status: ExecStatus::Empty, fingerprint: None, error: None, rows: 0, preview: Vec::new(), elapsed: Duration::ZERO }
        }
        Ok(rows) => ExecutionOutcome {
            status: ExecStatus::Rows,
            fingerprint: Some(fingerprint(&rows, has_outer_order_by(sql))),
            error: None,
            rows: rows.len(),
            preview: rows.into_iter().take(PREVIEW_ROWS).collect(),
            elapsed: Duration::ZERO,
        },
        Err(e) => ExecutionOutcome::error(e),
    };
    out.elapsed = started.elapsed();
    out
}

fn run_rows(db: &Path, sql: &str, limits: &ExecutionLimits) -> Result<Vec<Vec<String>>, String> {
    let conn = Connection::open_with_flags(db, OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX)
        .map_err(|e| format!("cannot open {}: {e}", db.display()))?;
    let deadline = Instant::now() + Duration::from_millis(limits.timeout_ms);
    conn.progress_handler(1000, Some(move || Instant::now() > deadline));
    let mut stmt = conn.prepare(sql).map_err(|e| e.to_string())?;
    let width = stmt.column_count();
    let mut rows = stmt.query([]).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    loop {
        let row = match rows.next() {
            Ok(Some(r)) => r,
            Ok(None) => break,
            Err(e) if Instant::now() > deadline => return Err(format!("timed out after {} ms ({e})", limits.timeout_ms)),
            Err(e) => return Err(e.to_string()),
        };
        if out.len() == limits.max_rows {
            return Err(format!("result exceeds {} rows", limits.max_rows));
        }
        out.push((0..width).map(|i| row.get_ref(i).map(canonical_cell).unwrap_or_else(|e| format!("?{e}"))).collect());
    }
    Ok(out)
}

/// Executes a candidate; failed generations are not run.
pub fn execute_candidate(profile: &DatabaseProfile, candidate: &SqlCandidate, limits: &ExecutionLimits) -> ExecutionOutcome {
    match &candidate.failure {
        Some(f) => ExecutionOutcome::error(format!("generation failed: {f}")),
        None => execute_sql(&profile.path, &candidate.sql, limits),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteGroup {
    pub fingerprint: String,
    /// Candidate indices, ascending.
    pub members: Vec<usize>,
    pub size: usize,
    pub representative: usize,
}

/// One tied result shown to the arbitrator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbitrationOption {
    pub sql: String,
    pub rows: usize,
    pub preview: Vec<Vec<String>>,
}

/// Picks one of the tied options; the reply must name it with `ANSWER: <n>` (1-based).
pub trait Arbitrator: Send + Sync {
    fn choose(&self, schema: &DatabaseProfile, question: &str, options: &[ArbitrationOption]) -> Result<AgentReply, AgentError>;
}

impl<F> Arbitrator for F
where
    F: Fn(&DatabaseProfile, &str, &[ArbitrationOption]) -> Result<AgentReply, AgentError> + Send + Sync,
{
    fn choose(&self, schema: &DatabaseProfile, question: &str, options: &[ArbitrationOption]) -> Result<AgentReply, AgentError> {
        self(schema, question, options)
    }
}

pub fn build_arbitration_prompt(
    templates: &Templates,
    schema: &DatabaseProfile,
    question: &str,
    options: &[ArbitrationOption],
) -> Result<String, TemplateError> {
    let mut listing = String::new();
    for (k, o) in options.iter().enumerate() {
        listing.push_str(&format!("Option {}:\nSQL: {}\nRows: {}\n", k + 1, o.sql, o.rows));
        for row in &o.preview {
            listing.push_str(&format!("  ({})\n", row.join(", ")));
        }
        listing.push('\n');
    }
    let rendered = render_mschema(schema);
    templates.render("arbitrate", &[("schema", rendered.trim_end()), ("question", question), ("options", listing.trim_end())])
}

/// Reads the last `ANSWER: <n>` marker.
pub fn parse_answer(text: &str) -> Option<usize> {
    const MARKER: &str = "ANSWER:";
    let i = text.rfind(MARKER)?;
    let digits: String = text[i + MARKER.len()..].trim_start().chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

pub struct LlmArbitrator {
    pub gateway: Arc<Gateway>,
    pub templates: Arc<Templates>,
}

impl Arbitrator for LlmArbitrator {
    fn choose(&self, schema: &DatabaseProfile, question: &str, options: &[ArbitrationOption]) -> Result<AgentReply, AgentError> {
        let prompt = build_arbitration_prompt(&self.templates, schema, question, options)?;
        let reply = self.gateway.complete(Stage::Arbitration, &prompt)?;
        Ok(AgentReply { text: reply.text, usage: Some(reply.usage) })
    }
}

/// Always answers with the same 1-based option number.
#[derive(Debug, Clone, Copy)]
pub struct FixedArbitrator(pub usize);

impl Arbitrator for FixedArbitrator {
    fn choose(&self, _: &DatabaseProfile, _: &str, _: &[ArbitrationOption]) -> Result<AgentReply, AgentError> {
        Ok(format!("ANSWER: {}", self.0).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRule {
    /// A unique largest group.
    Majority,
    /// A tie resolved by the arbitrator.
    Arbitrated,
    /// A tie resolved deterministically because arbitration was unavailable or failed.
    TieFallback,
    /// No candidate produced rows.
    NoValidResults,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbitrationTranscript {
    /// Indices into `DecisionTrace::groups`, in option order.
    pub tied_groups: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<UsageEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub rule: DecisionRule,
    pub groups: Vec<VoteGroup>,
    pub max_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chosen_fingerprint: Option<String>,
    pub chosen: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbitration: Option<ArbitrationTranscript>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("no SQL candidates to select from")]
    NoCandidates,
    #[error("{candidates} candidates but {outcomes} execution outcomes")]
    Mismatch { candidates: usize, outcomes: usize },
}

fn granularity(c: &SqlCandidate) -> Option<GranularityLevel> {
    c.skeleton.as_ref().map(|s| s.level())
}

/// Best of `pool` by skeleton granularity, then lexicographically smallest SQL, then index.
fn preferred(candidates: &[SqlCandidate], pool: impl IntoIterator<Item = usize>) -> Option<usize> {
    pool.into_iter().min_by(|&a, &b| {
        let (ca, cb) = (&candidates[a], &candidates[b]);
        (Reverse(granularity(ca)), &ca.sql, a).cmp(&(Reverse(granularity(cb)), &cb.sql, b))
    })
}

/// Groups candidates that produced rows by fingerprint, in order of first member.
pub fn group_outcomes(candidates: &[SqlCandidate], outcomes: &[ExecutionOutcome]) -> Vec<VoteGroup> {
    let mut groups: Vec<VoteGroup> = Vec::new();
    for (i, o) in outcomes.iter().enumerate() {
        let Some(fp) = o.fingerprint.as_ref().filter(|_| o.is_valid()) else { continue };
        match groups.iter_mut().find(|g| &g.fingerprint == fp) {
            Some(g) => g.members.push(i),
            None => groups.push(VoteGroup { fingerprint: fp.clone(), members: vec![i], size: 0, representative: i }),
        }
    }
    for g in &mut groups {
        g.size = g.members.len();
        g.representative = preferred(candidates, g.members.iter().copied()).expect("groups are non-empty");
    }
    groups
}

/// Majority vote over execution results, with arbitration among tied groups.
pub fn select_final(
    schema: &DatabaseProfile,
    question: &str,
    candidates: &[SqlCandidate],
    outcomes: &[ExecutionOutcome],
    arbitrator: Option<&dyn Arbitrator>,
) -> Result<DecisionTrace, SelectError> {
    if candidates.is_empty() {
        return Err(SelectError::NoCandidates);
    }
    if candidates.len() != outcomes.len() {
        return Err(SelectError::Mismatch { candidates: candidates.len(), outcomes: outcomes.len() });
    }
    let groups = group_outcomes(candidates, outcomes);
    let max_size = groups.iter().map(|g| g.size).max().unwrap_or(0);
    if groups.is_empty() {
        let runnable = (0..candidates.len()).filter(|i| outcomes[*i].status != ExecStatus::Error);
        let generated = (0..candidates.len()).filter(|i| !candidates[*i].failed());
        let chosen = preferred(candidates, runnable)
            .or_else(|| preferred(candidates, generated))
            .or_else(|| preferred(candidates, 0..candidates.len()))
            .expect("candidates are non-empty");
        return Ok(DecisionTrace { rule: DecisionRule::NoValidResults, groups, max_size, chosen_fingerprint: None, chosen, arbitration: None });
    }
    let tied: Vec<usize> = (0..groups.len()).filter(|g| groups[*g].size == max_size).collect();
    let (rule, group, arbitration) =
        if tied.len() == 1 { (DecisionRule::Majority, tied[0], None) } else { arbitrate(schema, question, candidates, outcomes, &groups, tied, arbitrator) };
    Ok(DecisionTrace { rule, chosen_fingerprint: Some(groups[group].fingerprint.clone()), chosen: groups[group].representative, groups, max_size, arbitration })
}

fn arbitrate(
    schema: &DatabaseProfile,
    question: &str,
    candidates: &[SqlCandidate],
    outcomes: &[ExecutionOutcome],
    groups: &[VoteGroup],
    tied: Vec<usize>,
    arbitrator: Option<&dyn Arbitrator>,
) -> (DecisionRule, usize, Option<ArbitrationTranscript>) {
    let fallback = || {
        let rep = preferred(candidates, tied.iter().map(|g| groups[*g].representative)).expect("ties involve two groups");
        tied.iter().copied().find(|g| groups[*g].representative == rep).expect("representative belongs to a tied group")
    };
    let mut transcript = ArbitrationTranscript { tied_groups: tied.clone(), reply: None, choice: None, error: None, usage: None };
    let Some(arb) = arbitrator else {
        transcript.error = Some("no arbitrator configured".into());
        return (DecisionRule::TieFallback, fallback(), Some(transcript));
    };
    let options: Vec<ArbitrationOption> = tied
        .iter()
        .map(|g| {
            let rep = groups[*g].representative;
            ArbitrationOption { sql: candidates[rep].sql.clone(), rows: outcomes[rep].rows, preview: outcomes[rep].preview.clone() }
        })
        .collect();
    match arb.choose(schema, question, &options) {
        Ok(reply) => {
            transcript.usage = reply.usage;
            let choice = parse_answer(&reply.text);
            transcript.reply = Some(reply.text);
            transcript.choice = choice;
            match choice {
                Some(n) if (1..=tied.len()).contains(&n) => (DecisionRule::Arbitrated, tied[n - 1], Some(transcript)),
                _ => {
                    transcript.error = Some("reply names no valid option".into());
                    (DecisionRule::TieFallback, fallback(), Some(transcript))
                }
            }
        }
        Err(e) => {
            transcript.error = Some(e.to_string());
            (DecisionRule::TieFallback, fallback(), Some(transcript))
        }
    }
}
