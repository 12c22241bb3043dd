//! End-to-end benchmark harness: search, generate, execute, select, score.

mod config;
mod report;


use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agents::{
    ConstantEvaluator, GoldBook, GoldEvaluator, GoldFormulator, LlmEvaluator, LlmFormulator, ScriptTable, ScriptedEvaluator, ScriptedFormulator,
    SkeletonEvaluator, SkeletonFormulator,
};
use crate::gateway::{Gateway, HttpTransport, Transport};
use crate::par::par_map;
use crate::prompt::Templates;
use crate::schema::DatabaseProfile;
use crate::search::{run_search, SearchError, SearchOutcome};
use crate::select::{execute_candidate, execute_sql, select_final, Arbitrator, DecisionTrace, ExecutionOutcome, FixedArbitrator, LlmArbitrator, SelectError};
use crate::sft::{Annotator, LlmAnnotator, TemplateAnnotator};
use crate::skeleton::Skeleton;
use crate::sqlgen::{generate_all, generate_sql, GoldEchoGenerator, LlmGenerator, ScriptedGenerator, SqlCandidate, SqlGenerator};

pub use config::{AgentConfig, ArbitratorKind, BenchConfig, EvaluatorKind, FormulatorKind, GeneratorKind, PathsConfig, RunConfig};
pub use report::{stats, summarize, DecisionSummary, DifficultyStats, ItemFlag, ItemTrace, LevelShares, RunReport, UNSPECIFIED};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl BenchError {
    /// Configuration and input errors, as opposed to runtime failures.
    pub fn is_usage(&self) -> bool {
        matches!(self, BenchError::Config(_) | BenchError::Dataset(_))
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
        move |source| BenchError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<String>,
    pub db_id: String,
    pub gold_sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<String>,
}

impl BenchmarkItem {
    /// The question as the agents see it, with any evidence appended as a hint.
    pub fn prompt_question(&self) -> String {
        match self.evidence.as_deref().map(str::trim) {
            Some(e) if !e.is_empty() => format!("{}\nHint: {e}", self.question),
            _ => self.question.clone(),
        }
    }
}

fn field<'a>(rec: &'a serde_json::Map<String, Value>, names: &[&str]) -> Option<&'a str> {
    names.iter().find_map(|n| rec.get(*n).and_then(Value::as_str))
}

/// Reads a Spider- or BIRD-style JSON array of question records.
pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkItem>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
    let records: Vec<serde_json::Map<String, Value>> = serde_json::from_str(&text).map_err(|e| BenchError::Dataset(format!("{}: {e}", path.display())))?;
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let missing = |what: &str| BenchError::Dataset(format!("{}: record {i} has no {what}", path.display()));
            let id = match rec.get("question_id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => i.to_string(),
            };
            Ok(BenchmarkItem {
                id,
                question: field(rec, &["question"]).ok_or_else(|| missing("question"))?.to_string(),
                evidence: field(rec, &["evidence"]).map(str::to_string),
                db_id: field(rec, &["db_id"]).ok_or_else(|| missing("db_id"))?.to_string(),
                gold_sql: field(rec, &["SQL", "query", "sql"]).ok_or_else(|| missing("gold SQL"))?.to_string(),
                difficulty: field(rec, &["difficulty", "hardness"]).map(str::to_string),
            })
        })
        .collect()
}

/// `<db_dir>/<db_id>/<db_id>.sqlite`
pub fn database_path(db_dir: &Path, db_id: &str) -> PathBuf {
    db_dir.join(db_id).join(format!("{db_id}.sqlite"))
}

/// Loads each distinct database once; failures are kept per id.
pub fn load_profiles<'a>(db_dir: &Path, db_ids: impl IntoIterator<Item = &'a str>) -> BTreeMap<String, Result<Arc<DatabaseProfile>, String>> {
    let mut out = BTreeMap::new();
    for id in db_ids {
        if !out.contains_key(id) {
            let profile = DatabaseProfile::load(id, &database_path(db_dir, id)).map(Arc::new).map_err(|e| e.to_string());
            out.insert(id.to_string(), profile);
        }
    }
    out
}

/// Builds the gold book for the given items, reporting the ids whose gold query does not parse.
pub fn gold_book(items: &[BenchmarkItem]) -> (GoldBook, Vec<String>) {
    let mut book = GoldBook::new();
    let mut bad = Vec::new();
    for item in items {
        if book.insert(&item.db_id, &item.prompt_question(), &item.gold_sql).is_err() {
            bad.push(item.id.clone());
        }
    }
    (book, bad)
}

/// Traces in dataset order and the report computed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub traces: Vec<ItemTrace>,
    pub report: RunReport,
}

impl RunResult {
    pub fn traces_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&serde_json::to_string(t).expect("trace serializes"));
            out.push('\n');
        }
        out
    }

    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes `report.json` and `traces.jsonl` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<(), BenchError> {
        std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        write_atomic(&dir.join("traces.jsonl"), &self.traces_jsonl())?;
        write_atomic(&dir.join("report.json"), &self.report_json())
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), BenchError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(BenchError::io(&tmp))?;
    std::fs::rename(&tmp, path).map_err(BenchError::io(path))
}

/// Parses `traces.jsonl` back into item traces.
pub fn read_traces(path: &Path) -> Result<Vec<ItemTrace>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(BenchError::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| BenchError::Dataset(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    digest: String,
    trace: ItemTrace,
}

/// Configured pipeline, ready to run items.
pub struct Bench {
    config: BenchConfig,
    gateway: Option<Gateway>,
    templates: Arc<Templates>,
    script: Option<ScriptTable>,
    generator_script: Option<ScriptedGenerator>,
}

impl Bench {
    pub fn new(config: BenchConfig) -> Result<Self, BenchError> {
        Self::with_transport(config, Arc::new(HttpTransport))
    }

    /// Like [`Bench::new`] but sends model calls through `transport`.
    pub fn with_transport(config: BenchConfig, transport: Arc<dyn Transport>) -> Result<Self, BenchError> {
        config.validate()?;
        let gateway = if config.agents.uses_gateway() {
            Some(Gateway::with_transport(config.gateway.clone(), transport).map_err(|e| BenchError::Config(e.to_string()))?)
        } else {
            None
        };
        let templates = match &config.agents.templates {
            Some(dir) => Templates::with_overrides(dir).map_err(|e| BenchError::Config(e.to_string()))?,
            None => Templates::builtin(),
        };
        let script = config.agents.script.as_deref().map(ScriptTable::load).transpose().map_err(|e| BenchError::Config(e.to_string()))?;
        let generator_script =
            config.agents.generator_script.as_deref().map(ScriptedGenerator::load).transpose().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(Bench { config, gateway, templates: Arc::new(templates), script, generator_script })
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn gateway(&self) -> Option<&Gateway> {
        self.gateway.as_ref()
    }

    fn formulator(&self, gw: &Option<Arc<Gateway>>, gold: &GoldBook) -> Box<dyn SkeletonFormulator> {
        match self.config.agents.formulator {
            FormulatorKind::Llm => Box::new(LlmFormulator { gateway: gw.clone().expect("gateway"), templates: self.templates.clone() }),
            FormulatorKind::Gold => Box::new(GoldFormulator(gold.clone())),
            FormulatorKind::Scripted => Box::new(ScriptedFormulator(self.script.clone().expect("script"))),
        }
    }

    fn evaluator(&self, gw: &Option<Arc<Gateway>>, gold: &GoldBook) -> Box<dyn SkeletonEvaluator> {
        match self.config.agents.evaluator {
            EvaluatorKind::Llm => Box::new(LlmEvaluator { gateway: gw.clone().expect("gateway"), templates: self.templates.clone() }),
            EvaluatorKind::Gold => Box::new(GoldEvaluator(gold.clone())),
            EvaluatorKind::Scripted => Box::new(ScriptedEvaluator(self.script.clone().expect("script"))),
            EvaluatorKind::AcceptAll => Box::new(ConstantEvaluator(true)),
            EvaluatorKind::RejectAll => Box::new(ConstantEvaluator(false)),
        }
    }

    fn generator(&self, gw: &Option<Arc<Gateway>>, gold: &GoldBook) -> Box<dyn SqlGenerator> {
        match self.config.agents.generator {
            GeneratorKind::Llm => Box::new(LlmGenerator { gateway: gw.clone().expect("gateway"), templates: self.templates.clone() }),
            GeneratorKind::GoldEcho => Box::new(GoldEchoGenerator(gold.clone())),
            GeneratorKind::Scripted => Box::new(self.generator_script.clone().expect("generator script")),
        }
    }

    fn arbitrator(&self, gw: &Option<Arc<Gateway>>) -> Option<Box<dyn Arbitrator>> {
        match self.config.agents.arbitrator {
            ArbitratorKind::Llm => Some(Box::new(LlmArbitrator { gateway: gw.clone().expect("gateway"), templates: self.templates.clone() })),
            ArbitratorKind::First => Some(Box::new(FixedArbitrator(1))),
            ArbitratorKind::None => None,
        }
    }

    /// Annotator for SFT builds: the model when `agents.llm_annotator` is set, templates otherwise.
    pub fn annotator(&self) -> Box<dyn Annotator> {
        match self.shared_gateway() {
            Some(gateway) if self.config.agents.llm_annotator => Box::new(LlmAnnotator { gateway, templates: self.templates.clone() }),
            _ => Box::new(TemplateAnnotator),
        }
    }

    fn shared_gateway(&self) -> Option<Arc<Gateway>> {
        self.gateway.clone().map(Arc::new)
    }

    /// Search stage alone, with the configured agents.
    pub fn search(&self, profile: &DatabaseProfile, question: &str, gold: &GoldBook) -> Result<SearchOutcome, SearchError> {
        let gw = self.shared_gateway();
        run_search(profile, question, self.formulator(&gw, gold).as_ref(), self.evaluator(&gw, gold).as_ref(), &self.config.search)
    }

    /// Generation stage alone; no skeleton asks for a zero-shot query.
    pub fn generate(&self, profile: &DatabaseProfile, question: &str, skeleton: Option<&Skeleton>, gold: &GoldBook) -> SqlCandidate {
        generate_sql(profile, question, None, skeleton, self.generator(&self.shared_gateway(), gold).as_ref())
    }

    /// Executes the candidates and votes.
    pub fn select(
        &self,
        profile: &DatabaseProfile,
        question: &str,
        candidates: &[SqlCandidate],
    ) -> Result<(Vec<ExecutionOutcome>, DecisionTrace), SelectError> {
        let limits = &self.config.limits;
        let outcomes = par_map(candidates, self.config.run.workers, |c: &SqlCandidate| execute_candidate(profile, c, limits));
        let arbitrator = self.arbitrator(&self.shared_gateway());
        let trace = select_final(profile, question, candidates, &outcomes, arbitrator.as_deref())?;
        Ok((outcomes, trace))
    }

    /// Runs one item end to end; never fails, problems are recorded in the trace.
    pub fn run_item(&self, item: &BenchmarkItem, profile: Result<&Arc<DatabaseProfile>, &str>, gold: &GoldBook) -> ItemTrace {
        let question = item.prompt_question();
        let mut trace = ItemTrace::new(item);
        let profile = match profile {
            Ok(p) => p,
            Err(e) => {
                trace.flags.push(ItemFlag::DatabaseUnavailable);
                trace.error = Some(e.to_string());
                return trace;
            }
        };
        if gold.get(&item.db_id, &question).is_none() {
            trace.flags.push(ItemFlag::GoldUnparsable);
        }
        let limits = &self.config.limits;
        let gold_outcome = execute_sql(&profile.path, &item.gold_sql, limits);
        if !gold_outcome.is_valid() {
            trace.flags.push(ItemFlag::GoldWithoutRows);
        }

        let gw = self.gateway.as_ref().map(|g| Arc::new(g.scoped()));
        let formulator = self.formulator(&gw, gold);
        let evaluator = self.evaluator(&gw, gold);
        let generator = self.generator(&gw, gold);
        let arbitrator = self.arbitrator(&gw);
        let workers = self.config.run.workers;

        let fallback = match run_search(profile, &question, formulator.as_ref(), evaluator.as_ref(), &self.config.search) {
            Ok(outcome) => {
                let leaves: Vec<(usize, &_)> = outcome.candidates.iter().filter_map(|&id| outcome.tree.node(id).skeleton.as_ref().map(|s| (id, s))).collect();
                trace.candidates = generate_all(profile, &question, &leaves, generator.as_ref(), workers);
                trace.search = Some(outcome);
                false
            }
            Err(SearchError::EmptySearch(partial)) => {
                trace.flags.push(ItemFlag::EmptySearch);
                trace.search = Some(*partial);
                true
            }
            Err(SearchError::Backend { message, partial }) => {
                trace.flags.push(ItemFlag::SearchFailed);
                trace.error = Some(message);
                trace.search = Some(*partial);
                true
            }
            Err(e @ SearchError::Config(_)) => {
                trace.error = Some(e.to_string());
                true
            }
        };
        if fallback && self.config.run.zero_shot_fallback {
            trace.flags.push(ItemFlag::ZeroShotFallback);
            trace.candidates = vec![generate_sql(profile, &question, None, None, generator.as_ref())];
        }

        trace.outcomes = par_map(&trace.candidates, workers, |c: &SqlCandidate| execute_candidate(profile, c, limits));
        if !trace.candidates.is_empty() {
            match select_final(profile, &question, &trace.candidates, &trace.outcomes, arbitrator.as_deref()) {
                Ok(d) => trace.decision = Some(d),
                Err(e) => trace.error = Some(e.to_string()),
            }
        }
        trace.score(gold_outcome);
        if let Some(g) = &gw {
            trace.usage = g.ledger().by_stage();
        }
        trace
    }

    /// Digest of every setting that can change an item's trace.
    fn digest(&self, item: &BenchmarkItem) -> String {
        let c = &self.config;
        let mut search = c.search.clone();
        search.workers = 1;
        let key = serde_json::json!({
            "gateway": c.gateway.model, "endpoint": c.gateway.endpoint, "temperature": c.gateway.temperature,
            "max_tokens": c.gateway.max_tokens, "search": search, "agents": c.agents, "limits": c.limits,
            "fallback": c.run.zero_shot_fallback, "item": item,
        });
        hex::encode(Sha256::digest(key.to_string().as_bytes()))
    }

    fn checkpoint_path(dir: &Path, index: usize) -> PathBuf {
        dir.join(format!("{index:05}.json"))
    }

    fn load_checkpoint(&self, dir: &Path, index: usize, item: &BenchmarkItem) -> Option<ItemTrace> {
        let text = std::fs::read_to_string(Self::checkpoint_path(dir, index)).ok()?;
        let cp: Checkpoint = serde_json::from_str(&text).ok()?;
        (cp.digest == self.digest(item) && cp.trace.id == item.id).then_some(cp.trace)
    }

    /// Runs all items, `run.concurrency` at a time, reusing valid checkpoints in `checkpoints`.
    pub fn run(&self, items: &[BenchmarkItem], db_dir: &Path, checkpoints: Option<&Path>) -> Result<RunResult, BenchError> {
        let profiles = load_profiles(db_dir, items.iter().map(|i| i.db_id.as_str()));
        let (gold, _) = gold_book(items);
        if let Some(dir) = checkpoints {
            std::fs::create_dir_all(dir).map_err(BenchError::io(dir))?;
        }
        let indexed: Vec<(usize, &BenchmarkItem)> = items.iter().enumerate().collect();
        let results = par_map(&indexed, self.config.run.concurrency, |&(i, item)| -> Result<ItemTrace, BenchError> {
            if let Some(t) = checkpoints.and_then(|d| self.load_checkpoint(d, i, item)) {
                log::debug!("item {} restored from checkpoint", item.id);
                return Ok(t);
            }
            let profile = profiles[&item.db_id].as_ref().map_err(String::as_str);
            let trace = self.run_item(item, profile, &gold);
            log::info!("item {} done: correct={} flags={:?}", item.id, trace.correct, trace.flags);
            if let Some(dir) = checkpoints {
                let cp = Checkpoint { digest: self.digest(item), trace };
                write_atomic(&Self::checkpoint_path(dir, i), &serde_json::to_string(&cp).expect("checkpoint serializes"))?;
                return Ok(cp.trace);
            }
            Ok(trace)
        });
        let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;
        let report = summarize(&traces);
        Ok(RunResult { traces, report })
    }
}

/// Loads the config and dataset, runs every item and persists the results under the output directory.
pub fn run_benchmark(dataset: &Path, db_dir: &Path, config_path: &Path) -> Result<RunReport, BenchError> {
    let config = BenchConfig::load(config_path)?;
    let out = config.paths.output.clone().ok_or_else(|| BenchError::Config("paths.output is not set".into()))?;
    let items = load_dataset(dataset)?;
    let bench = Bench::new(config)?;
    let result = bench.run(&items, db_dir, Some(&out.join("checkpoints")))?;
    result.persist(&out)?;
    Ok(result.report)
}
