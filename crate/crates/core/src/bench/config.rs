use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::gateway::GatewayConfig;
use crate::search::SearchConfig;
use crate::select::ExecutionLimits;
use crate::sft::SftConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulatorKind {
    #[default]
    Llm,
    Gold,
    Scripted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    #[default]
    Llm,
    Gold,
    Scripted,
    AcceptAll,
    RejectAll,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Llm,
    GoldEcho,
    Scripted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArbitratorKind {
    #[default]
    Llm,
    /// Always the first tied option.
    First,
    /// Ties go straight to the deterministic fallback.
    None,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub formulator: FormulatorKind,
    pub evaluator: EvaluatorKind,
    pub generator: GeneratorKind,
    pub arbitrator: ArbitratorKind,
    /// Annotate SFT examples with the model instead of the built-in templates.
    pub llm_annotator: bool,
    /// Script table for scripted formulator and evaluator.
    pub script: Option<PathBuf>,
    /// Rules for the scripted generator.
    pub generator_script: Option<PathBuf>,
    /// Directory of prompt template overrides.
    pub templates: Option<PathBuf>,
}

impl AgentConfig {
    pub fn uses_gateway(&self) -> bool {
        self.formulator == FormulatorKind::Llm
            || self.evaluator == EvaluatorKind::Llm
            || self.generator == GeneratorKind::Llm
            || self.arbitrator == ArbitratorKind::Llm
            || self.llm_annotator
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Items in flight at once.
    pub concurrency: usize,
    /// Threads per item for generation and execution.
    pub workers: usize,
    /// Generate one zero-shot query when the search yields no candidates.
    pub zero_shot_fallback: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { concurrency: 4, workers: 1, zero_shot_fallback: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub db_dir: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

/// Everything one run needs, read from a single TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub gateway: GatewayConfig,
    pub search: SearchConfig,
    pub agents: AgentConfig,
    pub limits: ExecutionLimits,
    pub run: RunConfig,
    pub sft: SftConfig,
    pub paths: PathsConfig,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl BenchConfig {
    /// Parses TOML; relative paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, BenchError> {
        let mut c: BenchConfig = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        for p in [
            &mut c.gateway.cassette,
            &mut c.agents.script,
            &mut c.agents.generator_script,
            &mut c.agents.templates,
            &mut c.paths.dataset,
            &mut c.paths.db_dir,
            &mut c.paths.output,
        ] {
            rebase(base, p);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if let Err(e) = self.search.validate() {
            return bad(e);
        }
        if self.run.concurrency == 0 || self.run.workers == 0 {
            return bad("run.concurrency and run.workers must be at least 1".into());
        }
        if self.limits.max_rows == 0 || self.limits.timeout_ms == 0 {
            return bad("limits must be positive".into());
        }
        if self.sft.workers == 0 {
            return bad("sft.workers must be at least 1".into());
        }
        let a = &self.agents;
        if (a.formulator == FormulatorKind::Scripted || a.evaluator == EvaluatorKind::Scripted) && a.script.is_none() {
            return bad("scripted agents need agents.script".into());
        }
        if a.generator == GeneratorKind::Scripted && a.generator_script.is_none() {
            return bad("the scripted generator needs agents.generator_script".into());
        }
        if a.uses_gateway() {
            if let Err(e) = self.gateway.validate() {
                return bad(e.to_string());
            }
        }
        Ok(())
    }
}
