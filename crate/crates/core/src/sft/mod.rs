//! Training data for the skeleton evaluator: gold positives and corrupted negatives.

mod annotate;
mod corrupt;
mod prune;


use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{parse_verdict, Analysis};
use crate::schema::{render_mschema, DatabaseProfile};
use crate::skeleton::{extract_skeleton, parse_query, GranularityLevel, Skeleton};
use crate::sql::SqlQuery;

pub use annotate::{build_annotation_prompt, label_text, AnnotationRequest, Annotator, LlmAnnotator, TemplateAnnotator};
pub use corrupt::{apply_op, corrupt, CorruptionOp, CorruptionRecipe, CorruptionStep};
pub use prune::prune_demonstration_schema;

pub const SFT_FORMAT: &str = "leafsql-sft";
pub const SFT_VERSION: u32 = 1;
/// Fraction of the requested examples a build must deliver.
pub const MIN_YIELD: f64 = 0.9;

#[derive(Debug, thiserror::Error)]
pub enum SftError {
    #[error("gold query does not parse: {0}")]
    Parse(String),
    #[error("gold query names an unknown table or column: {0}")]
    UnresolvedReference(String),
    #[error("annotation failed: {0}")]
    Annotation(String),
    #[error("built {built} of {target} requested examples")]
    Shortfall { built: usize, target: usize },
    #[error("empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct CorpusItem {
    pub question: String,
    pub gold_sql: String,
    pub profile: Arc<DatabaseProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftConfig {
    /// Positive/negative pairs to build.
    pub pairs: usize,
    pub seed: u64,
    /// Relative sampling weight of Base, Expanded and Detailed.
    pub level_weights: [u32; 3],
    /// Render only the gold-relevant part of each schema.
    pub prune_schema: bool,
    pub workers: usize,
}

impl Default for SftConfig {
    fn default() -> Self {
        SftConfig { pairs: 90, seed: 0, level_weights: [1, 1, 1], prune_schema: true, workers: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftExample {
    pub level: GranularityLevel,
    /// Position within the level bucket.
    pub index: usize,
    pub pair: usize,
    pub label: bool,
    pub db_id: String,
    pub question: String,
    pub schema: String,
    pub skeleton: String,
    pub analysis: Analysis,
    /// Full target reply, ending in the verdict line.
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionRecipe>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SftHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub pairs: usize,
    pub examples: usize,
    pub counts: BTreeMap<GranularityLevel, LabelCounts>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SftDataset {
    pub header: SftHeader,
    pub examples: Vec<SftExample>,
    /// Annotation and corruption failures that were skipped.
    pub skipped: Vec<String>,
}

impl SftDataset {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), SftError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

/// The (level, corpus index) of each pair, drawn from the seeded stream 0.
pub fn sample_plan(corpus_len: usize, config: &SftConfig) -> Vec<(GranularityLevel, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let total: u32 = config.level_weights.iter().sum();
    (0..config.pairs)
        .map(|_| {
            let mut w = rng.random_range(0..total.max(1));
            let mut level = GranularityLevel::ALL[0];
            for (l, weight) in GranularityLevel::ALL.iter().zip(config.level_weights) {
                if w < weight {
                    level = *l;
                    break;
                }
                w -= weight;
            }
            (level, rng.random_range(0..corpus_len))
        })
        .collect()
}

struct PairResult {
    level: GranularityLevel,
    examples: Vec<SftExample>,
    skipped: Vec<String>,
}

fn gold_skeleton(sql: &str, level: GranularityLevel) -> Result<Skeleton, SftError> {
    let tree = parse_query(&SqlQuery::new(sql)).map_err(|e| SftError::Parse(format!("{sql}: {e}")))?;
    Ok(extract_skeleton(&tree, level))
}

fn build_pair(
    corpus: &[CorpusItem],
    config: &SftConfig,
    annotator: &dyn Annotator,
    pair: usize,
    level: GranularityLevel,
    first: usize,
) -> Result<PairResult, SftError> {
    const RESAMPLES: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(pair as u64 + 1);
    let mut skipped = Vec::new();
    let mut idx = first;
    let mut found = None;
    for _ in 0..RESAMPLES {
        let gold = gold_skeleton(&corpus[idx].gold_sql, level)?;
        if let Some((neg, recipe)) = corrupt(&gold, &mut rng) {
            found = Some((idx, gold, neg, recipe));
            break;
        }
        skipped.push(format!("pair {pair}: no {level} corruption for corpus item {idx}"));
        idx = rng.random_range(0..corpus.len());
    }
    let Some((idx, gold, neg, recipe)) = found else {
        return Ok(PairResult { level, examples: Vec::new(), skipped });
    };
    let item = &corpus[idx];
    let profile = if config.prune_schema { prune_demonstration_schema(&item.profile, &item.gold_sql)? } else { (*item.profile).clone() };
    let schema_text = render_mschema(&profile);
    let mut examples = Vec::new();
    for (label, candidate, recipe) in [(true, &gold, None), (false, &neg, Some(&recipe))] {
        let req = AnnotationRequest { schema_text: &schema_text, question: &item.question, gold: &gold, candidate, label, recipe };
        match annotator.annotate(&req).map_err(|e| e.to_string()).and_then(|r| check_annotation(&r.text, label).map(|a| (r.text, a))) {
            Ok((response, analysis)) => examples.push(SftExample {
                level,
                index: 0,
                pair,
                label,
                db_id: item.profile.db_id.clone(),
                question: item.question.clone(),
                schema: schema_text.clone(),
                skeleton: candidate.text().to_string(),
                analysis,
                response,
                corruption: recipe.cloned(),
            }),
            Err(e) => {
                log::warn!("pair {pair}: skipping {} example: {e}", label_text(label));
                skipped.push(format!("pair {pair} {}: {e}", label_text(label)));
            }
        }
    }
    if examples.len() < 2 {
        // a lone survivor would unbalance its level
        examples.clear();
    }
    Ok(PairResult { level, examples, skipped })
}

fn check_annotation(reply: &str, label: bool) -> Result<Analysis, String> {
    match parse_verdict(reply) {
        (Some(v), Some(a)) if v == label => Ok(a),
        (Some(_), Some(_)) => Err("annotation verdict contradicts the label".into()),
        _ => Err("annotation lacks the three-stage analysis or verdict".into()),
    }
}

/// Builds the dataset. Output order is (level, index) and independent of `config.workers`.
pub fn build_dataset(corpus: &[CorpusItem], config: &SftConfig, annotator: &dyn Annotator) -> Result<SftDataset, SftError> {
    if corpus.is_empty() {
        return Err(SftError::EmptyCorpus);
    }
    let plan: Vec<(usize, (GranularityLevel, usize))> = sample_plan(corpus.len(), config).into_iter().enumerate().collect();
    let results = crate::par::par_map(&plan, config.workers, |(pair, (level, idx))| build_pair(corpus, config, annotator, *pair, *level, *idx));
    let mut by_level: BTreeMap<GranularityLevel, Vec<SftExample>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for r in results {
        let r = r?;
        by_level.entry(r.level).or_default().extend(r.examples);
        skipped.extend(r.skipped);
    }
    let mut counts = BTreeMap::new();
    let mut examples = Vec::new();
    for (level, list) in by_level {
        let c: &mut LabelCounts = counts.entry(level).or_default();
        for (i, mut e) in list.into_iter().enumerate() {
            e.index = i;
            if e.label {
                c.positive += 1;
            } else {
                c.negative += 1;
            }
            examples.push(e);
        }
    }
    let target = 2 * config.pairs;
    if (examples.len() as f64) < MIN_YIELD * target as f64 {
        return Err(SftError::Shortfall { built: examples.len(), target });
    }
    let header = SftHeader { format: SFT_FORMAT.into(), version: SFT_VERSION, seed: config.seed, pairs: config.pairs, examples: examples.len(), counts };
    Ok(SftDataset { header, examples, skipped })
}
