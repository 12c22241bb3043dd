//! `leafsql`: run the skeleton-search text-to-SQL pipeline from the command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use leafsql_core::bench::{
    database_path, gold_book, load_dataset, load_profiles, read_traces, stats, Bench, BenchConfig, BenchError, BenchmarkItem, RunReport,
};
use leafsql_core::gateway::GatewayMode;
use leafsql_core::schema::DatabaseProfile;
use leafsql_core::sft::{build_dataset, CorpusItem};
use leafsql_core::skeleton::{extract_skeleton, parse_query, GranularityLevel, Skeleton};
use leafsql_core::sql::SqlQuery;
use leafsql_core::sqlgen::SqlCandidate;

#[derive(Parser)]
#[command(name = "leafsql", version, about = "Coarse-to-fine skeleton search for text-to-SQL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a benchmark split.
    Run(RunArgs),
    /// Like `run`, answering every model call from a recorded cassette.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        /// Cassette file; defaults to `gateway.cassette` from the config.
        #[arg(long)]
        cassette: Option<PathBuf>,
    },
    /// Search skeletons for one question and print the leaf candidates.
    Search {
        #[command(flatten)]
        q: QuestionArgs,
        /// Write the search tree as JSON lines.
        #[arg(long)]
        tree: Option<PathBuf>,
    },
    /// Print the skeleton of a SQL query at one or all levels.
    ExtractSkeleton {
        #[arg(long)]
        sql: String,
        #[arg(long, value_parser = parse_level)]
        level: Option<GranularityLevel>,
    },
    /// Write SQL for one question, optionally guided by a skeleton.
    Generate {
        #[command(flatten)]
        q: QuestionArgs,
        #[arg(long)]
        skeleton: Option<String>,
        #[arg(long, value_parser = parse_level, default_value = "detailed")]
        level: GranularityLevel,
    },
    /// Execute candidate queries and vote on a final answer.
    Select {
        #[command(flatten)]
        q: QuestionArgs,
        /// JSON array of SQL strings or candidate records.
        #[arg(long)]
        candidates: PathBuf,
    },
    /// Build evaluator fine-tuning data from gold queries.
    BuildSftData {
        #[command(flatten)]
        paths: PathArgs,
        /// Output JSONL file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        pairs: Option<usize>,
    },
    /// Granularity distribution and candidate counts per difficulty.
    Stats {
        /// `traces.jsonl` or `report.json` from a run.
        path: PathBuf,
    },
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    db_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    paths: PathArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Items in flight at once.
    #[arg(long)]
    concurrency: Option<usize>,
    /// Ignore existing checkpoints.
    #[arg(long)]
    fresh: bool,
}

#[derive(Args)]
struct QuestionArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    db_dir: Option<PathBuf>,
    #[arg(long)]
    db_id: String,
    #[arg(long)]
    question: String,
    /// Gold query, needed by gold-backed agents.
    #[arg(long)]
    gold: Option<String>,
}

/// Configuration or input problems; exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_level(s: &str) -> Result<GranularityLevel, String> {
    GranularityLevel::ALL.into_iter().find(|l| l.as_str().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown level '{s}' (base, expanded, detailed)"))
}

fn bench_err(e: BenchError) -> anyhow::Error {
    if e.is_usage() {
        usage(e.to_string())
    } else {
        e.into()
    }
}

fn load_config(path: Option<&Path>) -> Result<BenchConfig> {
    match path {
        Some(p) => BenchConfig::load(p).map_err(bench_err),
        None => Ok(BenchConfig::default()),
    }
}

fn require(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| usage(format!("--{name} is required (or set paths.{} in the config)", name.replace('-', "_"))))
}

fn run(args: RunArgs, cassette: Option<Option<PathBuf>>) -> Result<()> {
    let mut config = load_config(args.paths.config.as_deref())?;
    if let Some(c) = args.concurrency {
        config.run.concurrency = c;
    }
    if let Some(cassette) = cassette {
        config.gateway.mode = GatewayMode::Replay;
        config.gateway.strict = true;
        if let Some(path) = cassette {
            config.gateway.cassette = Some(path);
        }
        if config.gateway.cassette.is_none() {
            return Err(usage("replay needs --cassette or gateway.cassette"));
        }
    }
    let dataset = require(args.paths.dataset, &config.paths.dataset, "dataset")?;
    let db_dir = require(args.paths.db_dir, &config.paths.db_dir, "db-dir")?;
    let out = require(args.out, &config.paths.output, "out")?;
    let items = load_dataset(&dataset).map_err(bench_err)?;
    let bench = Bench::new(config).map_err(bench_err)?;
    let checkpoints = out.join("checkpoints");
    if args.fresh && checkpoints.exists() {
        std::fs::remove_dir_all(&checkpoints).with_context(|| format!("clearing {}", checkpoints.display()))?;
    }
    let result = bench.run(&items, &db_dir, Some(&checkpoints))?;
    result.persist(&out)?;
    print_summary(&result.report);
    println!("report: {}", out.join("report.json").display());
    Ok(())
}

fn print_summary(r: &RunReport) {
    let o = &r.overall;
    println!("items {}  EX {:.4}  Pass@k {:.4}  mean|S| {:.3}", o.items, o.ex, o.pass_at_k, o.mean_candidates);
    for (d, s) in &r.by_difficulty {
        println!("  {d:<12} n={:<5} EX {:.4}  Pass@k {:.4}  mean|S| {:.3}", s.items, s.ex, s.pass_at_k, s.mean_candidates);
    }
    for (flag, n) in &r.flagged {
        println!("  flagged {}: {n}", serde_json::to_value(flag).unwrap_or_default().as_str().unwrap_or("?"));
    }
}

/// Config, profile and gold book for a single-question command.
fn single(q: &QuestionArgs) -> Result<(Bench, Arc<DatabaseProfile>, leafsql_core::agents::GoldBook)> {
    let config = load_config(q.config.as_deref())?;
    let db_dir = require(q.db_dir.clone(), &config.paths.db_dir, "db-dir")?;
    let profile = DatabaseProfile::load(&q.db_id, &database_path(&db_dir, &q.db_id)).map_err(|e| usage(e.to_string()))?;
    let items: Vec<BenchmarkItem> = q
        .gold
        .iter()
        .map(|g| BenchmarkItem { id: "0".into(), question: q.question.clone(), evidence: None, db_id: q.db_id.clone(), gold_sql: g.clone(), difficulty: None })
        .collect();
    let (gold, bad) = gold_book(&items);
    if !bad.is_empty() {
        return Err(usage("--gold does not parse"));
    }
    Ok((Bench::new(config).map_err(bench_err)?, Arc::new(profile), gold))
}

fn search(q: QuestionArgs, tree: Option<PathBuf>) -> Result<()> {
    let (bench, profile, gold) = single(&q)?;
    let outcome = match bench.search(&profile, &q.question, &gold) {
        Ok(o) => o,
        Err(e) => {
            if let (Some(path), Some(p)) = (&tree, e.partial()) {
                std::fs::write(path, p.tree.dump_jsonl())?;
            }
            bail!(e)
        }
    };
    if let Some(path) = tree {
        std::fs::write(&path, outcome.tree.dump_jsonl()).with_context(|| format!("writing {}", path.display()))?;
    }
    let leaves: Vec<_> = outcome
        .candidates
        .iter()
        .map(|&id| {
            let n = outcome.tree.node(id);
            serde_json::json!({ "node": id, "level": n.level(), "skeleton": n.skeleton.as_ref().map(Skeleton::text) })
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "candidates": leaves, "cost": outcome.cost }))?);
    Ok(())
}

fn extract(sql: &str, level: Option<GranularityLevel>) -> Result<()> {
    let tree = parse_query(&SqlQuery::new(sql)).map_err(|e| usage(e.to_string()))?;
    match level {
        Some(l) => println!("{}", extract_skeleton(&tree, l).text()),
        None => {
            for l in GranularityLevel::ALL {
                println!("{:<9} {}", l.as_str(), extract_skeleton(&tree, l).text());
            }
        }
    }
    Ok(())
}

fn generate(q: QuestionArgs, skeleton: Option<String>, level: GranularityLevel) -> Result<()> {
    let (bench, profile, gold) = single(&q)?;
    let skeleton = skeleton.map(|s| Skeleton::parse(&s, level)).transpose().map_err(|e| usage(e.to_string()))?;
    let cand = bench.generate(&profile, &q.question, skeleton.as_ref(), &gold);
    match cand.failure {
        Some(f) => bail!("generation failed: {f}"),
        None => println!("{}", cand.sql),
    }
    Ok(())
}

fn read_candidates(path: &Path) -> Result<Vec<SqlCandidate>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let values: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    values
        .into_iter()
        .map(|v| match v {
            serde_json::Value::String(sql) => Ok(SqlCandidate { sql, node: None, skeleton: None, usage: None, failure: None }),
            other => serde_json::from_value(other).map_err(|e| usage(format!("{}: {e}", path.display()))),
        })
        .collect()
}

fn select(q: QuestionArgs, candidates: PathBuf) -> Result<()> {
    let (bench, profile, _) = single(&q)?;
    let cands = read_candidates(&candidates)?;
    let (outcomes, trace) = bench.select(&profile, &q.question, &cands).map_err(|e| usage(e.to_string()))?;
    let out = serde_json::json!({ "final_sql": cands[trace.chosen].sql, "decision": trace, "outcomes": outcomes });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn build_sft(paths: PathArgs, out: PathBuf, seed: Option<u64>, pairs: Option<usize>) -> Result<()> {
    let mut config = load_config(paths.config.as_deref())?;
    if let Some(s) = seed {
        config.sft.seed = s;
    }
    if let Some(p) = pairs {
        config.sft.pairs = p;
    }
    let dataset = require(paths.dataset, &config.paths.dataset, "dataset")?;
    let db_dir = require(paths.db_dir, &config.paths.db_dir, "db-dir")?;
    let items = load_dataset(&dataset).map_err(bench_err)?;
    let profiles = load_profiles(&db_dir, items.iter().map(|i| i.db_id.as_str()));
    let mut corpus = Vec::new();
    for item in &items {
        match &profiles[&item.db_id] {
            Ok(p) => corpus.push(CorpusItem { question: item.prompt_question(), gold_sql: item.gold_sql.clone(), profile: p.clone() }),
            Err(e) => log::warn!("skipping item {}: {e}", item.id),
        }
    }
    let bench = Bench::new(config).map_err(bench_err)?;
    let sft = &bench.config().sft;
    let data = build_dataset(&corpus, sft, bench.annotator().as_ref())?;
    data.write(&out).with_context(|| format!("writing {}", out.display()))?;
    for s in &data.skipped {
        log::warn!("skipped: {s}");
    }
    println!("{} examples ({} pairs requested, {} skipped) -> {}", data.examples.len(), sft.pairs, data.skipped.len(), out.display());
    Ok(())
}

fn show_stats(path: &Path) -> Result<()> {
    let by_difficulty = if path.extension().is_some_and(|e| e == "jsonl") {
        stats(&read_traces(path).map_err(bench_err)?)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let report: RunReport = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        report.by_difficulty
    };
    println!("{}", serde_json::to_string_pretty(&by_difficulty)?);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => run(args, None),
        Command::Replay { run: args, cassette } => run(args, Some(cassette)),
        Command::Search { q, tree } => search(q, tree),
        Command::ExtractSkeleton { sql, level } => extract(&sql, level),
        Command::Generate { q, skeleton, level } => generate(q, skeleton, level),
        Command::Select { q, candidates } => select(q, candidates),
        Command::BuildSftData { paths, out, seed, pairs } => build_sft(paths, out, seed, pairs),
        Command::Stats { path } => show_stats(&path),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
