//! Recording the fixture cassette through the simulated model.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use leafsql_core::bench::{load_dataset, Bench, BenchConfig, RunResult};
use leafsql_core::gateway::GatewayMode;

use super::fixtures;
use super::model::GoldModel;

pub fn replay_config() -> PathBuf {
    fixtures().join("configs/replay.toml")
}

pub fn committed_cassette() -> PathBuf {
    fixtures().join("cassettes/dev3.jsonl")
}

/// Runs the replay config in record mode against the simulated model, writing `cassette`.
pub fn record(cassette: &Path, concurrency: usize) -> RunResult {
    let mut config = BenchConfig::load(&replay_config()).expect("replay config");
    config.gateway.mode = GatewayMode::Record;
    config.gateway.cassette = Some(cassette.to_path_buf());
    config.run.concurrency = concurrency;
    let dataset = config.paths.dataset.clone().unwrap();
    let db_dir = config.paths.db_dir.clone().unwrap();
    let model = Arc::new(GoldModel::load(&dataset, &db_dir));
    let bench = Bench::with_transport(config, model).expect("bench");
    let items = load_dataset(&dataset).expect("dataset");
    bench.run(&items, &db_dir, None).expect("recorded run")
}

/// Cassette entries without their wall-clock latency, which differs between recordings.
pub fn entries(cassette: &Path) -> BTreeSet<(String, String, String)> {
    let text = std::fs::read_to_string(cassette).expect("cassette");
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("entry");
            let s = |k: &str| v[k].as_str().unwrap().to_string();
            (s("key"), s("prompt"), s("response"))
        })
        .collect()
}
