use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

/// Pipeline stage a model call is charged to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Formulation,
    Evaluation,
    Generation,
    Arbitration,
    Annotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub stage: Stage,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageTotals {
    pub calls: u64,
    pub failures: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

impl UsageTotals {
    pub fn add(&mut self, e: &UsageEntry) {
        self.calls += 1;
        self.failures += u64::from(!e.ok);
        self.prompt_tokens += e.prompt_tokens;
        self.completion_tokens += e.completion_tokens;
        self.latency_ms += e.latency_ms;
    }

    pub fn merge(&mut self, other: &UsageTotals) {
        self.calls += other.calls;
        self.failures += other.failures;
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.latency_ms += other.latency_ms;
    }
}

/// Thread-safe record of every model call.
#[derive(Debug, Default)]
pub struct UsageLedger {
    entries: Mutex<Vec<UsageEntry>>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, entry: UsageEntry) {
        self.entries.lock().expect("usage ledger poisoned").push(entry);
    }

    pub fn entries(&self) -> Vec<UsageEntry> {
        self.entries.lock().expect("usage ledger poisoned").clone()
    }

    pub fn by_stage(&self) -> BTreeMap<Stage, UsageTotals> {
        totals_by_stage(&self.entries())
    }

    pub fn total(&self) -> UsageTotals {
        let mut t = UsageTotals::default();
        for e in self.entries() {
            t.add(&e);
        }
        t
    }
}

pub fn totals_by_stage(entries: &[UsageEntry]) -> BTreeMap<Stage, UsageTotals> {
    let mut map = BTreeMap::new();
    for e in entries {
        map.entry(e.stage).or_insert_with(UsageTotals::default).add(e);
    }
    map
}
