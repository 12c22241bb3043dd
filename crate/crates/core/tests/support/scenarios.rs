//! Hand-written search scenarios replayed through scripted agents.

use std::path::Path;

use leafsql_core::agents::{ScriptTable, ScriptedEvaluator, ScriptedFormulator};
use leafsql_core::schema::DatabaseProfile;
use leafsql_core::search::{compute_cost, run_search, NodePhase, NodeStatus, SearchConfig, SearchError, SearchOutcome};
use serde_json::Value;

pub struct Scenario {
    pub name: String,
    pub config: SearchConfig,
    pub script: ScriptTable,
    pub expected: Value,
}

pub fn load(fixtures: &Path) -> Vec<Scenario> {
    let text = std::fs::read_to_string(fixtures.join("scenarios.json")).expect("scenarios.json");
    let raw: Vec<Value> = serde_json::from_str(&text).expect("scenario json");
    raw.into_iter()
        .map(|v| {
            let mut config = SearchConfig { m: v["m"].as_u64().unwrap() as usize, ..SearchConfig::default() };
            if let Some(cap) = v.get("expanded_cap").and_then(Value::as_u64) {
                config.expanded_cap = cap as usize;
            }
            Scenario {
                name: v["name"].as_str().unwrap().to_string(),
                config,
                script: serde_json::from_value(v["script"].clone()).expect("script table"),
                expected: v["expected"].clone(),
            }
        })
        .collect()
}

fn phase_name(p: NodePhase) -> &'static str {
    match p {
        NodePhase::Root => "root",
        NodePhase::Base => "base",
        NodePhase::Expanded => "expanded",
        NodePhase::DetailedStep1 => "detailed_step1",
        NodePhase::DetailedStep2 => "detailed_step2",
    }
}

fn status_name(s: NodeStatus) -> &'static str {
    match s {
        NodeStatus::Valid => "valid",
        NodeStatus::Pruned => "pruned",
        NodeStatus::Leaf => "leaf",
    }
}

/// Runs one scenario; the outcome is the full tree or the partial tree of a failed search.
pub fn execute(s: &Scenario, profile: &DatabaseProfile) -> (SearchOutcome, Option<&'static str>) {
    let f = ScriptedFormulator(s.script.clone());
    let e = ScriptedEvaluator(s.script.clone());
    match run_search(profile, &s.name, &f, &e, &s.config) {
        Ok(o) => (o, None),
        Err(SearchError::EmptySearch(o)) => (*o, Some("empty_search")),
        Err(SearchError::Backend { partial, .. }) => (*partial, Some("backend")),
        Err(other) => panic!("{}: {other}", s.name),
    }
}

fn usize_list(v: &Value) -> Vec<usize> {
    v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect()
}

/// Node-for-node comparison of the tree, leaf set, error kind and discard count.
pub fn check_trace(s: &Scenario, outcome: &SearchOutcome, error: Option<&str>) -> Result<(), String> {
    let want_error = s.expected.get("error").and_then(Value::as_str);
    if want_error != error {
        return Err(format!("{}: error {error:?}, expected {want_error:?}", s.name));
    }
    let got: Vec<Value> = outcome
        .tree
        .nodes
        .iter()
        .map(|n| serde_json::json!([n.id, n.parent, phase_name(n.phase), status_name(n.status), n.skeleton.as_ref().map(|k| k.text().to_string())]))
        .collect();
    let want = s.expected["nodes"].as_array().unwrap();
    if &got != want {
        return Err(format!("{}: tree mismatch\n  got  {}\n  want {}", s.name, Value::from(got), Value::from(want.clone())));
    }
    let leaves: Vec<usize> = outcome.candidates.clone();
    if leaves != usize_list(&s.expected["leaves"]) {
        return Err(format!("{}: leaves {leaves:?}", s.name));
    }
    let discards = s.expected["discards"].as_u64().unwrap() as usize;
    if outcome.discards.len() != discards {
        return Err(format!("{}: {} discards, expected {discards}", s.name, outcome.discards.len()));
    }
    Ok(())
}

/// Survivor counts per depth, counted straight from the tree.
fn survivors_by_depth(outcome: &SearchOutcome) -> Vec<usize> {
    let nodes = &outcome.tree.nodes;
    let depth = |mut id: usize| {
        let mut d = 0;
        while let Some(p) = nodes[id].parent {
            id = p;
            d += 1;
        }
        d
    };
    let mut n = Vec::new();
    for node in nodes.iter().filter(|n| n.status != NodeStatus::Pruned) {
        let d = depth(node.id);
        if n.len() <= d {
            n.resize(d + 1, 0);
        }
        n[d] += 1;
    }
    while n.len() > 1 && n.last() == Some(&0) {
        n.pop();
    }
    n
}

/// Survivor recurrence with measured rejection rates, and the cost sum against a direct evaluation.
pub fn check_cost(s: &Scenario, outcome: &SearchOutcome) -> Result<(), String> {
    let cost = &outcome.cost;
    let n = survivors_by_depth(outcome);
    if cost.n != n {
        return Err(format!("{}: recorded N {:?}, tree has {n:?}", s.name, cost.n));
    }
    if n != usize_list(&s.expected["n"]) {
        return Err(format!("{}: N {n:?}, expected {}", s.name, s.expected["n"]));
    }
    let m = s.config.m as f64;
    for d in 1..n.len() {
        let rho = cost.rho[d - 1];
        if !(0.0..=1.0).contains(&rho) {
            return Err(format!("{}: rho_{d} = {rho}", s.name));
        }
        let predicted = m * (1.0 - rho) * n[d - 1] as f64;
        if (predicted - n[d] as f64).abs() > 1e-9 {
            return Err(format!("{}: N_{d} = {} but m(1-rho)N_(d-1) = {predicted}", s.name, n[d]));
        }
    }
    let h = n.len() - 1;
    for (t_gen, t_eval) in [(1.0, 0.0), (0.0, 1.0), (2.5, 0.25), (7.0, 3.0)] {
        let mut closed = 0.0;
        for d in 1..=h.max(1) {
            closed += n.get(d - 1).copied().unwrap_or(0) as f64 * (t_gen + m * t_eval);
        }
        let got = compute_cost(cost, t_gen, t_eval);
        if got != closed {
            return Err(format!("{}: compute_cost {got} != closed form {closed}", s.name));
        }
    }
    Ok(())
}

/// Number of scenarios where some surviving node became a leaf because every admitted child was pruned.
pub fn all_pruned_terminations(outcomes: &[SearchOutcome]) -> usize {
    outcomes
        .iter()
        .filter(|o| {
            o.tree
                .nodes
                .iter()
                .any(|n| n.status == NodeStatus::Leaf && !n.children.is_empty() && n.children.iter().all(|c| o.tree.nodes[*c].status == NodeStatus::Pruned))
        })
        .count()
}
