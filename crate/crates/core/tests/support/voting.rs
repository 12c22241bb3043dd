//! Exhaustive vote enumeration and fingerprint shuffling.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use leafsql_core::agents::{AgentError, AgentReply};
use leafsql_core::schema::DatabaseProfile;
use leafsql_core::select::{fingerprint, select_final, ArbitrationOption, DecisionRule, ExecStatus, ExecutionOutcome};
use leafsql_core::sqlgen::SqlCandidate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every set partition of `0..n`, as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().copied().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            prefix.push(b);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), n, &mut out);
    out
}

fn schema() -> DatabaseProfile {
    DatabaseProfile { db_id: "vote".into(), tables: Vec::new(), foreign_keys: Vec::new(), path: PathBuf::new() }
}

fn outcome(block: Option<usize>) -> ExecutionOutcome {
    match block {
        Some(b) => ExecutionOutcome {
            status: ExecStatus::Rows,
            fingerprint: Some(format!("result-{b}")),
            error: None,
            rows: b + 1,
            preview: Vec::new(),
            elapsed: Duration::ZERO,
        },
        None => ExecutionOutcome::error("no such column"),
    }
}

#[derive(Debug, Default)]
pub struct VoteSummary {
    pub cases: usize,
    pub majority: usize,
    pub ties: usize,
}

/// Blocks labelled `None` are candidates whose execution failed.
fn check_labelling(labels: &[Option<usize>], summary: &mut VoteSummary) -> Result<(), String> {
    let n = labels.len();
    let candidates: Vec<SqlCandidate> =
        (0..n).map(|i| SqlCandidate { sql: format!("SELECT {i}"), node: Some(i), skeleton: None, usage: None, failure: None }).collect();
    let outcomes: Vec<ExecutionOutcome> = labels.iter().map(|b| outcome(*b)).collect();
    let schema = schema();

    // blocks in order of first appearance, with their members
    let mut blocks: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let Some(b) = l else { continue };
        match blocks.iter_mut().find(|(id, _)| id == b) {
            Some((_, m)) => m.push(i),
            None => blocks.push((*b, vec![i])),
        }
    }
    let max = blocks.iter().map(|(_, m)| m.len()).max().unwrap_or(0);
    let tied: Vec<&Vec<usize>> = blocks.iter().filter(|(_, m)| m.len() == max).map(|(_, m)| m).collect();
    let ctx = format!("labels {labels:?}");
    summary.cases += 1;

    let calls = AtomicUsize::new(0);
    let counting = |_: &DatabaseProfile, _: &str, options: &[ArbitrationOption]| -> Result<AgentReply, AgentError> {
        calls.fetch_add(1, Ordering::SeqCst);
        Ok(format!("ANSWER: {}", options.len()).into())
    };
    let d = select_final(&schema, "q", &candidates, &outcomes, Some(&counting)).map_err(|e| format!("{ctx}: {e}"))?;

    if blocks.is_empty() {
        if d.rule != DecisionRule::NoValidResults || calls.load(Ordering::SeqCst) != 0 {
            return Err(format!("{ctx}: expected the no-result fallback, got {:?}", d.rule));
        }
        return Ok(());
    }
    if tied.len() == 1 {
        summary.majority += 1;
        if d.rule != DecisionRule::Majority || !tied[0].contains(&d.chosen) || calls.load(Ordering::SeqCst) != 0 {
            return Err(format!("{ctx}: majority chose {} by {:?}", d.chosen, d.rule));
        }
        return Ok(());
    }
    summary.ties += 1;
    if calls.load(Ordering::SeqCst) != 1 || d.rule != DecisionRule::Arbitrated || !tied[tied.len() - 1].contains(&d.chosen) {
        return Err(format!("{ctx}: tie not routed to the arbitrator ({:?}, chose {})", d.rule, d.chosen));
    }
    for k in 1..=tied.len() {
        let pick = move |_: &DatabaseProfile, _: &str, _: &[ArbitrationOption]| -> Result<AgentReply, AgentError> { Ok(format!("ANSWER: {k}").into()) };
        let d = select_final(&schema, "q", &candidates, &outcomes, Some(&pick)).unwrap();
        if !tied[k - 1].contains(&d.chosen) {
            return Err(format!("{ctx}: answer {k} chose {}", d.chosen));
        }
    }

    // With no skeletons, the fallback takes the lexicographically smallest SQL among tied groups.
    let fallback = tied.iter().flat_map(|m| m.iter().copied()).min_by_key(|i| candidates[*i].sql.clone()).unwrap();
    let failing = |_: &DatabaseProfile, _: &str, _: &[ArbitrationOption]| -> Result<AgentReply, AgentError> { Err(AgentError::Backend("timeout".into())) };
    let off_range = |_: &DatabaseProfile, _: &str, _: &[ArbitrationOption]| -> Result<AgentReply, AgentError> { Ok("ANSWER: 99".to_string().into()) };
    let runs = [
        select_final(&schema, "q", &candidates, &outcomes, Some(&failing)).unwrap(),
        select_final(&schema, "q", &candidates, &outcomes, Some(&off_range)).unwrap(),
        select_final(&schema, "q", &candidates, &outcomes, None).unwrap(),
    ];
    for d in runs {
        if d.rule != DecisionRule::TieFallback || d.chosen != fallback {
            return Err(format!("{ctx}: fallback chose {} by {:?}, expected {fallback}", d.chosen, d.rule));
        }
    }
    Ok(())
}

/// All partitions of up to `max_n` candidates, also with every subset of candidates failing.
pub fn check_all_partitions(max_n: usize) -> Result<VoteSummary, String> {
    let mut summary = VoteSummary::default();
    for n in 1..=max_n {
        // element `n` marks the block of failed candidates
        for p in set_partitions(n + 1) {
            let failed = p[n];
            let labels: Vec<Option<usize>> = p[..n].iter().map(|&b| (b != failed).then_some(b)).collect();
            check_labelling(&labels, &mut summary)?;
        }
    }
    Ok(summary)
}

fn random_rows(rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let rows = rng.random_range(2..12);
    let cols = rng.random_range(1..4);
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| match rng.random_range(0..4) {
                    0 => "NULL".to_string(),
                    1 => format!("i:{}", rng.random_range(-5..5)),
                    2 => format!("t:{}", ["a", "b", "ab"][rng.random_range(0..3)]),
                    _ => format!("r:{:.6e}", rng.random_range(0.0..1.0f64)),
                })
                .collect()
        })
        .collect()
}

/// Shuffles random result sets and counts fingerprint changes, returning
/// (unordered mismatches, ordered shuffles that changed row order, of which detected).
pub fn shuffle_trials(trials: usize, seed: u64) -> (usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mismatches, mut reordered, mut detected) = (0, 0, 0);
    for _ in 0..trials {
        let rows = random_rows(&mut rng);
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        if fingerprint(&rows, false) != fingerprint(&shuffled, false) {
            mismatches += 1;
        }
        if shuffled != rows {
            reordered += 1;
            if fingerprint(&rows, true) != fingerprint(&shuffled, true) {
                detected += 1;
            }
        }
    }
    (mismatches, reordered, detected)
}
