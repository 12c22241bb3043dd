//! Properties of a seeded SFT build over the 60-query fixture.

use std::collections::BTreeMap;
use std::path::Path;

use leafsql_core::bench::{load_dataset, load_profiles};
use leafsql_core::sft::{build_dataset, CorpusItem, SftConfig, SftDataset, TemplateAnnotator};
use leafsql_core::skeleton::{extract_skeleton, parse_query, GranularityLevel, Skeleton};
use leafsql_core::sql::SqlQuery;

pub fn corpus(fixtures: &Path) -> Vec<CorpusItem> {
    let items = load_dataset(&fixtures.join("sft60.json")).expect("sft60.json");
    let profiles = load_profiles(&fixtures.join("db"), items.iter().map(|i| i.db_id.as_str()));
    items
        .iter()
        .map(|i| CorpusItem { question: i.prompt_question(), gold_sql: i.gold_sql.clone(), profile: profiles[&i.db_id].clone().expect("fixture db") })
        .collect()
}

pub fn config() -> SftConfig {
    SftConfig { pairs: 60, seed: 2024, ..SftConfig::default() }
}

pub fn build(corpus: &[CorpusItem], config: &SftConfig) -> SftDataset {
    build_dataset(corpus, config, &TemplateAnnotator).expect("sft build")
}

/// Returns a one-line summary on success.
pub fn check(corpus: &[CorpusItem], data: &SftDataset) -> Result<String, String> {
    if corpus.len() != 60 {
        return Err(format!("{} corpus items", corpus.len()));
    }
    let mut counts: BTreeMap<GranularityLevel, (usize, usize)> = BTreeMap::new();
    for e in &data.examples {
        let c = counts.entry(e.level).or_default();
        if e.label {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    for level in GranularityLevel::ALL {
        let (pos, neg) = counts.get(&level).copied().unwrap_or_default();
        if pos == 0 || pos != neg {
            return Err(format!("{level}: {pos} positive, {neg} negative"));
        }
    }
    let mut negatives = 0;
    for e in &data.examples {
        let parsed = Skeleton::parse(&e.skeleton, e.level).map_err(|err| format!("{:?} does not re-parse: {err}", e.skeleton))?;
        let item = corpus.iter().find(|c| c.question == e.question && c.profile.db_id == e.db_id).ok_or("example without a corpus item")?;
        let tree = parse_query(&SqlQuery::new(&item.gold_sql)).map_err(|err| err.to_string())?;
        let gold = extract_skeleton(&tree, e.level);
        if e.label && parsed != gold {
            return Err(format!("positive {:?} is not the gold skeleton {:?}", e.skeleton, gold.text()));
        }
        if !e.label {
            negatives += 1;
            if parsed == gold || parsed.tree() == gold.tree() {
                return Err(format!("negative equals gold: {}", e.skeleton));
            }
        }
    }
    Ok(format!("{} examples, {negatives} negatives, per level {counts:?}", data.examples.len()))
}
