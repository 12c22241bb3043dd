//! Corpus-wide skeleton checks against the AST-walker oracle.

use leafsql_core::normalize::{normalize, Outcome};
use leafsql_core::skeleton::{extract_skeleton, nesting_depth, parse_query, refinement_check, GranularityLevel, Skeleton};
use leafsql_core::sql::SqlQuery;

pub const LEVELS: [GranularityLevel; 3] = [GranularityLevel::Base, GranularityLevel::Expanded, GranularityLevel::Detailed];

/// Fixture corpus followed by the hand-written edge queries.
pub fn all_queries() -> Vec<String> {
    let mut v: Vec<String> = super::corpus().into_iter().map(|c| c.sql).collect();
    v.extend(super::EDGE_QUERIES.iter().map(|s| s.to_string()));
    v
}

pub fn ours(sql: &str) -> Result<[Skeleton; 3], String> {
    let tree = parse_query(&SqlQuery::new(sql)).map_err(|e| format!("{sql}: {e}"))?;
    Ok(LEVELS.map(|l| extract_skeleton(&tree, l)))
}

fn collect(errors: Vec<String>, ok: String) -> Result<String, String> {
    match errors.len() {
        0 => Ok(ok),
        n => Err(format!("{n} failures, first: {}", errors[0])),
    }
}

/// The corpus spans joins, set operations, aggregates and depths 0 to 2.
pub fn check_corpus_shape() -> Result<String, String> {
    let corpus = super::corpus();
    if corpus.len() < 100 {
        return Err(format!("only {} corpus queries", corpus.len()));
    }
    let mut depths = Vec::new();
    for c in &corpus {
        depths.push(super::oracle::extract(&c.sql)?.depth);
    }
    let mut missing: Vec<String> = (0..=2).filter(|d| !depths.contains(d)).map(|d| format!("depth {d}")).collect();
    let upper: Vec<String> = corpus.iter().map(|c| c.sql.to_uppercase()).collect();
    for needle in ["JOIN", "UNION", "INTERSECT", "EXCEPT", "COUNT(", "AVG(", "GROUP BY"] {
        if !upper.iter().any(|s| s.contains(needle)) {
            missing.push(needle.to_string());
        }
    }
    if missing.is_empty() {
        Ok(format!("{} corpus queries", corpus.len()))
    } else {
        Err(format!("corpus lacks {}", missing.join(", ")))
    }
}

/// Byte equality with the oracle at every level plus the refinement chain.
pub fn check_oracle_equivalence(queries: &[String]) -> Result<String, String> {
    let mut errors = Vec::new();
    for sql in queries {
        let o = match super::oracle::extract(sql) {
            Ok(o) => o,
            Err(e) => {
                errors.push(format!("oracle rejects {sql}: {e}"));
                continue;
            }
        };
        let [b, e, d] = ours(sql)?;
        for (level, got, want) in [("base", b.text(), &o.base), ("expanded", e.text(), &o.expanded), ("detailed", d.text(), &o.detailed)] {
            if got != want {
                errors.push(format!("{sql} at {level}: got {got}, want {want}"));
            }
        }
        for (lo, hi) in [(&b, &e), (&e, &d), (&b, &d)] {
            if !matches!(refinement_check(lo, hi), Ok(true)) {
                errors.push(format!("{sql}: {} does not refine into {}", lo.text(), hi.text()));
            }
        }
    }
    collect(errors, format!("{} queries x 3 levels", queries.len()))
}

/// Base skeletons are flat; Expanded and Detailed keep the query's nesting depth.
pub fn check_depth_law(queries: &[String]) -> Result<String, String> {
    let mut errors = Vec::new();
    for sql in queries {
        let tree = parse_query(&SqlQuery::new(sql)).map_err(|e| format!("{sql}: {e}"))?;
        let want = super::oracle::extract(sql)?.depth;
        let [b, e, d] = ours(sql)?;
        let got = [nesting_depth(&tree), b.nesting_depth(), e.nesting_depth(), d.nesting_depth()];
        if got != [want, 0, want, want] {
            errors.push(format!("{sql}: depths {got:?}, oracle depth {want}"));
        }
    }
    collect(errors, format!("{} queries", queries.len()))
}

/// normalize(s, L) is extraction at L, and normalizing its output changes nothing.
pub fn check_normalizer(queries: &[String]) -> Result<String, String> {
    let mut errors = Vec::new();
    for sql in queries {
        for (level, want) in LEVELS.into_iter().zip(ours(sql)?) {
            let report = normalize(sql, level);
            let Some(got) = report.skeleton else {
                errors.push(format!("{sql} rejected at {level}: {:?}", report.message));
                continue;
            };
            if got != want {
                errors.push(format!("{sql} at {level}: {} != {}", got.text(), want.text()));
                continue;
            }
            let again = normalize(got.text(), level);
            if again.outcome != Outcome::Accepted || again.skeleton.as_ref() != Some(&got) {
                errors.push(format!("{} at {level} is not a fixed point", got.text()));
            }
        }
    }
    collect(errors, format!("{} queries x 3 levels", queries.len()))
}
