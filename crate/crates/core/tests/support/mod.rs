#![allow(dead_code)]

pub mod model;
pub mod oracle;
pub mod replay;
pub mod scenarios;
pub mod sft;
pub mod skeletons;
pub mod voting;

use std::path::PathBuf;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn profile(db_id: &str) -> leafsql_core::schema::DatabaseProfile {
    let path = fixtures().join("db").join(db_id).join(format!("{db_id}.sqlite"));
    leafsql_core::schema::DatabaseProfile::load(db_id, &path).expect("fixture database")
}

pub struct CorpusItem {
    pub id: u64,
    pub db_id: String,
    pub sql: String,
    pub difficulty: String,
}

pub fn corpus() -> Vec<CorpusItem> {
    let text = std::fs::read_to_string(fixtures().join("corpus.json")).expect("corpus.json");
    let raw: Vec<serde_json::Value> = serde_json::from_str(&text).expect("corpus json");
    raw.iter()
        .map(|v| CorpusItem {
            id: v["question_id"].as_u64().unwrap(),
            db_id: v["db_id"].as_str().unwrap().to_string(),
            sql: v["SQL"].as_str().unwrap().to_string(),
            difficulty: v["difficulty"].as_str().unwrap().to_string(),
        })
        .collect()
}

/// Constructs the corpus exercises rarely; never executed, only extracted.
pub const EDGE_QUERIES: &[&str] = &[
    "SELECT a FROM t LIMIT 5 OFFSET 10",
    "SELECT a FROM t LIMIT 5 OFFSET (SELECT COUNT(*) FROM u)",
    "SELECT a + (SELECT MAX(b) FROM u) FROM t",
    "SELECT CASE WHEN a > (SELECT AVG(a) FROM t) THEN 'hi' ELSE 'lo' END FROM t",
    "SELECT CASE WHEN a > 1 THEN 'hi' ELSE 'lo' END, b FROM t",
    "SELECT -(SELECT MIN(a) FROM t)",
    "SELECT CAST((SELECT SUM(a) FROM t) AS REAL) / COUNT(*) FROM u",
    "SELECT x.n FROM (SELECT COUNT(*) AS n FROM t GROUP BY c) AS x WHERE x.n > 1",
    "SELECT t.a FROM t JOIN (SELECT b FROM u WHERE c = 1) AS s ON t.a = s.b",
    "SELECT a FROM t, u WHERE t.k = u.k",
    "SELECT a FROM t LEFT JOIN u USING (k)",
    "SELECT a FROM t NATURAL JOIN u",
    "SELECT a FROM t CROSS JOIN u",
    "SELECT a FROM t WHERE b NOT BETWEEN 1 AND 5 AND c IS NOT NULL",
    "SELECT a FROM t WHERE b NOT LIKE '%x%' OR NOT (c = 1)",
    "SELECT a FROM t WHERE b IN (1, 2, (SELECT MAX(b) FROM u))",
    "SELECT a FROM t WHERE ((b = 1))",
    "SELECT a FROM t WHERE (b IN (SELECT c FROM u))",
    "SELECT COUNT(DISTINCT a), MIN(a, b), MAX(c) FROM t",
    "SELECT substr(a, 1, 2), lower(b), a || b FROM t",
    "SELECT * FROM t ORDER BY a DESC, b ASC, c",
    "SELECT t.* FROM t",
    "SELECT a FROM t GROUP BY a, b HAVING COUNT(*) > (SELECT COUNT(*) FROM u) ORDER BY COUNT(*) DESC LIMIT 1",
    "WITH s AS (SELECT a FROM t) SELECT a FROM s",
    "WITH s AS (SELECT a FROM t WHERE a IN (SELECT b FROM u)) SELECT a FROM s WHERE a > 1",
    "SELECT a FROM t UNION ALL SELECT b FROM u EXCEPT SELECT c FROM v",
    "SELECT a FROM t WHERE b = (SELECT c FROM u WHERE d IN (SELECT e FROM v WHERE f = (SELECT g FROM w)))",
    "SELECT a FROM t WHERE NOT EXISTS (SELECT 1 FROM u WHERE u.k = t.k) AND a IS NULL",
    "SELECT a, b, c FROM t WHERE a = 1 AND b = 'x' AND c > 2.5",
    "SELECT DISTINCT a FROM t ORDER BY a LIMIT 3",
];
