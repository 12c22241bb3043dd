use super::*;

fn tree(sql: &str) -> ClauseTree {
    parse_query(&SqlQuery::new(sql)).unwrap_or_else(|e| panic!("{sql}: {e}"))
}

fn text(sql: &str, level: GranularityLevel) -> String {
    extract_skeleton(&tree(sql), level).text().to_string()
}

use GranularityLevel::*;

#[test]
fn minimal_query_has_two_clauses() {
    let t = tree("SELECT a FROM t");
    let kws: Vec<_> = t.clauses().iter().map(|c| c.keyword).collect();
    assert_eq!(kws, vec![ClauseKeyword::Select, ClauseKeyword::From]);
    assert_eq!(t.nesting_depth(), 0);
}

#[test]
fn where_clause_holds_nested_query() {
    let t = tree("SELECT a FROM t WHERE b IN (SELECT c FROM u)");
    let clauses = t.clauses();
    assert_eq!(clauses[2].keyword, ClauseKeyword::Where);
    assert_eq!(clauses[2].nested.len(), 1);
    assert_eq!(clauses[2].nested[0].depth, 1);
}

#[test]
fn level_examples() {
    assert_eq!(text("SELECT a FROM t WHERE b > 1", Base), "SELECT _ FROM _ WHERE _");
    assert_eq!(text("SELECT a FROM t WHERE b IN (SELECT c FROM u GROUP BY c)", Expanded), "SELECT _ FROM _ WHERE _ IN ( SELECT _ FROM _ GROUP BY _ )");
    assert_eq!(text("SELECT x.a FROM x JOIN y ON x.k = y.k", Detailed), "SELECT [col] FROM [tab] JOIN [tab] ON [col] = [col]");
}

#[test]
fn compound_queries_stay_flat_at_base() {
    let sql = "SELECT a FROM t UNION SELECT b FROM u ORDER BY 1";
    assert_eq!(text(sql, Base), "_ UNION _ ORDER BY _");
    assert_eq!(text(sql, Expanded), "SELECT _ FROM _ UNION SELECT _ FROM _ ORDER BY _");
    assert_eq!(tree(sql).nesting_depth(), 0);
}

#[test]
fn aggregates_and_scalar_slots() {
    assert_eq!(
        text("SELECT COUNT(*), SUM(a * b), MAX(DISTINCT c) FROM t GROUP BY d HAVING COUNT(*) > 2", Detailed),
        "SELECT [agg] ( [col] ) , [agg] ( [val] ) , [agg] ( DISTINCT [col] ) FROM [tab] GROUP BY [col] HAVING [agg] ( [col] ) > [val]"
    );
    assert_eq!(text("SELECT CASE WHEN a > 1 THEN 'x' ELSE 'y' END, CAST(b AS REAL) / 2 FROM t", Detailed), "SELECT [val] , [val] FROM [tab]");
}

#[test]
fn scalar_with_subquery_keeps_nested_query() {
    let sql = "SELECT CAST((SELECT COUNT(*) FROM u) AS REAL) * 100 / (SELECT COUNT(*) FROM t) FROM t LIMIT 1";
    assert_eq!(text(sql, Expanded), "SELECT ( SELECT _ FROM _ ) * _ / ( SELECT _ FROM _ ) FROM _ LIMIT _");
    assert_eq!(tree(sql).nesting_depth(), 1);
}

#[test]
fn depth_counts_nested_subqueries() {
    let sql = "SELECT a FROM t WHERE b IN (SELECT c FROM u WHERE d > (SELECT AVG(d) FROM u))";
    assert_eq!(tree(sql).nesting_depth(), 2);
    let ex = extract_skeleton(&tree(sql), Expanded);
    assert_eq!(ex.nesting_depth(), 2);
    assert_eq!(ex.truncate(1).text(), "SELECT _ FROM _ WHERE _ IN ( SELECT _ FROM _ WHERE _ )");
    assert_eq!(extract_skeleton(&tree(sql), Base).nesting_depth(), 0);
}

#[test]
fn refinement_examples() {
    let c = Skeleton::parse("SELECT _ FROM _", Base).unwrap();
    let f = Skeleton::parse("SELECT [col] FROM [tab]", Detailed).unwrap();
    assert!(refinement_check(&c, &f).unwrap());
    let c = Skeleton::parse("SELECT _ FROM _ WHERE _", Base).unwrap();
    let f = Skeleton::parse("SELECT _ FROM _ GROUP BY _", Expanded).unwrap();
    assert!(!refinement_check(&c, &f).unwrap());
    assert!(refinement_check(&f.coarsen(Expanded).unwrap(), &f).unwrap());
    let d = Skeleton::parse("SELECT [col] FROM [tab]", Detailed).unwrap();
    assert!(refinement_check(&d, &c).is_err());
}

#[test]
fn joinless_detail_refines_into_joined_detail() {
    let t = tree("SELECT a FROM x JOIN y ON x.k = y.k WHERE y.b = 1");
    let d = extract_skeleton(&t, Detailed);
    let step1 = d.without_joins();
    assert_eq!(step1.text(), "SELECT [col] FROM [tab] , [tab] WHERE [col] = [val]");
    assert!(refinement_check(&step1, &d).unwrap());
    assert!(refinement_check(&extract_skeleton(&t, Expanded), &step1).unwrap());
}

#[test]
fn derived_tables_keep_join_shape_when_expanded() {
    let sql = "SELECT a FROM x JOIN (SELECT k FROM y GROUP BY k) AS z ON x.k = z.k, w";
    assert_eq!(text(sql, Expanded), "SELECT _ FROM _ JOIN ( SELECT _ FROM _ GROUP BY _ ) ON _ , _");
    let d = extract_skeleton(&tree(sql), Detailed);
    assert!(refinement_check(&extract_skeleton(&tree(sql), Expanded), &d.without_joins()).unwrap());
}

#[test]
fn canonical_text_round_trips() {
    for sql in [
        "SELECT a FROM t WHERE NOT EXISTS (SELECT 1 FROM u WHERE u.a = t.a) AND b NOT IN (1, 2)",
        "WITH c AS (SELECT a FROM t) SELECT COUNT(*) FROM c LEFT JOIN d USING (a) ORDER BY 1 DESC LIMIT 3 OFFSET 1",
        "SELECT a FROM t WHERE (a = 1 OR b IS NOT NULL) AND c BETWEEN 1 AND 5 AND d LIKE 'x%'",
    ] {
        for level in GranularityLevel::ALL {
            let s = extract_skeleton(&tree(sql), level);
            let back = Skeleton::parse(s.text(), level).unwrap_or_else(|e| panic!("{}: {e}", s.text()));
            assert_eq!(back.tree(), s.tree());
        }
    }
}

#[test]
fn serde_round_trip() {
    let s = extract_skeleton(&tree("SELECT a FROM t WHERE b IN (SELECT c FROM u)"), Expanded);
    let json = serde_json::to_string(&s).unwrap();
    let back: Skeleton = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.nesting_depth(), 1);
}
