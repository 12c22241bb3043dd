//! Reduction of a database profile to the tables and columns a gold query touches.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};

use super::SftError;
use crate::schema::DatabaseProfile;
use crate::skeleton::walk::{walk_query, Node};
use crate::sql::ast::{Expr, Name, Operand, SelectItem, TableFactor};
use crate::sql::{parse_statement, LexMode};

type Keep = BTreeSet<(usize, usize)>;

struct Resolver<'a> {
    profile: &'a DatabaseProfile,
    /// Lower-cased table name or alias -> table index.
    scope: HashMap<String, usize>,
    /// Lower-cased names that qualify derived tables or CTEs.
    opaque: HashSet<String>,
    /// Lower-cased output aliases and CTE column names.
    aliases: HashSet<String>,
    tables: BTreeSet<usize>,
}

impl Resolver<'_> {
    fn column(&self, t: usize, name: &str) -> Option<usize> {
        self.profile.tables[t].columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    fn resolve(&self, table: Option<&str>, name: &str, keep: &mut Keep) -> Result<(), SftError> {
        let missing = || SftError::UnresolvedReference(table.map_or(name.to_string(), |t| format!("{t}.{name}")));
        match table.map(str::to_ascii_lowercase) {
            Some(q) if self.opaque.contains(&q) => Ok(()),
            Some(q) => {
                let t = *self.scope.get(&q).ok_or_else(missing)?;
                let c = self.column(t, name).ok_or_else(missing)?;
                keep.insert((t, c));
                Ok(())
            }
            None => {
                let hits: Vec<(usize, usize)> = self.tables.iter().filter_map(|&t| self.column(t, name).map(|c| (t, c))).collect();
                if hits.is_empty() && !self.aliases.contains(&name.to_ascii_lowercase()) {
                    return Err(missing());
                }
                keep.extend(hits);
                Ok(())
            }
        }
    }
}

/// Keeps the tables and columns referenced by `gold_sql`, plus primary keys and
/// the foreign keys linking kept tables.
pub fn prune_demonstration_schema(profile: &DatabaseProfile, gold_sql: &str) -> Result<DatabaseProfile, SftError> {
    let q = parse_statement(gold_sql.trim().trim_end_matches(';'), LexMode::Sql).map_err(|e| SftError::Parse(e.to_string()))?;
    let table_index = |name: &str| profile.tables.iter().position(|t| t.name.eq_ignore_ascii_case(name));

    let mut r = Resolver { profile, scope: HashMap::new(), opaque: HashSet::new(), aliases: HashSet::new(), tables: BTreeSet::new() };
    let columns: RefCell<Vec<(Option<String>, String)>> = RefCell::new(Vec::new());
    let wildcards: RefCell<Vec<Option<String>>> = RefCell::new(Vec::new());
    let nodes = RefCell::new(Vec::new());
    walk_query(
        &q,
        &mut |e| {
            if let Expr::Column { table, name } = e {
                columns.borrow_mut().push((table.clone(), name.clone()));
            }
        },
        &mut |n| nodes.borrow_mut().push(n),
    );
    let ctes: HashSet<String> = nodes
        .borrow()
        .iter()
        .filter_map(|n| match n {
            Node::Cte(c) => match &c.name {
                Name::Ident(s) => Some(s.to_ascii_lowercase()),
                Name::Placeholder(_) => None,
            },
            _ => None,
        })
        .collect();
    for n in nodes.borrow().iter() {
        match n {
            Node::Factor(TableFactor::Table { name, alias }) => {
                let lower = name.to_ascii_lowercase();
                if ctes.contains(&lower) {
                    r.opaque.insert(lower);
                    if let Some(a) = alias {
                        r.opaque.insert(a.to_ascii_lowercase());
                    }
                    continue;
                }
                let t = table_index(name).ok_or_else(|| SftError::UnresolvedReference(name.clone()))?;
                r.tables.insert(t);
                r.scope.insert(lower, t);
                if let Some(a) = alias {
                    r.scope.insert(a.to_ascii_lowercase(), t);
                }
            }
            Node::Factor(TableFactor::Derived { alias: Some(a), .. }) => {
                r.opaque.insert(a.to_ascii_lowercase());
            }
            Node::Cte(c) => {
                r.aliases.extend(c.columns.iter().map(|s| s.to_ascii_lowercase()));
            }
            Node::Operand(Operand::Select(s)) => {
                for item in &s.items {
                    match item {
                        SelectItem::Expr { alias: Some(a), .. } => {
                            r.aliases.insert(a.to_ascii_lowercase());
                        }
                        SelectItem::Wildcard => wildcards.borrow_mut().push(None),
                        SelectItem::QualifiedWildcard(t) => wildcards.borrow_mut().push(Some(t.clone())),
                        SelectItem::Expr { .. } => {}
                    }
                }
            }
            Node::Using(Name::Ident(c)) => columns.borrow_mut().push((None, c.clone())),
            _ => {}
        }
    }
    // Derived-table outputs may be referenced unqualified by their bare column names.
    if !r.opaque.is_empty() {
        r.aliases.extend(columns.borrow().iter().filter(|(t, _)| t.is_some()).map(|(_, c)| c.to_ascii_lowercase()));
    }

    let mut keep = Keep::new();
    for (table, name) in columns.borrow().iter() {
        r.resolve(table.as_deref(), name, &mut keep)?;
    }
    for w in wildcards.borrow().iter() {
        let targets: Vec<usize> = match w {
            Some(q) if r.opaque.contains(&q.to_ascii_lowercase()) => Vec::new(),
            Some(q) => vec![*r.scope.get(&q.to_ascii_lowercase()).ok_or_else(|| SftError::UnresolvedReference(format!("{q}.*")))?],
            None => r.tables.iter().copied().collect(),
        };
        for t in targets {
            keep.extend((0..profile.tables[t].columns.len()).map(|c| (t, c)));
        }
    }
    for &t in &r.tables {
        for (c, col) in profile.tables[t].columns.iter().enumerate() {
            if col.primary_key {
                keep.insert((t, c));
            }
        }
    }
    let kept_name = |name: &str| table_index(name).filter(|t| r.tables.contains(t));
    let foreign_keys: Vec<_> =
        profile.foreign_keys.iter().filter(|fk| kept_name(&fk.from_table).is_some() && kept_name(&fk.to_table).is_some()).cloned().collect();
    for fk in &foreign_keys {
        for (table, col) in [(&fk.from_table, &fk.from_column), (&fk.to_table, &fk.to_column)] {
            let t = kept_name(table).expect("filtered above");
            if let Some(c) = r.column(t, col) {
                keep.insert((t, c));
            }
        }
    }

    let tables = r
        .tables
        .iter()
        .map(|&t| {
            let mut table = profile.tables[t].clone();
            table.columns = table.columns.into_iter().enumerate().filter(|(c, _)| keep.contains(&(t, *c))).map(|(_, col)| col).collect();
            table
        })
        .collect();
    Ok(DatabaseProfile { db_id: profile.db_id.clone(), tables, foreign_keys, path: profile.path.clone() })
}
