//! Database profiles and their M-Schema rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

/// Sample values kept per column.
pub const SAMPLE_VALUES: usize = 3;
/// Longest sample string, in characters.
pub const SAMPLE_CHARS: usize = 40;

#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("database file {0} not found")]
    Missing(PathBuf),
    #[error("sqlite error on {path}: {source}")]
    Sqlite { path: PathBuf, source: rusqlite::Error },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub col_type: String,
    pub primary_key: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

/// Schema, samples and location of one benchmark database.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseProfile {
    pub db_id: String,
    pub tables: Vec<Table>,
    pub foreign_keys: Vec<ForeignKey>,
    pub path: PathBuf,
}

impl DatabaseProfile {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Reads tables, keys and sample values from a SQLite file.
    ///
    /// Column descriptions are taken from `database_description/<table>.csv`
    /// next to the database when that directory exists.
    pub fn load(db_id: &str, path: &Path) -> Result<Self, SchemaError> {
        if !path.is_file() {
            return Err(SchemaError::Missing(path.to_path_buf()));
        }
        let wrap = |source| SchemaError::Sqlite { path: path.to_path_buf(), source };
        let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY).map_err(wrap)?;
        let descriptions = path.parent().map(|dir| load_descriptions(&dir.join("database_description"))).unwrap_or_default();

        let mut names: Vec<String> = {
            let mut stmt = conn.prepare("SELECT name FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid").map_err(wrap)?;
            let rows = stmt.query_map([], |r| r.get::<_, String>(0)).map_err(wrap)?;
            rows.collect::<Result<_, _>>().map_err(wrap)?
        };
        names.dedup();

        let mut tables = Vec::new();
        for name in &names {
            let mut stmt = conn.prepare(&format!("PRAGMA table_info({})", quote_ident(name))).map_err(wrap)?;
            let cols = stmt
                .query_map([], |r| Ok((r.get::<_, String>(1)?, r.get::<_, String>(2)?, r.get::<_, i64>(5)?)))
                .map_err(wrap)?
                .collect::<Result<Vec<_>, _>>()
                .map_err(wrap)?;
            let mut columns = Vec::new();
            for (col, ty, pk) in cols {
                let samples = sample_values(&conn, name, &col).map_err(wrap)?;
                let description = descriptions.get(&(name.to_ascii_lowercase(), col.to_ascii_lowercase())).cloned();
                columns.push(Column {
                    name: col,
                    col_type: if ty.trim().is_empty() { "ANY".into() } else { ty.to_ascii_uppercase() },
                    primary_key: pk > 0,
                    description,
                    samples,
                });
            }
            tables.push(Table { name: name.clone(), columns });
        }

        let mut foreign_keys = Vec::new();
        for name in &names {
            let mut stmt = conn.prepare(&format!("PRAGMA foreign_key_list({})", quote_ident(name))).map_err(wrap)?;
            let fks = stmt
                .query_map([], |r| Ok((r.get::<_, String>(2)?, r.get::<_, String>(3)?, r.get::<_, Option<String>>(4)?)))
                .map_err(wrap)?
                .collect::<Result<Vec<_>, _>>()
                .map_err(wrap)?;
            for (to_table, from_column, to_column) in fks {
                let from = tables.iter().find(|t| &t.name == name).and_then(|t| t.column(&from_column));
                let target = tables.iter().find(|t| t.name.eq_ignore_ascii_case(&to_table));
                let to = target.and_then(|t| match &to_column {
                    Some(c) => t.column(c),
                    None => t.columns.iter().find(|c| c.primary_key),
                });
                match (from, target, to) {
                    (Some(from), Some(target), Some(to)) => foreign_keys.push(ForeignKey {
                        from_table: name.clone(),
                        from_column: from.name.clone(),
                        to_table: target.name.clone(),
                        to_column: to.name.clone(),
                    }),
                    _ => log::warn!("{db_id}: dropping dangling foreign key {name}.{from_column} -> {to_table}"),
                }
            }
        }
        foreign_keys.sort();
        foreign_keys.dedup();

        Ok(DatabaseProfile { db_id: db_id.to_string(), tables, foreign_keys, path: path.to_path_buf() })
    }
}

pub fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn sample_values(conn: &Connection, table: &str, column: &str) -> rusqlite::Result<Vec<String>> {
    let sql = format!("SELECT DISTINCT {c} FROM {t} WHERE {c} IS NOT NULL LIMIT {n}", c = quote_ident(column), t = quote_ident(table), n = SAMPLE_VALUES);
    let mut stmt = conn.prepare(&sql)?;
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let text = match row.get_ref(0)? {
            ValueRef::Null => continue,
            ValueRef::Integer(i) => i.to_string(),
            ValueRef::Real(f) => f.to_string(),
            ValueRef::Text(t) => String::from_utf8_lossy(t).into_owned(),
            ValueRef::Blob(_) => continue,
        };
        out.push(text.chars().take(SAMPLE_CHARS).collect());
    }
    Ok(out)
}

/// Column descriptions from BIRD-style per-table CSV files, keyed by lowercase (table, column).
fn load_descriptions(dir: &Path) -> BTreeMap<(String, String), String> {
    let mut out = BTreeMap::new();
    let Ok(entries) = std::fs::read_dir(dir) else { return out };
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    for file in files {
        if file.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some(table) = file.file_stem().and_then(|s| s.to_str()).map(str::to_ascii_lowercase) else { continue };
        let Ok(bytes) = std::fs::read(&file) else { continue };
        let text = String::from_utf8_lossy(&bytes);
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
        let Ok(headers) = reader.headers().cloned() else { continue };
        let find = |name: &str| headers.iter().position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name));
        let (Some(col_idx), Some(desc_idx)) = (find("original_column_name"), find("column_description")) else { continue };
        for record in reader.records().flatten() {
            let (Some(col), Some(desc)) = (record.get(col_idx), record.get(desc_idx)) else { continue };
            let desc = desc.split_whitespace().collect::<Vec<_>>().join(" ");
            if !desc.is_empty() {
                out.insert((table.clone(), col.trim().to_ascii_lowercase()), desc);
            }
        }
    }
    out
}

/// Renders the profile in M-Schema layout.
pub fn render_mschema(profile: &DatabaseProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "【DB_ID】 {}", profile.db_id);
    out.push_str("【Schema】\n");
    for table in &profile.tables {
        let _ = writeln!(out, "# Table: {}", table.name);
        out.push_str("[\n");
        let lines: Vec<String> = table
            .columns
            .iter()
            .map(|c| {
                let mut parts = vec![format!("{}:{}", c.name, c.col_type)];
                if c.primary_key {
                    parts.push("Primary Key".into());
                }
                if let Some(d) = &c.description {
                    parts.push(d.clone());
                }
                if !c.samples.is_empty() {
                    parts.push(format!("Examples: [{}]", c.samples.join(", ")));
                }
                format!("({})", parts.join(", "))
            })
            .collect();
        out.push_str(&lines.join(",\n"));
        if !lines.is_empty() {
            out.push('\n');
        }
        out.push_str("]\n");
    }
    if !profile.foreign_keys.is_empty() {
        out.push_str("【Foreign keys】\n");
        for fk in &profile.foreign_keys {
            let _ = writeln!(out, "{}.{}={}.{}", fk.from_table, fk.from_column, fk.to_table, fk.to_column);
        }
    }
    out
}

/// Creates (or replaces) a SQLite database from a SQL script.
pub fn create_database(path: &Path, script: &str) -> rusqlite::Result<()> {
    if path.exists() {
        let _ = std::fs::remove_file(path);
    }
    let conn = Connection::open(path)?;
    conn.execute_batch(script)
}
