//! Embedded relational store.
//!
//! Tables are schemas (ordered column names) over sets of rows; a row cell is
//! a string or the null marker. The store supports the query/update/undo
//! contract the repair trees need: violation queries over constraint bodies,
//! transactional updates whose deletions are snapshotted row by row, and an
//! undo log that restores the prior state exactly.
//!
//! A `Database` is single-writer: `update`/`undo`/`find_violations` on one
//! instance must be externally serialized. Cloning yields an independent
//! snapshot for use by another worker.

pub mod sql;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Aic, AtomPattern, Literal, RuleInstance, Term, UpdateSet};

/// A cell value: a string or the null marker (serialized as JSON `null`).
pub type Value = Option<String>;

pub type Row = Vec<Value>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown table `{table}`")]
    UnknownTable { table: String },
    #[error("unknown column `{column}` in table `{table}`")]
    UnknownColumn { table: String, column: String },
    #[error("duplicate table `{table}`")]
    DuplicateTable { table: String },
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("row in table `{table}` has {found} entries, schema has {expected}")]
    ArityMismatch { table: String, expected: usize, found: usize },
    #[error("update rejected: action set is inconsistent")]
    InconsistentUpdate,
    #[error("update rejected: action `{action}` is not closed")]
    OpenAction { action: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid database file: {0}")]
    Json(#[from] serde_json::Error),
}

/// A schema-compatibility diagnostic, one per unknown table or column.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CompatIssue {
    UnknownTable { table: String },
    UnknownColumn { table: String, column: String },
}

impl fmt::Display for CompatIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompatIssue::UnknownTable { table } => write!(f, "unknown table `{table}`"),
            CompatIssue::UnknownColumn { table, column } => {
                write!(f, "unknown column `{column}` in table `{table}`")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    schema: Vec<String>,
    rows: BTreeSet<Row>,
}

impl Table {
    pub fn schema(&self) -> &[String] {
        &self.schema
    }

    pub fn rows(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column_index(&self, name: &str, column: &str) -> Result<usize, StoreError> {
        self.schema
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| StoreError::UnknownColumn {
                table: name.to_string(),
                column: column.to_string(),
            })
    }
}

/// One reversible step of an executed update.
#[derive(Clone, Debug)]
enum UndoEntry {
    Inserted {
        table: String,
        row: Row,
        was_present: bool,
    },
    Deleted {
        table: String,
        rows: Vec<Row>,
    },
}

/// Replaying the log backwards restores the database state that existed
/// before the `update` call that produced it.
#[derive(Clone, Debug, Default)]
pub struct UndoLog {
    entries: Vec<UndoEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    tables: BTreeMap<String, Table>,
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
}

/// Table entries in file order, so duplicate table names can be reported
/// instead of silently collapsed.
struct DbFile(Vec<(String, TableFile)>);

impl<'de> Deserialize<'de> for DbFile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct FileVisitor;
        impl<'de> serde::de::Visitor<'de> for FileVisitor {
            type Value = DbFile;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a map from table names to table objects")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> Result<DbFile, A::Error> {
                let mut entries = Vec::new();
                while let Some((name, table)) = map.next_entry::<String, TableFile>()? {
                    entries.push((name, table));
                }
                Ok(DbFile(entries))
            }
        }
        deserializer.deserialize_map(FileVisitor)
    }
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    pub fn add_table(
        &mut self,
        name: impl Into<String>,
        columns: Vec<String>,
    ) -> Result<(), StoreError> {
        let name = name.into();
        if self.tables.contains_key(&name) {
            return Err(StoreError::DuplicateTable { table: name });
        }
        let mut seen = BTreeSet::new();
        for column in &columns {
            if !seen.insert(column.clone()) {
                return Err(StoreError::DuplicateColumn {
                    table: name,
                    column: column.clone(),
                });
            }
        }
        self.tables.insert(name, Table { schema: columns, rows: BTreeSet::new() });
        Ok(())
    }

    /// Inserts a full row; returns false when an identical row was already
    /// present (rows form a set).
    pub fn insert_row(&mut self, table: &str, row: Row) -> Result<bool, StoreError> {
        let t = self
            .tables
            .get_mut(table)
            .ok_or_else(|| StoreError::UnknownTable { table: table.to_string() })?;
        if row.len() != t.schema.len() {
            return Err(StoreError::ArityMismatch {
                table: table.to_string(),
                expected: t.schema.len(),
                found: row.len(),
            });
        }
        Ok(t.rows.insert(row))
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &Table)> {
        self.tables.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// A copy containing only the named tables.
    pub fn restricted(&self, keep: &BTreeSet<String>) -> Database {
        Database {
            tables: self
                .tables
                .iter()
                .filter(|(n, _)| keep.contains(*n))
                .map(|(n, t)| (n.clone(), t.clone()))
                .collect(),
        }
    }

    /// Checks that every table and column mentioned by the constraints
    /// exists; the result is empty exactly when they all do.
    pub fn aics_compatible(&self, aics: &[Aic]) -> Vec<CompatIssue> {
        let mut issues = BTreeSet::new();
        let mut check_atom = |atom: &AtomPattern| match self.tables.get(atom.table()) {
            None => {
                issues.insert(CompatIssue::UnknownTable { table: atom.table().to_string() });
            }
            Some(table) => {
                for column in atom.bindings().keys() {
                    if !table.schema.contains(column) {
                        issues.insert(CompatIssue::UnknownColumn {
                            table: atom.table().to_string(),
                            column: column.clone(),
                        });
                    }
                }
            }
        };
        for aic in aics {
            for literal in aic.body() {
                check_atom(&literal.atom);
            }
            for action in aic.head() {
                check_atom(&action.atom);
            }
        }
        issues.into_iter().collect()
    }

    /// True when some row matches the closed pattern.
    pub fn holds(&self, atom: &AtomPattern) -> Result<bool, StoreError> {
        let table = self
            .tables
            .get(atom.table())
            .ok_or_else(|| StoreError::UnknownTable { table: atom.table().to_string() })?;
        let resolved = resolve_closed(table, atom)?;
        Ok(table.rows.iter().any(|row| row_matches(row, &resolved)))
    }

    /// Entailment of a closed literal: a positive literal holds when some
    /// row matches its pattern, a negative one when no row does.
    pub fn entails(&self, literal: &Literal) -> Result<bool, StoreError> {
        let holds = self.holds(&literal.atom)?;
        Ok(if literal.is_positive() { holds } else { !holds })
    }

    /// All closed instances of `aic` violated by the current state: one
    /// instance per substitution under which every body literal holds.
    /// Positive literals are evaluated left to right as a natural join on
    /// shared variables; negative literals as anti-joins (their variables are
    /// always bound earlier, by rule safety). Substitutions differing only on
    /// columns the constraint does not bind collapse to one instance.
    pub fn find_violations(
        &self,
        aic: &Aic,
        aic_index: usize,
    ) -> Result<Vec<RuleInstance>, StoreError> {
        let mut substs: BTreeSet<BTreeMap<String, String>> = BTreeSet::new();
        substs.insert(BTreeMap::new());
        for literal in aic.body() {
            let table = self
                .tables
                .get(literal.atom.table())
                .ok_or_else(|| StoreError::UnknownTable {
                    table: literal.atom.table().to_string(),
                })?;
            let mut resolved = Vec::new();
            for (column, term) in literal.atom.bindings() {
                resolved.push((table.column_index(literal.atom.table(), column)?, term));
            }
            let mut next = BTreeSet::new();
            if literal.is_positive() {
                for subst in &substs {
                    for row in &table.rows {
                        if let Some(extended) = extend_match(row, &resolved, subst) {
                            next.insert(extended);
                        }
                    }
                }
            } else {
                for subst in &substs {
                    let matched = table.rows.iter().any(|row| {
                        extend_match(row, &resolved, subst)
                            .map(|e| e == *subst)
                            .unwrap_or(false)
                    });
                    if !matched {
                        next.insert(subst.clone());
                    }
                }
            }
            substs = next;
            if substs.is_empty() {
                break;
            }
        }
        Ok(substs
            .into_iter()
            .map(|s| RuleInstance::new(aic, aic_index, s))
            .collect())
    }

    /// True when some extension of `seed` satisfies every body literal,
    /// except that literals whose instantiation equals `exception` count as
    /// satisfied (the set-minus of the residual-body definition removes
    /// every occurrence, including ones only unifiable with it). Used by
    /// founded validation, where the supported action has already falsified
    /// its own dual.
    pub(crate) fn body_satisfiable(
        &self,
        body: &[Literal],
        seed: &BTreeMap<String, String>,
        exception: Option<&Literal>,
    ) -> Result<bool, StoreError> {
        let mut substs: BTreeSet<BTreeMap<String, String>> = BTreeSet::new();
        substs.insert(seed.clone());
        for literal in body {
            let table = self
                .tables
                .get(literal.atom.table())
                .ok_or_else(|| StoreError::UnknownTable {
                    table: literal.atom.table().to_string(),
                })?;
            let mut resolved = Vec::new();
            for (column, term) in literal.atom.bindings() {
                resolved.push((table.column_index(literal.atom.table(), column)?, term));
            }
            let mut next = BTreeSet::new();
            for subst in &substs {
                if let Some(excluded) =
                    exception.and_then(|e| unify_with_closed(literal, e, subst))
                {
                    next.insert(excluded);
                }
                if literal.is_positive() {
                    for row in &table.rows {
                        if let Some(extended) = extend_match(row, &resolved, subst) {
                            next.insert(extended);
                        }
                    }
                } else {
                    let matched = table.rows.iter().any(|row| {
                        extend_match(row, &resolved, subst)
                            .map(|e| e == *subst)
                            .unwrap_or(false)
                    });
                    if !matched {
                        next.insert(subst.clone());
                    }
                }
            }
            substs = next;
            if substs.is_empty() {
                return Ok(false);
            }
        }
        Ok(!substs.is_empty())
    }

    /// Applies a consistent set of closed actions: all inserts first
    /// (materialized with null fill; re-inserting an existing row is a
    /// no-op), then each delete removes every row matching its pattern,
    /// snapshotting them into the returned log. Nothing is mutated if the
    /// action set is rejected.
    pub fn update(&mut self, actions: &UpdateSet) -> Result<UndoLog, StoreError> {
        for action in actions.iter() {
            if !action.is_closed() {
                return Err(StoreError::OpenAction { action: action.to_string() });
            }
        }
        if !actions.is_consistent() {
            return Err(StoreError::InconsistentUpdate);
        }
        // Validate every touched table and column before the first mutation.
        for action in actions.iter() {
            let table = self.tables.get(action.atom.table()).ok_or_else(|| {
                StoreError::UnknownTable { table: action.atom.table().to_string() }
            })?;
            for column in action.atom.bindings().keys() {
                table.column_index(action.atom.table(), column)?;
            }
        }
        let mut log = UndoLog::default();
        for action in actions.iter().filter(|a| a.kind == crate::model::ActionKind::Insert) {
            let name = action.atom.table().to_string();
            let table = self.tables.get_mut(&name).unwrap();
            let row: Row = table
                .schema
                .iter()
                .map(|col| {
                    action
                        .atom
                        .bindings()
                        .get(col)
                        .and_then(|t| t.as_const())
                        .map(str::to_string)
                })
                .collect();
            let was_present = !table.rows.insert(row.clone());
            log.entries.push(UndoEntry::Inserted { table: name, row, was_present });
        }
        for action in actions.iter().filter(|a| a.kind == crate::model::ActionKind::Delete) {
            let name = action.atom.table().to_string();
            let table = self.tables.get_mut(&name).unwrap();
            let resolved = resolve_closed(table, &action.atom)?;
            let removed: Vec<Row> = table
                .rows
                .iter()
                .filter(|row| row_matches(row, &resolved))
                .cloned()
                .collect();
            for row in &removed {
                table.rows.remove(row);
            }
            log.entries.push(UndoEntry::Deleted { table: name, rows: removed });
        }
        Ok(log)
    }

    /// Restores the state that preceded the `update` call that produced
    /// `log`. The database must currently be in that call's post-state.
    pub fn undo(&mut self, log: UndoLog) {
        for entry in log.entries.into_iter().rev() {
            match entry {
                UndoEntry::Inserted { table, row, was_present } => {
                    if !was_present {
                        self.tables.get_mut(&table).expect("table existed").rows.remove(&row);
                    }
                }
                UndoEntry::Deleted { table, rows } => {
                    let t = self.tables.get_mut(&table).expect("table existed");
                    t.rows.extend(rows);
                }
            }
        }
    }

    pub fn from_json_str(text: &str) -> Result<Database, StoreError> {
        let DbFile(entries) = serde_json::from_str(text)?;
        let mut db = Database::new();
        for (name, file) in entries {
            db.add_table(name.clone(), file.columns)?;
            for row in file.rows {
                db.insert_row(&name, row)?;
            }
        }
        Ok(db)
    }

    /// Deterministic rendering: tables and rows in sorted order.
    pub fn to_json_string(&self) -> String {
        let files: BTreeMap<&String, TableFile> = self
            .tables
            .iter()
            .map(|(name, table)| {
                (
                    name,
                    TableFile {
                        columns: table.schema.clone(),
                        rows: table.rows.iter().cloned().collect(),
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&files).expect("database serialization cannot fail")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Database, StoreError> {
        Database::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        Ok(std::fs::write(path, self.to_json_string() + "\n")?)
    }
}

fn resolve_closed<'a>(
    table: &Table,
    atom: &'a AtomPattern,
) -> Result<Vec<(usize, &'a str)>, StoreError> {
    atom.bindings()
        .iter()
        .map(|(column, term)| {
            let idx = table.column_index(atom.table(), column)?;
            let value = term
                .as_const()
                .unwrap_or_else(|| panic!("pattern {atom} is not closed"));
            Ok((idx, value))
        })
        .collect()
}

fn row_matches(row: &[Value], resolved: &[(usize, &str)]) -> bool {
    resolved
        .iter()
        .all(|&(idx, value)| row[idx].as_deref() == Some(value))
}

/// Extends `subst` so that `literal` instantiates exactly to the closed
/// literal `target`, if possible: same polarity, table and column set,
/// constants equal, variables bound consistently.
fn unify_with_closed(
    literal: &Literal,
    target: &Literal,
    subst: &BTreeMap<String, String>,
) -> Option<BTreeMap<String, String>> {
    if literal.polarity != target.polarity
        || literal.atom.table() != target.atom.table()
        || literal.atom.bindings().len() != target.atom.bindings().len()
    {
        return None;
    }
    let mut extended = subst.clone();
    for (column, term) in literal.atom.bindings() {
        let value = target.atom.bindings().get(column)?.as_const()?;
        match term {
            Term::Const(c) => {
                if c != value {
                    return None;
                }
            }
            Term::Var(name) => match extended.get(name) {
                Some(bound) if bound != value => return None,
                Some(_) => {}
                None => {
                    extended.insert(name.clone(), value.to_string());
                }
            },
        }
    }
    Some(extended)
}

/// Matches a row against a partially-substituted pattern, returning the
/// substitution extended with any newly bound variables. Null cells match
/// nothing: neither constants nor variables.
fn extend_match(
    row: &[Value],
    resolved: &[(usize, &Term)],
    subst: &BTreeMap<String, String>,
) -> Option<BTreeMap<String, String>> {
    let mut fresh: Vec<(&str, &str)> = Vec::new();
    for &(idx, term) in resolved {
        let cell = row[idx].as_deref()?;
        match term {
            Term::Const(c) => {
                if cell != c {
                    return None;
                }
            }
            Term::Var(name) => {
                let bound = subst
                    .get(name)
                    .map(String::as_str)
                    .or_else(|| fresh.iter().find(|(n, _)| n == name).map(|&(_, v)| v));
                match bound {
                    Some(v) if v != cell => return None,
                    Some(_) => {}
                    None => fresh.push((name, cell)),
                }
            }
        }
    }
    let mut extended = subst.clone();
    for (name, value) in fresh {
        extended.insert(name.to_string(), value.to_string());
    }
    Some(extended)
}
