//! Brute-force reference for desk-scale instances.
//!
//! Candidate update sets are enumerated over a finite active domain and the
//! declarative definitions are tested directly, with no code shared with the
//! tree construction. This is the ground truth the property tests compare
//! the trees against; it is exponential and refuses instances over budget
//! rather than truncating silently.
//!
//! The active domain collects every atom a tree construction can touch: the
//! database rows plus every closed instantiation of a body literal pattern
//! over the constants of the database and the constraints (head patterns
//! reuse body shapes, so their instantiations are included). Atoms outside
//! it cannot make a rule instance fire, so closedness checks restricted to
//! the active domain decide the full condition.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::datastore::{Database, Value};
use crate::model::{ActionKind, Aic, AtomPattern, Literal, Term, UpdateAction, UpdateSet};
use crate::repair::RepairKind;

#[derive(Clone, Copy, Debug)]
pub struct OracleLimits {
    /// Largest active domain the enumeration will accept.
    pub max_atoms: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits { max_atoms: 12 }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(
        "active domain has {atoms} atoms, over the enumeration budget of {limit}; \
         the oracle refuses rather than truncate"
    )]
    ActiveDomainTooLarge { atoms: usize, limit: usize },
}

/// Independent row storage; the constraints must be schema-compatible with
/// the database this snapshot came from.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Snapshot {
    tables: BTreeMap<String, (Vec<String>, BTreeSet<Vec<Value>>)>,
}

impl Snapshot {
    fn of(db: &Database) -> Snapshot {
        Snapshot {
            tables: db
                .tables()
                .map(|(name, table)| {
                    (
                        name.to_string(),
                        (table.schema().to_vec(), table.rows().cloned().collect()),
                    )
                })
                .collect(),
        }
    }

    fn columns<'a>(&'a self, atom: &AtomPattern) -> (&'a Vec<String>, &'a BTreeSet<Vec<Value>>) {
        let (schema, rows) = self
            .tables
            .get(atom.table())
            .expect("constraints are schema-compatible");
        (schema, rows)
    }

    fn matches(schema: &[String], row: &[Value], atom: &AtomPattern) -> bool {
        atom.bindings().iter().all(|(column, term)| {
            let idx = schema
                .iter()
                .position(|c| c == column)
                .expect("constraints are schema-compatible");
            row[idx].as_deref() == term.as_const()
        })
    }

    fn holds(&self, atom: &AtomPattern) -> bool {
        let (schema, rows) = self.columns(atom);
        rows.iter().any(|row| Self::matches(schema, row, atom))
    }

    fn entails(&self, literal: &Literal) -> bool {
        self.holds(&literal.atom) == literal.is_positive()
    }

    /// `I ∘ U`: inserts unioned in (null-filled), delete patterns removed.
    fn apply(&self, updates: &UpdateSet) -> Snapshot {
        let mut next = self.clone();
        for action in updates.iter() {
            let (schema, rows) = next
                .tables
                .get_mut(action.atom.table())
                .expect("constraints are schema-compatible");
            match action.kind {
                ActionKind::Insert => {
                    let row: Vec<Value> = schema
                        .iter()
                        .map(|c| {
                            action
                                .atom
                                .bindings()
                                .get(c)
                                .and_then(|t| t.as_const())
                                .map(str::to_string)
                        })
                        .collect();
                    rows.insert(row);
                }
                ActionKind::Delete => {
                    rows.retain(|row| !Self::matches(schema, row, &action.atom));
                }
            }
        }
        next
    }
}

fn constant_pool(db: &Database, aics: &[Aic]) -> Vec<String> {
    let mut pool: BTreeSet<String> = BTreeSet::new();
    for (_, table) in db.tables() {
        for row in table.rows() {
            pool.extend(row.iter().flatten().cloned());
        }
    }
    for aic in aics {
        let atoms = aic
            .body()
            .iter()
            .map(|l| &l.atom)
            .chain(aic.head().iter().map(|a| &a.atom));
        for atom in atoms {
            for term in atom.bindings().values() {
                if let Some(c) = term.as_const() {
                    pool.insert(c.to_string());
                }
            }
        }
    }
    pool.into_iter().collect()
}

/// Every total assignment of `vars` over `pool`, in lexicographic order.
fn assignments(vars: &BTreeSet<&str>, pool: &[String]) -> Vec<BTreeMap<String, String>> {
    let vars: Vec<&str> = vars.iter().copied().collect();
    if vars.is_empty() {
        return vec![BTreeMap::new()];
    }
    if pool.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut odometer = vec![0usize; vars.len()];
    loop {
        out.push(
            vars.iter()
                .zip(&odometer)
                .map(|(v, &i)| (v.to_string(), pool[i].clone()))
                .collect(),
        );
        let mut k = 0;
        loop {
            if k == odometer.len() {
                return out;
            }
            odometer[k] += 1;
            if odometer[k] < pool.len() {
                break;
            }
            odometer[k] = 0;
            k += 1;
        }
    }
}

/// The finite atom universe: database rows (on their non-null columns) plus
/// all closed instantiations of body literal patterns over the constant
/// pool.
pub fn active_domain(db: &Database, aics: &[Aic]) -> Vec<AtomPattern> {
    let mut atoms: BTreeSet<AtomPattern> = BTreeSet::new();
    for (name, table) in db.tables() {
        for row in table.rows() {
            let bindings: Vec<(String, Term)> = table
                .schema()
                .iter()
                .zip(row)
                .filter_map(|(c, v)| v.as_ref().map(|s| (c.clone(), Term::constant(s.clone()))))
                .collect();
            atoms.insert(AtomPattern::new(name, bindings));
        }
    }
    let pool = constant_pool(db, aics);
    for aic in aics {
        for literal in aic.body() {
            let vars: BTreeSet<&str> = literal.atom.variables().collect();
            for subst in assignments(&vars, &pool) {
                atoms.insert(literal.atom.substitute(&subst));
            }
        }
    }
    atoms.into_iter().collect()
}

fn satisfies(state: &Snapshot, aic: &Aic, pool: &[String]) -> bool {
    for subst in assignments(&aic.variables(), pool) {
        if aic.body().iter().all(|l| state.entails(&l.substitute(&subst))) {
            return false;
        }
    }
    true
}

fn satisfies_all(state: &Snapshot, aics: &[Aic], pool: &[String]) -> bool {
    aics.iter().all(|aic| satisfies(state, aic, pool))
}

fn is_founded_weak(
    updates: &UpdateSet,
    post: &Snapshot,
    aics: &[Aic],
    pool: &[String],
) -> bool {
    'actions: for action in updates.iter() {
        let exception = action.to_literal().dual();
        for aic in aics {
            for subst in assignments(&aic.variables(), pool) {
                let in_head = aic
                    .head()
                    .iter()
                    .any(|head| head.substitute(&subst) == *action);
                if !in_head {
                    continue;
                }
                let residual_ok = aic.body().iter().all(|l| {
                    let closed = l.substitute(&subst);
                    closed == exception || post.entails(&closed)
                });
                if residual_ok {
                    continue 'actions;
                }
            }
        }
        return false;
    }
    true
}

/// No-effect actions over the active domain: `+a` when `a` holds before and
/// after the update, `-a` when it holds in neither state.
fn no_effect(base: &Snapshot, post: &Snapshot, domain: &[AtomPattern]) -> UpdateSet {
    domain
        .iter()
        .filter_map(|atom| {
            let (pre, now) = (base.holds(atom), post.holds(atom));
            if pre && now {
                Some(UpdateAction::insert(atom.clone()))
            } else if !pre && !now {
                Some(UpdateAction::delete(atom.clone()))
            } else {
                None
            }
        })
        .collect()
}

fn closed_under(set: &UpdateSet, aics: &[Aic], pool: &[String]) -> bool {
    let literals: BTreeSet<Literal> = set.iter().map(UpdateAction::to_literal).collect();
    for aic in aics {
        for subst in assignments(&aic.variables(), pool) {
            // Non-updatable literals of the closed instance: a substitution
            // can collapse a body literal onto an updatable one, so the
            // set-minus must happen after instantiation.
            let closed_head: Vec<UpdateAction> =
                aic.head().iter().map(|a| a.substitute(&subst)).collect();
            let updatable: BTreeSet<Literal> =
                closed_head.iter().map(|a| a.to_literal().dual()).collect();
            let forced = aic
                .body()
                .iter()
                .map(|l| l.substitute(&subst))
                .filter(|l| !updatable.contains(l))
                .all(|l| literals.contains(&l));
            if forced && !closed_head.iter().any(|head| set.contains(head)) {
                return false;
            }
        }
    }
    true
}

fn is_justified_weak(
    updates: &UpdateSet,
    base: &Snapshot,
    post: &Snapshot,
    aics: &[Aic],
    pool: &[String],
    domain: &[AtomPattern],
) -> bool {
    let neff = no_effect(base, post, domain);
    if !closed_under(&updates.union(&neff), aics, pool) {
        return false;
    }
    // Minimality: no proper subset of the updates, together with the
    // no-effect actions, may remain closed.
    let actions: Vec<&UpdateAction> = updates.iter().collect();
    let full = (1u64 << actions.len()) - 1;
    for mask in 0..full {
        let subset: UpdateSet = actions
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, a)| (*a).clone())
            .collect();
        if closed_under(&subset.union(&neff), aics, pool) {
            return false;
        }
    }
    true
}

fn minimal_sets(sets: &[UpdateSet]) -> Vec<UpdateSet> {
    let unique: BTreeSet<&UpdateSet> = sets.iter().collect();
    let mut out: Vec<UpdateSet> = unique
        .iter()
        .filter(|s| !unique.iter().any(|t| t.len() < s.len() && t.is_subset(s)))
        .map(|s| (*s).clone())
        .collect();
    out.sort_by_key(|s| (s.len(), s.to_string()));
    out
}

/// Reference repair computation by exhaustive enumeration.
///
/// Every consistent update set over the active domain whose actions all
/// change the database is tested against the declarative definition of the
/// requested repair kind; survivors are pruned to the minimal ones. An
/// already-consistent database reports no repairs. The well-founded kind has
/// no declarative characterization, so its result is the minimal elements of
/// [`well_founded_leaves`].
pub fn oracle_repairs(
    db: &Database,
    aics: &[Aic],
    kind: RepairKind,
    limits: &OracleLimits,
) -> Result<Vec<UpdateSet>, OracleError> {
    if kind == RepairKind::WellFounded {
        let leaves = well_founded_leaves(db, aics, limits)?;
        if leaves.contains(&UpdateSet::new()) {
            return Ok(Vec::new());
        }
        return Ok(minimal_sets(&leaves));
    }
    let domain = active_domain(db, aics);
    if domain.len() > limits.max_atoms || domain.len() >= 31 {
        return Err(OracleError::ActiveDomainTooLarge {
            atoms: domain.len(),
            limit: limits.max_atoms,
        });
    }
    let base = Snapshot::of(db);
    let pool = constant_pool(db, aics);
    if satisfies_all(&base, aics, &pool) {
        return Ok(Vec::new());
    }
    let candidates: Vec<UpdateAction> = domain
        .iter()
        .map(|atom| {
            if base.holds(atom) {
                UpdateAction::delete(atom.clone())
            } else {
                UpdateAction::insert(atom.clone())
            }
        })
        .collect();
    let mut weak: Vec<UpdateSet> = Vec::new();
    for mask in 0u32..(1 << candidates.len()) {
        let updates: UpdateSet = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, a)| a.clone())
            .collect();
        if !updates.is_consistent() {
            continue;
        }
        let post = base.apply(&updates);
        if !satisfies_all(&post, aics, &pool) {
            continue;
        }
        let keep = match kind {
            RepairKind::Simple => true,
            RepairKind::Founded => is_founded_weak(&updates, &post, aics, &pool),
            RepairKind::Justified => {
                is_justified_weak(&updates, &base, &post, aics, &pool, &domain)
            }
            RepairKind::WellFounded => unreachable!(),
        };
        if keep {
            weak.push(updates);
        }
    }
    Ok(minimal_sets(&weak))
}

/// Leaf set of the well-founded tree, computed by a small depth-first
/// recursion (deliberately unlike the breadth-first production path): at
/// every violated closed instance, only duals of body literals that appear
/// in that instance's own head may be added.
pub fn well_founded_leaves(
    db: &Database,
    aics: &[Aic],
    limits: &OracleLimits,
) -> Result<Vec<UpdateSet>, OracleError> {
    let domain = active_domain(db, aics);
    if domain.len() > limits.max_atoms {
        return Err(OracleError::ActiveDomainTooLarge {
            atoms: domain.len(),
            limit: limits.max_atoms,
        });
    }
    let base = Snapshot::of(db);
    let pool = constant_pool(db, aics);
    let mut leaves: BTreeSet<UpdateSet> = BTreeSet::new();
    let mut visited: BTreeSet<UpdateSet> = BTreeSet::new();
    explore(&base, &UpdateSet::new(), aics, &pool, &mut leaves, &mut visited);
    let mut out: Vec<UpdateSet> = leaves.into_iter().collect();
    out.sort_by_key(|s| (s.len(), s.to_string()));
    Ok(out)
}

fn explore(
    state: &Snapshot,
    updates: &UpdateSet,
    aics: &[Aic],
    pool: &[String],
    leaves: &mut BTreeSet<UpdateSet>,
    visited: &mut BTreeSet<UpdateSet>,
) {
    if !visited.insert(updates.clone()) {
        return;
    }
    let mut violated: Vec<(Vec<Literal>, Vec<UpdateAction>)> = Vec::new();
    for aic in aics {
        for subst in assignments(&aic.variables(), pool) {
            if aic.body().iter().all(|l| state.entails(&l.substitute(&subst))) {
                violated.push((
                    aic.body().iter().map(|l| l.substitute(&subst)).collect(),
                    aic.head().iter().map(|a| a.substitute(&subst)).collect(),
                ));
            }
        }
    }
    if violated.is_empty() {
        leaves.insert(updates.clone());
        return;
    }
    for (body, head) in &violated {
        for literal in body {
            let action = literal.to_action().dual();
            if !head.contains(&action) {
                continue;
            }
            let extended = updates.with(action.clone());
            if extended.len() == updates.len() || !extended.is_consistent() {
                continue;
            }
            let single: UpdateSet = [action].into_iter().collect();
            explore(&state.apply(&single), &extended, aics, pool, leaves, visited);
        }
    }
}
