//! Orchestration of repair search over a whole constraint document.
//!
//! Independent partitions run concurrently on private database clones;
//! stratified partitions run in dependency order, each stratum extending the
//! candidate repairs produced so far. Candidate unions are re-checked for
//! consistency and pruned for minimality globally at the end, since unions
//! of per-partition minima need not stay minimal across strata. Sequential
//! and parallel modes return identical outcomes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::datastore::{CompatIssue, Database};
use crate::model::{Aic, UpdateSet};
use crate::parser::{AicDocument, Dependency};
use crate::repair::{
    build_tree, prune_minimal, RepairError, RepairKind, RepairOutcome, TreeLimits, TreeStats,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

#[derive(Clone, Debug)]
pub struct EngineLimits {
    pub tree: TreeLimits,
    /// Upper bound on the candidate set carried between strata; overflow
    /// yields truncated results with an explicit flag.
    pub combination_cap: usize,
}

impl Default for EngineLimits {
    fn default() -> Self {
        EngineLimits { tree: TreeLimits::default(), combination_cap: 10_000 }
    }
}

/// Execution plan: partitions grouped into topologically ordered strata.
/// Partitions with no path between them share a stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepairPlan {
    pub kind: RepairKind,
    pub mode: Mode,
    pub combination_cap: usize,
    /// Partition ids per stratum, ascending within a stratum.
    pub strata: Vec<Vec<u32>>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(
        "well-founded repairs cannot be computed over a stratified plan; \
         drop the dependency section or pick founded/justified"
    )]
    WellFoundedStratification,
    #[error("constraints are incompatible with the database schema")]
    Incompatible(Vec<CompatIssue>),
}

fn document_partitions(doc: &AicDocument) -> (Vec<(u32, Vec<Aic>)>, Vec<Dependency>) {
    match doc {
        AicDocument::Flat(entries) => (
            vec![(1, entries.iter().map(|e| e.aic.clone()).collect())],
            Vec::new(),
        ),
        AicDocument::Annotated { partitions, dependencies } => (
            partitions
                .iter()
                .map(|p| (p.id, p.aics.iter().map(|e| e.aic.clone()).collect()))
                .collect(),
            dependencies.clone(),
        ),
    }
}

/// Builds the stratified plan for a document. Flat documents become a single
/// one-partition stratum. Well-founded repairs reject plans with
/// dependencies; independent partitions remain allowed.
pub fn plan_from_document(
    doc: &AicDocument,
    kind: RepairKind,
    mode: Mode,
    combination_cap: usize,
) -> Result<RepairPlan, EngineError> {
    let (partitions, dependencies) = document_partitions(doc);
    if kind == RepairKind::WellFounded && !dependencies.is_empty() {
        return Err(EngineError::WellFoundedStratification);
    }
    // Topological levels over the precedes relation (`to` precedes `from`).
    let mut predecessors: BTreeMap<u32, BTreeSet<u32>> =
        partitions.iter().map(|(id, _)| (*id, BTreeSet::new())).collect();
    for dep in &dependencies {
        predecessors.get_mut(&dep.from).expect("parser validated").insert(dep.to);
    }
    let mut level: BTreeMap<u32, usize> = BTreeMap::new();
    while level.len() < partitions.len() {
        let mut progressed = false;
        for (id, preds) in &predecessors {
            if level.contains_key(id) {
                continue;
            }
            if preds.iter().all(|p| level.contains_key(p)) {
                let depth = preds.iter().map(|p| level[p] + 1).max().unwrap_or(0);
                level.insert(*id, depth);
                progressed = true;
            }
        }
        assert!(progressed, "parser guarantees acyclic dependencies");
    }
    let max_level = level.values().copied().max().unwrap_or(0);
    let mut strata: Vec<Vec<u32>> = vec![Vec::new(); max_level + 1];
    for (id, depth) in &level {
        strata[*depth].push(*id);
    }
    for stratum in &mut strata {
        stratum.sort_unstable();
    }
    Ok(RepairPlan { kind, mode, combination_cap, strata })
}

struct PartitionRun {
    consistent: bool,
    repairs: Vec<UpdateSet>,
    stats: TreeStats,
}

/// Computes repairs for a whole document against `db`, which is never
/// mutated: every tree runs on a clone restricted to its partition's tables.
///
/// Each stratum extends every accumulated candidate with the repairs of each
/// of its partitions (independent partitions merge by cartesian union,
/// inconsistent unions dropped). For composed runs the pre-minimization
/// candidate unions play the role of the weak-leaf list; a single-partition
/// document returns its tree outcome unchanged.
pub fn repair_all(
    db: &Database,
    doc: &AicDocument,
    kind: RepairKind,
    mode: Mode,
    limits: &EngineLimits,
) -> Result<RepairOutcome, EngineError> {
    let (partitions, _) = document_partitions(doc);
    let all_aics: Vec<Aic> = partitions.iter().flat_map(|(_, aics)| aics.clone()).collect();
    let issues = db.aics_compatible(&all_aics);
    if !issues.is_empty() {
        return Err(EngineError::Incompatible(issues));
    }
    let plan = plan_from_document(doc, kind, mode, limits.combination_cap)?;

    if partitions.len() == 1 {
        let mut local = db.clone();
        let outcome = build_tree(&mut local, &partitions[0].1, kind, &limits.tree)?;
        return Ok(outcome);
    }

    let by_id: BTreeMap<u32, &Vec<Aic>> =
        partitions.iter().map(|(id, aics)| (*id, aics)).collect();
    let mut candidates: Vec<UpdateSet> = vec![UpdateSet::new()];
    let mut stats = TreeStats::default();
    let mut truncated = false;

    for stratum in &plan.strata {
        if candidates.is_empty() {
            break;
        }
        let run_partition = |id: u32| -> Result<Vec<PartitionRun>, RepairError> {
            let aics = by_id[&id];
            let tables: BTreeSet<String> = aics
                .iter()
                .flat_map(|aic| aic.tables())
                .map(str::to_string)
                .collect();
            let base = db.restricted(&tables);
            candidates
                .iter()
                .map(|candidate| {
                    let mut local = base.clone();
                    let relevant: UpdateSet = candidate
                        .iter()
                        .filter(|a| tables.contains(a.atom.table()))
                        .cloned()
                        .collect();
                    local.update(&relevant)?;
                    let outcome = build_tree(&mut local, aics, kind, &limits.tree)?;
                    Ok(PartitionRun {
                        consistent: outcome.consistent,
                        repairs: outcome.repairs,
                        stats: outcome.stats,
                    })
                })
                .collect()
        };
        let results: Vec<Vec<PartitionRun>> = match mode {
            Mode::Sequential => stratum
                .iter()
                .map(|&id| run_partition(id))
                .collect::<Result<_, _>>()?,
            Mode::Parallel => std::thread::scope(|scope| {
                let handles: Vec<_> = stratum
                    .iter()
                    .map(|&id| scope.spawn(move || run_partition(id)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("partition worker panicked"))
                    .collect::<Result<_, _>>()
            })?,
        };
        for runs in &results {
            for run in runs {
                stats.absorb(run.stats);
            }
        }
        let mut next: BTreeSet<UpdateSet> = BTreeSet::new();
        for (index, candidate) in candidates.iter().enumerate() {
            let mut partials = vec![candidate.clone()];
            for runs in &results {
                let run = &runs[index];
                if run.consistent {
                    continue;
                }
                let mut grown = Vec::new();
                for partial in &partials {
                    for repair in &run.repairs {
                        let union = partial.union(repair);
                        if union.is_consistent() {
                            grown.push(union);
                        }
                    }
                }
                partials = grown;
                if partials.is_empty() {
                    break;
                }
            }
            next.extend(partials);
        }
        candidates = next.into_iter().collect();
        candidates.sort_by_key(|s| (s.len(), s.to_string()));
        if candidates.len() > plan.combination_cap {
            candidates.truncate(plan.combination_cap);
            truncated = true;
        }
    }

    let consistent = candidates.len() == 1 && candidates[0].is_empty();
    let repairs = if consistent { Vec::new() } else { prune_minimal(&candidates) };
    Ok(RepairOutcome {
        kind,
        consistent,
        repairs,
        weak_leaves: candidates,
        stats,
        partitions: partitions.len(),
        strata: plan.strata.len(),
        truncated,
    })
}
