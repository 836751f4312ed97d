//! Breadth-first construction of the four repair trees.
//!
//! Every tree grows from the empty update set. Expanding a node applies its
//! update set to the database, queries all violated rule instances, and
//! restores the database, so the store is bit-identical before and after a
//! build. Children that are inconsistent or whose label was generated before
//! (hash-set membership on the canonical label) are discarded. Consistent
//! leaves are weak repairs; founded and justified leaves additionally pass a
//! validation step, and the surviving leaves are pruned to their minimal
//! elements.
//!
//! A tree owns its database exclusively while it is built; concurrent builds
//! must run on independent clones.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::datastore::{Database, StoreError};
use crate::model::{self, Aic, AtomPattern, Literal, RuleInstance, Term, UpdateAction, UpdateSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RepairKind {
    Simple,
    Founded,
    WellFounded,
    Justified,
}

impl RepairKind {
    pub const ALL: [RepairKind; 4] = [
        RepairKind::Simple,
        RepairKind::Founded,
        RepairKind::WellFounded,
        RepairKind::Justified,
    ];
}

impl fmt::Display for RepairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RepairKind::Simple => "simple",
            RepairKind::Founded => "founded",
            RepairKind::WellFounded => "well-founded",
            RepairKind::Justified => "justified",
        };
        write!(f, "{name}")
    }
}

#[derive(Clone, Debug)]
pub struct TreeLimits {
    /// Abort with [`RepairError::NodeBudgetExceeded`] when a tree would grow
    /// past this many nodes.
    pub node_budget: usize,
    /// Largest leaf update set the justified validation will check by
    /// subset enumeration; bigger leaves report indeterminate instead of
    /// guessing. Must stay below 64.
    pub justified_subset_limit: usize,
    /// Node deduplication can be disabled to check that it only affects
    /// statistics, never results.
    pub dedup: bool,
}

impl Default for TreeLimits {
    fn default() -> Self {
        TreeLimits {
            node_budget: 1_000_000,
            justified_subset_limit: 20,
            dedup: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TreeStats {
    /// Nodes added to the tree, including the root.
    pub nodes: usize,
    /// Children discarded because their label was already generated.
    pub deduped: usize,
    pub depth: usize,
}

impl TreeStats {
    pub fn absorb(&mut self, other: TreeStats) {
        self.nodes += other.nodes;
        self.deduped += other.deduped;
        self.depth = self.depth.max(other.depth);
    }
}

/// A node of a repair tree: the update set built so far and, for justified
/// trees, the companion set of assumed no-effect actions.
#[derive(Debug)]
pub struct RepairNode {
    pub updates: UpdateSet,
    pub assumptions: UpdateSet,
    edge: Option<Rc<RuleInstance>>,
    parent: Option<Rc<RepairNode>>,
    pub depth: usize,
}

impl RepairNode {
    /// The rule instances applied along the branch, root to leaf.
    pub fn applied(&self) -> Vec<&RuleInstance> {
        let mut instances = Vec::new();
        let mut node = self;
        loop {
            if let Some(edge) = &node.edge {
                instances.push(edge.as_ref());
            }
            match &node.parent {
                Some(parent) => node = parent,
                None => break,
            }
        }
        instances.reverse();
        instances
    }
}

#[derive(Clone, Debug)]
pub struct RepairOutcome {
    pub kind: RepairKind,
    /// True when the database already satisfied every constraint.
    pub consistent: bool,
    /// Minimal validated leaves, in (size, canonical text) order.
    pub repairs: Vec<UpdateSet>,
    /// All validated leaves before minimality pruning.
    pub weak_leaves: Vec<UpdateSet>,
    pub stats: TreeStats,
    /// Partition and stratum counts are 1 for a monolithic tree; the engine
    /// fills them in for composed runs.
    pub partitions: usize,
    pub strata: usize,
    pub truncated: bool,
}

#[derive(Debug, Error)]
pub enum RepairError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("repair tree exceeded the node budget of {budget} nodes")]
    NodeBudgetExceeded { budget: usize },
    #[error(
        "justified validation over a leaf of {size} actions exceeds the subset \
         enumeration limit of {limit}; result is indeterminate, use the \
         brute-force oracle on a smaller instance instead"
    )]
    JustifiedCheckExceeded { size: usize, limit: usize },
}

/// Builds the repair tree of the given kind and prunes its validated leaves
/// to the minimal ones. The database is mutated during the search but equals
/// its original state on return, on success and error paths alike.
pub fn build_tree(
    db: &mut Database,
    aics: &[Aic],
    kind: RepairKind,
    limits: &TreeLimits,
) -> Result<RepairOutcome, RepairError> {
    Ok(build_tree_with_leaves(db, aics, kind, limits)?.0)
}

/// As [`build_tree`], additionally returning every consistent leaf node
/// (validated or not) for inspection.
pub fn build_tree_with_leaves(
    db: &mut Database,
    aics: &[Aic],
    kind: RepairKind,
    limits: &TreeLimits,
) -> Result<(RepairOutcome, Vec<Rc<RepairNode>>), RepairError> {
    let normal = model::is_normal(aics);
    let mut stats = TreeStats { nodes: 1, deduped: 0, depth: 0 };
    let root = Rc::new(RepairNode {
        updates: UpdateSet::new(),
        assumptions: UpdateSet::new(),
        edge: None,
        parent: None,
        depth: 0,
    });
    let mut seen: HashSet<(UpdateSet, UpdateSet)> = HashSet::new();
    seen.insert((UpdateSet::new(), UpdateSet::new()));
    let mut queue: VecDeque<Rc<RepairNode>> = VecDeque::new();
    queue.push_back(root);
    let mut consistent = false;
    let mut leaves: Vec<Rc<RepairNode>> = Vec::new();
    let mut validated: BTreeSet<UpdateSet> = BTreeSet::new();

    while let Some(node) = queue.pop_front() {
        let violations = query_violations(db, aics, &node.updates)?;
        if violations.is_empty() {
            if node.depth == 0 {
                consistent = true;
            }
            let accepted = match kind {
                RepairKind::Simple | RepairKind::WellFounded => true,
                RepairKind::Founded => validate_founded(db, aics, &node.updates)?,
                RepairKind::Justified => {
                    if normal {
                        justified_shortcut(&node)
                    } else {
                        validate_justified(db, &node, aics, limits.justified_subset_limit)?
                    }
                }
            };
            if accepted {
                validated.insert(node.updates.clone());
            }
            leaves.push(node);
            continue;
        }
        for instance in violations {
            let instance = Rc::new(instance);
            let children: Vec<(UpdateSet, UpdateSet)> = match kind {
                RepairKind::Justified => instance
                    .closed_head
                    .iter()
                    .map(|action| {
                        let updates = node.updates.with(action.clone());
                        let nup_actions: UpdateSet =
                            instance.closed_nup.iter().map(Literal::to_action).collect();
                        let assumptions = node
                            .assumptions
                            .union(&nup_actions)
                            .difference(&node.updates);
                        (updates, assumptions)
                    })
                    .collect(),
                _ => instance
                    .closed_body
                    .iter()
                    .filter_map(|literal| {
                        let action = literal.to_action().dual();
                        let allowed = match kind {
                            RepairKind::Simple => true,
                            RepairKind::Founded => occurs_in_some_head(&action, aics),
                            RepairKind::WellFounded => instance.closed_head.contains(&action),
                            RepairKind::Justified => unreachable!(),
                        };
                        allowed.then(|| (node.updates.with(action), UpdateSet::new()))
                    })
                    .collect(),
            };
            for label in children {
                if !label.0.is_consistent() {
                    continue;
                }
                if limits.dedup && seen.contains(&label) {
                    stats.deduped += 1;
                    continue;
                }
                if stats.nodes >= limits.node_budget {
                    return Err(RepairError::NodeBudgetExceeded { budget: limits.node_budget });
                }
                stats.nodes += 1;
                stats.depth = stats.depth.max(node.depth + 1);
                if limits.dedup {
                    seen.insert(label.clone());
                }
                queue.push_back(Rc::new(RepairNode {
                    updates: label.0,
                    assumptions: label.1,
                    edge: Some(instance.clone()),
                    parent: Some(node.clone()),
                    depth: node.depth + 1,
                }));
            }
        }
    }

    let weak_leaves = canonical_order(validated);
    let repairs = if consistent { Vec::new() } else { prune_minimal(&weak_leaves) };
    let outcome = RepairOutcome {
        kind,
        consistent,
        repairs,
        weak_leaves,
        stats,
        partitions: 1,
        strata: 1,
        truncated: false,
    };
    Ok((outcome, leaves))
}

/// Applies `updates`, collects every violated instance over all constraints
/// in input order, and restores the database.
fn query_violations(
    db: &mut Database,
    aics: &[Aic],
    updates: &UpdateSet,
) -> Result<Vec<RuleInstance>, StoreError> {
    let log = db.update(updates)?;
    let mut violations = Vec::new();
    let mut failure = None;
    for (index, aic) in aics.iter().enumerate() {
        match db.find_violations(aic, index) {
            Ok(found) => violations.extend(found),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    db.undo(log);
    match failure {
        Some(e) => Err(e),
        None => Ok(violations),
    }
}

/// Matches a closed action against a head pattern: same kind, same table,
/// same column set, constants equal, and a consistent assignment for the
/// pattern's variables. Returns that assignment.
fn unify_action(action: &UpdateAction, head: &UpdateAction) -> Option<BTreeMap<String, String>> {
    if action.kind != head.kind
        || action.atom.table() != head.atom.table()
        || action.atom.bindings().len() != head.atom.bindings().len()
    {
        return None;
    }
    let mut assignment: BTreeMap<String, String> = BTreeMap::new();
    for (column, head_term) in head.atom.bindings() {
        let value = action.atom.bindings().get(column)?.as_const()?;
        match head_term {
            Term::Const(c) => {
                if c != value {
                    return None;
                }
            }
            Term::Var(name) => match assignment.get(name) {
                Some(bound) if bound != value => return None,
                Some(_) => {}
                None => {
                    assignment.insert(name.clone(), value.to_string());
                }
            },
        }
    }
    Some(assignment)
}

/// Syntactic test whether `action` occurs in the head of some closed
/// instance of some rule. Over-approximates the semantic condition; the
/// leaf validation settles foundedness exactly.
fn occurs_in_some_head(action: &UpdateAction, aics: &[Aic]) -> bool {
    aics.iter()
        .flat_map(|aic| aic.head())
        .any(|head| unify_action(action, head).is_some())
}

/// Definitional foundedness of a weak repair: every action must occur in the
/// head of some closed rule instance whose remaining body literals all hold
/// after the repair. The database is updated for the duration of the checks
/// and restored before returning.
pub fn validate_founded(
    db: &mut Database,
    aics: &[Aic],
    updates: &UpdateSet,
) -> Result<bool, StoreError> {
    if updates.is_empty() {
        return Ok(true);
    }
    let log = db.update(updates)?;
    let result = founded_in_current_state(db, aics, updates);
    db.undo(log);
    result
}

fn founded_in_current_state(
    db: &Database,
    aics: &[Aic],
    updates: &UpdateSet,
) -> Result<bool, StoreError> {
    'actions: for action in updates.iter() {
        let exception = action.to_literal().dual();
        for aic in aics {
            for head in aic.head() {
                if let Some(seed) = unify_action(action, head) {
                    if db.body_satisfiable(aic.body(), &seed, Some(&exception))? {
                        continue 'actions;
                    }
                }
            }
        }
        return Ok(false);
    }
    Ok(true)
}

/// Leaf acceptance for justified trees over normal rule sets: no assumed
/// no-effect action may be contradicted by the branch's own updates, i.e.
/// the union of the update set and the assumption set must be consistent.
pub fn justified_shortcut(leaf: &RepairNode) -> bool {
    leaf.updates.is_consistent() && leaf.updates.union(&leaf.assumptions).is_consistent()
}

/// Decides whether a leaf's update set `u` is a justified weak repair:
/// `u` together with the no-effect actions must be closed under every closed
/// rule instance, and no proper subset of `u` may keep that closure.
///
/// Instances are enumerated over the constants of the database, the updates
/// and the rules; instances over other constants are closed automatically
/// (rule safety puts every variable in a positive body literal, which for an
/// unknown constant either breaks the forcing condition or puts a no-effect
/// deletion in the head). No-effect status is evaluated semantically against
/// the database before and after applying the updates. Subsets are
/// enumerated exhaustively up to the configured limit.
pub fn validate_justified(
    db: &mut Database,
    leaf: &RepairNode,
    aics: &[Aic],
    limit: usize,
) -> Result<bool, RepairError> {
    let updates = &leaf.updates;
    if updates.len() > limit || updates.len() >= 64 {
        return Err(RepairError::JustifiedCheckExceeded { size: updates.len(), limit });
    }

    let mut pool: BTreeSet<String> = BTreeSet::new();
    for (_, table) in db.tables() {
        for row in table.rows() {
            pool.extend(row.iter().flatten().cloned());
        }
    }
    let update_atoms = updates.iter().map(|a| &a.atom);
    let rule_atoms = aics.iter().flat_map(|aic| {
        aic.body()
            .iter()
            .map(|l| &l.atom)
            .chain(aic.head().iter().map(|a| &a.atom))
    });
    for atom in update_atoms.chain(rule_atoms) {
        pool.extend(atom.bindings().values().filter_map(|t| t.as_const()).map(str::to_string));
    }
    let pool: Vec<String> = pool.into_iter().collect();

    struct Instance {
        nup: Vec<Literal>,
        head: Vec<UpdateAction>,
    }
    let mut instances: Vec<Instance> = Vec::new();
    for aic in aics {
        for subst in substitutions(&aic.variables(), &pool) {
            let head: Vec<UpdateAction> =
                aic.head().iter().map(|a| a.substitute(&subst)).collect();
            let updatable: BTreeSet<Literal> =
                head.iter().map(|a| a.to_literal().dual()).collect();
            let nup: Vec<Literal> = aic
                .body()
                .iter()
                .map(|l| l.substitute(&subst))
                .filter(|l| !updatable.contains(l))
                .collect();
            instances.push(Instance { nup, head });
        }
    }

    let mut atoms: BTreeSet<&AtomPattern> = BTreeSet::new();
    for instance in &instances {
        atoms.extend(instance.nup.iter().map(|l| &l.atom));
        atoms.extend(instance.head.iter().map(|a| &a.atom));
    }
    let mut pre: BTreeMap<&AtomPattern, bool> = BTreeMap::new();
    for atom in &atoms {
        pre.insert(atom, db.holds(atom).map_err(RepairError::Store)?);
    }
    let log = db.update(updates).map_err(RepairError::Store)?;
    let mut post: BTreeMap<&AtomPattern, bool> = BTreeMap::new();
    let mut failure = None;
    for atom in &atoms {
        match db.holds(atom) {
            Ok(holds) => {
                post.insert(atom, holds);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    db.undo(log);
    if let Some(e) = failure {
        return Err(RepairError::Store(e));
    }

    // +a is no-effect when a holds before and after; -a when it holds in
    // neither state.
    let no_effect_literal = |l: &Literal| {
        if l.is_positive() {
            pre[&l.atom] && post[&l.atom]
        } else {
            !pre[&l.atom] && !post[&l.atom]
        }
    };
    let no_effect_action = |a: &UpdateAction| no_effect_literal(&a.to_literal());
    let actions: Vec<&UpdateAction> = updates.iter().collect();
    let action_mask = |wanted: &UpdateAction| -> Option<u64> {
        actions
            .iter()
            .position(|a| *a == wanted)
            .map(|i| 1u64 << i)
    };

    // Each relevant instance becomes a conditional requirement on a subset
    // u* of the updates: if `need ⊆ u*` (the non-no-effect part of its nup
    // comes from u*) then `hits ∩ u* ≠ ∅` (some head action is in u*).
    let mut requirements: Vec<(u64, u64)> = Vec::new();
    'instances: for instance in &instances {
        let mut need = 0u64;
        for literal in &instance.nup {
            if no_effect_literal(literal) {
                continue;
            }
            match action_mask(&literal.to_action()) {
                // Only an update action can still support this literal.
                Some(mask) => need |= mask,
                // Unsupportable nup literal: the instance is never forced.
                None => continue 'instances,
            }
        }
        if instance.head.iter().any(&no_effect_action) {
            continue; // closed for every subset
        }
        let hits = instance
            .head
            .iter()
            .filter_map(&action_mask)
            .fold(0u64, |m, b| m | b);
        if hits == 0 {
            if need == 0 {
                // Forced regardless of the subset, with nothing to close it:
                // the full set is not closed either.
                return Ok(false);
            }
            requirements.push((need, 0));
        } else {
            requirements.push((need, hits));
        }
    }

    let full = (1u64 << actions.len()) - 1;
    // The full set itself must be closed.
    if !closed_for_subset(full, &requirements) {
        return Ok(false);
    }
    for subset in 0..full {
        if closed_for_subset(subset, &requirements) {
            return Ok(false); // a proper subset keeps the closure
        }
    }
    Ok(true)
}

fn closed_for_subset(subset: u64, requirements: &[(u64, u64)]) -> bool {
    requirements
        .iter()
        .all(|&(need, hits)| need & subset != need || hits & subset != 0)
}

/// Every total assignment of `vars` over `pool`.
fn substitutions(
    vars: &BTreeSet<&str>,
    pool: &[String],
) -> Vec<BTreeMap<String, String>> {
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

/// Keeps exactly the sets with no strict subset also present, in
/// (size, canonical text) order; duplicates collapse.
pub fn prune_minimal(sets: &[UpdateSet]) -> Vec<UpdateSet> {
    let unique: BTreeSet<&UpdateSet> = sets.iter().collect();
    let minimal: BTreeSet<UpdateSet> = unique
        .iter()
        .filter(|s| {
            !unique
                .iter()
                .any(|t| t.len() < s.len() && t.is_subset(s))
        })
        .map(|s| (*s).clone())
        .collect();
    canonical_order(minimal)
}

fn canonical_order(sets: BTreeSet<UpdateSet>) -> Vec<UpdateSet> {
    let mut out: Vec<UpdateSet> = sets.into_iter().collect();
    out.sort_by_key(|s| (s.len(), s.to_string()));
    out
}
