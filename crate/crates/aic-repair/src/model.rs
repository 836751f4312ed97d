//! Core vocabulary: atoms, literals, update actions, active integrity
//! constraints (AICs), update sets, and the pure algebra over them.
//!
//! All values are immutable and freely shareable between threads. Database
//! values are plain strings; comparisons are exact string equality. Columns
//! left unspecified by an insert are filled with a distinguished null marker
//! when the action is executed, which is why consistency of an update set is
//! checked at the pattern level (see [`UpdateSet::is_consistent`]).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A term of an atom pattern: a constant value or a variable.
///
/// Variables are written `$name` in the surface syntax; constants are bare
/// tokens or single-quoted strings.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var(String),
}

impl Term {
    pub fn constant(value: impl Into<String>) -> Self {
        Term::Const(value.into())
    }

    /// A variable term. Variable names must be non-empty.
    pub fn var(name: impl Into<String>) -> Self {
        let name = name.into();
        assert!(!name.is_empty(), "variable names must be non-empty");
        Term::Var(name)
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(v) => Some(v),
            Term::Var(_) => None,
        }
    }
}

/// True when `value` can be printed without quotes.
pub(crate) fn is_bare_token(value: &str) -> bool {
    !value.is_empty()
        && value
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn write_const(f: &mut fmt::Formatter<'_>, value: &str) -> fmt::Result {
    if is_bare_token(value) {
        write!(f, "{value}")
    } else {
        write!(f, "'{}'", value.replace('\'', "''"))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(v) => write_const(f, v),
            Term::Var(n) => write!(f, "${n}"),
        }
    }
}

/// A table name plus named column bindings. Bindings may omit columns of the
/// physical table; column order is irrelevant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomPattern {
    table: String,
    bindings: BTreeMap<String, Term>,
}

impl AtomPattern {
    pub fn new(
        table: impl Into<String>,
        bindings: impl IntoIterator<Item = (impl Into<String>, Term)>,
    ) -> Self {
        let table = table.into();
        assert!(!table.is_empty(), "table names must be non-empty");
        AtomPattern {
            table,
            bindings: bindings
                .into_iter()
                .map(|(c, t)| (c.into(), t))
                .collect(),
        }
    }

    pub fn table(&self) -> &str {
        &self.table
    }

    pub fn bindings(&self) -> &BTreeMap<String, Term> {
        &self.bindings
    }

    /// A pattern is closed when every term is a constant.
    pub fn is_closed(&self) -> bool {
        self.bindings.values().all(Term::is_const)
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.bindings.values().filter_map(|t| match t {
            Term::Var(n) => Some(n.as_str()),
            Term::Const(_) => None,
        })
    }

    /// Applies a substitution, leaving unmapped variables in place.
    pub fn substitute(&self, subst: &BTreeMap<String, String>) -> AtomPattern {
        AtomPattern {
            table: self.table.clone(),
            bindings: self
                .bindings
                .iter()
                .map(|(c, t)| {
                    let t = match t {
                        Term::Var(n) => match subst.get(n) {
                            Some(v) => Term::Const(v.clone()),
                            None => t.clone(),
                        },
                        Term::Const(_) => t.clone(),
                    };
                    (c.clone(), t)
                })
                .collect(),
        }
    }
}

impl fmt::Display for AtomPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.table)?;
        for (i, (col, term)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{col}={term}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

/// A polarity-tagged atom pattern: `a` or `NOT a`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub polarity: Polarity,
    pub atom: AtomPattern,
}

impl Literal {
    pub fn positive(atom: AtomPattern) -> Self {
        Literal { polarity: Polarity::Positive, atom }
    }

    pub fn negative(atom: AtomPattern) -> Self {
        Literal { polarity: Polarity::Negative, atom }
    }

    pub fn is_positive(&self) -> bool {
        self.polarity == Polarity::Positive
    }

    /// The dual literal: polarity flipped, atom unchanged. Involutive.
    pub fn dual(&self) -> Literal {
        Literal {
            polarity: match self.polarity {
                Polarity::Positive => Polarity::Negative,
                Polarity::Negative => Polarity::Positive,
            },
            atom: self.atom.clone(),
        }
    }

    /// The update action corresponding to this literal: `ua(a) = +a`,
    /// `ua(NOT a) = -a`.
    pub fn to_action(&self) -> UpdateAction {
        UpdateAction {
            kind: match self.polarity {
                Polarity::Positive => ActionKind::Insert,
                Polarity::Negative => ActionKind::Delete,
            },
            atom: self.atom.clone(),
        }
    }

    pub fn substitute(&self, subst: &BTreeMap<String, String>) -> Literal {
        Literal {
            polarity: self.polarity,
            atom: self.atom.substitute(subst),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Positive => write!(f, "{}", self.atom),
            Polarity::Negative => write!(f, "NOT {}", self.atom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionKind {
    /// `-a`: delete every row matching the pattern.
    Delete,
    /// `+a`: insert the row materialized from the pattern.
    Insert,
}

/// An update action `+a` or `-a`. Only closed actions (all terms constant)
/// can be executed against a database.
///
/// Ordering is the canonical print order: table, then kind (`-` before `+`),
/// then bindings.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UpdateAction {
    pub kind: ActionKind,
    pub atom: AtomPattern,
}

impl UpdateAction {
    pub fn insert(atom: AtomPattern) -> Self {
        UpdateAction { kind: ActionKind::Insert, atom }
    }

    pub fn delete(atom: AtomPattern) -> Self {
        UpdateAction { kind: ActionKind::Delete, atom }
    }

    /// The literal corresponding to this action: `lit(+a) = a`,
    /// `lit(-a) = NOT a`. Inverse of [`Literal::to_action`].
    pub fn to_literal(&self) -> Literal {
        Literal {
            polarity: match self.kind {
                ActionKind::Insert => Polarity::Positive,
                ActionKind::Delete => Polarity::Negative,
            },
            atom: self.atom.clone(),
        }
    }

    /// The dual action: `+a` becomes `-a` and conversely.
    pub fn dual(&self) -> UpdateAction {
        UpdateAction {
            kind: match self.kind {
                ActionKind::Insert => ActionKind::Delete,
                ActionKind::Delete => ActionKind::Insert,
            },
            atom: self.atom.clone(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.atom.is_closed()
    }

    pub fn substitute(&self, subst: &BTreeMap<String, String>) -> UpdateAction {
        UpdateAction {
            kind: self.kind,
            atom: self.atom.substitute(subst),
        }
    }
}

impl PartialOrd for UpdateAction {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for UpdateAction {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.atom.table(), self.kind, self.atom.bindings()).cmp(&(
            other.atom.table(),
            other.kind,
            other.atom.bindings(),
        ))
    }
}

impl fmt::Display for UpdateAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = match self.kind {
            ActionKind::Insert => '+',
            ActionKind::Delete => '-',
        };
        write!(f, "{sign}{}", self.atom)
    }
}

/// Errors rejected by [`Aic::new`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum AicError {
    #[error("constraint body must contain at least one literal")]
    EmptyBody,
    #[error("constraint head must contain at least one action")]
    EmptyHead,
    #[error("head action `{action}` has no dual literal in the body")]
    HeadDualMissing { action: String },
    #[error("variable `${var}` in negative literal `{literal}` is not bound by an earlier positive literal")]
    UnsafeVariable { var: String, literal: String },
}

/// An active integrity constraint: `L1, ..., Lm -> a1, ..., ak;`.
///
/// The body lists the literals of the violation condition; the head lists the
/// permitted corrective actions. Construction enforces that the dual of every
/// head action's literal appears in the body, and that every variable of a
/// negative body literal is bound by an earlier positive literal.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Aic {
    body: Vec<Literal>,
    head: Vec<UpdateAction>,
}

impl Aic {
    pub fn new(body: Vec<Literal>, head: Vec<UpdateAction>) -> Result<Self, AicError> {
        if body.is_empty() {
            return Err(AicError::EmptyBody);
        }
        if head.is_empty() {
            return Err(AicError::EmptyHead);
        }
        for action in &head {
            let required = action.to_literal().dual();
            if !body.contains(&required) {
                return Err(AicError::HeadDualMissing {
                    action: action.to_string(),
                });
            }
        }
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for literal in &body {
            if !literal.is_positive() {
                for var in literal.atom.variables() {
                    if !bound.contains(var) {
                        return Err(AicError::UnsafeVariable {
                            var: var.to_string(),
                            literal: literal.to_string(),
                        });
                    }
                }
            } else {
                bound.extend(literal.atom.variables());
            }
        }
        Ok(Aic { body, head })
    }

    pub fn body(&self) -> &[Literal] {
        &self.body
    }

    pub fn head(&self) -> &[UpdateAction] {
        &self.head
    }

    /// The non-updatable body literals: body literals whose dual does not
    /// appear as a head action.
    pub fn nup(&self) -> Vec<&Literal> {
        let updatable: BTreeSet<Literal> =
            self.head.iter().map(|a| a.to_literal().dual()).collect();
        self.body
            .iter()
            .filter(|l| !updatable.contains(l))
            .collect()
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        self.body
            .iter()
            .flat_map(|l| l.atom.variables())
            .collect()
    }

    pub fn is_normal(&self) -> bool {
        self.head.len() == 1
    }

    /// Every table mentioned by a body literal or head action.
    pub fn tables(&self) -> BTreeSet<&str> {
        self.body
            .iter()
            .map(|l| l.atom.table())
            .chain(self.head.iter().map(|a| a.atom.table()))
            .collect()
    }
}

/// True when every constraint in the set has a single-action head.
pub fn is_normal(aics: &[Aic]) -> bool {
    aics.iter().all(Aic::is_normal)
}

/// A set of closed update actions with structural equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateSet {
    actions: BTreeSet<UpdateAction>,
}

impl UpdateSet {
    pub fn new() -> Self {
        UpdateSet::default()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn contains(&self, action: &UpdateAction) -> bool {
        self.actions.contains(action)
    }

    pub fn iter(&self) -> impl Iterator<Item = &UpdateAction> {
        self.actions.iter()
    }

    pub fn insert(&mut self, action: UpdateAction) -> bool {
        self.actions.insert(action)
    }

    /// A copy of this set with one more action.
    pub fn with(&self, action: UpdateAction) -> UpdateSet {
        let mut actions = self.actions.clone();
        actions.insert(action);
        UpdateSet { actions }
    }

    pub fn union(&self, other: &UpdateSet) -> UpdateSet {
        UpdateSet {
            actions: self.actions.union(&other.actions).cloned().collect(),
        }
    }

    /// Set difference: actions of `self` not in `other`.
    pub fn difference(&self, other: &UpdateSet) -> UpdateSet {
        UpdateSet {
            actions: self.actions.difference(&other.actions).cloned().collect(),
        }
    }

    pub fn is_subset(&self, other: &UpdateSet) -> bool {
        self.actions.is_subset(&other.actions)
    }

    pub fn is_closed(&self) -> bool {
        self.actions.iter().all(UpdateAction::is_closed)
    }

    /// Consistency: no insert/delete conflict pair.
    ///
    /// An insert `+p` conflicts with a delete `-q` over the same table when
    /// the row materialized by `+p` (unspecified columns null) matches the
    /// pattern `q`. This generalizes the propositional `+a`/`-a` clash to
    /// underspecified patterns.
    pub fn is_consistent(&self) -> bool {
        let inserts: Vec<&UpdateAction> = self
            .actions
            .iter()
            .filter(|a| a.kind == ActionKind::Insert)
            .collect();
        let deletes: Vec<&UpdateAction> = self
            .actions
            .iter()
            .filter(|a| a.kind == ActionKind::Delete)
            .collect();
        for ins in &inserts {
            for del in &deletes {
                if insert_matches_delete(&ins.atom, &del.atom) {
                    return false;
                }
            }
        }
        true
    }
}

impl FromIterator<UpdateAction> for UpdateSet {
    fn from_iter<T: IntoIterator<Item = UpdateAction>>(iter: T) -> Self {
        UpdateSet {
            actions: iter.into_iter().collect(),
        }
    }
}

impl fmt::Display for UpdateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, action) in self.actions.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{action}")?;
        }
        Ok(())
    }
}

/// True when the row materialized by inserting `insert` would match the
/// delete pattern `delete`. Both patterns must be closed and over the same
/// table; columns unspecified by the insert hold the null marker, which
/// matches no constant.
pub(crate) fn insert_matches_delete(insert: &AtomPattern, delete: &AtomPattern) -> bool {
    if insert.table() != delete.table() {
        return false;
    }
    delete.bindings().iter().all(|(col, term)| {
        insert.bindings().get(col).map(|t| t.as_const()) == Some(term.as_const())
    })
}

/// A closed instance of a constraint under a substitution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleInstance {
    pub source: Aic,
    /// Position of the source constraint in the input list; used for
    /// deterministic expansion order.
    pub aic_index: usize,
    pub substitution: BTreeMap<String, String>,
    pub closed_body: Vec<Literal>,
    pub closed_head: Vec<UpdateAction>,
    pub closed_nup: Vec<Literal>,
}

impl RuleInstance {
    /// Closes `aic` under `substitution`, which must bind every variable.
    pub fn new(aic: &Aic, aic_index: usize, substitution: BTreeMap<String, String>) -> Self {
        let closed_body: Vec<Literal> =
            aic.body().iter().map(|l| l.substitute(&substitution)).collect();
        let closed_head: Vec<UpdateAction> =
            aic.head().iter().map(|a| a.substitute(&substitution)).collect();
        debug_assert!(closed_body.iter().all(|l| l.atom.is_closed()));
        let updatable: BTreeSet<Literal> =
            closed_head.iter().map(|a| a.to_literal().dual()).collect();
        let closed_nup = closed_body
            .iter()
            .filter(|l| !updatable.contains(l))
            .cloned()
            .collect();
        RuleInstance {
            source: aic.clone(),
            aic_index,
            substitution,
            closed_body,
            closed_head,
            closed_nup,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn atom(table: &str, cols: &[(&str, Term)]) -> AtomPattern {
        AtomPattern::new(table, cols.iter().map(|(c, t)| (c.to_string(), t.clone())))
    }

    fn c(v: &str) -> Term {
        Term::constant(v)
    }

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    #[test]
    fn dual_flips_polarity_and_is_involutive() {
        let junior = Literal::positive(atom("junior", &[("id", c("e1"))]));
        let not_junior = junior.dual();
        assert_eq!(not_junior.polarity, Polarity::Negative);
        assert_eq!(not_junior.atom, junior.atom);
        assert_eq!(not_junior.dual(), junior);

        let insured = Literal::negative(atom(
            "insured",
            &[("empId", c("e1")), ("type", c("basic"))],
        ));
        assert_eq!(insured.dual().polarity, Polarity::Positive);
        assert_eq!(insured.dual().dual(), insured);
    }

    #[test]
    fn dual_and_action_maps_over_a_literal_grid() {
        // Exhaustive over a small grid of literals: dual is an involution
        // and ua/lit are mutually inverse everywhere.
        let terms = [c("v"), c(""), v("X")];
        for table in ["t", "longer_name"] {
            for term in &terms {
                for extra in [None, Some(("b", c("w")))] {
                    let mut cols = vec![("a", term.clone())];
                    cols.extend(extra.clone());
                    let base = atom(table, &cols);
                    for literal in [Literal::positive(base.clone()), Literal::negative(base)] {
                        assert_eq!(literal.dual().dual(), literal);
                        assert_ne!(literal.dual().polarity, literal.polarity);
                        assert_eq!(literal.to_action().to_literal(), literal);
                        let action = literal.to_action();
                        assert_eq!(action.to_literal().to_action(), action);
                        assert_eq!(action.dual().dual(), action);
                    }
                }
            }
        }
    }

    #[test]
    fn ua_and_lit_are_mutually_inverse() {
        let lit = Literal::positive(atom("junior", &[("id", v("X"))]));
        let act = lit.to_action();
        assert_eq!(act.kind, ActionKind::Insert);
        assert_eq!(act.to_literal(), lit);

        let del = UpdateAction::delete(atom("junior", &[("id", c("e1"))]));
        assert_eq!(del.to_literal().polarity, Polarity::Negative);
        assert_eq!(del.to_literal().to_action(), del);

        let ins = UpdateAction::insert(atom(
            "insured",
            &[("empId", c("e1")), ("type", c("basic"))],
        ));
        assert_eq!(ins.to_literal().to_action(), ins);
    }

    #[test]
    fn consistency_detects_direct_clash() {
        let insert = UpdateAction::insert(atom("junior", &[("id", c("e1"))]));
        let delete = UpdateAction::delete(atom("junior", &[("id", c("e1"))]));
        let u: UpdateSet = [insert.clone(), delete.clone()].into_iter().collect();
        assert!(!u.is_consistent());
        // Symmetric in the order the conflicting pair arrives.
        let swapped: UpdateSet = [delete, insert].into_iter().collect();
        assert!(!swapped.is_consistent());
    }

    #[test]
    fn consistency_ignores_distinct_tables() {
        let u: UpdateSet = [
            UpdateAction::delete(atom("junior", &[("id", c("e1"))])),
            UpdateAction::insert(atom(
                "insured",
                &[("empId", c("e1")), ("type", c("basic"))],
            )),
        ]
        .into_iter()
        .collect();
        assert!(u.is_consistent());
    }

    #[test]
    fn consistency_matches_materialized_insert_against_delete_pattern() {
        // -insured(empId=e1) deletes every row with empId=e1, including the
        // row materialized by +insured(empId=e1,type=basic).
        let u: UpdateSet = [
            UpdateAction::delete(atom("insured", &[("empId", c("e1"))])),
            UpdateAction::insert(atom(
                "insured",
                &[("empId", c("e1")), ("type", c("basic"))],
            )),
        ]
        .into_iter()
        .collect();
        assert!(!u.is_consistent());

        // The narrower delete does not match an insert that leaves the
        // column null.
        let u: UpdateSet = [
            UpdateAction::delete(atom("insured", &[("type", c("basic"))])),
            UpdateAction::insert(atom("insured", &[("empId", c("e1"))])),
        ]
        .into_iter()
        .collect();
        assert!(u.is_consistent());
    }

    fn example1_aics() -> Vec<Aic> {
        let aic1 = Aic::new(
            vec![
                Literal::positive(atom("junior", &[("id", v("X"))])),
                Literal::positive(atom(
                    "category",
                    &[("type", c("boss")), ("empId", v("X"))],
                )),
            ],
            vec![UpdateAction::delete(atom("junior", &[("id", v("X"))]))],
        )
        .unwrap();
        let aic2 = Aic::new(
            vec![
                Literal::positive(atom("junior", &[("id", v("X"))])),
                Literal::negative(atom(
                    "insured",
                    &[("empId", v("X")), ("type", c("basic"))],
                )),
            ],
            vec![UpdateAction::insert(atom(
                "insured",
                &[("empId", v("X")), ("type", c("basic"))],
            ))],
        )
        .unwrap();
        vec![aic1, aic2]
    }

    #[test]
    fn normality_checks() {
        assert!(is_normal(&example1_aics()));
        assert!(is_normal(&[]));

        let two_headed = Aic::new(
            vec![
                Literal::positive(atom("t", &[("a", v("X"))])),
                Literal::positive(atom("s", &[("b", v("X"))])),
            ],
            vec![
                UpdateAction::delete(atom("t", &[("a", v("X"))])),
                UpdateAction::delete(atom("s", &[("b", v("X"))])),
            ],
        )
        .unwrap();
        assert!(!is_normal(&[two_headed]));
    }

    #[test]
    fn aic_construction_rejects_missing_head_dual() {
        let err = Aic::new(
            vec![Literal::positive(atom("p", &[("a", v("X"))]))],
            vec![UpdateAction::insert(atom("q", &[("b", v("X"))]))],
        )
        .unwrap_err();
        assert!(matches!(err, AicError::HeadDualMissing { .. }));
    }

    #[test]
    fn aic_construction_rejects_unsafe_negation() {
        let err = Aic::new(
            vec![
                Literal::negative(atom("p", &[("a", v("X"))])),
                Literal::positive(atom("p", &[("a", v("X"))])),
            ],
            vec![UpdateAction::delete(atom("p", &[("a", v("X"))]))],
        )
        .unwrap_err();
        assert!(matches!(err, AicError::UnsafeVariable { .. }));
    }

    #[test]
    fn nup_removes_updatable_literals() {
        let aics = example1_aics();
        let nup1: Vec<String> = aics[0].nup().iter().map(|l| l.to_string()).collect();
        assert_eq!(nup1, vec!["category(empId=$X,type=boss)"]);
        let nup2: Vec<String> = aics[1].nup().iter().map(|l| l.to_string()).collect();
        assert_eq!(nup2, vec!["junior(id=$X)"]);
    }

    #[test]
    fn update_set_equality_is_order_insensitive() {
        let a = UpdateAction::delete(atom("t", &[("a", c("1"))]));
        let b = UpdateAction::insert(atom("s", &[("b", c("2"))]));
        let u1: UpdateSet = [a.clone(), b.clone()].into_iter().collect();
        let u2: UpdateSet = [b, a].into_iter().collect();
        assert_eq!(u1, u2);

        // Binding order does not matter either.
        let x = atom("t", &[("a", c("1")), ("b", c("2"))]);
        let y = atom("t", &[("b", c("2")), ("a", c("1"))]);
        assert_eq!(x, y);
    }

    #[test]
    fn canonical_action_order_is_table_then_kind_then_bindings() {
        let u: UpdateSet = [
            UpdateAction::insert(atom("b", &[("x", c("1"))])),
            UpdateAction::delete(atom("b", &[("x", c("1"))])),
            UpdateAction::delete(atom("a", &[("x", c("2"))])),
        ]
        .into_iter()
        .collect();
        assert_eq!(u.to_string(), "-a(x=2), -b(x=1), +b(x=1)");
    }

    #[test]
    fn rule_instance_closes_body_head_and_nup() {
        let aics = example1_aics();
        let subst: BTreeMap<String, String> =
            [("X".to_string(), "e1".to_string())].into_iter().collect();
        let inst = RuleInstance::new(&aics[1], 1, subst);
        assert_eq!(inst.closed_body[0].to_string(), "junior(id=e1)");
        assert_eq!(
            inst.closed_head[0].to_string(),
            "+insured(empId=e1,type=basic)"
        );
        assert_eq!(inst.closed_nup.len(), 1);
        assert_eq!(inst.closed_nup[0].to_string(), "junior(id=e1)");
    }
}
