//! Preprocessing for parallel repair search: the independence and precedence
//! graphs over a constraint set, their strongly connected components, and the
//! annotated document that records partitions and dependencies.
//!
//! Independence is approximated at the pattern level (same table, constants
//! unifiable) rather than over all closed instances. The approximation is
//! conservative: it can merge partitions that finer analysis would separate,
//! never split ones that belong together.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Aic, AtomPattern};
use crate::parser::{AicDocument, AicEntry, Dependency, Partition};

/// Rule-level dependency graph: an undirected edge joins rules whose bodies
/// read a common unifiable atom; a directed edge `i -> j` says rule `i`
/// precedes rule `j` (`i` writes something `j` reads, and not conversely).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AicGraph {
    nodes: usize,
    undirected: BTreeSet<(usize, usize)>,
    directed: BTreeSet<(usize, usize)>,
}

impl AicGraph {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn has_undirected_edge(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&(a.min(b), a.max(b)))
    }

    pub fn has_directed_edge(&self, from: usize, to: usize) -> bool {
        self.directed.contains(&(from, to))
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.undirected.iter().copied()
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.directed.iter().copied()
    }
}

/// Two patterns can describe a common atom when they are over the same table
/// and every column both constrain by constants carries equal constants.
fn unifiable(a: &AtomPattern, b: &AtomPattern) -> bool {
    if a.table() != b.table() {
        return false;
    }
    a.bindings().iter().all(|(column, term)| {
        match (term.as_const(), b.bindings().get(column).map(|t| t.as_const())) {
            (Some(x), Some(Some(y))) => x == y,
            _ => true,
        }
    })
}

fn body_shares_atom(a: &Aic, b: &Aic) -> bool {
    a.body()
        .iter()
        .any(|la| b.body().iter().any(|lb| unifiable(&la.atom, &lb.atom)))
}

fn head_feeds_body(writer: &Aic, reader: &Aic) -> bool {
    writer
        .head()
        .iter()
        .any(|action| reader.body().iter().any(|l| unifiable(&action.atom, &l.atom)))
}

pub fn build_graphs(aics: &[Aic]) -> AicGraph {
    let mut undirected = BTreeSet::new();
    let mut directed = BTreeSet::new();
    for i in 0..aics.len() {
        for j in 0..aics.len() {
            if i == j {
                continue;
            }
            if i < j && body_shares_atom(&aics[i], &aics[j]) {
                undirected.insert((i, j));
            }
            if head_feeds_body(&aics[i], &aics[j]) && !head_feeds_body(&aics[j], &aics[i]) {
                directed.insert((i, j));
            }
        }
    }
    AicGraph { nodes: aics.len(), undirected, directed }
}

/// Computes the partitioning of a constraint list as an annotated document.
///
/// Rules that share body reads without a one-way precedence between them are
/// kept in one partition (a repair for one can invalidate the other's body
/// evaluation); one-way precedence becomes a dependency line instead.
/// Partitions are the strongly connected components of the directed graph
/// augmented with both orientations of those irreducible undirected edges,
/// numbered in topological order of the condensation, ties broken by the
/// smallest contained rule index. Each condensation edge `Y precedes X`
/// yields the dependency line `X -> Y`.
pub fn compute_partitions(entries: &[AicEntry]) -> AicDocument {
    let aics: Vec<Aic> = entries.iter().map(|e| e.aic.clone()).collect();
    let graph = build_graphs(&aics);

    let n = aics.len();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in graph.directed_edges() {
        adjacency[i].push(j);
    }
    for (i, j) in graph.undirected_edges() {
        if !graph.has_directed_edge(i, j) && !graph.has_directed_edge(j, i) {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }

    let components = tarjan_scc(&adjacency);
    let component_of = {
        let mut map = vec![0usize; n];
        for (c, members) in components.iter().enumerate() {
            for &v in members {
                map[v] = c;
            }
        }
        map
    };

    // Condensation edges, in the precedes direction.
    let mut cond_edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, j) in graph.directed_edges() {
        let (ci, cj) = (component_of[i], component_of[j]);
        if ci != cj {
            cond_edges.insert((ci, cj));
        }
    }

    // Topological numbering by Kahn's algorithm; among ready components the
    // one containing the smallest rule index comes first.
    let min_index: Vec<usize> = components
        .iter()
        .map(|members| *members.iter().min().unwrap())
        .collect();
    let mut incoming = vec![0usize; components.len()];
    for &(_, to) in &cond_edges {
        incoming[to] += 1;
    }
    let mut ready: BTreeSet<(usize, usize)> = incoming
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| (min_index[c], c))
        .collect();
    let mut order: Vec<usize> = Vec::new();
    while let Some(&(key, component)) = ready.iter().next() {
        ready.remove(&(key, component));
        order.push(component);
        for &(from, to) in &cond_edges {
            if from == component {
                incoming[to] -= 1;
                if incoming[to] == 0 {
                    ready.insert((min_index[to], to));
                }
            }
        }
    }
    debug_assert_eq!(order.len(), components.len());

    let id_of_component: BTreeMap<usize, u32> = order
        .iter()
        .enumerate()
        .map(|(pos, &c)| (c, (pos + 1) as u32))
        .collect();

    let partitions: Vec<Partition> = order
        .iter()
        .enumerate()
        .map(|(pos, &c)| {
            let mut members = components[c].clone();
            members.sort_unstable();
            Partition {
                id: (pos + 1) as u32,
                aics: members.iter().map(|&v| entries[v].clone()).collect(),
            }
        })
        .collect();

    let mut dependencies: Vec<Dependency> = cond_edges
        .iter()
        .map(|&(precedes, follows)| Dependency {
            from: id_of_component[&follows],
            to: id_of_component[&precedes],
        })
        .collect();
    dependencies.sort();
    dependencies.dedup();

    AicDocument::Annotated { partitions, dependencies }
}

/// Tarjan's strongly connected components over an adjacency list; components
/// are returned with members in discovery order.
fn tarjan_scc(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adjacency: &'a [Vec<usize>],
        index: usize,
        indices: Vec<Option<usize>>,
        lowlink: Vec<usize>,
        stack: Vec<usize>,
        on_stack: Vec<bool>,
        components: Vec<Vec<usize>>,
    }

    fn connect(v: usize, state: &mut State<'_>) {
        state.indices[v] = Some(state.index);
        state.lowlink[v] = state.index;
        state.index += 1;
        state.stack.push(v);
        state.on_stack[v] = true;
        for &w in &state.adjacency[v] {
            if state.indices[w].is_none() {
                connect(w, state);
                state.lowlink[v] = state.lowlink[v].min(state.lowlink[w]);
            } else if state.on_stack[w] {
                state.lowlink[v] = state.lowlink[v].min(state.indices[w].unwrap());
            }
        }
        if state.lowlink[v] == state.indices[v].unwrap() {
            let mut component = Vec::new();
            loop {
                let w = state.stack.pop().expect("stack underflow");
                state.on_stack[w] = false;
                component.push(w);
                if w == v {
                    break;
                }
            }
            state.components.push(component);
        }
    }

    let n = adjacency.len();
    let mut state = State {
        adjacency,
        index: 0,
        indices: vec![None; n],
        lowlink: vec![0; n],
        stack: Vec::new(),
        on_stack: vec![false; n],
        components: Vec::new(),
    };
    for v in 0..n {
        if state.indices[v].is_none() {
            connect(v, &mut state);
        }
    }
    state.components
}
