//! Dead computation elimination: keep only vertices with a path to an observable output.

use std::collections::BTreeSet;

use crate::graph::ObjectId;
use crate::optimize::OptError;
use crate::verify::{verify_parts, VerifiedGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vertex {
    Operator,
    Data { is_virtual: bool },
}

/// Index-based bipartite DAG, the input of the analysis.
#[derive(Clone, Debug, Default)]
pub struct Dag {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<(usize, usize)>,
}

/// Root and leaf candidates among the non-virtual data vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Classification {
    pub d_in: BTreeSet<usize>,
    pub d_out: BTreeSet<usize>,
}

/// Sources (`deg- = 0`) go to `D_in`, sinks (`deg+ = 0`) to `D_out`, and data
/// vertices with both kinds of edges to both sets.
pub fn classify(dag: &Dag) -> Classification {
    let n = dag.vertices.len();
    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    for &(a, b) in &dag.edges {
        outdeg[a] += 1;
        indeg[b] += 1;
    }
    let mut c = Classification::default();
    for (v, kind) in dag.vertices.iter().enumerate() {
        if *kind != (Vertex::Data { is_virtual: false }) {
            continue;
        }
        if indeg[v] == 0 {
            c.d_in.insert(v);
        } else if outdeg[v] == 0 {
            c.d_out.insert(v);
        } else {
            c.d_in.insert(v);
            c.d_out.insert(v);
        }
    }
    c
}

/// Alive flags: a depth-first visit of the transposed graph from every vertex of `D_out`.
/// `D_in` plays no role in the visit. The visited set is shared across roots, so the
/// cost is linear in `|V| + |E|` on top of the adjacency construction.
pub fn alive_vertices(dag: &Dag) -> Vec<bool> {
    let n = dag.vertices.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &dag.edges {
        preds[b].push(a);
    }
    let roots = classify(dag).d_out;
    let mut alive = vec![false; n];
    let mut stack = Vec::new();
    for r in roots {
        if alive[r] {
            continue;
        }
        alive[r] = true;
        stack.push(r);
        while let Some(v) = stack.pop() {
            for &p in &preds[v] {
                if !alive[p] {
                    alive[p] = true;
                    stack.push(p);
                }
            }
        }
    }
    alive
}

/// Alive-vertex view of a verified graph.
#[derive(Clone, Debug)]
pub struct FilteredGraph {
    pub base: VerifiedGraph,
    pub alive: BTreeSet<ObjectId>,
}

impl FilteredGraph {
    pub fn is_alive(&self, id: ObjectId) -> bool {
        self.alive.contains(&id)
    }

    pub fn alive_nodes(&self) -> Vec<ObjectId> {
        self.base.order().iter().copied().filter(|n| self.is_alive(*n)).collect()
    }

    pub fn dead_nodes(&self) -> Vec<ObjectId> {
        self.base.order().iter().copied().filter(|n| !self.is_alive(*n)).collect()
    }

    pub fn dead_data(&self) -> Vec<ObjectId> {
        self.base.data().keys().copied().filter(|d| !self.is_alive(*d)).collect()
    }

    /// The view as a standalone verified graph holding only alive vertices.
    pub fn materialize(&self) -> Result<VerifiedGraph, OptError> {
        let (mut graph, mut data) = self.base.clone().into_parts();
        graph.nodes.retain(|id, _| self.alive.contains(id));
        graph.virtuals.retain(|id| self.alive.contains(id));
        data.retain(|id, _| self.alive.contains(id));
        verify_parts(graph, data).map_err(OptError::Verify)
    }
}

/// Converts a verified graph into the index form; returns the id of every index.
pub fn to_dag(vg: &VerifiedGraph) -> (Dag, Vec<ObjectId>) {
    let mut ids: Vec<ObjectId> = vg.data().keys().copied().collect();
    ids.extend(vg.graph().nodes.keys().copied());
    ids.sort();
    let index = |id: ObjectId| ids.binary_search(&id).expect("known vertex");
    let vertices = ids
        .iter()
        .map(|id| match vg.data().get(id) {
            Some(d) => Vertex::Data { is_virtual: d.is_virtual },
            None => Vertex::Operator,
        })
        .collect();
    let edges = vg.graph().edges().into_iter().map(|(a, b)| (index(a), index(b))).collect();
    (Dag { vertices, edges }, ids)
}

pub fn eliminate_dead_nodes(vg: &VerifiedGraph) -> Result<FilteredGraph, OptError> {
    if !vg.is_stamped() {
        return Err(OptError::Unstamped);
    }
    let (dag, ids) = to_dag(vg);
    let alive = alive_vertices(&dag).into_iter().zip(&ids).filter(|(a, _)| *a).map(|(_, id)| *id).collect();
    Ok(FilteredGraph { base: vg.clone(), alive })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(is_virtual: bool) -> Vertex {
        Vertex::Data { is_virtual }
    }

    #[test]
    fn chain_with_dead_branch() {
        // in(0) -> n1 -> v2 -> n3 -> out(4); n1 -> v5 (never read)
        let dag = Dag {
            vertices: vec![data(false), Vertex::Operator, data(true), Vertex::Operator, data(false), data(true)],
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)],
        };
        assert_eq!(alive_vertices(&dag), vec![true, true, true, true, true, false]);
    }

    #[test]
    fn middle_nonvirtual_data_is_both_root_and_leaf() {
        // in -> n -> mid(non-virtual) -> m -> v (virtual sink, dead)
        let dag = Dag {
            vertices: vec![data(false), Vertex::Operator, data(false), Vertex::Operator, data(true)],
            edges: vec![(0, 1), (1, 2), (2, 3), (3, 4)],
        };
        let c = classify(&dag);
        assert!(c.d_in.contains(&2) && c.d_out.contains(&2));
        assert_eq!(alive_vertices(&dag), vec![true, true, true, false, false]);
    }

    #[test]
    fn isolated_nonvirtual_data_is_a_source_only() {
        let dag = Dag { vertices: vec![data(false)], edges: vec![] };
        assert!(classify(&dag).d_in.contains(&0));
        assert_eq!(alive_vertices(&dag), vec![false]);
    }
}
