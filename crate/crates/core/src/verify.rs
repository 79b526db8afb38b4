//! Graph verification: parameter presence, kinds and directions, single writer,
//! acyclicity, bipartite wiring, and forward resolution of virtual formats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::graph::{Context, DataKind, DataTable, Graph, GraphError, NodeOp, ObjectId};
use crate::ir::kernel::{DataKindTag, Direction};
use crate::library::{infer_outputs, step_outputs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DiagCode {
    CycleDetected,
    NotBipartite,
    UnboundParam,
    DirectionMismatch,
    FormatMismatch,
    MultipleWriters,
    UnresolvedVirtualFormat,
    UnknownKernel,
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub code: DiagCode,
    /// Objects involved, most relevant first.
    pub subjects: Vec<ObjectId>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subjects.first() {
            Some(id) => write!(f, "{} object#{}: {}", self.code, id, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

/// One diagnostic per line, in stable order.
pub fn render(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("{d}\n")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stamp {
    pub graph: ObjectId,
    pub generation: u64,
}

/// A graph that passed verification, with every virtual object resolved.
/// Mutable access drops the stamp; passes and engines reject unstamped graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifiedGraph {
    graph: Graph,
    data: DataTable,
    order: Vec<ObjectId>,
    stamp: Option<Stamp>,
}

impl VerifiedGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Resolved descriptors of every data vertex.
    pub fn data(&self) -> &DataTable {
        &self.data
    }

    /// Nodes in deterministic topological order.
    pub fn order(&self) -> &[ObjectId] {
        &self.order
    }

    pub fn stamp(&self) -> Option<Stamp> {
        self.stamp
    }

    pub fn is_stamped(&self) -> bool {
        self.stamp.is_some()
    }

    pub fn graph_mut(&mut self) -> &mut Graph {
        self.stamp = None;
        &mut self.graph
    }

    pub fn data_mut(&mut self) -> &mut DataTable {
        self.stamp = None;
        &mut self.data
    }

    pub fn into_parts(self) -> (Graph, DataTable) {
        (self.graph, self.data)
    }

    /// Operator-node count.
    pub fn node_count(&self) -> usize {
        self.graph.nodes.len()
    }
}

struct ParamInfo {
    name: String,
    direction: Direction,
    kind: DataKindTag,
    optional: bool,
}

fn params_of(op: &NodeOp) -> Vec<ParamInfo> {
    match op {
        NodeOp::Cv(cv) => cv
            .kernel
            .params()
            .iter()
            .map(|p| ParamInfo { name: p.name.to_string(), direction: p.direction, kind: p.kind, optional: p.optional })
            .collect(),
        NodeOp::Kernel(k) => k
            .signature()
            .params
            .into_iter()
            .map(|p| ParamInfo {
                name: p.name,
                direction: p.direction,
                kind: p.kind,
                optional: p.state == crate::ir::kernel::ParamState::Optional,
            })
            .collect(),
        NodeOp::Unknown(_) => vec![],
    }
}

/// Verifies graph `graph` of `ctx`.
pub fn verify(ctx: &Context, graph: ObjectId) -> Result<VerifiedGraph, Vec<Diagnostic>> {
    let g = ctx.graph(graph).ok_or_else(|| {
        vec![Diagnostic { code: DiagCode::UnknownKernel, subjects: vec![graph], message: "no such graph".into() }]
    })?;
    let data = ctx.data_table(graph).expect("graph exists");
    verify_parts(g.clone(), data)
}

/// Merges a produced descriptor into the declared one; `None` on conflict.
fn merge(declared: &DataKind, produced: &DataKind, is_virtual: bool) -> Option<DataKind> {
    match (declared, produced) {
        (
            DataKind::Image { width: dw, height: dh, format: df },
            DataKind::Image { width: pw, height: ph, format: pf },
        ) => {
            let pick = |d: u32, p: u32| if is_virtual && d == 0 { Some(p) } else { (d == p).then_some(d) };
            let format = if is_virtual && *df == crate::graph::ImageFormat::Unresolved {
                *pf
            } else if df == pf {
                *df
            } else {
                return None;
            };
            Some(DataKind::Image { width: pick(*dw, *pw)?, height: pick(*dh, *ph)?, format })
        }
        (DataKind::Scalar { format: d, .. }, DataKind::Scalar { format: p, .. }) => (d == p).then(|| declared.clone()),
        (DataKind::Array { capacity: dc, element: de }, DataKind::Array { capacity: pc, element: pe }) => {
            (de == pe && dc >= pc).then(|| declared.clone())
        }
        (DataKind::Distribution { .. }, DataKind::Distribution { .. }) => (declared == produced).then(|| declared.clone()),
        _ => None,
    }
}

/// Verifies a graph given the descriptors of its data vertices.
pub fn verify_parts(graph: Graph, data: DataTable) -> Result<VerifiedGraph, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut poisoned: BTreeSet<ObjectId> = BTreeSet::new();
    let mut bad_nodes: BTreeSet<ObjectId> = BTreeSet::new();
    let mut diag = |code, subjects: Vec<ObjectId>, message: String| diags.push(Diagnostic { code, subjects, message });

    // Per-node parameter checks.
    for node in graph.nodes.values() {
        if let NodeOp::Unknown(name) = &node.op {
            diag(DiagCode::UnknownKernel, vec![node.id], format!("no kernel named `{name}`"));
            bad_nodes.insert(node.id);
            poisoned.extend(node.bindings.iter().map(|b| b.data));
            continue;
        }
        let params = params_of(&node.op);
        let label = node.label();
        let mut seen = BTreeSet::new();
        let mut ok = true;
        for b in &node.bindings {
            let Some(p) = params.get(b.param) else {
                diag(DiagCode::DirectionMismatch, vec![node.id], format!("{label} has no parameter {}", b.param));
                ok = false;
                continue;
            };
            if !seen.insert(b.param) {
                diag(DiagCode::DirectionMismatch, vec![node.id], format!("{label} parameter `{}` bound twice", p.name));
                ok = false;
                continue;
            }
            let Some(d) = data.get(&b.data) else {
                if graph.nodes.contains_key(&b.data) {
                    diag(
                        DiagCode::NotBipartite,
                        vec![node.id, b.data],
                        format!("{label} parameter `{}` is wired to node #{}, not to a data object", p.name, b.data),
                    );
                } else {
                    diag(
                        DiagCode::UnboundParam,
                        vec![node.id],
                        format!("{label} parameter `{}` refers to missing object #{}", p.name, b.data),
                    );
                }
                ok = false;
                continue;
            };
            if d.kind.tag() != p.kind {
                diag(
                    DiagCode::FormatMismatch,
                    vec![node.id, b.data],
                    format!("{label} parameter `{}` expects {}, got {} #{}", p.name, p.kind, d.kind.tag(), b.data),
                );
                ok = false;
            }
            if p.direction == Direction::Output {
                let read_only = matches!(d.kind, DataKind::Scalar { value: Some(_), .. } | DataKind::Matrix { .. });
                if read_only {
                    diag(
                        DiagCode::DirectionMismatch,
                        vec![node.id, b.data],
                        format!("{label} output `{}` is bound to read-only {} #{}", p.name, d.kind.tag(), b.data),
                    );
                    ok = false;
                }
            }
        }
        for (i, p) in params.iter().enumerate() {
            if !p.optional && node.binding(i).is_none() {
                diag(DiagCode::UnboundParam, vec![node.id], format!("{label} parameter `{}` is not bound", p.name));
                ok = false;
            }
        }
        if !ok {
            bad_nodes.insert(node.id);
            poisoned.extend(node.outputs());
        }
    }

    // Single writer.
    let producers = graph.producers();
    for (d, ps) in &producers {
        if ps.len() > 1 {
            let list: Vec<String> = ps.iter().map(|p| format!("#{p}")).collect();
            let mut subjects = vec![*d];
            subjects.extend(ps);
            diag(DiagCode::MultipleWriters, subjects, format!("written by nodes {}", list.join(", ")));
            poisoned.insert(*d);
        }
    }

    // Cycles.
    let order = match graph.topo_sort() {
        Ok(order) => order,
        Err(GraphError::CycleDetected(stuck)) => {
            for scc in cyclic_components(&graph, &stuck) {
                let list: Vec<String> = scc.iter().map(|n| format!("#{n}")).collect();
                diag(DiagCode::CycleDetected, scc.clone(), format!("cycle through nodes {}", list.join(", ")));
            }
            for n in &stuck {
                bad_nodes.insert(*n);
                poisoned.extend(graph.nodes[n].outputs());
            }
            let stuck: BTreeSet<_> = stuck.into_iter().collect();
            // Order of the acyclic remainder, still needed for propagation.
            let mut rest = graph.clone();
            rest.nodes.retain(|id, _| !stuck.contains(id));
            rest.topo_sort().expect("remainder is acyclic")
        }
        Err(e) => unreachable!("{e}"),
    };

    // Forward format propagation.
    let mut res = data.clone();
    for &nid in &order {
        if bad_nodes.contains(&nid) {
            continue;
        }
        let node = &graph.nodes[&nid];
        let inputs = node.inputs();
        if inputs.iter().any(|d| poisoned.contains(d) || !res[d].kind.is_resolved()) {
            poisoned.extend(node.outputs());
            continue;
        }
        let produced: Result<Vec<(usize, DataKind)>, String> = match &node.op {
            NodeOp::Cv(cv) => {
                let descs: Vec<Option<&DataKind>> =
                    (0..cv.kernel.params().len()).map(|i| node.binding(i).map(|d| &res[&d].kind)).collect();
                infer_outputs(cv, &descs)
            }
            NodeOp::Kernel(k) => {
                let first = k.first_output();
                let ins: Vec<&DataKind> = (0..first).map(|i| &res[&node.binding(i).unwrap()].kind).collect();
                let n_out = k.output_params().len();
                let hints: Vec<Option<&DataKind>> =
                    (first..first + n_out).map(|i| node.binding(i).map(|d| &res[&d].kind)).collect();
                step_outputs(k, &ins, &hints).map(|outs| outs.into_iter().enumerate().map(|(j, d)| (first + j, d)).collect())
            }
            NodeOp::Unknown(_) => unreachable!(),
        };
        let produced = match produced {
            Ok(p) => p,
            Err(msg) => {
                diag(DiagCode::FormatMismatch, vec![nid], format!("{}: {msg}", node.label()));
                poisoned.extend(node.outputs());
                continue;
            }
        };
        for (param, desc) in produced {
            let Some(d) = node.binding(param) else { continue };
            if poisoned.contains(&d) {
                continue;
            }
            let obj = &res[&d];
            match merge(&obj.kind, &desc, obj.is_virtual) {
                Some(kind) => res.get_mut(&d).unwrap().kind = kind,
                None => {
                    let consumers: Vec<String> =
                        graph.consumers().get(&d).into_iter().flatten().map(|c| format!("#{c}")).collect();
                    let read_by =
                        if consumers.is_empty() { String::new() } else { format!(", read by {}", consumers.join(", ")) };
                    diag(
                        DiagCode::FormatMismatch,
                        vec![d, nid],
                        format!(
                            "{} #{nid} produces {} but {} is {}{read_by}",
                            node.label(),
                            desc.describe(),
                            obj.label(),
                            obj.kind.describe()
                        ),
                    );
                    poisoned.insert(d);
                }
            }
        }
    }

    for (id, obj) in &res {
        if !obj.is_virtual || poisoned.contains(id) {
            continue;
        }
        let produced = producers.contains_key(id);
        if !obj.kind.is_resolved() || !produced {
            let why = if produced { "could not be resolved" } else { "is never written" };
            diag(
                DiagCode::UnresolvedVirtualFormat,
                vec![*id],
                format!("virtual {} {why}", obj.label()),
            );
        }
    }

    if !diags.is_empty() {
        diags.sort();
        diags.dedup();
        return Err(diags);
    }
    let stamp = Some(Stamp { graph: graph.id, generation: graph.generation });
    Ok(VerifiedGraph { graph, data: res, order, stamp })
}

/// Groups of nodes that lie on a common cycle, each sorted, in ascending order.
fn cyclic_components(graph: &Graph, stuck: &[ObjectId]) -> Vec<Vec<ObjectId>> {
    let producers = graph.producers();
    let mut succ: BTreeMap<ObjectId, BTreeSet<ObjectId>> = BTreeMap::new();
    for &n in stuck {
        for d in graph.nodes[&n].inputs() {
            for p in producers.get(&d).into_iter().flatten() {
                succ.entry(*p).or_default().insert(n);
            }
        }
    }
    let reach = |start: ObjectId| {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<ObjectId> = succ.get(&start).into_iter().flatten().copied().collect();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(succ.get(&n).into_iter().flatten());
            }
        }
        seen
    };
    let reaches: BTreeMap<ObjectId, BTreeSet<ObjectId>> = stuck.iter().map(|&n| (n, reach(n))).collect();
    let mut done = BTreeSet::new();
    let mut out = Vec::new();
    for &n in stuck {
        if done.contains(&n) || !reaches[&n].contains(&n) {
            continue;
        }
        let scc: Vec<ObjectId> =
            reaches[&n].iter().copied().filter(|m| reaches.get(m).is_some_and(|r| r.contains(&n))).collect();
        done.extend(scc.iter().copied());
        out.push(scc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bind, Binding, ImageFormat, NodeOp};
    use crate::library::CvKernel;

    fn codes(r: Result<VerifiedGraph, Vec<Diagnostic>>) -> Vec<DiagCode> {
        r.err().unwrap_or_default().into_iter().map(|d| d.code).collect()
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let v = ctx.create_virtual_image(g).unwrap();
        let n = ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[v, v])).unwrap();
        let diags = verify(&ctx, g).unwrap_err();
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].code, DiagCode::CycleDetected);
        assert_eq!(diags[0].subjects, vec![n]);
        assert!(render(&diags).starts_with(&format!("CycleDetected object#{n}: ")));
    }

    #[test]
    fn scalar_bound_to_image_input_is_a_format_mismatch() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let s = ctx.create_scalar(crate::graph::PixelType::U8, Some(crate::ir::Value::Int(3)));
        let out = ctx.create_image(4, 4, ImageFormat::U8).unwrap();
        ctx.add_node(g, NodeOp::cv(CvKernel::Gaussian3x3), &bind(&[s, out])).unwrap();
        assert_eq!(codes(verify(&ctx, g)), vec![DiagCode::FormatMismatch]);
    }

    #[test]
    fn unbound_required_parameter_is_reported() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let a = ctx.create_image(4, 4, ImageFormat::U8).unwrap();
        let out = ctx.create_image(4, 4, ImageFormat::U8).unwrap();
        ctx.add_node(g, NodeOp::cv(CvKernel::Add), &[Binding { param: 0, data: a }, Binding { param: 2, data: out }])
            .unwrap();
        assert_eq!(codes(verify(&ctx, g)), vec![DiagCode::UnboundParam]);
    }

    #[test]
    fn virtual_never_written_is_unresolved() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let v = ctx.create_virtual_image(g).unwrap();
        let out = ctx.create_image(4, 4, ImageFormat::U8).unwrap();
        ctx.add_node(g, NodeOp::cv(CvKernel::Not), &bind(&[v, out])).unwrap();
        assert_eq!(codes(verify(&ctx, g)), vec![DiagCode::UnresolvedVirtualFormat]);
    }

    #[test]
    fn verification_resolves_and_is_idempotent() {
        let mut ctx = Context::new();
        let g = ctx.create_graph();
        let a = ctx.create_image(6, 5, ImageFormat::U8).unwrap();
        let v = ctx.create_virtual_image(g).unwrap();
        let out = ctx.create_image(6, 5, ImageFormat::S16).unwrap();
        ctx.add_node(g, NodeOp::cv(CvKernel::Box3x3), &bind(&[a, v])).unwrap();
        ctx.add_node(g, NodeOp::cv(CvKernel::ConvertDepth), &bind(&[v, out])).unwrap();
        let vg = verify(&ctx, g).unwrap();
        assert_eq!(vg.data()[&v].kind, DataKind::image(6, 5, ImageFormat::U8));
        let again = verify_parts(vg.graph().clone(), vg.data().clone()).unwrap();
        assert_eq!(again, vg);
        let mut m = vg.clone();
        m.graph_mut();
        assert!(!m.is_stamped());
    }
}
