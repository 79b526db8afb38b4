//! Node aggregation: merging adjacent point/local kernels across single-consumer virtual images.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::graph::{Binding, DataKind, Graph, Node, NodeOp, ObjectId};
use crate::ir::expr::Expr;
use crate::ir::kernel::{AbstractionKernel, Boundary, DataKindTag, KernelBody, LocalBody, MaskSource, PointBody};
use crate::optimize::OptError;
use crate::verify::{verify_parts, VerifiedGraph};

/// Which fusion rules are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FuseOptions {
    /// Point producer into point consumer.
    pub point_point: bool,
    /// Local producer into point consumer (the point body becomes the post body).
    pub local_point: bool,
    /// Point producer inlined at every window read of a local consumer.
    pub point_local: bool,
}

impl Default for FuseOptions {
    fn default() -> Self {
        FuseOptions { point_point: true, local_point: true, point_local: true }
    }
}

impl FuseOptions {
    pub fn none() -> Self {
        FuseOptions { point_point: false, local_point: false, point_local: false }
    }

    pub fn any(self) -> bool {
        self.point_point || self.local_point || self.point_local
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusedKernel {
    /// Id of the node that replaced the members (the last member's id).
    pub node: ObjectId,
    /// Original node ids, producers first.
    pub members: Vec<ObjectId>,
    pub kernel: Arc<AbstractionKernel>,
}

#[derive(Clone, Debug)]
pub struct FuseResult {
    pub graph: VerifiedGraph,
    pub groups: Vec<FusedKernel>,
}

/// Rewrites input indices; `map[i]` is the new index of old input `i`.
pub fn remap_inputs(e: &Expr, map: &[usize]) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::InputPixel { input, channel } => Expr::InputPixel { input: map[input], channel },
        Expr::WindowPixel { input, dx, dy, channel } => Expr::WindowPixel { input: map[input], dx, dy, channel },
        Expr::Lookup { input, index } => Expr::Lookup { input: map[input], index },
        other => other,
    })
}

/// Merged input list: consumer inputs except `d`, then producer inputs, deduplicated.
struct Merge {
    inputs: Vec<ObjectId>,
    kinds: Vec<DataKindTag>,
    /// New index of each consumer input; `usize::MAX` marks the fused slot.
    cmap: Vec<usize>,
    pmap: Vec<usize>,
}

fn merge_inputs(c_in: &[ObjectId], c_kinds: &[DataKindTag], p_in: &[ObjectId], p_kinds: &[DataKindTag], d: ObjectId) -> Merge {
    let mut m = Merge { inputs: vec![], kinds: vec![], cmap: vec![], pmap: vec![] };
    let place = |m: &mut Merge, id: ObjectId, kind: DataKindTag| -> usize {
        if let Some(i) = m.inputs.iter().position(|x| *x == id) {
            return i;
        }
        m.inputs.push(id);
        m.kinds.push(kind);
        m.inputs.len() - 1
    };
    for (i, &x) in c_in.iter().enumerate() {
        let idx = if x == d { usize::MAX } else { place(&mut m, x, c_kinds[i]) };
        m.cmap.push(idx);
    }
    for (j, &x) in p_in.iter().enumerate() {
        let idx = place(&mut m, x, p_kinds[j]);
        m.pmap.push(idx);
    }
    m
}

/// Substitutes reads of the fused slot (`slot`, old consumer index) in a point context.
fn subst_point(e: &Expr, slot: usize, producer: &[Expr], cmap: &[usize]) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::InputPixel { input, channel } if input == slot => producer[channel as usize].clone(),
        Expr::InputPixel { input, channel } => Expr::InputPixel { input: cmap[input], channel },
        Expr::WindowPixel { input, dx, dy, channel } => Expr::WindowPixel { input: cmap[input], dx, dy, channel },
        Expr::Lookup { input, index } => Expr::Lookup { input: cmap[input], index },
        other => other,
    })
}

/// Moves a point body to window offset `(dx, dy)`: image reads become window reads.
fn at_offset(e: &Expr, dx: i32, dy: i32, image: &[bool]) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::InputPixel { input, channel } if image[input] => Expr::WindowPixel { input, dx, dy, channel },
        other => other,
    })
}

/// Substitutes reads of the fused slot inside a local body.
fn subst_local(e: &Expr, slot: usize, producer: &[Expr], image: &[bool], cmap: &[usize]) -> Expr {
    e.rewrite(&mut |x| match x {
        Expr::InputPixel { input, channel } if input == slot => producer[channel as usize].clone(),
        Expr::WindowPixel { input, dx, dy, channel } if input == slot => {
            at_offset(&producer[channel as usize], dx, dy, image)
        }
        Expr::InputPixel { input, channel } => Expr::InputPixel { input: cmap[input], channel },
        Expr::WindowPixel { input, dx, dy, channel } => Expr::WindowPixel { input: cmap[input], dx, dy, channel },
        Expr::Lookup { input, index } => Expr::Lookup { input: cmap[input], index },
        other => other,
    })
}

fn remap_mask(mask: &Option<MaskSource>, map: &[usize]) -> Option<MaskSource> {
    match mask {
        Some(MaskSource::Param(k)) => Some(MaskSource::Param(map[*k])),
        other => other.clone(),
    }
}

/// Merged body for producer `p` feeding consumer `c` through consumer input `slot`, if a rule applies.
fn merge_bodies(
    p: &AbstractionKernel,
    c: &AbstractionKernel,
    slot: usize,
    m: &Merge,
    opts: FuseOptions,
) -> Option<KernelBody> {
    match (&p.body, &c.body) {
        (KernelBody::Point(pp), KernelBody::Point(cp)) if opts.point_point => {
            let producer: Vec<Expr> = pp.channels.iter().map(|e| remap_inputs(e, &m.pmap)).collect();
            let channels = cp.channels.iter().map(|e| subst_point(e, slot, &producer, &m.cmap)).collect();
            Some(KernelBody::Point(PointBody { channels }))
        }
        (KernelBody::Local(pl), KernelBody::Point(cp))
            if opts.local_point && pl.boundary != Boundary::Undefined && cp.channels.len() == 1 =>
        {
            let combined = remap_inputs(pl.post.as_ref().unwrap_or(&Expr::Acc), &m.pmap);
            let post = subst_point(&cp.channels[0], slot, &[combined], &m.cmap);
            Some(KernelBody::Local(LocalBody {
                tap: remap_inputs(&pl.tap, &m.pmap),
                mask: remap_mask(&pl.mask, &m.pmap),
                post: Some(post),
                ..pl.clone()
            }))
        }
        (KernelBody::Point(pp), KernelBody::Local(cl))
            if opts.point_local && !matches!(cl.boundary, Boundary::Constant(_)) =>
        {
            let producer: Vec<Expr> = pp.channels.iter().map(|e| remap_inputs(e, &m.pmap)).collect();
            let image: Vec<bool> = m.kinds.iter().map(|k| *k == DataKindTag::Image).collect();
            // A cmap entry for the fused slot is never used: its reads are substituted first.
            let cmap: Vec<usize> = m.cmap.iter().map(|&i| if i == usize::MAX { 0 } else { i }).collect();
            Some(KernelBody::Local(LocalBody {
                tap: subst_local(&cl.tap, slot, &producer, &image, &cmap),
                post: cl.post.as_ref().map(|e| subst_local(e, slot, &producer, &image, &cmap)),
                mask: remap_mask(&cl.mask, &cmap),
                ..cl.clone()
            }))
        }
        _ => None,
    }
}

fn try_fuse(graph: &Graph, data: &BTreeMap<ObjectId, crate::graph::DataObject>, cid: ObjectId, opts: FuseOptions) -> Option<(Node, ObjectId, ObjectId)> {
    let c = &graph.nodes[&cid];
    let ck = c.op.as_kernel()?;
    let c_in: Vec<ObjectId> = (0..ck.first_output()).map(|i| c.binding(i)).collect::<Option<_>>()?;
    let consumers = graph.consumers();
    let producers = graph.producers();
    for (slot, &d) in c_in.iter().enumerate() {
        let obj = data.get(&d)?;
        if !obj.is_virtual || !matches!(obj.kind, DataKind::Image { .. }) {
            continue;
        }
        if consumers.get(&d).map_or(0, |v| v.len()) != 1 {
            continue;
        }
        let Some(&[pid]) = producers.get(&d).map(|v| v.as_slice()) else { continue };
        let p = &graph.nodes[&pid];
        let Some(pk) = p.op.as_kernel() else { continue };
        let Some(p_in) = (0..pk.first_output()).map(|i| p.binding(i)).collect::<Option<Vec<_>>>() else { continue };
        let m = merge_inputs(&c_in, &ck.inputs, &p_in, &pk.inputs, d);
        let Some(body) = merge_bodies(pk, ck, slot, &m, opts) else { continue };
        let kernel = AbstractionKernel { name: format!("{}+{}", pk.name, ck.name), inputs: m.kinds.clone(), body };
        let n_in = m.inputs.len();
        let mut bindings: Vec<Binding> = m.inputs.iter().enumerate().map(|(param, &data)| Binding { param, data }).collect();
        bindings.extend(
            c.bindings
                .iter()
                .filter(|b| b.param >= ck.first_output())
                .map(|b| Binding { param: b.param - ck.first_output() + n_in, data: b.data }),
        );
        let node = Node { id: cid, op: NodeOp::Kernel(Arc::new(kernel)), bindings, origin: c.origin, name: c.name.clone() };
        return Some((node, pid, d));
    }
    None
}

/// Applies the enabled rules until no candidate remains. Candidates are visited in
/// topological order (ascending id on ties), restarting after every merge.
pub fn fuse(vg: &VerifiedGraph, opts: FuseOptions) -> Result<FuseResult, OptError> {
    if !vg.is_stamped() {
        return Err(OptError::Unstamped);
    }
    let (mut graph, mut data) = vg.clone().into_parts();
    let mut members: BTreeMap<ObjectId, Vec<ObjectId>> = graph.nodes.keys().map(|&n| (n, vec![n])).collect();
    let mut order = vg.order().to_vec();
    'restart: loop {
        for &cid in &order {
            let Some((merged, pid, d)) = try_fuse(&graph, &data, cid, opts) else { continue };
            graph.nodes.remove(&pid);
            graph.virtuals.remove(&d);
            data.remove(&d);
            graph.nodes.insert(cid, merged);
            let mut m = members.remove(&pid).unwrap_or_default();
            m.extend(members.remove(&cid).unwrap_or_default());
            members.insert(cid, m);
            order = graph.topo_sort().map_err(OptError::Graph)?;
            continue 'restart;
        }
        break;
    }
    let graph = verify_parts(graph, data).map_err(OptError::Verify)?;
    let groups = members
        .into_iter()
        .filter(|(_, m)| m.len() >= 2)
        .map(|(node, members)| FusedKernel {
            node,
            members,
            kernel: graph.graph().nodes[&node].op.as_kernel().expect("fused kernel").clone(),
        })
        .collect();
    Ok(FuseResult { graph, groups })
}
