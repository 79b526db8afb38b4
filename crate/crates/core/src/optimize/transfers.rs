//! Host/device transfer planning over virtual-connected device segments.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::graph::{NodeOp, ObjectId};
use crate::ir::kernel::AbstractionKind;
use crate::verify::VerifiedGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TransferDirection {
    HostToDevice,
    DeviceToHost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Transfer {
    pub direction: TransferDirection,
    pub data: ObjectId,
    pub segment: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TransferPlan {
    /// Device segments, each a topologically ordered node list.
    pub segments: Vec<Vec<ObjectId>>,
    /// Host-side steps between segments.
    pub host_steps: Vec<ObjectId>,
    pub transfers: Vec<Transfer>,
}

impl TransferPlan {
    pub fn count(&self) -> usize {
        self.transfers.len()
    }

    /// Per-node plan: every launch is its own segment with one upload and one download.
    pub fn naive(vg: &VerifiedGraph) -> TransferPlan {
        let mut plan = TransferPlan::default();
        for (i, &nid) in vg.order().iter().enumerate() {
            let node = &vg.graph().nodes[&nid];
            plan.segments.push(vec![nid]);
            if let Some(&d) = node.inputs().first() {
                plan.transfers.push(Transfer { direction: TransferDirection::HostToDevice, data: d, segment: i });
            }
            if let Some(&d) = node.outputs().first() {
                plan.transfers.push(Transfer { direction: TransferDirection::DeviceToHost, data: d, segment: i });
            }
        }
        plan
    }
}

fn is_host(op: &NodeOp) -> bool {
    op.as_kernel().is_some_and(|k| k.kind() == AbstractionKind::Host)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups device nodes linked through virtual data into segments. Transfers are
/// scheduled only where a segment touches host-visible data: non-virtual objects,
/// and virtual objects exchanged with a host step.
pub fn plan_transfers(vg: &VerifiedGraph) -> TransferPlan {
    let g = vg.graph();
    let order = vg.order();
    let pos: BTreeMap<ObjectId, usize> = order.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let host: BTreeSet<ObjectId> = order.iter().copied().filter(|n| is_host(&g.nodes[n].op)).collect();
    let is_virtual = |d: &ObjectId| vg.data().get(d).is_some_and(|o| o.is_virtual);

    let mut parent: Vec<usize> = (0..order.len()).collect();
    let producers = g.producers();
    let consumers = g.consumers();
    for (d, ps) in &producers {
        if !is_virtual(d) {
            continue;
        }
        for p in ps.iter().filter(|p| !host.contains(p)) {
            for c in consumers.get(d).into_iter().flatten().filter(|c| !host.contains(c)) {
                let (a, b) = (find(&mut parent, pos[p]), find(&mut parent, pos[c]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<ObjectId>> = BTreeMap::new();
    for (i, &n) in order.iter().enumerate() {
        if !host.contains(&n) {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(n);
        }
    }
    let mut plan = TransferPlan { host_steps: host.iter().copied().collect(), ..Default::default() };
    plan.host_steps.sort_by_key(|n| pos[n]);
    for (seg, members) in groups.into_values().enumerate() {
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        for n in &members {
            let node = &g.nodes[n];
            for d in node.inputs() {
                let from_host = producers.get(&d).is_some_and(|ps| ps.iter().any(|p| host.contains(p)));
                if !is_virtual(&d) || from_host {
                    reads.insert(d);
                }
            }
            for d in node.outputs() {
                let to_host = consumers.get(&d).is_some_and(|cs| cs.iter().any(|c| host.contains(c)));
                if !is_virtual(&d) || to_host {
                    writes.insert(d);
                }
            }
        }
        plan.transfers.extend(
            reads.into_iter().map(|data| Transfer { direction: TransferDirection::HostToDevice, data, segment: seg }),
        );
        plan.transfers.extend(
            writes.into_iter().map(|data| Transfer { direction: TransferDirection::DeviceToHost, data, segment: seg }),
        );
        plan.segments.push(members);
    }
    plan
}
