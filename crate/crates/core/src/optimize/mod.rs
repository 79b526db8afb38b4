//! Graph optimizations: dead computation elimination, transfer planning, fusion.

mod dce;
mod fuse;
mod transfers;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::graph::{GraphError, NodeOp};
use crate::library::lower;
use crate::verify::{Diagnostic, VerifiedGraph};

pub use dce::{alive_vertices, classify, eliminate_dead_nodes, to_dag, Classification, Dag, FilteredGraph, Vertex};
pub use fuse::{fuse, remap_inputs, FuseOptions, FuseResult, FusedKernel};
pub use transfers::{plan_transfers, Transfer, TransferDirection, TransferPlan};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum OptError {
    #[error("graph is not verified (or was modified after verification)")]
    Unstamped,
    #[error("re-verification failed:\n{}", crate::verify::render(.0))]
    Verify(Vec<Diagnostic>),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PassOptions {
    pub dce: bool,
    pub fuse: FuseOptions,
}

impl Default for PassOptions {
    fn default() -> Self {
        PassOptions { dce: true, fuse: FuseOptions::default() }
    }
}

impl PassOptions {
    pub fn none() -> Self {
        PassOptions { dce: false, fuse: FuseOptions::none() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PassStats {
    pub nodes_before: usize,
    pub nodes_alive: usize,
    pub nodes_removed: usize,
    pub transfers_naive: usize,
    pub transfers_optimized: usize,
    pub fused_groups: usize,
    pub launches_before: usize,
    pub launches_after: usize,
}

/// Output of the pass pipeline: the graph to execute plus its schedule.
#[derive(Clone, Debug)]
pub struct Plan {
    /// Alive and fused graph, re-verified.
    pub graph: VerifiedGraph,
    pub filtered: FilteredGraph,
    pub transfers: TransferPlan,
    pub groups: Vec<FusedKernel>,
    pub stats: PassStats,
}

/// Kernel launches needed to run `vg` node by node (registry nodes count their lowered steps).
pub fn launch_count(vg: &VerifiedGraph) -> usize {
    vg.graph()
        .nodes
        .values()
        .map(|n| match &n.op {
            NodeOp::Cv(cv) => {
                let descs: Vec<_> = (0..cv.kernel.params().len())
                    .map(|i| n.binding(i).and_then(|d| vg.data().get(&d)).map(|d| &d.kind))
                    .collect();
                lower(cv, &descs).map(|l| l.steps.len()).unwrap_or(1)
            }
            _ => 1,
        })
        .sum()
}

/// Runs DCE, transfer planning and fusion, in that order.
pub fn optimize(vg: &VerifiedGraph, opts: PassOptions) -> Result<Plan, OptError> {
    let filtered = if opts.dce {
        eliminate_dead_nodes(vg)?
    } else {
        if !vg.is_stamped() {
            return Err(OptError::Unstamped);
        }
        let all = vg.data().keys().chain(vg.graph().nodes.keys()).copied().collect();
        FilteredGraph { base: vg.clone(), alive: all }
    };
    let alive = if opts.dce { filtered.materialize()? } else { vg.clone() };
    let transfers = plan_transfers(&alive);
    let fused = fuse(&alive, opts.fuse)?;
    let stats = PassStats {
        nodes_before: vg.node_count(),
        nodes_alive: alive.node_count(),
        nodes_removed: vg.node_count() - alive.node_count(),
        transfers_naive: 2 * launch_count(vg),
        transfers_optimized: transfers.count(),
        fused_groups: fused.groups.len(),
        launches_before: launch_count(vg),
        launches_after: launch_count(&fused.graph),
    };
    Ok(Plan { graph: fused.graph, filtered, transfers, groups: fused.groups, stats })
}

impl Plan {
    /// Canonical description: launch order with kernel bodies, transfers, groups and stats.
    pub fn to_json(&self) -> serde_json::Value {
        let g = self.graph.graph();
        let launches: Vec<_> = self
            .graph
            .order()
            .iter()
            .map(|id| {
                let n = &g.nodes[id];
                let body = n.op.as_kernel().map(|k| crate::io::kernel_to_json(k));
                json!({
                    "node": id.0,
                    "kernel": n.op.name(),
                    "inputs": n.inputs().iter().map(|d| d.0).collect::<Vec<_>>(),
                    "outputs": n.outputs().iter().map(|d| d.0).collect::<Vec<_>>(),
                    "body": body,
                })
            })
            .collect();
        let groups: Vec<_> = self
            .groups
            .iter()
            .map(|f| json!({"node": f.node.0, "members": f.members.iter().map(|m| m.0).collect::<Vec<_>>()}))
            .collect();
        json!({
            "launches": launches,
            "transfers": self.transfers,
            "fused_groups": groups,
            "stats": self.stats,
        })
    }
}
