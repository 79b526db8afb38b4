//! Reference execution engines: naive per-node interpretation and optimized-plan execution.

mod buffer;
mod engine;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{DataKind, ElementKind, Node, NodeOp, ObjectId, PixelType};
use crate::ir::kernel::AbstractionKernel;
use crate::ir::value::Value;
use crate::library::{lower, Slot};
use crate::optimize::Plan;
use crate::verify::VerifiedGraph;

pub use buffer::{ArrayItems, Buffer, Image, Pixels};
pub use engine::{
    border_constant, equalization_table, input_type, launch, median9, scale_coord, Counters, KernelError,
    LaunchOutput, MEDIAN9_NETWORK,
};

pub type Buffers = BTreeMap<ObjectId, Buffer>;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExecError {
    #[error("graph is not verified (or was modified after verification)")]
    Unstamped,
    #[error("no buffer supplied for input object {0}")]
    MissingInput(ObjectId),
    #[error("buffer for object {0} does not match its descriptor")]
    ShapeMismatch(ObjectId),
    #[error("node {node}: {source}")]
    Kernel { node: ObjectId, source: KernelError },
    #[error("node {node}: {message}")]
    Unsupported { node: ObjectId, message: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutionReport {
    /// Every non-virtual object written by the graph.
    pub outputs: Buffers,
    pub counters: Counters,
    /// Outputs whose border pixels were zero-filled under undefined boundary handling.
    pub undefined_borders: BTreeSet<ObjectId>,
}

impl ExecutionReport {
    /// Bit-exact equality of every output payload.
    pub fn outputs_bit_eq(&self, other: &ExecutionReport) -> bool {
        self.outputs.len() == other.outputs.len()
            && self.outputs.iter().all(|(id, b)| other.outputs.get(id).is_some_and(|o| b.bit_eq(o)))
    }
}

/// Data objects that must be supplied by the caller: non-virtual, never written,
/// and not constant (constant scalars and matrices carry their own payload).
pub fn graph_inputs(vg: &VerifiedGraph) -> Vec<ObjectId> {
    let producers = vg.graph().producers();
    vg.data()
        .values()
        .filter(|d| !d.is_virtual && !producers.contains_key(&d.id) && Buffer::from_constant(&d.kind).is_none())
        .map(|d| d.id)
        .collect()
}

/// Non-virtual objects written by some node.
pub fn graph_outputs(vg: &VerifiedGraph) -> Vec<ObjectId> {
    let producers = vg.graph().producers();
    vg.data().values().filter(|d| !d.is_virtual && producers.contains_key(&d.id)).map(|d| d.id).collect()
}

/// Deterministic random payloads for every caller-supplied input, in ascending id order.
pub fn random_inputs(vg: &VerifiedGraph, seed: u64) -> Buffers {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Buffers::new();
    for id in graph_inputs(vg) {
        let kind = &vg.data()[&id].kind;
        if let Some(b) = random_buffer(kind, &mut rng) {
            out.insert(id, b);
        }
    }
    out
}

/// Random payload matching `kind`.
pub fn random_buffer(kind: &DataKind, rng: &mut impl Rng) -> Option<Buffer> {
    Some(match kind {
        DataKind::Image { width, height, format } => Buffer::Image(Image::random(*width, *height, *format, rng)),
        DataKind::Scalar { format, .. } => {
            let v = match format.int_range() {
                Some((lo, hi)) => Value::Int(rng.gen_range(lo..=hi)),
                None => Value::Real(rng.gen_range(-1024.0f32..1024.0) as f64),
            };
            Buffer::Scalar(*format, v)
        }
        DataKind::Array { capacity, element } => {
            let items = match element {
                ElementKind::Coordinate => ArrayItems::Coords(vec![]),
                e => {
                    let (lo, hi) = e.value_type().and_then(|t| t.int_range()).expect("integer element");
                    ArrayItems::Values((0..*capacity).map(|_| rng.gen_range(lo..=hi)).collect())
                }
            };
            Buffer::Array { element: *element, capacity: *capacity, items }
        }
        DataKind::Matrix { .. } => return Buffer::from_constant(kind),
        DataKind::Distribution { bins, offset, range } => Buffer::Distribution {
            bins: *bins,
            offset: *offset,
            range: *range,
            counts: (0..*bins).map(|_| rng.gen_range(0..64)).collect(),
        },
    })
}

fn seed_buffers(vg: &VerifiedGraph, inputs: &Buffers) -> Result<Buffers, ExecError> {
    let producers = vg.graph().producers();
    let mut bufs = Buffers::new();
    for d in vg.data().values() {
        if producers.contains_key(&d.id) {
            continue;
        }
        if let Some(b) = inputs.get(&d.id) {
            if !b.matches(&d.kind) {
                return Err(ExecError::ShapeMismatch(d.id));
            }
            bufs.insert(d.id, b.clone());
        } else if let Some(b) = Buffer::from_constant(&d.kind) {
            bufs.insert(d.id, b);
        } else if !d.is_virtual {
            return Err(ExecError::MissingInput(d.id));
        }
    }
    Ok(bufs)
}

struct Run<'a> {
    vg: &'a VerifiedGraph,
    bufs: Buffers,
    counters: Counters,
    undefined: BTreeSet<ObjectId>,
}

impl Run<'_> {
    fn launch_kernel(
        &mut self,
        node: ObjectId,
        k: &AbstractionKernel,
        ins: &[&Buffer],
        hints: &[Option<&DataKind>],
    ) -> Result<LaunchOutput, ExecError> {
        launch(k, ins, hints, &mut self.counters).map_err(|source| ExecError::Kernel { node, source })
    }

    fn run_node(&mut self, node: &Node) -> Result<(), ExecError> {
        match &node.op {
            NodeOp::Kernel(k) => {
                let n_in = k.first_output();
                let n_out = k.output_params().len();
                let missing = |p: usize| ExecError::Unsupported { node: node.id, message: format!("parameter {p} unbound") };
                let ins: Vec<ObjectId> = (0..n_in).map(|p| node.binding(p).ok_or_else(|| missing(p))).collect::<Result<_, _>>()?;
                let outs: Vec<Option<ObjectId>> = (n_in..n_in + n_out).map(|p| node.binding(p)).collect();
                let res = {
                    let in_bufs: Vec<&Buffer> = ins
                        .iter()
                        .map(|d| self.bufs.get(d).ok_or(ExecError::MissingInput(*d)))
                        .collect::<Result<_, _>>()?;
                    let hints: Vec<Option<&DataKind>> =
                        outs.iter().map(|o| o.and_then(|d| self.vg.data().get(&d)).map(|d| &d.kind)).collect();
                    launch(k, &in_bufs, &hints, &mut self.counters)
                        .map_err(|source| ExecError::Kernel { node: node.id, source })?
                };
                for (o, b) in outs.iter().zip(res.outputs) {
                    if let (Some(d), Some(b)) = (o, b) {
                        if res.undefined_border {
                            self.undefined.insert(*d);
                        }
                        self.bufs.insert(*d, b);
                    }
                }
                Ok(())
            }
            NodeOp::Cv(cv) => {
                let descs: Vec<Option<&DataKind>> = (0..cv.kernel.params().len())
                    .map(|i| node.binding(i).and_then(|d| self.vg.data().get(&d)).map(|d| &d.kind))
                    .collect();
                let lowering =
                    lower(cv, &descs).map_err(|message| ExecError::Unsupported { node: node.id, message })?;
                let mut temps: Vec<Option<Buffer>> = vec![None; lowering.temps.len()];
                for step in &lowering.steps {
                    let n_in = step.kernel.first_output();
                    let get = |s: &Option<Slot>, temps: &Vec<Option<Buffer>>, bufs: &Buffers| -> Option<Buffer> {
                        match (*s)? {
                            Slot::Param(i) => bufs.get(&node.binding(i)?).cloned(),
                            Slot::Temp(t) => temps[t].clone(),
                        }
                    };
                    let ins: Vec<Buffer> = step.args[..n_in]
                        .iter()
                        .map(|s| get(s, &temps, &self.bufs))
                        .collect::<Option<_>>()
                        .ok_or_else(|| ExecError::Unsupported { node: node.id, message: "unbound step input".into() })?;
                    let in_refs: Vec<&Buffer> = ins.iter().collect();
                    let hints: Vec<Option<&DataKind>> = step.args[n_in..]
                        .iter()
                        .map(|s| match (*s)? {
                            Slot::Param(i) => node.binding(i).and_then(|d| self.vg.data().get(&d)).map(|d| &d.kind),
                            Slot::Temp(t) => lowering.temps.get(t),
                        })
                        .collect();
                    let res = self.launch_kernel(node.id, &step.kernel, &in_refs, &hints)?;
                    for (slot, b) in step.args[n_in..].iter().zip(res.outputs) {
                        let (Some(slot), Some(b)) = (slot, b) else { continue };
                        match *slot {
                            Slot::Temp(t) => temps[t] = Some(b),
                            Slot::Param(i) => {
                                if let Some(d) = node.binding(i) {
                                    if res.undefined_border {
                                        self.undefined.insert(d);
                                    }
                                    self.bufs.insert(d, b);
                                }
                            }
                        }
                    }
                }
                Ok(())
            }
            NodeOp::Unknown(name) => {
                Err(ExecError::Unsupported { node: node.id, message: format!("unknown kernel `{name}`") })
            }
        }
    }
}

fn execute(vg: &VerifiedGraph, inputs: &Buffers) -> Result<ExecutionReport, ExecError> {
    if !vg.is_stamped() {
        return Err(ExecError::Unstamped);
    }
    let mut run = Run { vg, bufs: seed_buffers(vg, inputs)?, counters: Counters::default(), undefined: BTreeSet::new() };
    for nid in vg.order() {
        run.run_node(&vg.graph().nodes[nid])?;
    }
    let wanted: BTreeSet<ObjectId> = graph_outputs(vg).into_iter().collect();
    let Run { mut bufs, counters, undefined, .. } = run;
    bufs.retain(|id, _| wanted.contains(id));
    let undefined_borders = undefined.into_iter().filter(|d| wanted.contains(d)).collect();
    Ok(ExecutionReport { outputs: bufs, counters, undefined_borders })
}

/// Executes every node of `vg` in topological order. Each launch is charged an
/// upload and a download, the per-node transfer model.
pub fn run_naive(vg: &VerifiedGraph, inputs: &Buffers) -> Result<ExecutionReport, ExecError> {
    let mut r = execute(vg, inputs)?;
    r.counters.transfers_executed = 2 * r.counters.kernel_launches;
    Ok(r)
}

/// Executes an optimized plan; transfers are those the plan schedules.
pub fn run_plan(plan: &Plan, inputs: &Buffers) -> Result<ExecutionReport, ExecError> {
    let mut r = execute(&plan.graph, inputs)?;
    r.counters.transfers_executed = plan.transfers.transfers.len() as u64;
    Ok(r)
}

/// Relative-error comparison used for float outputs: `|a-b| <= tol * max(|a|,|b|)`,
/// with exact equality required near zero.
pub fn outputs_close(a: &ExecutionReport, b: &ExecutionReport, tol: f64) -> bool {
    if a.outputs.len() != b.outputs.len() {
        return false;
    }
    a.outputs.iter().all(|(id, x)| {
        let Some(y) = b.outputs.get(id) else { return false };
        match (x, y) {
            (Buffer::Image(p), Buffer::Image(q)) if matches!(p.pixels, Pixels::F32(_)) => {
                p.width == q.width
                    && p.height == q.height
                    && (0..p.pixels.len()).all(|i| close(p.pixels.get(i).as_f64(), q.pixels.get(i).as_f64(), tol))
            }
            (Buffer::Scalar(PixelType::F32, u), Buffer::Scalar(PixelType::F32, v)) => close(u.as_f64(), v.as_f64(), tol),
            _ => x.bit_eq(y),
        }
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    a.to_bits() == b.to_bits() || (a - b).abs() <= tol * a.abs().max(b.abs())
}
