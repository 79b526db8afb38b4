//! Streaming-pipeline plans: virtual images become FIFOs, local stages get line
//! buffers, global kernels split the pipeline into segments.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::codegen::CodegenError;
use crate::exec::{graph_outputs, input_type, launch, median9, ArrayItems, Buffer, Buffers, Counters, ExecError, Image};
use crate::graph::{DataKind, ImageFormat, ObjectId};
use crate::ir::eval::{apply_binary, eval_expr, Env, EvalError};
use crate::ir::expr::{BinOp, Expr};
use crate::ir::kernel::{AbstractionKernel, AbstractionKind, Boundary, Combine, KernelBody, LocalBody, MaskSource};
use crate::ir::types::{local_acc_type, typecheck, InputType, OutputType};
use crate::ir::value::Value;
use crate::verify::VerifiedGraph;

pub const DEFAULT_FIFO_SLACK: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamOptions {
    /// Replication factor: parallel lanes per stage over column-interleaved pixels.
    pub v: u32,
    pub fifo_slack: usize,
}

impl Default for StreamOptions {
    fn default() -> Self {
        StreamOptions { v: 1, fifo_slack: DEFAULT_FIFO_SLACK }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub index: usize,
    pub node: ObjectId,
    pub kernel: String,
    pub kind: AbstractionKind,
    pub segment: usize,
    pub lanes: u32,
    /// `[width, height]` of the window for local stages.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[u32; 2]>,
    pub inputs: Vec<ObjectId>,
    pub outputs: Vec<ObjectId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fifo {
    pub data: ObjectId,
    pub producer: usize,
    pub consumer: usize,
    /// Capacity in pixels.
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineBuffer {
    pub stage: usize,
    pub input: ObjectId,
    pub rows: u32,
    pub extra_pixels: u32,
    pub width: u32,
    /// `rows * width + extra_pixels`.
    pub elements: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Barrier {
    /// Index of the node in the graph's launch order.
    pub position: usize,
    pub node: ObjectId,
    pub kind: AbstractionKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamPlan {
    pub replication: u32,
    pub fifo_slack: usize,
    pub segments: usize,
    pub stages: Vec<Stage>,
    pub fifos: Vec<Fifo>,
    pub line_buffers: Vec<LineBuffer>,
    pub barriers: Vec<Barrier>,
    /// Virtual images crossing a barrier; these are stored whole rather than streamed.
    pub materialized: Vec<ObjectId>,
}

fn windowed_inputs(l: &LocalBody) -> BTreeSet<usize> {
    let mut s = BTreeSet::new();
    let mut visit = |e: &Expr| {
        if let Expr::WindowPixel { input, .. } = e {
            s.insert(*input);
        }
    };
    l.tap.walk(&mut visit);
    if let Some(p) = &l.post {
        p.walk(&mut visit);
    }
    s
}

/// Builds the streaming plan of a (fused) verified graph.
pub fn emit_stream_plan(vg: &VerifiedGraph, opts: StreamOptions) -> Result<StreamPlan, CodegenError> {
    if !vg.is_stamped() {
        return Err(CodegenError::Unstamped);
    }
    if opts.v == 0 {
        return Err(CodegenError::InvalidFactor(opts.v));
    }
    let g = vg.graph();
    let producers = g.producers();
    if let Some((d, _)) = producers.iter().find(|(_, p)| p.len() > 1) {
        return Err(CodegenError::NonStreamable { data: *d });
    }
    // Barrier depth: how many global kernels lie upstream of a node.
    let mut depth: BTreeMap<ObjectId, usize> = BTreeMap::new();
    let is_global = |n: ObjectId| g.nodes[&n].op.as_kernel().is_none_or(|k| k.kind().is_global());
    for &nid in vg.order() {
        let d = g.nodes[&nid]
            .inputs()
            .iter()
            .filter_map(|data| producers.get(data).and_then(|p| p.first()))
            .map(|&p| depth[&p] + usize::from(is_global(p)))
            .max()
            .unwrap_or(0);
        depth.insert(nid, d);
    }
    let stage_depths: BTreeSet<usize> =
        vg.order().iter().filter(|n| !is_global(**n)).map(|n| depth[n]).collect();
    let segment_of: BTreeMap<usize, usize> = stage_depths.iter().enumerate().map(|(i, &d)| (d, i)).collect();

    let mut plan = StreamPlan {
        replication: opts.v,
        fifo_slack: opts.fifo_slack,
        segments: segment_of.len(),
        stages: vec![],
        fifos: vec![],
        line_buffers: vec![],
        barriers: vec![],
        materialized: vec![],
    };
    let mut stage_of: BTreeMap<ObjectId, usize> = BTreeMap::new();
    for (position, &nid) in vg.order().iter().enumerate() {
        let n = &g.nodes[&nid];
        let Some(k) = n.op.as_kernel().filter(|k| !k.kind().is_global()) else {
            let kind = n.op.as_kernel().map(|k| k.kind()).unwrap_or(AbstractionKind::Host);
            plan.barriers.push(Barrier { position, node: nid, kind });
            continue;
        };
        let index = plan.stages.len();
        stage_of.insert(nid, index);
        let inputs = n.inputs();
        let window = k.as_local().map(|l| [l.window_w, l.window_h]);
        if let Some(l) = k.as_local() {
            for i in windowed_inputs(l) {
                let d = inputs[i];
                let width = vg.data()[&d].kind.dims().map_or(0, |d| d.0);
                let (rows, extra) = (l.window_h - 1, l.window_w - 1);
                plan.line_buffers.push(LineBuffer {
                    stage: index,
                    input: d,
                    rows,
                    extra_pixels: extra,
                    width,
                    elements: rows as u64 * width as u64 + extra as u64,
                });
            }
        }
        plan.stages.push(Stage {
            index,
            node: nid,
            kernel: k.name.clone(),
            kind: k.kind(),
            segment: segment_of[&depth[&nid]],
            lanes: opts.v,
            window,
            inputs,
            outputs: n.outputs(),
        });
    }
    let mut materialized = BTreeSet::new();
    for (d, consumers) in g.consumers() {
        if !vg.data().get(&d).is_some_and(|o| o.is_virtual) {
            continue;
        }
        let Some(&p) = producers.get(&d).and_then(|p| p.first()) else { continue };
        let mut seen = BTreeSet::new();
        for c in consumers {
            if !seen.insert(c) {
                continue;
            }
            match (stage_of.get(&p), stage_of.get(&c)) {
                (Some(&ps), Some(&cs)) if plan.stages[ps].segment == plan.stages[cs].segment => plan.fifos.push(Fifo {
                    data: d,
                    producer: ps,
                    consumer: cs,
                    depth: opts.fifo_slack.max(1),
                }),
                _ => {
                    materialized.insert(d);
                }
            }
        }
    }
    plan.fifos.sort_by_key(|f| (f.producer, f.consumer, f.data));
    plan.materialized = materialized.into_iter().collect();
    Ok(plan)
}

impl StreamPlan {
    /// Structural checks against the graph the plan was built from.
    pub fn validate(&self, vg: &VerifiedGraph) -> Result<(), String> {
        let g = vg.graph();
        if self.replication == 0 {
            return Err("replication factor must be at least 1".into());
        }
        let mut position: BTreeMap<ObjectId, usize> = BTreeMap::new();
        for (i, s) in self.stages.iter().enumerate() {
            if s.index != i {
                return Err(format!("stage {i} carries index {}", s.index));
            }
            if s.lanes != self.replication {
                return Err(format!("stage {i} has {} lanes, plan replication is {}", s.lanes, self.replication));
            }
            if s.segment >= self.segments {
                return Err(format!("stage {i} in segment {} of {}", s.segment, self.segments));
            }
            let n = g.nodes.get(&s.node).ok_or_else(|| format!("stage {i}: node {} not in graph", s.node))?;
            let k = n.op.as_kernel().ok_or_else(|| format!("stage {i} is not a kernel node"))?;
            if k.kind().is_global() {
                return Err(format!("stage {i} is a global kernel"));
            }
            position.insert(s.node, i);
        }
        let producers = g.producers();
        for s in &self.stages {
            for d in &s.inputs {
                if let Some(p) = producers.get(d).and_then(|p| p.first()).and_then(|p| position.get(p)) {
                    if *p >= s.index {
                        return Err(format!("stage {} reads {d} before stage {p} writes it", s.index));
                    }
                }
            }
            if let Some(l) = g.nodes[&s.node].op.as_kernel().and_then(|k| k.as_local()) {
                let want = windowed_inputs(l);
                let have: Vec<&LineBuffer> = self.line_buffers.iter().filter(|b| b.stage == s.index).collect();
                if have.len() != want.len() {
                    return Err(format!("stage {} has {} line buffers for {} windowed inputs", s.index, have.len(), want.len()));
                }
                for b in have {
                    if b.rows != l.window_h - 1 || b.extra_pixels != l.window_w - 1 {
                        return Err(format!("stage {} line buffer {}x{} for a {}x{} window", s.index, b.rows, b.extra_pixels, l.window_w, l.window_h));
                    }
                    if b.elements != b.rows as u64 * b.width as u64 + b.extra_pixels as u64 {
                        return Err(format!("stage {} line buffer size {} is inconsistent", s.index, b.elements));
                    }
                }
            }
        }
        for f in &self.fifos {
            if f.depth < 1 {
                return Err(format!("fifo on {} has depth 0", f.data));
            }
            if f.producer >= f.consumer {
                return Err(format!("fifo on {} runs backwards", f.data));
            }
        }
        for s in &self.stages {
            for d in &s.inputs {
                let Some(p) = producers.get(d).and_then(|p| p.first()).and_then(|p| position.get(p)) else { continue };
                let same = self.stages[*p].segment == s.segment;
                let virt = vg.data().get(d).is_some_and(|o| o.is_virtual);
                let fifo = self.fifos.iter().any(|f| f.data == *d && f.producer == *p && f.consumer == s.index);
                if virt && same && !fifo {
                    return Err(format!("virtual edge {d} between stages {p} and {} has no fifo", s.index));
                }
            }
        }
        let globals = g.nodes.values().filter(|n| n.op.as_kernel().is_none_or(|k| k.kind().is_global())).count();
        if globals != self.barriers.len() {
            return Err(format!("{} global kernels but {} barriers", globals, self.barriers.len()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes") + "\n"
    }
}

/// Rows of one windowed input held by a stage: at most `window_h` rows
/// (`window_h − 1` buffered plus the incoming one).
struct RowWindow<'a> {
    src: &'a Image,
    capacity: usize,
    rows: VecDeque<(u32, Vec<Value>)>,
    next: u32,
}

impl RowWindow<'_> {
    fn push_until(&mut self, last: u32) {
        while self.next <= last.min(self.src.height - 1) {
            let y = self.next;
            let ch = self.src.format.channels() as u8;
            let row = (0..self.src.width).flat_map(|x| (0..ch).map(move |c| (x, c))).map(|(x, c)| self.src.get(x, y, c)).collect();
            if self.rows.len() == self.capacity {
                self.rows.pop_front();
            }
            self.rows.push_back((y, row));
            self.next += 1;
        }
    }

    fn get(&self, x: u32, y: u32, ch: u8) -> Option<Value> {
        let channels = self.src.format.channels();
        let (_, row) = self.rows.iter().find(|(ry, _)| *ry == y)?;
        row.get(x as usize * channels + ch as usize).copied()
    }
}

enum Port<'a> {
    Image(&'a Image),
    Window(RowWindow<'a>),
    Scalar(Value),
    Values(&'a [i64]),
    Counts(&'a [u32]),
    Other,
}

struct StreamEnv<'p, 'a> {
    ports: &'p [Port<'a>],
    x: i64,
    y: i64,
    tx: i32,
    ty: i32,
    boundary: Boundary,
    mask: &'p [Value],
    mask_w: i32,
    radius: (i32, i32),
    acc: Option<Value>,
}

impl Env for StreamEnv<'_, '_> {
    fn input(&self, k: usize, ch: u8) -> Result<Value, EvalError> {
        match self.ports.get(k) {
            Some(Port::Image(img)) => Ok(img.get(self.x as u32, self.y as u32, ch)),
            Some(Port::Window(w)) => w.get(self.x as u32, self.y as u32, ch).ok_or(EvalError::Missing("buffered row")),
            Some(Port::Scalar(v)) => Ok(*v),
            _ => Err(EvalError::BadInput(k)),
        }
    }

    fn window(&self, k: usize, dx: i32, dy: i32, ch: u8) -> Result<Value, EvalError> {
        let Some(Port::Window(win)) = self.ports.get(k) else {
            return Err(EvalError::BadInput(k));
        };
        let (w, h) = (win.src.width as i64, win.src.height as i64);
        let mut px = self.x + (self.tx + dx) as i64;
        let mut py = self.y + (self.ty + dy) as i64;
        if px < 0 || py < 0 || px >= w || py >= h {
            if let Boundary::Constant(c) = self.boundary {
                return Ok(crate::exec::border_constant(c, win.src.format.channel_type().expect("concrete")));
            }
            px = px.clamp(0, w - 1);
            py = py.clamp(0, h - 1);
        }
        win.get(px as u32, py as u32, ch).ok_or(EvalError::Missing("buffered row"))
    }

    fn mask(&self, dx: i32, dy: i32) -> Result<Value, EvalError> {
        let mx = self.tx + dx + self.radius.0;
        let my = self.ty + dy + self.radius.1;
        self.mask.get((my * self.mask_w + mx) as usize).copied().ok_or(EvalError::Missing("mask"))
    }

    fn acc(&self) -> Result<Value, EvalError> {
        self.acc.ok_or(EvalError::Missing("accumulator"))
    }

    fn lookup(&self, k: usize, index: i64) -> Result<Value, EvalError> {
        let clamp = |len: usize| index.clamp(0, len.saturating_sub(1) as i64) as usize;
        match self.ports.get(k) {
            Some(Port::Values(v)) if !v.is_empty() => Ok(Value::Int(v[clamp(v.len())])),
            Some(Port::Counts(c)) if !c.is_empty() => Ok(Value::Int(c[clamp(c.len())] as i64)),
            Some(Port::Values(_)) | Some(Port::Counts(_)) => Ok(Value::Int(0)),
            _ => Err(EvalError::BadInput(k)),
        }
    }
}

fn local_pixel(l: &LocalBody, env: &mut StreamEnv<'_, '_>, zero: Value) -> Result<Value, EvalError> {
    let taps: Vec<(i32, i32)> = l.taps().collect();
    let tap = |env: &mut StreamEnv<'_, '_>, (tx, ty): (i32, i32)| {
        env.tx = tx;
        env.ty = ty;
        eval_expr(&l.tap, env)
    };
    let acc = match l.combine {
        Combine::Sum => {
            let mut acc = zero;
            for &t in &taps {
                acc = apply_binary(BinOp::Add, acc, tap(env, t)?)?;
            }
            acc
        }
        Combine::Min | Combine::Max => {
            let op = if l.combine == Combine::Min { BinOp::Min } else { BinOp::Max };
            let mut acc = tap(env, taps[0])?;
            for &t in &taps[1..] {
                acc = apply_binary(op, acc, tap(env, t)?)?;
            }
            acc
        }
        Combine::Median => {
            let mut p = [Value::Int(0); 9];
            for (i, &t) in taps.iter().enumerate() {
                p[i] = tap(env, t)?;
            }
            median9(p)
        }
    };
    env.tx = 0;
    env.ty = 0;
    match &l.post {
        Some(post) => {
            env.acc = Some(acc);
            eval_expr(post, env)
        }
        None => Ok(acc),
    }
}

fn mask_values(l: &LocalBody, inputs: &[&Buffer]) -> Vec<Value> {
    match &l.mask {
        None => vec![],
        Some(MaskSource::Const(m)) => {
            m.coefs.iter().map(|&c| if m.integer { Value::Int(c as i64) } else { Value::Real(c) }).collect()
        }
        Some(MaskSource::Param(k)) => match inputs.get(*k) {
            Some(Buffer::Matrix { format, data, .. }) => {
                data.iter().map(|&c| if format.is_float() { Value::Real(c) } else { Value::Int(c as i64) }).collect()
            }
            _ => vec![],
        },
    }
}

/// Streams one point or local stage row by row through its line buffers,
/// computing each row with `lanes` column-interleaved lanes.
fn stream_stage(k: &AbstractionKernel, inputs: &[&Buffer], lanes: u32) -> Result<Image, String> {
    let types: Vec<InputType> = inputs.iter().map(|b| input_type(b)).collect();
    let out_f = match typecheck(k, &types).map_err(|e| e.to_string())?.first() {
        Some(OutputType::Image(f)) => *f,
        _ => return Err("stage must produce an image".into()),
    };
    let proto = inputs.iter().find_map(|b| b.as_image()).ok_or("stage has no image input")?;
    let (w, h) = (proto.width, proto.height);
    let local = k.as_local();
    let windowed = local.map(windowed_inputs).unwrap_or_default();
    let mut ports: Vec<Port> = inputs
        .iter()
        .enumerate()
        .map(|(i, b)| match b {
            Buffer::Image(img) if windowed.contains(&i) => Port::Window(RowWindow {
                src: img,
                capacity: local.expect("windowed").window_h as usize,
                rows: VecDeque::new(),
                next: 0,
            }),
            Buffer::Image(img) => Port::Image(img),
            Buffer::Scalar(_, v) => Port::Scalar(*v),
            Buffer::Array { items: ArrayItems::Values(v), .. } => Port::Values(v),
            Buffer::Distribution { counts, .. } => Port::Counts(counts),
            _ => Port::Other,
        })
        .collect();
    let mask = local.map(|l| mask_values(l, inputs)).unwrap_or_default();
    let zero = match local {
        Some(l) if local_acc_type(l, &types).map_err(|e| e.to_string())?.is_real() => Value::Real(0.0),
        _ => Value::Int(0),
    };
    let (rx, ry) = local.map(|l| l.radius()).unwrap_or((0, 0));
    let mut out = Image::zeros(w, h, out_f);
    for y in 0..h {
        for p in ports.iter_mut() {
            if let Port::Window(win) = p {
                win.push_until(y + ry as u32);
            }
        }
        let mut env = StreamEnv {
            ports: &ports,
            x: 0,
            y: y as i64,
            tx: 0,
            ty: 0,
            boundary: local.map_or(Boundary::Clamp, |l| l.boundary),
            mask: &mask,
            mask_w: local.map_or(0, |l| l.window_w as i32),
            radius: (rx, ry),
            acc: None,
        };
        for lane in 0..lanes {
            for x in (lane..w).step_by(lanes as usize) {
                env.x = x as i64;
                match &k.body {
                    KernelBody::Point(p) => {
                        for (ch, e) in p.channels.iter().enumerate() {
                            let v = eval_expr(e, &env).map_err(|e| e.to_string())?;
                            out.set(x, y, ch as u8, v);
                        }
                    }
                    KernelBody::Local(l) => {
                        let undefined = l.boundary == Boundary::Undefined
                            && (x < rx as u32 || x + (rx as u32) >= w || y < ry as u32 || y + (ry as u32) >= h);
                        let v = if undefined {
                            if out_f == ImageFormat::F32 { Value::Real(0.0) } else { Value::Int(0) }
                        } else {
                            local_pixel(l, &mut env, zero).map_err(|e| e.to_string())?
                        };
                        out.set(x, y, 0, v);
                    }
                    _ => return Err("global kernel in a stream stage".into()),
                }
            }
        }
    }
    Ok(out)
}

/// Executes the plan: stages stream through bounded line buffers with the
/// plan's replication; barriers run as whole-image launches. Returns the graph outputs.
pub fn simulate(plan: &StreamPlan, vg: &VerifiedGraph, inputs: &Buffers) -> Result<Buffers, ExecError> {
    let g = vg.graph();
    let producers = g.producers();
    let mut bufs = Buffers::new();
    for d in vg.data().values().filter(|d| !producers.contains_key(&d.id)) {
        if let Some(b) = inputs.get(&d.id).cloned().or_else(|| Buffer::from_constant(&d.kind)) {
            bufs.insert(d.id, b);
        }
    }
    let stages: BTreeMap<ObjectId, &Stage> = plan.stages.iter().map(|s| (s.node, s)).collect();
    let mut counters = Counters::default();
    for &nid in vg.order() {
        let n = &g.nodes[&nid];
        let k = n.op.as_kernel().ok_or_else(|| ExecError::Unsupported { node: nid, message: "unexpanded node".into() })?;
        let ins: Vec<&Buffer> =
            n.inputs().iter().map(|d| bufs.get(d).ok_or(ExecError::MissingInput(*d))).collect::<Result<_, _>>()?;
        let n_in = k.first_output();
        let outs: Vec<Option<ObjectId>> = (n_in..n_in + k.output_params().len()).map(|p| n.binding(p)).collect();
        let results: Vec<Option<Buffer>> = match stages.get(&nid) {
            Some(s) => {
                let img = stream_stage(k, &ins, s.lanes).map_err(|message| ExecError::Unsupported { node: nid, message })?;
                vec![Some(Buffer::Image(img))]
            }
            None => {
                let hints: Vec<Option<&DataKind>> = outs.iter().map(|o| o.and_then(|d| vg.data().get(&d)).map(|d| &d.kind)).collect();
                launch(k, &ins, &hints, &mut counters).map_err(|source| ExecError::Kernel { node: nid, source })?.outputs
            }
        };
        for (o, b) in outs.into_iter().zip(results) {
            if let (Some(d), Some(b)) = (o, b) {
                bufs.insert(d, b);
            }
        }
    }
    let wanted: BTreeSet<ObjectId> = graph_outputs(vg).into_iter().collect();
    bufs.retain(|id, _| wanted.contains(id));
    Ok(bufs)
}
