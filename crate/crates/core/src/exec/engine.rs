//! Launching a single abstraction kernel over concrete buffers.

use std::cell::Cell;

use rayon::prelude::*;
use thiserror::Error;

use crate::exec::buffer::{ArrayItems, Buffer, Image};
use crate::graph::{DataKind, ElementKind, ImageFormat, PixelType};
use crate::ir::eval::{apply_binary, eval_expr, Env, EvalError};
use crate::ir::expr::{BinOp, Expr};
use crate::ir::kernel::{
    AbstractionKernel, Boundary, Combine, HistogramBody, HostOp, Interpolation, KernelBody, LocalBody, MaskSource,
    ReduceBody,
};
use crate::ir::types::{local_acc_type, typecheck, InputType, OutputType};
use crate::ir::value::{cast_value, Overflow, Value};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum KernelError {
    #[error("division by zero")]
    DivByZero,
    #[error("{0}")]
    Eval(String),
    #[error("type error: {0}")]
    Type(String),
}

impl From<EvalError> for KernelError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DivByZero => KernelError::DivByZero,
            other => KernelError::Eval(other.to_string()),
        }
    }
}

/// Event counts of one or more launches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct Counters {
    pub kernel_launches: u64,
    pub pixels_read: u64,
    pub pixels_written: u64,
    pub transfers_executed: u64,
}

#[derive(Debug)]
pub struct LaunchOutput {
    /// One entry per output parameter; `None` where no descriptor was bound.
    pub outputs: Vec<Option<Buffer>>,
    /// Border pixels were written as 0 under `Boundary::Undefined`.
    pub undefined_border: bool,
}

pub fn input_type(b: &Buffer) -> InputType {
    match b {
        Buffer::Image(i) => InputType::Image(i.format),
        Buffer::Scalar(t, _) => InputType::Scalar(*t),
        Buffer::Array { element, .. } => InputType::Array(*element),
        Buffer::Matrix { rows, cols, format, .. } => InputType::Matrix { format: *format, rows: *rows, cols: *cols },
        Buffer::Distribution { .. } => InputType::Distribution,
    }
}

enum Src<'a> {
    Image(&'a Image),
    Scalar(Value),
    Values(&'a [i64]),
    Counts(&'a [u32]),
    Other,
}

fn sources<'a>(inputs: &[&'a Buffer]) -> Vec<Src<'a>> {
    inputs
        .iter()
        .map(|b| match b {
            Buffer::Image(i) => Src::Image(i),
            Buffer::Scalar(_, v) => Src::Scalar(*v),
            Buffer::Array { items: ArrayItems::Values(v), .. } => Src::Values(v),
            Buffer::Distribution { counts, .. } => Src::Counts(counts),
            _ => Src::Other,
        })
        .collect()
}

fn lookup_in(src: &Src<'_>, k: usize, index: i64) -> Result<Value, EvalError> {
    let clamp = |len: usize| index.clamp(0, len.saturating_sub(1) as i64) as usize;
    match src {
        Src::Values(v) if !v.is_empty() => Ok(Value::Int(v[clamp(v.len())])),
        Src::Counts(c) if !c.is_empty() => Ok(Value::Int(c[clamp(c.len())] as i64)),
        Src::Values(_) | Src::Counts(_) => Ok(Value::Int(0)),
        _ => Err(EvalError::BadInput(k)),
    }
}

/// Pixel-position environment for point, reduce and histogram bodies.
struct PixEnv<'a> {
    srcs: &'a [Src<'a>],
    x: u32,
    y: u32,
    acc: Option<Value>,
    reads: Cell<u64>,
}

impl Env for PixEnv<'_> {
    #[inline]
    fn input(&self, k: usize, ch: u8) -> Result<Value, EvalError> {
        match self.srcs.get(k) {
            Some(Src::Image(img)) => {
                self.reads.set(self.reads.get() + 1);
                Ok(img.get(self.x, self.y, ch))
            }
            Some(Src::Scalar(v)) => Ok(*v),
            _ => Err(EvalError::BadInput(k)),
        }
    }

    fn acc(&self) -> Result<Value, EvalError> {
        self.acc.ok_or(EvalError::Missing("accumulator"))
    }

    fn lookup(&self, k: usize, index: i64) -> Result<Value, EvalError> {
        lookup_in(self.srcs.get(k).unwrap_or(&Src::Other), k, index)
    }
}

/// Value read for an out-of-image tap under `Boundary::Constant`.
pub fn border_constant(c: f64, t: PixelType) -> Value {
    cast_value(Value::Real(c), t, Overflow::Saturate)
}

/// Window environment for local bodies: output position plus current tap offset.
struct WinEnv<'a> {
    srcs: &'a [Src<'a>],
    x: i64,
    y: i64,
    tx: i32,
    ty: i32,
    boundary: Boundary,
    mask: &'a [Value],
    mask_w: i32,
    radius: (i32, i32),
    acc: Option<Value>,
    reads: Cell<u64>,
}

impl Env for WinEnv<'_> {
    #[inline]
    fn input(&self, k: usize, ch: u8) -> Result<Value, EvalError> {
        match self.srcs.get(k) {
            Some(Src::Image(img)) => {
                self.reads.set(self.reads.get() + 1);
                Ok(img.get(self.x as u32, self.y as u32, ch))
            }
            Some(Src::Scalar(v)) => Ok(*v),
            _ => Err(EvalError::BadInput(k)),
        }
    }

    #[inline]
    fn window(&self, k: usize, dx: i32, dy: i32, ch: u8) -> Result<Value, EvalError> {
        let Some(Src::Image(img)) = self.srcs.get(k) else {
            return Err(EvalError::BadInput(k));
        };
        let mut px = self.x + (self.tx + dx) as i64;
        let mut py = self.y + (self.ty + dy) as i64;
        let (w, h) = (img.width as i64, img.height as i64);
        if px < 0 || py < 0 || px >= w || py >= h {
            if let Boundary::Constant(c) = self.boundary {
                return Ok(border_constant(c, img.format.channel_type().expect("concrete")));
            }
            px = px.clamp(0, w - 1);
            py = py.clamp(0, h - 1);
        }
        self.reads.set(self.reads.get() + 1);
        Ok(img.get(px as u32, py as u32, ch))
    }

    #[inline]
    fn mask(&self, dx: i32, dy: i32) -> Result<Value, EvalError> {
        let mx = self.tx + dx + self.radius.0;
        let my = self.ty + dy + self.radius.1;
        self.mask.get((my * self.mask_w + mx) as usize).copied().ok_or(EvalError::Missing("mask"))
    }

    fn acc(&self) -> Result<Value, EvalError> {
        self.acc.ok_or(EvalError::Missing("accumulator"))
    }

    fn lookup(&self, k: usize, index: i64) -> Result<Value, EvalError> {
        lookup_in(self.srcs.get(k).unwrap_or(&Src::Other), k, index)
    }
}

#[inline]
fn greater(a: Value, b: Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x > y,
        _ => a.as_f64() > b.as_f64(),
    }
}

/// Median of nine values by the classic 19 compare-exchange network.
pub fn median9(mut p: [Value; 9]) -> Value {
    const NET: [(usize, usize); 19] = [
        (1, 2),
        (4, 5),
        (7, 8),
        (0, 1),
        (3, 4),
        (6, 7),
        (1, 2),
        (4, 5),
        (7, 8),
        (0, 3),
        (5, 8),
        (4, 7),
        (3, 6),
        (1, 4),
        (2, 5),
        (4, 7),
        (4, 2),
        (6, 4),
        (4, 2),
    ];
    for (a, b) in NET {
        if greater(p[a], p[b]) {
            p.swap(a, b);
        }
    }
    p[4]
}

/// Compare-exchange pairs of [`median9`], exposed for code generation.
pub const MEDIAN9_NETWORK: [(usize, usize); 19] = [
    (1, 2),
    (4, 5),
    (7, 8),
    (0, 1),
    (3, 4),
    (6, 7),
    (1, 2),
    (4, 5),
    (7, 8),
    (0, 3),
    (5, 8),
    (4, 7),
    (3, 6),
    (1, 4),
    (2, 5),
    (4, 7),
    (4, 2),
    (6, 4),
    (4, 2),
];

fn zero_of(t: PixelType) -> Value {
    if t.is_float() {
        Value::Real(0.0)
    } else {
        Value::Int(0)
    }
}

fn first_image<'a>(inputs: &[&'a Buffer]) -> Result<&'a Image, KernelError> {
    inputs.iter().find_map(|b| b.as_image()).ok_or_else(|| KernelError::Type("kernel has no image input".into()))
}

type RowResult = Result<(Vec<Value>, u64), KernelError>;

fn gather(
    width: u32,
    height: u32,
    format: ImageFormat,
    channels: usize,
    rows: Vec<RowResult>,
) -> Result<(Image, u64), KernelError> {
    let mut out = Image::zeros(width, height, format);
    let mut reads = 0;
    for (y, row) in rows.into_iter().enumerate() {
        let (vals, r) = row?;
        reads += r;
        if format == ImageFormat::Uyvy {
            for (i, v) in vals.into_iter().enumerate() {
                let (x, ch) = (i / channels, i % channels);
                out.set(x as u32, y as u32, ch as u8, v);
            }
        } else {
            // Planar and interleaved formats store each row contiguously.
            out.pixels.set_run(y * vals.len(), &vals);
        }
    }
    Ok((out, reads))
}

fn run_point(channels: &[Expr], inputs: &[&Buffer], format: ImageFormat) -> Result<(Image, u64), KernelError> {
    let proto = first_image(inputs)?;
    let (w, h) = (proto.width, proto.height);
    let srcs = sources(inputs);
    let rows: Vec<RowResult> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut env = PixEnv { srcs: &srcs, x: 0, y, acc: None, reads: Cell::new(0) };
            let mut vals = Vec::with_capacity(w as usize * channels.len());
            for x in 0..w {
                env.x = x;
                for c in channels {
                    vals.push(eval_expr(c, &env)?);
                }
            }
            Ok((vals, env.reads.get()))
        })
        .collect();
    gather(w, h, format, channels.len(), rows)
}

fn mask_values(l: &LocalBody, inputs: &[&Buffer]) -> Result<Vec<Value>, KernelError> {
    Ok(match &l.mask {
        None => vec![],
        Some(MaskSource::Const(m)) => {
            (0..m.coefs.len()).map(|i| if m.integer { Value::Int(m.coefs[i] as i64) } else { Value::Real(m.coefs[i]) }).collect()
        }
        Some(MaskSource::Param(k)) => match inputs.get(*k) {
            Some(Buffer::Matrix { format, data, .. }) => data
                .iter()
                .map(|&c| if format.is_float() { Value::Real(c) } else { Value::Int(c as i64) })
                .collect(),
            _ => return Err(KernelError::Type(format!("mask input {k} is not a matrix"))),
        },
    })
}

/// Integer taps of the form `(mul (mask 0 0) (win k 0 0 c))` or `(win k 0 0 c)`
/// over a single integer image, read without going through the evaluator.
struct IntTaps {
    plane: Vec<i64>,
    w: i64,
    h: i64,
    weighted: bool,
    border: Option<i64>,
    /// Plane offset of each tap relative to the centre.
    offsets: Vec<i64>,
    radius: (i64, i64),
}

impl IntTaps {
    fn detect(tap: &Expr, srcs: &[Src<'_>], mask: &[Value], boundary: Boundary, taps: &[(i32, i32)]) -> Option<IntTaps> {
        let win = |e: &Expr| match e {
            Expr::WindowPixel { input, dx: 0, dy: 0, channel } => Some((*input, *channel)),
            _ => None,
        };
        let (k, channel, weighted) = match tap {
            Expr::Binary(BinOp::Mul, a, b) => match (a.as_ref(), b.as_ref()) {
                (Expr::MaskCoef { dx: 0, dy: 0 }, w) | (w, Expr::MaskCoef { dx: 0, dy: 0 }) => {
                    let (k, c) = win(w)?;
                    (k, c, true)
                }
                _ => return None,
            },
            e => {
                let (k, c) = win(e)?;
                (k, c, false)
            }
        };
        let Some(Src::Image(img)) = srcs.get(k) else { return None };
        let t = img.format.channel_type()?;
        if t.is_float() || (weighted && !mask.iter().all(|m| matches!(m, Value::Int(_)))) {
            return None;
        }
        let border = match boundary {
            Boundary::Constant(c) => match border_constant(c, t) {
                Value::Int(v) => Some(v),
                Value::Real(_) => return None,
            },
            _ => None,
        };
        let (w, h) = (img.width as i64, img.height as i64);
        let mut plane = Vec::with_capacity((w * h) as usize);
        for y in 0..img.height {
            for x in 0..img.width {
                plane.push(match img.get(x, y, channel) {
                    Value::Int(v) => v,
                    Value::Real(_) => return None,
                });
            }
        }
        let offsets = taps.iter().map(|&(tx, ty)| ty as i64 * w + tx as i64).collect();
        let radius = taps.iter().fold((0, 0), |(a, b), &(tx, ty)| (a.max(tx.abs() as i64), b.max(ty.abs() as i64)));
        Some(IntTaps { plane, w, h, weighted, border, offsets, radius })
    }

    /// Window values around `(x, y)` into `out`, in tap order; returns the
    /// number of storage reads (constant-border taps read nothing).
    #[inline]
    fn window(&self, x: i64, y: i64, taps: &[(i32, i32)], out: &mut [i64]) -> u64 {
        let (rx, ry) = self.radius;
        if x >= rx && y >= ry && x < self.w - rx && y < self.h - ry {
            let base = y * self.w + x;
            for (o, off) in out.iter_mut().zip(&self.offsets) {
                *o = self.plane[(base + off) as usize];
            }
            return taps.len() as u64;
        }
        let mut reads = 0;
        for (o, &(tx, ty)) in out.iter_mut().zip(taps) {
            let (mut px, mut py) = (x + tx as i64, y + ty as i64);
            if px < 0 || py < 0 || px >= self.w || py >= self.h {
                if let Some(b) = self.border {
                    *o = b;
                    continue;
                }
                px = px.clamp(0, self.w - 1);
                py = py.clamp(0, self.h - 1);
            }
            reads += 1;
            *o = self.plane[(py * self.w + px) as usize];
        }
        reads
    }
}

fn run_local(l: &LocalBody, inputs: &[&Buffer], out_t: PixelType) -> Result<(Image, u64, bool), KernelError> {
    let proto = first_image(inputs)?;
    let (w, h) = (proto.width, proto.height);
    let types: Vec<InputType> = inputs.iter().map(|b| input_type(b)).collect();
    let acc_t = local_acc_type(l, &types).map_err(|e| KernelError::Type(e.to_string()))?;
    let zero = if acc_t.is_real() { Value::Real(0.0) } else { Value::Int(0) };
    let mask = mask_values(l, inputs)?;
    let srcs = sources(inputs);
    let taps: Vec<(i32, i32)> = l.taps().collect();
    let (rx, ry) = l.radius();
    let undefined = l.boundary == Boundary::Undefined;
    let fast = if zero == Value::Int(0) { IntTaps::detect(&l.tap, &srcs, &mask, l.boundary, &taps) } else { None };
    // Mask coefficient of each tap, in tap order.
    let weights: Vec<i64> = taps
        .iter()
        .map(|&(tx, ty)| match mask.get(((ty + ry) * l.window_w as i32 + tx + rx) as usize) {
            Some(Value::Int(m)) => *m,
            _ => 0,
        })
        .collect();
    let rows: Vec<RowResult> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut env = WinEnv {
                srcs: &srcs,
                x: 0,
                y: y as i64,
                tx: 0,
                ty: 0,
                boundary: l.boundary,
                mask: &mask,
                mask_w: l.window_w as i32,
                radius: (rx, ry),
                acc: None,
                reads: Cell::new(0),
            };
            let mut vals = Vec::with_capacity(w as usize);
            let mut window_buf = vec![0i64; taps.len()];
            let (yi, wi, hi) = (y as i64, w as i64, h as i64);
            for x in 0..wi {
                if undefined && (x < rx as i64 || x >= wi - rx as i64 || yi < ry as i64 || yi >= hi - ry as i64) {
                    vals.push(zero_of(out_t));
                    continue;
                }
                env.x = x;
                let acc = match (&fast, l.combine) {
                    (Some(f), combine) => {
                        let vals = &mut window_buf[..];
                        let reads = f.window(x, yi, &taps, vals);
                        let v = match combine {
                            Combine::Sum if f.weighted => {
                                vals.iter().zip(&weights).fold(0i64, |acc, (v, m)| acc.wrapping_add(m.wrapping_mul(*v)))
                            }
                            Combine::Sum => vals.iter().fold(0i64, |acc, v| acc.wrapping_add(*v)),
                            Combine::Min => *vals.iter().min().expect("window has taps"),
                            Combine::Max => *vals.iter().max().expect("window has taps"),
                            Combine::Median => {
                                let mut p = [Value::Int(0); 9];
                                for (slot, v) in p.iter_mut().zip(vals.iter()) {
                                    *slot = Value::Int(*v);
                                }
                                match median9(p) {
                                    Value::Int(v) => v,
                                    Value::Real(_) => unreachable!("integer window"),
                                }
                            }
                        };
                        env.reads.set(env.reads.get() + reads);
                        Value::Int(v)
                    }
                    (None, Combine::Sum) => {
                        let mut acc = zero;
                        for &(tx, ty) in &taps {
                            env.tx = tx;
                            env.ty = ty;
                            acc = apply_binary(BinOp::Add, acc, eval_expr(&l.tap, &env)?)?;
                        }
                        acc
                    }
                    (None, Combine::Min | Combine::Max) => {
                        let op = if l.combine == Combine::Min { BinOp::Min } else { BinOp::Max };
                        let mut acc = None;
                        for &(tx, ty) in &taps {
                            env.tx = tx;
                            env.ty = ty;
                            let v = eval_expr(&l.tap, &env)?;
                            acc = Some(match acc {
                                None => v,
                                Some(a) => apply_binary(op, a, v)?,
                            });
                        }
                        acc.expect("window has taps")
                    }
                    (None, Combine::Median) => {
                        let mut p = [Value::Int(0); 9];
                        for (i, &(tx, ty)) in taps.iter().enumerate() {
                            env.tx = tx;
                            env.ty = ty;
                            p[i] = eval_expr(&l.tap, &env)?;
                        }
                        median9(p)
                    }
                };
                env.tx = 0;
                env.ty = 0;
                let v = match &l.post {
                    Some(post) => {
                        env.acc = Some(acc);
                        eval_expr(post, &env)?
                    }
                    None => acc,
                };
                vals.push(v);
            }
            Ok((vals, env.reads.get()))
        })
        .collect();
    let (img, reads) = gather(w, h, ImageFormat::single(out_t), 1, rows)?;
    Ok((img, reads, undefined))
}

struct ReduceOut {
    value: Value,
    raw: Value,
    reads: u64,
}

fn run_reduce(r: &ReduceBody, inputs: &[&Buffer]) -> Result<ReduceOut, KernelError> {
    let img = first_image(inputs)?;
    let srcs = sources(inputs);
    let mut env = PixEnv { srcs: &srcs, x: 0, y: 0, acc: Some(r.init), reads: Cell::new(0) };
    let mut acc = r.init;
    for y in 0..img.height {
        for x in 0..img.width {
            env.x = x;
            env.y = y;
            env.acc = Some(acc);
            acc = eval_expr(&r.combine, &env)?;
        }
    }
    env.acc = Some(acc);
    let value = match &r.finalize {
        Some(f) => eval_expr(f, &env)?,
        None => acc,
    };
    Ok(ReduceOut { value, raw: acc, reads: env.reads.get() })
}

fn run_histogram(hb: &HistogramBody, inputs: &[&Buffer]) -> Result<(Vec<u32>, u64), KernelError> {
    let img = first_image(inputs)?;
    let srcs = sources(inputs);
    let env0 = PixEnv { srcs: &srcs, x: 0, y: 0, acc: None, reads: Cell::new(0) };
    let mut env = env0;
    let mut counts = vec![0u32; hb.bins];
    let hi = hb.offset as i128 + hb.range as i128;
    for y in 0..img.height {
        for x in 0..img.width {
            env.x = x;
            env.y = y;
            let p = match env.input(0, 0)? {
                Value::Int(p) => p,
                Value::Real(_) => return Err(KernelError::Type("histogram over real pixels".into())),
            };
            if (p as i128) < hb.offset as i128 || p as i128 >= hi {
                continue;
            }
            if let Value::Int(b) = eval_expr(&hb.bin_of, &env)? {
                if (0..hb.bins as i64).contains(&b) {
                    counts[b as usize] = counts[b as usize].wrapping_add(1);
                }
            }
        }
    }
    Ok((counts, env.reads.get()))
}

/// Source coordinate of output column `x` when resampling `n_in` samples to `n_out`.
#[inline]
pub fn scale_coord(x: u32, n_in: u32, n_out: u32) -> f64 {
    (x as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5
}

fn run_scale(interp: Interpolation, img: &Image, w: u32, h: u32) -> (Image, u64) {
    let t = img.format.channel_type().expect("concrete");
    let mut out = Image::zeros(w, h, img.format);
    let mut reads = 0;
    let clampx = |v: i64| v.clamp(0, img.width as i64 - 1) as u32;
    let clampy = |v: i64| v.clamp(0, img.height as i64 - 1) as u32;
    for y in 0..h {
        let sy = scale_coord(y, img.height, h);
        for x in 0..w {
            let sx = scale_coord(x, img.width, w);
            let v = match interp {
                Interpolation::Nearest => {
                    reads += 1;
                    img.get(clampx((sx + 0.5).floor() as i64), clampy((sy + 0.5).floor() as i64), 0)
                }
                Interpolation::Bilinear => {
                    reads += 4;
                    let (x0, y0) = (sx.floor(), sy.floor());
                    let (fx, fy) = (sx - x0, sy - y0);
                    let (x0, y0) = (x0 as i64, y0 as i64);
                    let p = |xx: i64, yy: i64| img.get(clampx(xx), clampy(yy), 0).as_f64();
                    let v = (1.0 - fx) * (1.0 - fy) * p(x0, y0)
                        + fx * (1.0 - fy) * p(x0 + 1, y0)
                        + (1.0 - fx) * fy * p(x0, y0 + 1)
                        + fx * fy * p(x0 + 1, y0 + 1);
                    cast_value(Value::Real(v), t, Overflow::Saturate)
                }
            };
            out.set(x, y, 0, v);
        }
    }
    (out, reads)
}

fn run_scan(img: &Image) -> Image {
    let mut out = Image::zeros(img.width, img.height, ImageFormat::U32);
    let w = img.width as usize;
    let mut above = vec![0u32; w];
    for y in 0..img.height {
        let mut row = 0u32;
        for x in 0..img.width {
            let Value::Int(p) = img.get(x, y, 0) else { unreachable!("integer scan input") };
            row = row.wrapping_add(p as u32);
            let v = row.wrapping_add(above[x as usize]);
            above[x as usize] = v;
            out.set(x, y, 0, Value::Int(v as i64));
        }
    }
    out
}

/// Histogram-equalization table: `round((cdf(i) - cdf_min) * 255 / (N - cdf_min))`,
/// clamped to [0, 255]; identity when every pixel falls in one bin.
pub fn equalization_table(counts: &[u32]) -> Vec<i64> {
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    let cdf_min = counts.iter().find(|&&c| c > 0).map(|&c| c as u64).unwrap_or(0);
    let den = total - cdf_min;
    let mut cdf = 0u64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            cdf += c as u64;
            if den == 0 {
                return i.min(255) as i64;
            }
            if cdf < cdf_min {
                return 0;
            }
            let num = (cdf - cdf_min) * 255;
            (((2 * num + den) / (2 * den)) as i64).clamp(0, 255)
        })
        .collect()
}

/// Executes `kernel` on `inputs`. `hints` are the descriptors bound to the output
/// parameters (used for scaled-image size and location-array capacity).
pub fn launch(
    kernel: &AbstractionKernel,
    inputs: &[&Buffer],
    hints: &[Option<&DataKind>],
    counters: &mut Counters,
) -> Result<LaunchOutput, KernelError> {
    let types: Vec<InputType> = inputs.iter().map(|b| input_type(b)).collect();
    let outs = typecheck(kernel, &types).map_err(|e| KernelError::Type(e.to_string()))?;
    counters.kernel_launches += 1;
    let mut undefined_border = false;
    let image_out = |o: &OutputType| match o {
        OutputType::Image(f) => Ok(*f),
        _ => Err(KernelError::Type("expected an image output".into())),
    };
    let outputs: Vec<Option<Buffer>> = match &kernel.body {
        KernelBody::Point(p) => {
            let (img, reads) = run_point(&p.channels, inputs, image_out(&outs[0])?)?;
            counters.pixels_read += reads;
            counters.pixels_written += img.width as u64 * img.height as u64;
            vec![Some(Buffer::Image(img))]
        }
        KernelBody::Local(l) => {
            let t = image_out(&outs[0])?.channel_type().expect("single channel");
            let (img, reads, undef) = run_local(l, inputs, t)?;
            undefined_border = undef;
            counters.pixels_read += reads;
            counters.pixels_written += img.width as u64 * img.height as u64;
            vec![Some(Buffer::Image(img))]
        }
        KernelBody::Reduce(r) => {
            let res = run_reduce(r, inputs)?;
            counters.pixels_read += res.reads;
            let OutputType::Scalar(t) = outs[0] else { unreachable!("reduce yields a scalar") };
            let mut v = vec![Some(Buffer::Scalar(t, res.value))];
            if r.track_locations {
                let img = first_image(inputs)?;
                let mut coords = Vec::new();
                let mut count = 0u64;
                let capacity = match hints.get(1).copied().flatten() {
                    Some(DataKind::Array { capacity, .. }) => *capacity,
                    _ => 0,
                };
                for y in 0..img.height {
                    for x in 0..img.width {
                        if img.get(x, y, 0).bit_eq(res.raw) {
                            count += 1;
                            if coords.len() < capacity {
                                coords.push((x, y));
                            }
                        }
                    }
                }
                counters.pixels_read += img.width as u64 * img.height as u64;
                let locs = hints.get(1).copied().flatten().map(|_| Buffer::Array {
                    element: ElementKind::Coordinate,
                    capacity,
                    items: ArrayItems::Coords(coords),
                });
                let cnt = hints.get(2).copied().flatten().map(|_| Buffer::Scalar(PixelType::U32, Value::Int(count as i64)));
                v.push(locs);
                v.push(cnt);
            }
            v
        }
        KernelBody::Histogram(hb) => {
            let (counts, reads) = run_histogram(hb, inputs)?;
            counters.pixels_read += reads;
            vec![Some(Buffer::Distribution { bins: hb.bins, offset: hb.offset, range: hb.range, counts })]
        }
        KernelBody::Scale { interp } => {
            let img = first_image(inputs)?;
            let (w, h) = match hints.first().copied().flatten().and_then(|d| d.dims()) {
                Some((w, h)) if w > 0 && h > 0 => (w, h),
                _ => return Err(KernelError::Type("scaled output needs explicit dimensions".into())),
            };
            let (out, reads) = run_scale(*interp, img, w, h);
            counters.pixels_read += reads;
            counters.pixels_written += w as u64 * h as u64;
            vec![Some(Buffer::Image(out))]
        }
        KernelBody::Scan => {
            let img = first_image(inputs)?;
            counters.pixels_read += img.width as u64 * img.height as u64;
            counters.pixels_written += img.width as u64 * img.height as u64;
            vec![Some(Buffer::Image(run_scan(img)))]
        }
        KernelBody::Host(HostOp::EqualizationTable) => {
            let Some(Buffer::Distribution { counts, .. }) = inputs.first() else {
                return Err(KernelError::Type("equalization table needs a distribution".into()));
            };
            let OutputType::Array(element, capacity) = outs[0] else { unreachable!("host step yields an array") };
            vec![Some(Buffer::Array { element, capacity, items: ArrayItems::Values(equalization_table(counts)) })]
        }
    };
    Ok(LaunchOutput { outputs, undefined_border })
}
