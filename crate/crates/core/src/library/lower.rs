//! Per-function lowering into abstraction kernels.
//!
//! A lowering is a short list of steps wired through the function's own parameters
//! and a few internal temporaries. Verification types a registry node by typing its
//! lowering, so format inference and expansion cannot disagree.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::graph::{Attrs, CvNode, DataKind, ElementKind, ImageFormat, PixelType};
use crate::ir::expr::{BinOp, Expr, UnOp};
use crate::ir::kernel::{
    AbstractionKernel, AbstractionKind, Boundary, Combine, DataKindTag, HistogramBody, HostOp, Interpolation,
    KernelBody, LocalBody, Mask, MaskSource, PointBody, ReduceBody,
};
use crate::ir::types::{typecheck, OutputType};
use crate::ir::value::{Overflow, Value};
use crate::library::CvKernel;

/// Where a step argument lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Parameter of the registry function.
    Param(usize),
    /// Internal temporary, index into [`Lowering::temps`].
    Temp(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub kernel: AbstractionKernel,
    /// Inputs then outputs; `None` leaves an optional output unbound.
    pub args: Vec<Option<Slot>>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Lowering {
    /// Descriptors of internal temporaries; images start unresolved.
    pub temps: Vec<DataKind>,
    pub steps: Vec<Step>,
}

type R<T> = Result<T, String>;

/// 3x3 Gaussian from the Hipacc example, used for `precision: "float"`.
pub const GAUSS_3X3_FLOAT: [f64; 9] =
    [0.057118, 0.124758, 0.057118, 0.124758, 0.272496, 0.124758, 0.057118, 0.124758, 0.057118];
pub const GAUSS_3X3_INT: [i64; 9] = [1, 2, 1, 2, 4, 2, 1, 2, 1];
pub const SOBEL_X: [i64; 9] = [-1, 0, 1, -2, 0, 2, -1, 0, 1];
pub const SOBEL_Y: [i64; 9] = [-1, -2, -1, 0, 0, 0, 1, 2, 1];

fn in0() -> Expr {
    Expr::input(0)
}

fn in1() -> Expr {
    Expr::input(1)
}

fn c(i: i64) -> Expr {
    Expr::ConstI(i)
}

fn sat(t: PixelType, e: Expr) -> Expr {
    Expr::cast(t, Overflow::Saturate, e)
}

fn attr<'a>(a: &'a Attrs, key: &str) -> Option<&'a serde_json::Value> {
    a.get(key)
}

fn attr_f64(a: &Attrs, key: &str, default: f64) -> R<f64> {
    match attr(a, key) {
        None => Ok(default),
        Some(v) => v.as_f64().ok_or_else(|| format!("attribute `{key}` must be a number")),
    }
}

fn attr_i64(a: &Attrs, key: &str, default: i64) -> R<i64> {
    match attr(a, key) {
        None => Ok(default),
        Some(v) => v.as_i64().ok_or_else(|| format!("attribute `{key}` must be an integer")),
    }
}

fn attr_str<'a>(a: &'a Attrs, key: &str) -> R<Option<&'a str>> {
    match attr(a, key) {
        None => Ok(None),
        Some(v) => v.as_str().map(Some).ok_or_else(|| format!("attribute `{key}` must be a string")),
    }
}

fn policy(a: &Attrs) -> R<Overflow> {
    match attr_str(a, "policy")? {
        None | Some("saturate") => Ok(Overflow::Saturate),
        Some("wrap") => Ok(Overflow::Wrap),
        Some(p) => Err(format!("unknown overflow policy `{p}`")),
    }
}

fn format_attr(a: &Attrs) -> R<Option<PixelType>> {
    attr_str(a, "format")?.map(|s| s.parse::<PixelType>()).transpose()
}

fn boundary(a: &Attrs) -> R<Boundary> {
    match attr_str(a, "border")? {
        None | Some("clamp") => Ok(Boundary::Clamp),
        Some("constant") => Ok(Boundary::Constant(attr_f64(a, "border_value", 0.0)?)),
        Some("undefined") => Ok(Boundary::Undefined),
        Some(b) => Err(format!("unknown border mode `{b}`")),
    }
}

fn image_format(params: &[Option<&DataKind>], i: usize) -> R<ImageFormat> {
    match params.get(i).copied().flatten() {
        Some(DataKind::Image { format, .. }) if format.is_resolved() => Ok(*format),
        Some(DataKind::Image { .. }) => Err(format!("parameter {i} has no resolved format")),
        Some(other) => Err(format!("parameter {i} is a {}, expected an image", other.tag())),
        None => Err(format!("parameter {i} is unbound")),
    }
}

fn pixel_type(params: &[Option<&DataKind>], i: usize, allowed: &[ImageFormat]) -> R<PixelType> {
    let f = image_format(params, i)?;
    if !allowed.contains(&f) {
        let names: Vec<&str> = allowed.iter().map(|f| f.name()).collect();
        return Err(format!("parameter {i} is {f}, expected one of {}", names.join("/")));
    }
    Ok(f.channel_type().expect("resolved"))
}

/// Declared format of a bound output image, if it already has one.
fn output_hint(params: &[Option<&DataKind>], i: usize) -> Option<PixelType> {
    match params.get(i).copied().flatten() {
        Some(DataKind::Image { format, .. }) if format.is_single_channel() => format.channel_type(),
        _ => None,
    }
}

fn bound(params: &[Option<&DataKind>], i: usize) -> bool {
    params.get(i).copied().flatten().is_some()
}

fn one(kernel: AbstractionKernel, args: &[usize]) -> Lowering {
    Lowering { temps: vec![], steps: vec![Step { kernel, args: args.iter().map(|&i| Some(Slot::Param(i))).collect() }] }
}

fn point(name: &str, inputs: Vec<DataKindTag>, channels: Vec<Expr>) -> AbstractionKernel {
    AbstractionKernel::new(name, inputs, KernelBody::Point(PointBody { channels }))
}

fn images(n: usize) -> Vec<DataKindTag> {
    vec![DataKindTag::Image; n]
}

#[allow(clippy::too_many_arguments)]
fn local3(
    name: &str,
    boundary: Boundary,
    combine: Combine,
    mask: Option<Mask>,
    tap: Expr,
    post: Option<Expr>,
) -> AbstractionKernel {
    AbstractionKernel::new(
        name,
        images(1),
        KernelBody::Local(LocalBody {
            window_w: 3,
            window_h: 3,
            boundary,
            combine,
            mask: mask.map(MaskSource::Const),
            tap,
            post,
        }),
    )
}

fn weighted_tap() -> Expr {
    Expr::bin(BinOp::Mul, Expr::mask(), Expr::tap(0))
}

const INTS: [ImageFormat; 3] = [ImageFormat::U8, ImageFormat::S16, ImageFormat::S32];

fn widest(a: PixelType, b: PixelType) -> PixelType {
    [PixelType::S32, PixelType::S16, PixelType::U8].into_iter().find(|t| *t == a || *t == b).unwrap_or(a)
}

/// Lowers a registry node given the descriptors bound to its parameters.
pub fn lower(node: &CvNode, params: &[Option<&DataKind>]) -> R<Lowering> {
    let a = &node.attrs;
    let name = node.kernel.name();
    use CvKernel as K;
    Ok(match node.kernel {
        K::ChannelExtract => {
            let f = image_format(params, 0)?;
            let letters = match f {
                ImageFormat::Rgb => "RGB",
                ImageFormat::Uyvy => "YUV",
                _ => return Err(format!("ChannelExtract needs an RGB or UYVY input, got {f}")),
            };
            let ch = match attr(a, "channel") {
                None => 0,
                Some(serde_json::Value::String(s)) => letters
                    .find(s.as_str())
                    .filter(|_| s.len() == 1)
                    .ok_or_else(|| format!("channel `{s}` does not exist in {f}"))?,
                Some(v) => v.as_u64().filter(|&i| i < 3).ok_or("channel must be a letter or 0..2")? as usize,
            };
            one(point(name, images(1), vec![Expr::input_channel(0, ch as u8)]), &[0, 1])
        }
        K::ChannelCombine => {
            for i in 0..3 {
                pixel_type(params, i, &[ImageFormat::U8])?;
            }
            one(point(name, images(3), (0..3).map(Expr::input).collect()), &[0, 1, 2, 3])
        }
        K::AbsDiff => {
            let t = pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::S16])?;
            if pixel_type(params, 1, &INTS)? != t {
                return Err("AbsDiff inputs must share a format".into());
            }
            let body = sat(t, Expr::un(UnOp::Abs, Expr::bin(BinOp::Sub, in0(), in1())));
            one(point(name, images(2), vec![body]), &[0, 1, 2])
        }
        K::Add | K::Subtract | K::Multiply => {
            let ta = pixel_type(params, 0, &INTS)?;
            let tb = pixel_type(params, 1, &INTS)?;
            let out = match format_attr(a)? {
                Some(t) => t,
                None => output_hint(params, 2).unwrap_or_else(|| widest(ta, tb)),
            };
            let op = match node.kernel {
                K::Add => BinOp::Add,
                K::Subtract => BinOp::Sub,
                _ => BinOp::Mul,
            };
            let mut e = Expr::bin(op, in0(), in1());
            let scale = attr_f64(a, "scale", 1.0)?;
            if node.kernel == K::Multiply && scale != 1.0 {
                e = Expr::bin(BinOp::Mul, e, Expr::ConstF(scale));
            }
            one(point(name, images(2), vec![Expr::cast(out, policy(a)?, e)]), &[0, 1, 2])
        }
        K::And | K::Or | K::Xor => {
            pixel_type(params, 0, &[ImageFormat::U8])?;
            pixel_type(params, 1, &[ImageFormat::U8])?;
            let op = match node.kernel {
                K::And => BinOp::And,
                K::Or => BinOp::Or,
                _ => BinOp::Xor,
            };
            let body = Expr::cast(PixelType::U8, Overflow::Wrap, Expr::bin(op, in0(), in1()));
            one(point(name, images(2), vec![body]), &[0, 1, 2])
        }
        K::Not => {
            pixel_type(params, 0, &[ImageFormat::U8])?;
            let body = Expr::cast(PixelType::U8, Overflow::Wrap, Expr::un(UnOp::Not, in0()));
            one(point(name, images(1), vec![body]), &[0, 1])
        }
        K::Magnitude => {
            let t = pixel_type(params, 0, &[ImageFormat::S16, ImageFormat::S32])?;
            if pixel_type(params, 1, &INTS)? != t {
                return Err("Magnitude gradients must share a format".into());
            }
            let sq = |e: Expr| Expr::bin(BinOp::Mul, e.clone(), e);
            let body = sat(t, Expr::un(UnOp::Sqrt, Expr::bin(BinOp::Add, sq(in0()), sq(in1()))));
            one(point(name, images(2), vec![body]), &[0, 1, 2])
        }
        K::Phase => {
            let t = pixel_type(params, 0, &[ImageFormat::S16, ImageFormat::S32])?;
            if pixel_type(params, 1, &INTS)? != t {
                return Err("Phase gradients must share a format".into());
            }
            // Angle of (grad_x, grad_y) mapped to 256 steps per turn; negative angles wrap.
            let angle = Expr::bin(BinOp::Atan2, in1(), in0());
            let body =
                Expr::cast(PixelType::U8, Overflow::Wrap, Expr::bin(BinOp::Mul, angle, Expr::ConstF(128.0 / PI)));
            one(point(name, images(2), vec![body]), &[0, 1, 2])
        }
        K::Threshold => {
            let t = pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::S16])?;
            let (lo, hi) = t.int_range().expect("integer input");
            for i in [1, 3] {
                if let Some(DataKind::Scalar { format, value }) = params.get(i).copied().flatten() {
                    if format.is_float() {
                        return Err(format!("threshold scalar must be an integer type, got {format}"));
                    }
                    if let Some(v) = value {
                        let x = v.as_f64();
                        if x < lo as f64 || x > hi as f64 {
                            return Err(format!("threshold {v} is outside the {t} range [{lo}, {hi}]"));
                        }
                    }
                }
            }
            let u8w = |e| Expr::cast(PixelType::U8, Overflow::Wrap, e);
            match attr_str(a, "type")? {
                None | Some("binary") => {
                    let body = u8w(Expr::select(Expr::bin(BinOp::Gt, in0(), in1()), c(255), c(0)));
                    one(point(name, vec![DataKindTag::Image, DataKindTag::Scalar], vec![body]), &[0, 1, 2])
                }
                Some("range") => {
                    if !bound(params, 3) {
                        return Err("range threshold needs an `upper` scalar".into());
                    }
                    let outside = Expr::bin(
                        BinOp::Or,
                        Expr::bin(BinOp::Lt, in0(), in1()),
                        Expr::bin(BinOp::Gt, in0(), Expr::input(2)),
                    );
                    let body = u8w(Expr::select(outside, c(0), c(255)));
                    let k = point(name, vec![DataKindTag::Image, DataKindTag::Scalar, DataKindTag::Scalar], vec![body]);
                    one(k, &[0, 1, 3, 2])
                }
                Some(t) => return Err(format!("unknown threshold type `{t}`")),
            }
        }
        K::ConvertDepth => {
            let from = pixel_type(params, 0, &INTS)?;
            let to = match format_attr(a)?.or_else(|| output_hint(params, 1)) {
                Some(t) => t,
                None if from == PixelType::S16 => PixelType::U8,
                None => PixelType::S16,
            };
            if !INTS.contains(&ImageFormat::single(to)) {
                return Err(format!("ConvertDepth cannot produce {to}"));
            }
            let shift = attr_i64(a, "shift", 0)?;
            if !(0..32).contains(&shift) {
                return Err(format!("shift {shift} outside 0..32"));
            }
            let e = match shift {
                0 => in0(),
                s if to.bits() > from.bits() => Expr::bin(BinOp::Shl, in0(), c(s)),
                s => Expr::bin(BinOp::Shr, in0(), c(s)),
            };
            one(point(name, images(1), vec![Expr::cast(to, policy(a)?, e)]), &[0, 1])
        }
        K::Copy => {
            let f = image_format(params, 0)?;
            if f == ImageFormat::Uyvy {
                return Err("Copy of packed UYVY is not supported".into());
            }
            let channels = (0..f.channels() as u8).map(|ch| Expr::input_channel(0, ch)).collect();
            one(point(name, images(1), channels), &[0, 1])
        }
        K::Box3x3 => {
            let t = pixel_type(params, 0, &INTS)?;
            let post = sat(t, Expr::bin(BinOp::Div, Expr::Acc, c(9)));
            one(local3(name, boundary(a)?, Combine::Sum, None, Expr::tap(0), Some(post)), &[0, 1])
        }
        K::Gaussian3x3 => {
            pixel_type(params, 0, &[ImageFormat::U8])?;
            let (mask, post) = match attr_str(a, "precision")? {
                None | Some("int") => (
                    Mask::integer(3, 3, &GAUSS_3X3_INT),
                    sat(PixelType::U8, Expr::bin(BinOp::Div, Expr::Acc, c(16))),
                ),
                Some("float") => (Mask::real(3, 3, &GAUSS_3X3_FLOAT), sat(PixelType::U8, Expr::Acc)),
                Some(p) => return Err(format!("unknown precision `{p}`")),
            };
            one(local3(name, boundary(a)?, Combine::Sum, Some(mask), weighted_tap(), Some(post)), &[0, 1])
        }
        K::Sobel3x3 => {
            pixel_type(params, 0, &[ImageFormat::U8])?;
            if !bound(params, 1) && !bound(params, 2) {
                return Err("Sobel3x3 needs at least one bound output".into());
            }
            let b = boundary(a)?;
            let mut steps = Vec::new();
            for (out, label, coefs) in [(1, "SobelX", SOBEL_X), (2, "SobelY", SOBEL_Y)] {
                if bound(params, out) {
                    let k = local3(
                        label,
                        b,
                        Combine::Sum,
                        Some(Mask::integer(3, 3, &coefs)),
                        weighted_tap(),
                        Some(sat(PixelType::S16, Expr::Acc)),
                    );
                    steps.push(Step { kernel: k, args: vec![Some(Slot::Param(0)), Some(Slot::Param(out))] });
                }
            }
            Lowering { temps: vec![], steps }
        }
        K::Dilate3x3 | K::Erode3x3 | K::Median3x3 => {
            pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::S16])?;
            let combine = match node.kernel {
                K::Dilate3x3 => Combine::Max,
                K::Erode3x3 => Combine::Min,
                _ => Combine::Median,
            };
            one(local3(name, boundary(a)?, combine, None, Expr::tap(0), None), &[0, 1])
        }
        K::Convolve => {
            pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::S16])?;
            let (rows, cols) = match params.get(1).copied().flatten() {
                Some(DataKind::Matrix { rows, cols, .. }) => (*rows, *cols),
                _ => return Err("Convolve needs a matrix".into()),
            };
            if rows % 2 == 0 || cols % 2 == 0 {
                return Err(format!("convolution matrix {cols}x{rows} must have odd sides"));
            }
            let out = format_attr(a)?.or_else(|| output_hint(params, 2)).unwrap_or(PixelType::S16);
            let scale = attr_i64(a, "scale", 1)?;
            if scale < 1 {
                return Err(format!("convolution scale {scale} must be positive"));
            }
            let acc = if scale == 1 { Expr::Acc } else { Expr::bin(BinOp::Div, Expr::Acc, c(scale)) };
            let k = AbstractionKernel::new(
                name,
                vec![DataKindTag::Image, DataKindTag::Matrix],
                KernelBody::Local(LocalBody {
                    window_w: cols as u32,
                    window_h: rows as u32,
                    boundary: boundary(a)?,
                    combine: Combine::Sum,
                    mask: Some(MaskSource::Param(1)),
                    tap: weighted_tap(),
                    post: Some(sat(out, acc)),
                }),
            );
            one(k, &[0, 1, 2])
        }
        K::Histogram => {
            pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::U16])?;
            let (bins, offset, range) = match params.get(1).copied().flatten() {
                Some(DataKind::Distribution { bins, offset, range }) => (*bins, *offset, *range),
                _ => return Err("Histogram output must be a distribution".into()),
            };
            one(histogram_kernel(name, bins, offset, range), &[0, 1])
        }
        K::MinMaxLoc => {
            let t = pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::S16])?;
            let (lo, hi) = t.int_range().expect("integer input");
            let slot = |i: usize| bound(params, i).then_some(Slot::Param(i));
            let mut steps = Vec::new();
            for (label, op, init, val, loc, count) in
                [("MinMaxLoc.min", BinOp::Min, hi, 1, 3, 5), ("MinMaxLoc.max", BinOp::Max, lo, 2, 4, 6)]
            {
                let body = ReduceBody {
                    init: Value::Int(init),
                    combine: Expr::bin(op, Expr::Acc, in0()),
                    finalize: Some(sat(t, Expr::Acc)),
                    track_locations: true,
                };
                let k = AbstractionKernel::new(label, images(1), KernelBody::Reduce(body));
                steps.push(Step { kernel: k, args: vec![Some(Slot::Param(0)), slot(val), slot(loc), slot(count)] });
            }
            Lowering { temps: vec![], steps }
        }
        K::MeanStdDev => {
            let (w, h) = match params.first().copied().flatten() {
                Some(DataKind::Image { width, height, .. }) => (*width, *height),
                _ => return Err("MeanStdDev needs an image".into()),
            };
            pixel_type(params, 0, &[ImageFormat::U8, ImageFormat::S16])?;
            let n = Expr::ConstF(w as f64 * h as f64);
            let f32 = |e| sat(PixelType::F32, e);
            let mean = ReduceBody {
                init: Value::Real(0.0),
                combine: Expr::bin(BinOp::Add, Expr::Acc, in0()),
                finalize: Some(f32(Expr::bin(BinOp::Div, Expr::Acc, n.clone()))),
                track_locations: false,
            };
            let d = Expr::bin(BinOp::Sub, in0(), in1());
            let stddev = ReduceBody {
                init: Value::Real(0.0),
                combine: Expr::bin(BinOp::Add, Expr::Acc, Expr::bin(BinOp::Mul, d.clone(), d)),
                finalize: Some(f32(Expr::un(UnOp::Sqrt, Expr::bin(BinOp::Div, Expr::Acc, n)))),
                track_locations: false,
            };
            Lowering {
                temps: vec![],
                steps: vec![
                    Step {
                        kernel: AbstractionKernel::new("MeanStdDev.mean", images(1), KernelBody::Reduce(mean)),
                        args: vec![Some(Slot::Param(0)), Some(Slot::Param(1))],
                    },
                    Step {
                        kernel: AbstractionKernel::new(
                            "MeanStdDev.stddev",
                            vec![DataKindTag::Image, DataKindTag::Scalar],
                            KernelBody::Reduce(stddev),
                        ),
                        args: vec![Some(Slot::Param(0)), Some(Slot::Param(1)), Some(Slot::Param(2))],
                    },
                ],
            }
        }
        K::IntegralImage => {
            pixel_type(params, 0, &[ImageFormat::U8])?;
            one(AbstractionKernel::new(name, images(1), KernelBody::Scan), &[0, 1])
        }
        K::ScaleImage => {
            image_format(params, 0)?;
            let interp = match attr_str(a, "interp")? {
                None | Some("nearest") => Interpolation::Nearest,
                Some("bilinear") => Interpolation::Bilinear,
                Some(i) => return Err(format!("unknown interpolation `{i}`")),
            };
            one(AbstractionKernel::new(name, images(1), KernelBody::Scale { interp }), &[0, 1])
        }
        K::EqualizeHist => {
            pixel_type(params, 0, &[ImageFormat::U8])?;
            let table_body = Expr::cast(PixelType::U8, Overflow::Saturate, Expr::lookup(1, in0()));
            Lowering {
                temps: vec![
                    DataKind::Distribution { bins: 256, offset: 0, range: 256 },
                    DataKind::Array { capacity: 256, element: ElementKind::U8 },
                ],
                steps: vec![
                    Step {
                        kernel: histogram_kernel("EqualizeHist.histogram", 256, 0, 256),
                        args: vec![Some(Slot::Param(0)), Some(Slot::Temp(0))],
                    },
                    Step {
                        kernel: AbstractionKernel::new(
                            "EqualizeHist.table",
                            vec![DataKindTag::Distribution],
                            KernelBody::Host(HostOp::EqualizationTable),
                        ),
                        args: vec![Some(Slot::Temp(0)), Some(Slot::Temp(1))],
                    },
                    Step {
                        kernel: point(
                            "EqualizeHist.lookup",
                            vec![DataKindTag::Image, DataKindTag::Array],
                            vec![table_body],
                        ),
                        args: vec![Some(Slot::Param(0)), Some(Slot::Temp(1)), Some(Slot::Param(1))],
                    },
                ],
            }
        }
    })
}

fn histogram_kernel(name: &str, bins: usize, offset: i64, range: u64) -> AbstractionKernel {
    let bin_of = if offset == 0 && bins as u64 == range {
        in0()
    } else {
        Expr::bin(
            BinOp::Div,
            Expr::bin(BinOp::Mul, Expr::bin(BinOp::Sub, in0(), c(offset)), c(bins as i64)),
            c(range as i64),
        )
    };
    AbstractionKernel::new(name, images(1), KernelBody::Histogram(HistogramBody { bins, offset, range, bin_of }))
}

/// Output descriptors of one abstraction kernel applied to `inputs`. `outputs`
/// holds the currently bound output descriptors, which supply sizes the kernel
/// cannot infer (scaled images, location-array capacity).
pub fn step_outputs(
    kernel: &AbstractionKernel,
    inputs: &[&DataKind],
    outputs: &[Option<&DataKind>],
) -> R<Vec<DataKind>> {
    let types = inputs
        .iter()
        .enumerate()
        .map(|(i, d)| d.input_type().ok_or_else(|| format!("input {i} is unresolved")))
        .collect::<R<Vec<_>>>()?;
    let outs = typecheck(kernel, &types).map_err(|e| e.to_string())?;
    let mut dims = None;
    for d in inputs {
        if let Some(wh) = d.dims() {
            match dims {
                None => dims = Some(wh),
                Some(prev) if prev != wh && matches!(kernel.kind(), AbstractionKind::Point | AbstractionKind::Local) => {
                    return Err(format!(
                        "input images differ in size ({}x{} vs {}x{})",
                        prev.0, prev.1, wh.0, wh.1
                    ))
                }
                Some(_) => {}
            }
        }
    }
    outs.into_iter()
        .enumerate()
        .map(|(k, o)| {
            let hint = outputs.get(k).copied().flatten();
            Ok(match o {
                OutputType::Image(format) => {
                    let (width, height) = if kernel.kind() == AbstractionKind::Scale {
                        match hint.and_then(|h| h.dims()) {
                            Some((w, h)) if w > 0 && h > 0 => (w, h),
                            _ => return Err("scaled output needs explicit dimensions".into()),
                        }
                    } else {
                        dims.ok_or("kernel has no image input")?
                    };
                    DataKind::Image { width, height, format }
                }
                OutputType::Scalar(format) => DataKind::Scalar { format, value: None },
                OutputType::Array(element, capacity) => DataKind::Array { capacity, element },
                OutputType::Coordinates => {
                    let capacity = match hint {
                        Some(DataKind::Array { capacity, .. }) => *capacity,
                        _ => 0,
                    };
                    DataKind::Array { capacity, element: ElementKind::Coordinate }
                }
                OutputType::Distribution { bins, offset, range } => DataKind::Distribution { bins, offset, range },
            })
        })
        .collect()
}

/// Types a registry node through its lowering; returns the produced descriptor per output parameter.
pub fn infer_outputs(node: &CvNode, params: &[Option<&DataKind>]) -> R<Vec<(usize, DataKind)>> {
    let lowering = lower(node, params)?;
    let mut temps = lowering.temps.clone();
    let mut produced: BTreeMap<usize, DataKind> = BTreeMap::new();
    for step in &lowering.steps {
        let n_in = step.kernel.inputs.len();
        let resolve = |slot: &Option<Slot>, temps: &[DataKind], produced: &BTreeMap<usize, DataKind>| -> Option<DataKind> {
            match (*slot)? {
                Slot::Param(i) => produced.get(&i).cloned().or_else(|| params.get(i).copied().flatten().cloned()),
                Slot::Temp(t) => Some(temps[t].clone()),
            }
        };
        let ins = step.args[..n_in]
            .iter()
            .map(|s| resolve(s, &temps, &produced).ok_or_else(|| "step input is unbound".to_string()))
            .collect::<R<Vec<_>>>()?;
        let hints: Vec<Option<DataKind>> = step.args[n_in..].iter().map(|s| resolve(s, &temps, &produced)).collect();
        let in_refs: Vec<&DataKind> = ins.iter().collect();
        let hint_refs: Vec<Option<&DataKind>> = hints.iter().map(|h| h.as_ref()).collect();
        let outs = step_outputs(&step.kernel, &in_refs, &hint_refs)?;
        for (slot, desc) in step.args[n_in..].iter().zip(outs) {
            match slot {
                Some(Slot::Param(i)) => {
                    produced.insert(*i, desc);
                }
                Some(Slot::Temp(t)) => temps[*t] = desc,
                None => {}
            }
        }
    }
    Ok(produced.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::CvNode;

    fn img(f: ImageFormat) -> DataKind {
        DataKind::image(16, 8, f)
    }

    fn virt() -> DataKind {
        DataKind::image(0, 0, ImageFormat::Unresolved)
    }

    #[test]
    fn sobel_lowers_to_two_locals_and_types_s16() {
        let (i, v) = (img(ImageFormat::U8), virt());
        let node = CvNode::new(CvKernel::Sobel3x3);
        let l = lower(&node, &[Some(&i), Some(&v), Some(&v)]).unwrap();
        assert_eq!(l.steps.len(), 2);
        let outs = infer_outputs(&node, &[Some(&i), Some(&v), Some(&v)]).unwrap();
        assert_eq!(outs, vec![(1, img(ImageFormat::S16)), (2, img(ImageFormat::S16))]);
        let only_y = lower(&node, &[Some(&i), None, Some(&v)]).unwrap();
        assert_eq!(only_y.steps.len(), 1);
        assert_eq!(only_y.steps[0].kernel.name, "SobelY");
    }

    #[test]
    fn float_gaussian_mask_sums_to_one() {
        let s: f64 = GAUSS_3X3_FLOAT.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(GAUSS_3X3_INT.iter().sum::<i64>(), 16);
    }

    #[test]
    fn threshold_range_check_uses_input_format() {
        let i = img(ImageFormat::U8);
        let t = DataKind::Scalar { format: PixelType::S32, value: Some(Value::Int(300)) };
        let err = lower(&CvNode::new(CvKernel::Threshold), &[Some(&i), Some(&t), Some(&virt())]).unwrap_err();
        assert!(err.contains("outside"), "{err}");
    }

    #[test]
    fn equalize_is_histogram_host_point() {
        let i = img(ImageFormat::U8);
        let l = lower(&CvNode::new(CvKernel::EqualizeHist), &[Some(&i), Some(&virt())]).unwrap();
        let kinds: Vec<_> = l.steps.iter().map(|s| s.kernel.kind()).collect();
        assert_eq!(kinds, vec![AbstractionKind::Histogram, AbstractionKind::Host, AbstractionKind::Point]);
        let outs = infer_outputs(&CvNode::new(CvKernel::EqualizeHist), &[Some(&i), Some(&virt())]).unwrap();
        assert_eq!(outs, vec![(1, i.clone())]);
    }

    #[test]
    fn arithmetic_output_follows_widest_input_or_binding() {
        let (a, b) = (img(ImageFormat::U8), img(ImageFormat::S16));
        let node = CvNode::new(CvKernel::Add);
        assert_eq!(infer_outputs(&node, &[Some(&a), Some(&b), Some(&virt())]).unwrap()[0].1, b);
        let s32 = img(ImageFormat::S32);
        assert_eq!(infer_outputs(&node, &[Some(&a), Some(&a), Some(&s32)]).unwrap()[0].1, s32);
    }
}
