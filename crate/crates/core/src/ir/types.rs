//! Bottom-up typing of kernel bodies.
//!
//! Pixel reads keep their storage type (`Pixel(t)`). Arithmetic promotes to the
//! internal domain: `Int` (64-bit) unless an operand is real, in which case `Real`.
//! `min`/`max`/`select` over identical pixel types keep that type. A kernel output
//! must have a pixel type, which in practice means an explicit `Cast` at the top.

use thiserror::Error;

use crate::graph::{ElementKind, ImageFormat, PixelType};
use crate::ir::expr::{BinOp, Expr, UnOp};
use crate::ir::kernel::{
    AbstractionKernel, Combine, DataKindTag, HostOp, KernelBody, LocalBody, MaskSource, EQUALIZATION_TABLE,
};
use crate::ir::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExprType {
    Int,
    Real,
    Pixel(PixelType),
}

impl ExprType {
    pub fn is_real(self) -> bool {
        matches!(self, ExprType::Real | ExprType::Pixel(PixelType::F32))
    }

    /// Internal arithmetic class.
    pub fn class(self) -> ExprType {
        if self.is_real() {
            ExprType::Real
        } else {
            ExprType::Int
        }
    }

    fn join(a: ExprType, b: ExprType) -> ExprType {
        if a == b {
            a
        } else if a.is_real() || b.is_real() {
            ExprType::Real
        } else {
            ExprType::Int
        }
    }
}

/// Resolved type of a kernel input.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputType {
    Image(ImageFormat),
    Scalar(PixelType),
    Array(ElementKind),
    Matrix { format: PixelType, rows: usize, cols: usize },
    Distribution,
}

impl InputType {
    pub fn tag(self) -> DataKindTag {
        match self {
            InputType::Image(_) => DataKindTag::Image,
            InputType::Scalar(_) => DataKindTag::Scalar,
            InputType::Array(_) => DataKindTag::Array,
            InputType::Matrix { .. } => DataKindTag::Matrix,
            InputType::Distribution => DataKindTag::Distribution,
        }
    }
}

/// Type of a kernel output, in output-parameter order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputType {
    /// Dimensions follow the image inputs, or the bound object for `Scale`.
    Image(ImageFormat),
    Scalar(PixelType),
    Array(ElementKind, usize),
    /// Any capacity; filled up to the bound array's capacity.
    Coordinates,
    Distribution { bins: usize, offset: i64, range: u64 },
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TypeError {
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("missing cast: {0}")]
    MissingCast(String),
    #[error("offset ({dx}, {dy}) outside {w}x{h} window")]
    OffsetOutOfWindow { dx: i32, dy: i32, w: u32, h: u32 },
    #[error("division by constant zero")]
    DivByZero,
    #[error("invalid reference: {0}")]
    InvalidReference(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Site {
    Point,
    Tap,
    Post,
    ReduceCombine,
    ReduceFinalize,
    HistogramBin,
}

struct TypeEnv<'a> {
    inputs: &'a [InputType],
    site: Site,
    window: Option<(u32, u32)>,
    mask: Option<ExprType>,
    acc: Option<ExprType>,
}

fn mismatch(msg: impl Into<String>) -> TypeError {
    TypeError::TypeMismatch(msg.into())
}

fn invalid(msg: impl Into<String>) -> TypeError {
    TypeError::InvalidReference(msg.into())
}

impl TypeEnv<'_> {
    fn input(&self, k: usize) -> Result<InputType, TypeError> {
        self.inputs.get(k).copied().ok_or_else(|| invalid(format!("input {k} does not exist")))
    }

    fn check_offset(&self, dx: i32, dy: i32) -> Result<(), TypeError> {
        let (w, h) = self.window.ok_or_else(|| invalid("window read outside a local kernel"))?;
        let ok = match self.site {
            Site::Tap => dx == 0 && dy == 0,
            _ => dx.unsigned_abs() <= w / 2 && dy.unsigned_abs() <= h / 2,
        };
        if ok {
            Ok(())
        } else {
            Err(TypeError::OffsetOutOfWindow { dx, dy, w, h })
        }
    }

    fn pixel_of(&self, k: usize, channel: u8, windowed: bool) -> Result<ExprType, TypeError> {
        match self.input(k)? {
            InputType::Image(fmt) => {
                if windowed || matches!(self.site, Site::Point | Site::Post | Site::ReduceCombine | Site::HistogramBin) {
                    if (channel as usize) < fmt.channels() {
                        Ok(ExprType::Pixel(fmt.channel_type().expect("resolved format")))
                    } else {
                        Err(invalid(format!("channel {channel} of {fmt} input {k}")))
                    }
                } else {
                    Err(invalid(format!("image input {k} read without a window here")))
                }
            }
            InputType::Scalar(t) if !windowed && channel == 0 => Ok(ExprType::Pixel(t)),
            other => Err(invalid(format!("input {k} ({}) is not pixel-readable", other.tag()))),
        }
    }

    fn type_of(&self, e: &Expr) -> Result<ExprType, TypeError> {
        match e {
            Expr::ConstI(_) => Ok(ExprType::Int),
            Expr::ConstF(_) => Ok(ExprType::Real),
            Expr::InputPixel { input, channel } => {
                if self.site == Site::ReduceFinalize && !matches!(self.input(*input)?, InputType::Scalar(_)) {
                    return Err(invalid("finalize bodies may only read scalar inputs"));
                }
                self.pixel_of(*input, *channel, false)
            }
            Expr::WindowPixel { input, dx, dy, channel } => {
                if !matches!(self.site, Site::Tap | Site::Post) {
                    return Err(invalid("window read outside a local kernel"));
                }
                self.check_offset(*dx, *dy)?;
                if !matches!(self.input(*input)?, InputType::Image(_)) {
                    return Err(invalid(format!("window read of non-image input {input}")));
                }
                self.pixel_of(*input, *channel, true)
            }
            Expr::MaskCoef { dx, dy } => {
                let t = self.mask.ok_or_else(|| invalid("mask read without a mask"))?;
                if !matches!(self.site, Site::Tap | Site::Post) {
                    return Err(invalid("mask read outside a local kernel"));
                }
                self.check_offset(*dx, *dy)?;
                Ok(t)
            }
            Expr::Acc => self.acc.ok_or_else(|| invalid("accumulator read outside post/reduce body")),
            Expr::Lookup { input, index } => {
                let it = self.type_of(index)?;
                if it.is_real() {
                    return Err(mismatch("lookup index must be an integer"));
                }
                match self.input(*input)? {
                    InputType::Array(kind) => kind
                        .value_type()
                        .map(ExprType::Pixel)
                        .ok_or_else(|| mismatch("lookup into a coordinate array")),
                    InputType::Distribution => Ok(ExprType::Pixel(PixelType::U32)),
                    other => Err(invalid(format!("lookup into {} input {input}", other.tag()))),
                }
            }
            Expr::Binary(op, a, b) => {
                if *op == BinOp::Div && matches!(**b, Expr::ConstI(0)) {
                    return Err(TypeError::DivByZero);
                }
                if let (BinOp::Div, Expr::ConstF(z)) = (op, &**b) {
                    if *z == 0.0 {
                        return Err(TypeError::DivByZero);
                    }
                }
                let ta = self.type_of(a)?;
                let tb = self.type_of(b)?;
                Ok(match op {
                    _ if op.is_bitwise() => {
                        if ta.is_real() || tb.is_real() {
                            return Err(mismatch(format!("`{}` on a real operand", op.keyword())));
                        }
                        ExprType::Int
                    }
                    _ if op.is_comparison() => ExprType::Int,
                    BinOp::Atan2 => ExprType::Real,
                    BinOp::Min | BinOp::Max => ExprType::join(ta, tb),
                    _ => ExprType::join(ta.class(), tb.class()),
                })
            }
            Expr::Unary(op, a) => {
                let t = self.type_of(a)?;
                Ok(match op {
                    UnOp::Not => {
                        if t.is_real() {
                            return Err(mismatch("`not` on a real operand"));
                        }
                        ExprType::Int
                    }
                    UnOp::Neg | UnOp::Abs => t.class(),
                    UnOp::Sqrt => ExprType::Real,
                })
            }
            Expr::Select(c, a, b) => {
                if self.type_of(c)?.is_real() {
                    return Err(mismatch("select condition must be an integer"));
                }
                let (ta, tb) = (self.type_of(a)?, self.type_of(b)?);
                if ta.class() != tb.class() {
                    return Err(mismatch("select branches mix integer and real values"));
                }
                Ok(ExprType::join(ta, tb))
            }
            Expr::Cast { target, expr, .. } => {
                self.type_of(expr)?;
                Ok(ExprType::Pixel(*target))
            }
        }
    }
}

fn require_pixel(t: ExprType, what: &str) -> Result<PixelType, TypeError> {
    match t {
        ExprType::Pixel(p) => Ok(p),
        other => Err(TypeError::MissingCast(format!("{what} has internal type {other:?}"))),
    }
}

fn value_type(v: Value) -> ExprType {
    match v {
        Value::Int(_) => ExprType::Int,
        Value::Real(_) => ExprType::Real,
    }
}

fn check_inputs(kernel: &AbstractionKernel, inputs: &[InputType]) -> Result<(), TypeError> {
    if kernel.inputs.len() != inputs.len() {
        return Err(mismatch(format!(
            "kernel `{}` takes {} inputs, {} supplied",
            kernel.name,
            kernel.inputs.len(),
            inputs.len()
        )));
    }
    for (i, (want, got)) in kernel.inputs.iter().zip(inputs).enumerate() {
        if *want != got.tag() {
            return Err(mismatch(format!("input {i} expects {want}, got {}", got.tag())));
        }
        if let InputType::Image(f) = got {
            if !f.is_resolved() {
                return Err(mismatch(format!("input {i} has no resolved format")));
            }
        }
    }
    Ok(())
}

/// Type of a local kernel's combined tap value.
pub fn local_acc_type(local: &LocalBody, inputs: &[InputType]) -> Result<ExprType, TypeError> {
    let mask = local_mask_type(local, inputs)?;
    let env = TypeEnv { inputs, site: Site::Tap, window: Some((local.window_w, local.window_h)), mask, acc: None };
    let tap = env.type_of(&local.tap)?;
    Ok(match local.combine {
        Combine::Sum => tap.class(),
        Combine::Min | Combine::Max | Combine::Median => tap,
    })
}

fn local_mask_type(local: &LocalBody, inputs: &[InputType]) -> Result<Option<ExprType>, TypeError> {
    match &local.mask {
        None => Ok(None),
        Some(MaskSource::Const(m)) => {
            if m.width != local.window_w || m.height != local.window_h {
                return Err(mismatch(format!(
                    "{}x{} mask on a {}x{} window",
                    m.width, m.height, local.window_w, local.window_h
                )));
            }
            if m.coefs.len() != (m.width * m.height) as usize {
                return Err(mismatch("mask coefficient count does not match its size"));
            }
            Ok(Some(if m.integer { ExprType::Int } else { ExprType::Real }))
        }
        Some(MaskSource::Param(k)) => match inputs.get(*k) {
            Some(InputType::Matrix { format, rows, cols }) => {
                if *cols != local.window_w as usize || *rows != local.window_h as usize {
                    return Err(mismatch(format!(
                        "{cols}x{rows} matrix on a {}x{} window",
                        local.window_w, local.window_h
                    )));
                }
                Ok(Some(if format.is_float() { ExprType::Real } else { ExprType::Int }))
            }
            _ => Err(invalid(format!("mask parameter {k} is not a matrix input"))),
        },
    }
}

/// Checks `kernel` against concrete input types and returns its output types.
pub fn typecheck(kernel: &AbstractionKernel, inputs: &[InputType]) -> Result<Vec<OutputType>, TypeError> {
    check_inputs(kernel, inputs)?;
    match &kernel.body {
        KernelBody::Point(p) => {
            let env = TypeEnv { inputs, site: Site::Point, window: None, mask: None, acc: None };
            let types = p
                .channels
                .iter()
                .map(|c| env.type_of(c).and_then(|t| require_pixel(t, "point body")))
                .collect::<Result<Vec<_>, _>>()?;
            let format = match types.as_slice() {
                [t] => ImageFormat::single(*t),
                [PixelType::U8, PixelType::U8, PixelType::U8] => ImageFormat::Rgb,
                _ => return Err(mismatch(format!("unsupported channel layout {types:?}"))),
            };
            Ok(vec![OutputType::Image(format)])
        }
        KernelBody::Local(l) => {
            if l.window_w % 2 == 0 || l.window_h % 2 == 0 || l.window_w == 0 || l.window_h == 0 {
                return Err(mismatch(format!("window {}x{} must have odd sides", l.window_w, l.window_h)));
            }
            if l.combine == Combine::Median && (l.window_w, l.window_h) != (3, 3) {
                return Err(mismatch("median combine requires a 3x3 window"));
            }
            if !l.tap.any(|e| matches!(e, Expr::WindowPixel { .. })) {
                return Err(invalid("tap body never reads the window"));
            }
            let acc = local_acc_type(l, inputs)?;
            let out = match &l.post {
                Some(post) => {
                    let env = TypeEnv {
                        inputs,
                        site: Site::Post,
                        window: Some((l.window_w, l.window_h)),
                        mask: local_mask_type(l, inputs)?,
                        acc: Some(acc),
                    };
                    env.type_of(post)?
                }
                None => acc,
            };
            let t = require_pixel(out, "local body")?;
            Ok(vec![OutputType::Image(ImageFormat::single(t))])
        }
        KernelBody::Reduce(r) => {
            if !matches!(inputs.first(), Some(InputType::Image(f)) if f.is_single_channel()) {
                return Err(mismatch("reduce input 0 must be a single-channel image"));
            }
            let acc = value_type(r.init);
            let env = TypeEnv { inputs, site: Site::ReduceCombine, window: None, mask: None, acc: Some(acc) };
            let combined = env.type_of(&r.combine)?;
            if combined.class() != acc {
                return Err(mismatch(format!("combine yields {combined:?} but the accumulator is {acc:?}")));
            }
            let out = match &r.finalize {
                Some(f) => {
                    let env = TypeEnv { inputs, site: Site::ReduceFinalize, window: None, mask: None, acc: Some(acc) };
                    require_pixel(env.type_of(f)?, "reduce finalize")?
                }
                None => require_pixel(acc, "reduce accumulator")?,
            };
            let mut outs = vec![OutputType::Scalar(out)];
            if r.track_locations {
                outs.push(OutputType::Coordinates);
                outs.push(OutputType::Scalar(PixelType::U32));
            }
            Ok(outs)
        }
        KernelBody::Histogram(h) => {
            if h.bins == 0 || h.range == 0 || h.range < h.bins as u64 {
                return Err(mismatch(format!("histogram with {} bins over range {}", h.bins, h.range)));
            }
            if !matches!(inputs.first(), Some(InputType::Image(f)) if f.is_single_channel() && !f.channel_type().unwrap().is_float())
            {
                return Err(mismatch("histogram input must be a single-channel integer image"));
            }
            let env = TypeEnv { inputs, site: Site::HistogramBin, window: None, mask: None, acc: None };
            if env.type_of(&h.bin_of)?.is_real() {
                return Err(mismatch("bin index must be an integer"));
            }
            Ok(vec![OutputType::Distribution { bins: h.bins, offset: h.offset, range: h.range }])
        }
        KernelBody::Scale { .. } => match inputs {
            [InputType::Image(f)] if f.is_single_channel() => Ok(vec![OutputType::Image(*f)]),
            _ => Err(mismatch("scale takes one single-channel image")),
        },
        KernelBody::Scan => match inputs {
            [InputType::Image(ImageFormat::U8)] => Ok(vec![OutputType::Image(ImageFormat::U32)]),
            _ => Err(mismatch("scan takes one U8 image")),
        },
        KernelBody::Host(HostOp::EqualizationTable) => match inputs {
            [InputType::Distribution] => Ok(vec![OutputType::Array(EQUALIZATION_TABLE.0, EQUALIZATION_TABLE.1)]),
            _ => Err(mismatch("equalization table takes one distribution")),
        },
    }
}

/// Types a free-standing point-style expression over `inputs`.
pub fn type_of_point_expr(e: &Expr, inputs: &[InputType]) -> Result<ExprType, TypeError> {
    TypeEnv { inputs, site: Site::Point, window: None, mask: None, acc: None }.type_of(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::kernel::{Boundary, LocalBody, Mask, PointBody};
    use crate::ir::value::Overflow;

    fn point(inputs: usize, body: Expr) -> AbstractionKernel {
        AbstractionKernel::new("p", vec![DataKindTag::Image; inputs], KernelBody::Point(PointBody { channels: vec![body] }))
    }

    fn local3(tap: Expr, post: Option<Expr>) -> AbstractionKernel {
        AbstractionKernel::new(
            "l",
            vec![DataKindTag::Image],
            KernelBody::Local(LocalBody {
                window_w: 3,
                window_h: 3,
                boundary: Boundary::Clamp,
                combine: Combine::Sum,
                mask: Some(MaskSource::Const(Mask::integer(3, 3, &[1; 9]))),
                tap,
                post,
            }),
        )
    }

    #[test]
    fn magnitude_with_saturating_cast_is_s16() {
        // sqrt(x*x + y*y) over S16 inputs is Real; the cast makes it S16.
        let sq = |k| Expr::bin(BinOp::Mul, Expr::input(k), Expr::input(k));
        let body = Expr::cast(
            PixelType::S16,
            Overflow::Saturate,
            Expr::un(UnOp::Sqrt, Expr::bin(BinOp::Add, sq(0), sq(1))),
        );
        let k = point(2, body);
        let out = typecheck(&k, &[InputType::Image(ImageFormat::S16), InputType::Image(ImageFormat::S16)]);
        assert_eq!(out, Ok(vec![OutputType::Image(ImageFormat::S16)]));
    }

    #[test]
    fn magnitude_without_cast_is_missing_cast() {
        let body = Expr::un(UnOp::Sqrt, Expr::input(0));
        let k = point(1, body);
        assert!(matches!(typecheck(&k, &[InputType::Image(ImageFormat::S16)]), Err(TypeError::MissingCast(_))));
    }

    #[test]
    fn identity_point_keeps_format() {
        let k = point(1, Expr::input(0));
        assert_eq!(typecheck(&k, &[InputType::Image(ImageFormat::U8)]), Ok(vec![OutputType::Image(ImageFormat::U8)]));
    }

    #[test]
    fn window_offset_outside_3x3_is_rejected() {
        let post = Expr::cast(
            PixelType::U8,
            Overflow::Saturate,
            Expr::WindowPixel { input: 0, dx: 2, dy: 0, channel: 0 },
        );
        let k = local3(Expr::tap(0), Some(post));
        assert_eq!(
            typecheck(&k, &[InputType::Image(ImageFormat::U8)]),
            Err(TypeError::OffsetOutOfWindow { dx: 2, dy: 0, w: 3, h: 3 })
        );
        let k = local3(Expr::WindowPixel { input: 0, dx: 1, dy: 0, channel: 0 }, None);
        assert!(matches!(typecheck(&k, &[InputType::Image(ImageFormat::U8)]), Err(TypeError::OffsetOutOfWindow { .. })));
    }

    #[test]
    fn division_by_constant_zero_is_static_error() {
        let k = point(1, Expr::cast(PixelType::U8, Overflow::Saturate, Expr::bin(BinOp::Div, Expr::input(0), Expr::ConstI(0))));
        assert_eq!(typecheck(&k, &[InputType::Image(ImageFormat::U8)]), Err(TypeError::DivByZero));
    }

    #[test]
    fn bitwise_on_real_is_mismatch() {
        let k = point(1, Expr::cast(PixelType::U8, Overflow::Wrap, Expr::bin(BinOp::And, Expr::input(0), Expr::ConstI(1))));
        assert!(matches!(typecheck(&k, &[InputType::Image(ImageFormat::F32)]), Err(TypeError::TypeMismatch(_))));
    }

    #[test]
    fn window_read_in_point_body_is_invalid() {
        let k = point(1, Expr::tap(0));
        assert!(matches!(typecheck(&k, &[InputType::Image(ImageFormat::U8)]), Err(TypeError::InvalidReference(_))));
    }

    #[test]
    fn sum_of_u8_taps_needs_cast() {
        let k = local3(Expr::bin(BinOp::Mul, Expr::mask(), Expr::tap(0)), None);
        assert!(matches!(typecheck(&k, &[InputType::Image(ImageFormat::U8)]), Err(TypeError::MissingCast(_))));
        let k = local3(
            Expr::bin(BinOp::Mul, Expr::mask(), Expr::tap(0)),
            Some(Expr::cast(PixelType::U8, Overflow::Saturate, Expr::bin(BinOp::Div, Expr::Acc, Expr::ConstI(9)))),
        );
        assert_eq!(typecheck(&k, &[InputType::Image(ImageFormat::U8)]), Ok(vec![OutputType::Image(ImageFormat::U8)]));
    }
}
