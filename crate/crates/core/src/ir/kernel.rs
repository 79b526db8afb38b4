//! Computational abstractions: point, local and the global operator families.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::ElementKind;
use crate::ir::expr::Expr;
use crate::ir::value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Input,
    Output,
}

/// Kind of data object a parameter accepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKindTag {
    Image,
    Scalar,
    Array,
    Matrix,
    Distribution,
}

impl fmt::Display for DataKindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DataKindTag::Image => "image",
            DataKindTag::Scalar => "scalar",
            DataKindTag::Array => "array",
            DataKindTag::Matrix => "matrix",
            DataKindTag::Distribution => "distribution",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ParamState {
    Required,
    Optional,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub direction: Direction,
    pub kind: DataKindTag,
    pub state: ParamState,
}

impl ParamSpec {
    pub fn new(name: &str, direction: Direction, kind: DataKindTag, state: ParamState) -> Self {
        ParamSpec { name: name.to_string(), direction, kind, state }
    }

    pub fn input(name: &str, kind: DataKindTag) -> Self {
        Self::new(name, Direction::Input, kind, ParamState::Required)
    }

    pub fn output(name: &str, kind: DataKindTag) -> Self {
        Self::new(name, Direction::Output, kind, ParamState::Required)
    }

    pub fn optional(mut self) -> Self {
        self.state = ParamState::Optional;
        self
    }
}

/// Ordered parameter list of a kernel. Always has at least one output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelSignature {
    pub params: Vec<ParamSpec>,
}

impl KernelSignature {
    pub fn new(params: Vec<ParamSpec>) -> Self {
        debug_assert!(params.iter().any(|p| p.direction == Direction::Output));
        KernelSignature { params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&ParamSpec> {
        self.params.get(index)
    }

    pub fn direction(&self, index: usize) -> Option<Direction> {
        self.params.get(index).map(|p| p.direction)
    }
}

/// Read rule for window taps that fall outside the image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Clamp,
    Constant(f64),
    /// Pixels whose window leaves the image are written as 0 and flagged.
    Undefined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    Sum,
    Min,
    Max,
    /// Median of a 3x3 window, computed with a fixed 19-exchange sorting network.
    Median,
}

impl Combine {
    pub fn keyword(self) -> &'static str {
        match self {
            Combine::Sum => "sum",
            Combine::Min => "min",
            Combine::Max => "max",
            Combine::Median => "median",
        }
    }
}

/// Row-major mask coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    /// Integer masks evaluate `MaskCoef` as integers, otherwise as reals.
    pub integer: bool,
    pub coefs: Vec<f64>,
}

impl Mask {
    pub fn integer(width: u32, height: u32, coefs: &[i64]) -> Self {
        Mask { width, height, integer: true, coefs: coefs.iter().map(|&c| c as f64).collect() }
    }

    pub fn real(width: u32, height: u32, coefs: &[f64]) -> Self {
        Mask { width, height, integer: false, coefs: coefs.to_vec() }
    }

    /// Coefficient at center-relative offset.
    pub fn at(&self, dx: i32, dy: i32) -> Value {
        let x = (dx + (self.width / 2) as i32) as usize;
        let y = (dy + (self.height / 2) as i32) as usize;
        let c = self.coefs[y * self.width as usize + x];
        if self.integer {
            Value::Int(c as i64)
        } else {
            Value::Real(c)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaskSource {
    Const(Mask),
    /// Coefficients come from a matrix input at this index.
    Param(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointBody {
    /// One expression per output channel (1, or 3 for RGB).
    pub channels: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalBody {
    pub window_w: u32,
    pub window_h: u32,
    pub boundary: Boundary,
    pub combine: Combine,
    pub mask: Option<MaskSource>,
    pub tap: Expr,
    pub post: Option<Expr>,
}

impl LocalBody {
    pub fn radius(&self) -> (i32, i32) {
        ((self.window_w / 2) as i32, (self.window_h / 2) as i32)
    }

    /// Tap offsets in row-major order.
    pub fn taps(&self) -> impl Iterator<Item = (i32, i32)> {
        let (rx, ry) = self.radius();
        (-ry..=ry).flat_map(move |dy| (-rx..=rx).map(move |dx| (dx, dy)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReduceBody {
    pub init: Value,
    /// Evaluated per pixel in row-major order with `Acc` bound to the running value.
    pub combine: Expr,
    pub finalize: Option<Expr>,
    /// Also report the positions holding the reduced value and their count.
    pub track_locations: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistogramBody {
    pub bins: usize,
    pub offset: i64,
    pub range: u64,
    /// Maps an in-range pixel to its bin.
    pub bin_of: Expr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Bilinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HostOp {
    /// Histogram → cumulative distribution → 256-entry equalization table.
    EqualizationTable,
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelBody {
    Point(PointBody),
    Local(LocalBody),
    Reduce(ReduceBody),
    Histogram(HistogramBody),
    Scale { interp: Interpolation },
    /// Integral image: row-major inclusive prefix sum, wrapping in U32.
    Scan,
    Host(HostOp),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbstractionKind {
    Point,
    Local,
    Reduce,
    Histogram,
    Scale,
    Scan,
    Host,
}

impl AbstractionKind {
    /// Global kinds read the whole image and act as fusion and streaming barriers.
    pub fn is_global(self) -> bool {
        !matches!(self, AbstractionKind::Point | AbstractionKind::Local)
    }

    pub fn name(self) -> &'static str {
        match self {
            AbstractionKind::Point => "point",
            AbstractionKind::Local => "local",
            AbstractionKind::Reduce => "reduce",
            AbstractionKind::Histogram => "histogram",
            AbstractionKind::Scale => "scale",
            AbstractionKind::Scan => "scan",
            AbstractionKind::Host => "host",
        }
    }
}

impl fmt::Display for AbstractionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A node-level computation. Parameters are the inputs followed by the outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct AbstractionKernel {
    pub name: String,
    pub inputs: Vec<DataKindTag>,
    pub body: KernelBody,
}

impl AbstractionKernel {
    pub fn new(name: impl Into<String>, inputs: Vec<DataKindTag>, body: KernelBody) -> Self {
        AbstractionKernel { name: name.into(), inputs, body }
    }

    pub fn kind(&self) -> AbstractionKind {
        match self.body {
            KernelBody::Point(_) => AbstractionKind::Point,
            KernelBody::Local(_) => AbstractionKind::Local,
            KernelBody::Reduce(_) => AbstractionKind::Reduce,
            KernelBody::Histogram(_) => AbstractionKind::Histogram,
            KernelBody::Scale { .. } => AbstractionKind::Scale,
            KernelBody::Scan => AbstractionKind::Scan,
            KernelBody::Host(_) => AbstractionKind::Host,
        }
    }

    pub fn as_point(&self) -> Option<&PointBody> {
        match &self.body {
            KernelBody::Point(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_local(&self) -> Option<&LocalBody> {
        match &self.body {
            KernelBody::Local(l) => Some(l),
            _ => None,
        }
    }

    /// Output parameters in order; optional ones may stay unbound.
    pub fn output_params(&self) -> Vec<ParamSpec> {
        match &self.body {
            KernelBody::Point(_) | KernelBody::Local(_) | KernelBody::Scale { .. } | KernelBody::Scan => {
                vec![ParamSpec::output("out", DataKindTag::Image)]
            }
            KernelBody::Histogram(_) => vec![ParamSpec::output("distribution", DataKindTag::Distribution)],
            KernelBody::Reduce(r) => {
                let mut v = vec![ParamSpec::output("value", DataKindTag::Scalar)];
                if r.track_locations {
                    v.push(ParamSpec::output("locations", DataKindTag::Array).optional());
                    v.push(ParamSpec::output("count", DataKindTag::Scalar).optional());
                }
                v
            }
            KernelBody::Host(HostOp::EqualizationTable) => vec![ParamSpec::output("table", DataKindTag::Array)],
        }
    }

    pub fn signature(&self) -> KernelSignature {
        let mut params: Vec<ParamSpec> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, k)| ParamSpec::input(&format!("in{i}"), *k))
            .collect();
        params.extend(self.output_params());
        KernelSignature::new(params)
    }

    /// Index of the first output parameter.
    pub fn first_output(&self) -> usize {
        self.inputs.len()
    }
}

/// Element kind of the table produced by [`HostOp::EqualizationTable`].
pub const EQUALIZATION_TABLE: (ElementKind, usize) = (ElementKind::U8, 256);
