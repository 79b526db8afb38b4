//! Registry of vision functions and their lowering to abstraction kernels.

mod lower;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::{Binding, Context, DataKind, GraphError, Node, NodeOp, ObjectId};
use crate::ir::kernel::{AbstractionKernel, DataKindTag, Direction};
use crate::verify::VerifiedGraph;

pub use lower::{
    infer_outputs, lower, step_outputs, Lowering, Slot, Step, GAUSS_3X3_FLOAT, GAUSS_3X3_INT, SOBEL_X, SOBEL_Y,
};

/// Access-pattern class of a registry function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelClass {
    Point,
    Local,
    Global,
    /// Built from several abstraction kinds (e.g. histogram + host step + point).
    Composite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CvParam {
    pub name: &'static str,
    pub direction: Direction,
    pub kind: DataKindTag,
    pub optional: bool,
}

const fn p(name: &'static str, direction: Direction, kind: DataKindTag, optional: bool) -> CvParam {
    CvParam { name, direction, kind, optional }
}

const IN_IMG: CvParam = p("input", Direction::Input, DataKindTag::Image, false);
const OUT_IMG: CvParam = p("output", Direction::Output, DataKindTag::Image, false);

const UNARY: &[CvParam] = &[IN_IMG, OUT_IMG];
const BINARY: &[CvParam] = &[
    p("in1", Direction::Input, DataKindTag::Image, false),
    p("in2", Direction::Input, DataKindTag::Image, false),
    OUT_IMG,
];
const GRADIENTS: &[CvParam] = &[
    p("grad_x", Direction::Input, DataKindTag::Image, false),
    p("grad_y", Direction::Input, DataKindTag::Image, false),
    OUT_IMG,
];
const COMBINE3: &[CvParam] = &[
    p("plane0", Direction::Input, DataKindTag::Image, false),
    p("plane1", Direction::Input, DataKindTag::Image, false),
    p("plane2", Direction::Input, DataKindTag::Image, false),
    OUT_IMG,
];
const THRESHOLD: &[CvParam] = &[
    IN_IMG,
    p("thresh", Direction::Input, DataKindTag::Scalar, false),
    OUT_IMG,
    p("upper", Direction::Input, DataKindTag::Scalar, true),
];
const SOBEL: &[CvParam] = &[
    IN_IMG,
    p("output_x", Direction::Output, DataKindTag::Image, true),
    p("output_y", Direction::Output, DataKindTag::Image, true),
];
const CONVOLVE: &[CvParam] = &[IN_IMG, p("conv", Direction::Input, DataKindTag::Matrix, false), OUT_IMG];
const HISTOGRAM: &[CvParam] = &[IN_IMG, p("distribution", Direction::Output, DataKindTag::Distribution, false)];
const MINMAXLOC: &[CvParam] = &[
    IN_IMG,
    p("minVal", Direction::Output, DataKindTag::Scalar, false),
    p("maxVal", Direction::Output, DataKindTag::Scalar, false),
    p("minLoc", Direction::Output, DataKindTag::Array, true),
    p("maxLoc", Direction::Output, DataKindTag::Array, true),
    p("minCount", Direction::Output, DataKindTag::Scalar, true),
    p("maxCount", Direction::Output, DataKindTag::Scalar, true),
];
const MEANSTDDEV: &[CvParam] = &[
    IN_IMG,
    p("mean", Direction::Output, DataKindTag::Scalar, false),
    p("stddev", Direction::Output, DataKindTag::Scalar, false),
];

macro_rules! cv_kernels {
    ($($v:ident => $class:ident, $params:expr;)*) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum CvKernel { $($v),* }

        impl CvKernel {
            pub const ALL: &'static [CvKernel] = &[$(CvKernel::$v),*];

            pub fn name(self) -> &'static str {
                match self { $(CvKernel::$v => stringify!($v)),* }
            }

            pub fn class(self) -> KernelClass {
                match self { $(CvKernel::$v => KernelClass::$class),* }
            }

            pub fn params(self) -> &'static [CvParam] {
                match self { $(CvKernel::$v => $params),* }
            }
        }
    };
}

cv_kernels! {
    ChannelExtract => Point, UNARY;
    ChannelCombine => Point, COMBINE3;
    AbsDiff => Point, BINARY;
    Add => Point, BINARY;
    Subtract => Point, BINARY;
    And => Point, BINARY;
    Or => Point, BINARY;
    Xor => Point, BINARY;
    Not => Point, UNARY;
    Multiply => Point, BINARY;
    Magnitude => Point, GRADIENTS;
    Phase => Point, GRADIENTS;
    Threshold => Point, THRESHOLD;
    ConvertDepth => Point, UNARY;
    Copy => Point, UNARY;
    Box3x3 => Local, UNARY;
    Gaussian3x3 => Local, UNARY;
    Sobel3x3 => Local, SOBEL;
    Dilate3x3 => Local, UNARY;
    Erode3x3 => Local, UNARY;
    Median3x3 => Local, UNARY;
    Convolve => Local, CONVOLVE;
    Histogram => Global, HISTOGRAM;
    MinMaxLoc => Global, MINMAXLOC;
    MeanStdDev => Global, MEANSTDDEV;
    IntegralImage => Global, UNARY;
    ScaleImage => Global, UNARY;
    EqualizeHist => Composite, UNARY;
}

impl CvKernel {
    pub fn from_name(name: &str) -> Option<CvKernel> {
        CvKernel::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for CvKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CvKernel {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CvKernel::from_name(s).ok_or_else(|| GraphError::UnknownKernel(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExpandError {
    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),
    #[error("node {node}: {message}")]
    Lowering { node: ObjectId, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Replaces every registry node of the verified graph `vg` by its abstraction
/// kernels, in place in `ctx`. Node provenance is recorded in `Node::origin`.
/// Kernel nodes pass through unchanged, so expanding an expanded graph is the identity.
pub fn expand(ctx: &mut Context, vg: &VerifiedGraph) -> Result<(), ExpandError> {
    let gid = vg.graph().id;
    for &nid in vg.order() {
        let node = &vg.graph().nodes[&nid];
        let cv = match &node.op {
            NodeOp::Cv(cv) => cv,
            NodeOp::Kernel(_) => continue,
            NodeOp::Unknown(name) => return Err(ExpandError::UnknownKernel(name.clone())),
        };
        let descs: Vec<Option<&DataKind>> = (0..cv.kernel.params().len())
            .map(|i| node.binding(i).and_then(|d| vg.data().get(&d)).map(|d| &d.kind))
            .collect();
        let lowering = lower(cv, &descs).map_err(|message| ExpandError::Lowering { node: nid, message })?;
        let temps = lowering
            .temps
            .iter()
            .map(|k| ctx.create_virtual(gid, k.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let mut new_nodes = Vec::new();
        for step in lowering.steps {
            let bindings: Vec<Binding> = step
                .args
                .iter()
                .enumerate()
                .filter_map(|(param, slot)| {
                    let data = match (*slot)? {
                        Slot::Param(i) => node.binding(i)?,
                        Slot::Temp(t) => temps[t],
                    };
                    Some(Binding { param, data })
                })
                .collect();
            let id = ctx.fresh_node_id();
            new_nodes.push(Node {
                id,
                op: NodeOp::Kernel(Arc::new(step.kernel)),
                bindings,
                origin: Some(nid),
                name: None,
            });
        }
        let g = ctx.graph_mut(gid).ok_or(GraphError::UnknownGraph(gid))?;
        g.nodes.remove(&nid);
        for n in new_nodes {
            g.nodes.insert(n.id, n);
        }
    }
    Ok(())
}

/// Kernel backing a node when it is a single abstraction kernel.
pub fn node_kernel(node: &Node) -> Option<&AbstractionKernel> {
    node.op.as_kernel().map(|k| k.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in CvKernel::ALL {
            assert_eq!(CvKernel::from_name(k.name()), Some(*k));
            assert!(k.params().iter().any(|p| p.direction == Direction::Output));
        }
        assert_eq!("gaussian3x3".parse::<CvKernel>(), Err(GraphError::UnknownKernel("gaussian3x3".into())));
    }
}
