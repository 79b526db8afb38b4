//! Kernel IR: expressions, abstraction kernels, typing and evaluation.

pub mod eval;
pub mod expr;
pub mod kernel;
pub mod sexpr;
pub mod types;
pub mod value;

pub use eval::{eval_expr, Env, EvalError};
pub use expr::{BinOp, Expr, UnOp};
pub use kernel::{
    AbstractionKernel, AbstractionKind, Boundary, Combine, DataKindTag, Direction, HistogramBody, HostOp,
    Interpolation, KernelBody, KernelSignature, LocalBody, Mask, MaskSource, ParamSpec, ParamState, PointBody,
    ReduceBody,
};
pub use types::{typecheck, ExprType, InputType, OutputType, TypeError};
pub use value::{cast_value, Overflow, Value};
