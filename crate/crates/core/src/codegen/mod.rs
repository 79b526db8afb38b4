//! Artifact emitters: DOT graphs, portable C kernels with a launch manifest, and
//! streaming-pipeline plans.

mod c;
mod dot;
mod stream;

use thiserror::Error;

use crate::graph::ObjectId;
use crate::ir::kernel::AbstractionKind;

pub use c::{
    emit_driver, emit_kernel, emit_kernel_source, function_name, read_driver_outputs, write_driver_inputs,
    IoDescriptor, KernelSource, Manifest, ManifestStep, SourceUnit, KERNEL_FILE,
};
pub use dot::{emit_dot, emit_dot_filtered, emit_dot_verified};
pub use stream::{
    emit_stream_plan, simulate, Barrier, Fifo, LineBuffer, Stage, StreamOptions, StreamPlan, DEFAULT_FIFO_SLACK,
};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CodegenError {
    #[error("node {node}: {kind} kernels have no device source (host step)")]
    UnsupportedKind { node: ObjectId, kind: AbstractionKind },
    #[error("data object {data} has several producers; cannot stream")]
    NonStreamable { data: ObjectId },
    #[error("replication factor must be at least 1, got {0}")]
    InvalidFactor(u32),
    #[error("graph is not verified (or was modified after verification)")]
    Unstamped,
    #[error("node {node}: {message}")]
    Type { node: ObjectId, message: String },
}
