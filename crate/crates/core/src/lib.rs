//! Graph-based image-processing compiler and runtime.
//!
//! Applications are bipartite graphs of data objects and kernel nodes. Registry
//! functions lower to point, local and global abstraction kernels whose bodies are
//! small expression trees; the optimizer removes dead computation, plans
//! host/device transfers and fuses adjacent kernels; two interpreters execute the
//! naive and the optimized form; code generation emits DOT, portable C and
//! streaming-pipeline descriptions.

pub mod cli;
pub mod codegen;
pub mod exec;
pub mod graph;
pub mod io;
pub mod ir;
pub mod library;
pub mod optimize;
pub mod pipeline;
pub mod verify;
