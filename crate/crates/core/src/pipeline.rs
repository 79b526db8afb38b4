//! Front-to-back compilation of a graph file: instantiate, verify, expand, re-verify.

use std::path::Path;

use thiserror::Error;

use crate::io::{GraphFile, IoError, LoadedGraph};
use crate::library::{expand, ExpandError};
use crate::verify::{render, verify, Diagnostic, VerifiedGraph};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{}", render(.0).trim_end())]
    Diagnostics(Vec<Diagnostic>),
    #[error(transparent)]
    Expand(#[from] ExpandError),
}

#[derive(Debug)]
pub struct Compiled {
    pub loaded: LoadedGraph,
    /// The application graph as written, verified.
    pub app: VerifiedGraph,
    /// Every registry node replaced by its abstraction kernels, verified again.
    pub expanded: VerifiedGraph,
}

pub fn compile(file: &GraphFile) -> Result<Compiled, CompileError> {
    let mut loaded = file.instantiate()?;
    let app = verify(&loaded.ctx, loaded.graph).map_err(CompileError::Diagnostics)?;
    expand(&mut loaded.ctx, &app)?;
    let expanded = verify(&loaded.ctx, loaded.graph).map_err(CompileError::Diagnostics)?;
    Ok(Compiled { loaded, app, expanded })
}

/// Reads, optionally resizes, and compiles a graph file.
pub fn compile_path(path: &Path, size: Option<(u32, u32)>) -> Result<Compiled, CompileError> {
    let mut file = GraphFile::parse(&std::fs::read_to_string(path).map_err(IoError::from)?)?;
    if let Some((w, h)) = size {
        file.resize(w, h);
    }
    compile(&file)
}
