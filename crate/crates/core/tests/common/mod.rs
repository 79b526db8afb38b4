#![allow(dead_code)]

use std::path::PathBuf;

use graphvx::exec::{Buffer, Image, Pixels};
use graphvx::graph::{Binding, Context, CvNode, DataKind, NodeOp, ObjectId};
use graphvx::ir::Value;
use graphvx::library::expand;
use graphvx::pipeline::{compile_path, Compiled};
use graphvx::verify::{verify, VerifiedGraph};

/// Clean corpus graphs shipped next to the examples.
pub const CORPUS: [&str; 9] =
    ["gauss", "laplacian", "fchain", "sobelx", "edge_fig1", "sobel", "unsharp", "harris", "tomasi"];

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(format!("{name}.json"))
}

pub fn load(name: &str, size: Option<(u32, u32)>) -> Compiled {
    compile_path(&corpus_path(name), size).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// A graph holding one registry node whose parameters are fresh non-virtual objects.
pub struct Single {
    pub ctx: Context,
    pub graph: ObjectId,
    pub ids: Vec<Option<ObjectId>>,
    pub expanded: VerifiedGraph,
}

pub fn make_object(ctx: &mut Context, kind: &DataKind) -> ObjectId {
    match kind.clone() {
        DataKind::Image { width, height, format } => ctx.create_image(width, height, format).unwrap(),
        DataKind::Scalar { format, value } => ctx.create_scalar(format, value),
        DataKind::Array { capacity, element } => ctx.create_array(capacity, element),
        DataKind::Matrix { rows, cols, format, data } => ctx.create_matrix(rows, cols, format, data).unwrap(),
        DataKind::Distribution { bins, offset, range } => ctx.create_distribution(bins, offset, range).unwrap(),
    }
}

pub fn single(node: CvNode, params: &[Option<DataKind>]) -> Single {
    let mut ctx = Context::new();
    let graph = ctx.create_graph();
    let ids: Vec<Option<ObjectId>> = params.iter().map(|p| p.as_ref().map(|k| make_object(&mut ctx, k))).collect();
    let bindings: Vec<Binding> =
        ids.iter().enumerate().filter_map(|(param, id)| id.map(|data| Binding { param, data })).collect();
    let label = format!("{}", node.kernel);
    ctx.add_node(graph, NodeOp::Cv(node), &bindings).unwrap();
    let app = verify(&ctx, graph).unwrap_or_else(|d| panic!("{label}: {d:?}"));
    expand(&mut ctx, &app).unwrap();
    let expanded = verify(&ctx, graph).unwrap_or_else(|d| panic!("{label} expanded: {d:?}"));
    Single { ctx, graph, ids, expanded }
}

/// Storage element `i` as an integer.
pub fn int_at(p: &Pixels, i: usize) -> i64 {
    match p.get(i) {
        Value::Int(v) => v,
        Value::Real(r) => panic!("integer pixel expected, got {r}"),
    }
}

pub fn image(b: &Buffer) -> &Image {
    b.as_image().expect("image buffer")
}

pub fn scalar(b: &Buffer) -> Value {
    match b {
        Buffer::Scalar(_, v) => *v,
        other => panic!("scalar expected, got {other:?}"),
    }
}

pub mod dag {
    use graphvx::optimize::{Dag, Vertex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random bipartite DAG on at most `max_vertices` vertices. Edges only run
    /// forward in index order, between an operator and a data vertex.
    pub fn random(seed: u64, max_vertices: usize, edge_factor: f64) -> Dag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=max_vertices);
        let vertices: Vec<Vertex> = (0..n)
            .map(|_| match rng.gen_range(0..3) {
                0 => Vertex::Operator,
                1 => Vertex::Data { is_virtual: true },
                _ => Vertex::Data { is_virtual: false },
            })
            .collect();
        let mut edges = Vec::new();
        let target = (n as f64 * edge_factor) as usize;
        for _ in 0..target {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            let (a, b) = (a.min(b), a.max(b));
            let op = |v: usize| vertices[v] == Vertex::Operator;
            if a != b && op(a) != op(b) && !edges.contains(&(a, b)) {
                edges.push((a, b));
            }
        }
        Dag { vertices, edges }
    }

    /// Large layered DAG with about `n` vertices and `3n` edges, for timing.
    pub fn layered(n: usize, seed: u64) -> Dag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vertices: Vec<Vertex> = (0..n)
            .map(|i| if i % 2 == 1 { Vertex::Operator } else { Vertex::Data { is_virtual: rng.gen_bool(0.7) } })
            .collect();
        let mut edges = Vec::with_capacity(3 * n);
        for b in 1..n {
            for _ in 0..3 {
                // Predecessor of the other parity, within a short window behind `b`.
                let back = 2 * rng.gen_range(0..8usize.min(b.div_ceil(2))) + 1;
                if back <= b {
                    edges.push((b - back, b));
                }
            }
        }
        edges.sort();
        edges.dedup();
        Dag { vertices, edges }
    }

    /// Alive by definition: some path leads to a written non-virtual object (the
    /// observable outputs). Computed by a separate forward search from every vertex.
    pub fn brute_force_alive(dag: &Dag) -> Vec<bool> {
        let n = dag.vertices.len();
        let d_out: Vec<usize> = (0..n)
            .filter(|&v| dag.vertices[v] == Vertex::Data { is_virtual: false } && dag.edges.iter().any(|e| e.1 == v))
            .collect();
        (0..n)
            .map(|v| {
                let mut seen = vec![false; n];
                let mut stack = vec![v];
                seen[v] = true;
                while let Some(u) = stack.pop() {
                    if d_out.contains(&u) {
                        return true;
                    }
                    for &(a, b) in &dag.edges {
                        if a == u && !seen[b] {
                            seen[b] = true;
                            stack.push(b);
                        }
                    }
                }
                false
            })
            .collect()
    }
}

pub mod cc {
    use std::path::Path;
    use std::process::Command;

    use graphvx::codegen::{emit_driver, emit_kernel_source, read_driver_outputs, write_driver_inputs, KERNEL_FILE};
    use graphvx::exec::Buffers;
    use graphvx::verify::VerifiedGraph;

    pub const CC_FLAGS: [&str; 3] = ["-O1", "-ffp-contract=off", "-std=c99"];

    /// Emits, compiles and builds the driver for `vg` in `dir`; returns the executable path.
    pub fn build(vg: &VerifiedGraph, dir: &Path) -> Result<std::path::PathBuf, String> {
        let src = emit_kernel_source(vg).map_err(|e| e.to_string())?;
        let driver = emit_driver(vg, &src).map_err(|e| e.to_string())?;
        std::fs::write(dir.join(KERNEL_FILE), src.to_c()).map_err(|e| e.to_string())?;
        std::fs::write(dir.join("driver.c"), driver).map_err(|e| e.to_string())?;
        let exe = dir.join("driver");
        let out = Command::new("cc")
            .args(CC_FLAGS)
            .arg("-o")
            .arg(&exe)
            .arg(dir.join("driver.c"))
            .arg("-lm")
            .output()
            .map_err(|e| format!("cannot run cc: {e}"))?;
        if !out.status.success() {
            return Err(format!("cc failed:\n{}", String::from_utf8_lossy(&out.stderr)));
        }
        Ok(exe)
    }

    /// Runs a built driver on `inputs`; returns its image outputs.
    pub fn run(exe: &Path, vg: &VerifiedGraph, inputs: &Buffers, dir: &Path) -> Result<Buffers, String> {
        write_driver_inputs(dir, inputs).map_err(|e| e.to_string())?;
        let out = Command::new(exe).arg(dir).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("driver exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
        }
        read_driver_outputs(dir, vg).map_err(|e| e.to_string())
    }
}
