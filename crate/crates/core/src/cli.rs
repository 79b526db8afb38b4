//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 diagnostics or execution failure, 2 I/O or schema error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{debug, info};
use serde_json::json;

use crate::codegen::{
    emit_dot_filtered, emit_dot_verified, emit_driver, emit_kernel_source, emit_stream_plan, StreamOptions,
    DEFAULT_FIFO_SLACK, KERNEL_FILE,
};
use crate::exec::{graph_inputs, random_inputs, run_naive, run_plan, ArrayItems, Buffer, Buffers};
use crate::io::{extension, read_image, write_image};
use crate::optimize::{optimize, FuseOptions, PassOptions};
use crate::pipeline::{compile_path, CompileError, Compiled};

#[derive(Debug, Parser)]
#[command(name = "graphvx", version, about = "Verify, optimize, run and generate code for image-processing graphs")]
struct Cli {
    /// Seed for generated inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Override the corpus image size, e.g. 512x512.
    #[arg(long, global = true, value_parser = parse_size)]
    size: Option<(u32, u32)>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Print diagnostics; exit 0 iff the graph is clean.
    Verify { graph: PathBuf },
    /// Run the pass pipeline and report statistics.
    Optimize {
        graph: PathBuf,
        #[arg(long)]
        no_dce: bool,
        #[arg(long)]
        no_fuse: bool,
        /// Where to write stats.json, plan.json and one DOT file per stage.
        #[arg(long, default_value = "graphvx-out")]
        out_dir: PathBuf,
    },
    /// Execute the graph and write its outputs.
    Run {
        graph: PathBuf,
        /// NAME=FILE; unspecified inputs are generated from --seed.
        #[arg(long = "input", value_parser = parse_binding)]
        inputs: Vec<(String, PathBuf)>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Node-by-node execution without optimization.
        #[arg(long)]
        naive: bool,
    },
    /// Emit portable C for the optimized graph.
    EmitCode {
        graph: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Emit a streaming-pipeline plan.
    EmitStream {
        graph: PathBuf,
        /// Replication factor.
        #[arg(long, default_value_t = 1)]
        v: u32,
        #[arg(long, default_value_t = DEFAULT_FIFO_SLACK)]
        slack: usize,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute naive and optimized forms on seeded inputs and compare counters.
    Stats { graph: PathBuf },
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w: u32 = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn parse_binding(s: &str) -> Result<(String, PathBuf), String> {
    let (n, f) = s.split_once('=').ok_or("expected NAME=FILE")?;
    Ok((n.to_string(), PathBuf::from(f)))
}

/// A failure and its exit code.
struct Failure(i32, String);

impl From<CompileError> for Failure {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::Io(e) => Failure(2, e.to_string()),
            e => Failure(1, e.to_string()),
        }
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure(2, format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| io_fail(path, e))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))
}

fn init_logging() {
    let level = match std::env::var("GRAPHVX_LOG").as_deref() {
        Ok("debug") => log::LevelFilter::Debug,
        Ok("info") => log::LevelFilter::Info,
        _ => log::LevelFilter::Off,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(Failure(code, msg)) => {
            eprintln!("{msg}");
            code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let load = |g: &Path| -> Result<Compiled, Failure> {
        info!("loading {}", g.display());
        compile_path(g, cli.size).map_err(|e| match e {
            CompileError::Io(e) => io_fail(g, e),
            e => e.into(),
        })
    };
    match &cli.cmd {
        Cmd::Verify { graph } => {
            let c = load(graph)?;
            println!(
                "ok: {} nodes, {} after expansion",
                c.app.node_count(),
                c.expanded.node_count()
            );
        }
        Cmd::Optimize { graph, no_dce, no_fuse, out_dir } => {
            let c = load(graph)?;
            let fuse = if *no_fuse { FuseOptions::none() } else { FuseOptions::default() };
            let plan = optimize(&c.expanded, PassOptions { dce: !no_dce, fuse }).map_err(|e| Failure(1, e.to_string()))?;
            create_dir(out_dir)?;
            let stats = serde_json::to_string_pretty(&plan.stats).expect("serializable");
            write(&out_dir.join("stats.json"), format!("{stats}\n"))?;
            write(&out_dir.join("plan.json"), format!("{:#}\n", plan.to_json()))?;
            write(&out_dir.join("app.dot"), emit_dot_verified(&c.app, "app"))?;
            write(&out_dir.join("impl.dot"), emit_dot_verified(&c.expanded, "impl"))?;
            write(&out_dir.join("filtered.dot"), emit_dot_filtered(&plan.filtered, "filtered"))?;
            write(&out_dir.join("fused.dot"), emit_dot_verified(&plan.graph, "fused"))?;
            println!("{stats}");
        }
        Cmd::Run { graph, inputs, out_dir, naive } => {
            let c = load(graph)?;
            let bufs = read_inputs(&c, inputs, cli.seed)?;
            let report = if *naive {
                run_naive(&c.expanded, &bufs)
            } else {
                let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| Failure(1, e.to_string()))?;
                run_plan(&plan, &bufs)
            }
            .map_err(|e| Failure(1, e.to_string()))?;
            create_dir(out_dir)?;
            for (id, buf) in &report.outputs {
                let name = c.loaded.name_of(*id).map(str::to_string).unwrap_or_else(|| format!("d{}", id.0));
                let path = match buf {
                    Buffer::Image(img) => {
                        let p = out_dir.join(format!("{name}.{}", extension(img.format)));
                        write_image(&p, img).map_err(|e| io_fail(&p, e))?;
                        p
                    }
                    other => {
                        let p = out_dir.join(format!("{name}.json"));
                        write(&p, format!("{:#}\n", buffer_json(other)))?;
                        p
                    }
                };
                debug!("wrote {}", path.display());
            }
            println!("{}", serde_json::to_string_pretty(&report.counters).expect("serializable"));
        }
        Cmd::EmitCode { graph, out_dir } => {
            let c = load(graph)?;
            let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| Failure(1, e.to_string()))?;
            let src = emit_kernel_source(&plan.graph).map_err(|e| Failure(1, e.to_string()))?;
            create_dir(out_dir)?;
            write(&out_dir.join(KERNEL_FILE), src.to_c())?;
            write(&out_dir.join("manifest.json"), src.manifest_json())?;
            let hosted = src.host_steps().count();
            if hosted == 0 {
                let driver = emit_driver(&plan.graph, &src).map_err(|e| Failure(1, e.to_string()))?;
                write(&out_dir.join("driver.c"), driver)?;
            } else {
                info!("{hosted} host steps; no standalone driver emitted");
            }
            println!("{} kernels, {} host steps", src.units.len(), hosted);
        }
        Cmd::EmitStream { graph, v, slack, out } => {
            let c = load(graph)?;
            let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| Failure(1, e.to_string()))?;
            let sp = emit_stream_plan(&plan.graph, StreamOptions { v: *v, fifo_slack: *slack })
                .map_err(|e| Failure(1, e.to_string()))?;
            sp.validate(&plan.graph).map_err(|e| Failure(1, format!("invalid stream plan: {e}")))?;
            match out {
                Some(p) => write(p, sp.to_json())?,
                None => print!("{}", sp.to_json()),
            }
        }
        Cmd::Stats { graph } => {
            let c = load(graph)?;
            let plan = optimize(&c.expanded, PassOptions::default()).map_err(|e| Failure(1, e.to_string()))?;
            let inputs = random_inputs(&c.expanded, cli.seed);
            let naive = run_naive(&c.expanded, &inputs).map_err(|e| Failure(1, e.to_string()))?;
            let opt = run_plan(&plan, &inputs).map_err(|e| Failure(1, e.to_string()))?;
            let v = json!({
                "passes": plan.stats,
                "naive": naive.counters,
                "plan": opt.counters,
                "outputs_bit_equal": naive.outputs_bit_eq(&opt),
            });
            println!("{v:#}");
        }
    }
    Ok(())
}

fn read_inputs(c: &Compiled, given: &[(String, PathBuf)], seed: u64) -> Result<Buffers, Failure> {
    let vg = &c.expanded;
    let mut bufs = random_inputs(vg, seed);
    let wanted = graph_inputs(vg);
    for (name, path) in given {
        let id = c
            .loaded
            .id(name)
            .filter(|id| wanted.contains(id))
            .ok_or_else(|| Failure(2, format!("`{name}` is not an input of this graph")))?;
        let img = read_image(path).map_err(|e| io_fail(path, e))?;
        let buf = Buffer::Image(img);
        if !buf.matches(&vg.data()[&id].kind) {
            return Err(Failure(2, format!("{}: does not match `{name}` ({})", path.display(), vg.data()[&id].kind.describe())));
        }
        bufs.insert(id, buf);
    }
    Ok(bufs)
}

fn buffer_json(b: &Buffer) -> serde_json::Value {
    match b {
        Buffer::Image(img) => json!({"width": img.width, "height": img.height, "format": img.format}),
        Buffer::Scalar(t, v) => json!({"format": t, "value": v}),
        Buffer::Array { element, capacity, items } => {
            let items = match items {
                ArrayItems::Values(v) => json!(v),
                ArrayItems::Coords(c) => json!(c.iter().map(|(x, y)| json!({"x": x, "y": y})).collect::<Vec<_>>()),
            };
            json!({"element": element, "capacity": capacity, "items": items})
        }
        Buffer::Matrix { rows, cols, format, data } => json!({"rows": rows, "cols": cols, "format": format, "data": data}),
        Buffer::Distribution { bins, offset, range, counts } => {
            json!({"bins": bins, "offset": offset, "range": range, "counts": counts})
        }
    }
}
