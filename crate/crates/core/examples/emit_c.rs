//! Emits portable C for a graph and, if a C compiler is available, builds it.

use std::path::Path;
use std::process::Command;

use graphvx::codegen::{emit_driver, emit_kernel_source, KERNEL_FILE};
use graphvx::optimize::{optimize, PassOptions};
use graphvx::pipeline::compile_path;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "edge_fig1".into());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("examples/{name}.json"));
    let c = compile_path(&path, None).unwrap();
    let plan = optimize(&c.expanded, PassOptions::default()).unwrap();
    let src = emit_kernel_source(&plan.graph).unwrap();
    let code = src.to_c();
    println!("{code}");

    let dir = std::env::temp_dir().join(format!("graphvx-{name}"));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join(KERNEL_FILE), &code).unwrap();
    std::fs::write(dir.join("driver.c"), emit_driver(&plan.graph, &src).unwrap()).unwrap();
    let status = Command::new("cc")
        .args(["-O1", "-ffp-contract=off", "-std=c99", "-o"])
        .arg(dir.join("driver"))
        .arg(dir.join("driver.c"))
        .arg("-lm")
        .status();
    match status {
        Ok(s) if s.success() => eprintln!("built {}", dir.join("driver").display()),
        Ok(s) => eprintln!("cc failed: {s}"),
        Err(e) => eprintln!("no C compiler: {e}"),
    }
}
