//! Streaming-pipeline plan with replication, checked by simulation.

use std::path::Path;

use graphvx::codegen::{emit_stream_plan, simulate, StreamOptions};
use graphvx::exec::{random_inputs, run_plan};
use graphvx::optimize::{optimize, FuseOptions, PassOptions};
use graphvx::pipeline::compile_path;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/edge_fig1.json");
    let c = compile_path(&path, Some((64, 48))).unwrap();
    let opts = PassOptions { dce: true, fuse: FuseOptions { point_point: true, ..FuseOptions::none() } };
    let plan = optimize(&c.expanded, opts).unwrap();
    let sp = emit_stream_plan(&plan.graph, StreamOptions { v: 4, ..Default::default() }).unwrap();
    sp.validate(&plan.graph).unwrap();
    println!("{}", sp.to_json());

    let inputs = random_inputs(&plan.graph, 1);
    let want = run_plan(&plan, &inputs).unwrap();
    let got = simulate(&sp, &plan.graph, &inputs).unwrap();
    let equal = want.outputs.iter().all(|(id, b)| got[id].bit_eq(b));
    eprintln!("{} stages, simulation matches interpreter: {equal}", sp.stages.len());
}
