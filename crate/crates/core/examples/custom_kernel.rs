//! A user-defined local kernel written as an s-expression, run next to a
//! registry node.

use graphvx::exec::{random_inputs, run_naive};
use graphvx::graph::{bind, Context, ImageFormat, NodeOp};
use graphvx::io::GraphFile;
use graphvx::library::CvKernel;
use graphvx::pipeline::compile;

const GRAPH: &str = r#"{
  "images": [
    {"name": "in", "width": 32, "height": 32, "format": "U8"},
    {"name": "out", "width": 32, "height": 32, "format": "U8"}
  ],
  "custom_kernels": [
    {"name": "window_max", "kind": "local", "inputs": ["image"], "window": [3, 3],
     "boundary": "clamp", "combine": "max", "body": ["(win 0 0 0)"]}
  ],
  "nodes": [
    {"name": "dilate", "kernel": "window_max", "params": ["in", "out"]}
  ]
}"#;

fn main() {
    let c = compile(&GraphFile::parse(GRAPH).unwrap()).unwrap();
    let inputs = random_inputs(&c.expanded, 3);
    let custom = run_naive(&c.expanded, &inputs).unwrap();

    // The registry's Dilate3x3 computes the same thing.
    let mut ctx = Context::new();
    let g = ctx.create_graph();
    let a = ctx.create_image(32, 32, ImageFormat::U8).unwrap();
    let b = ctx.create_image(32, 32, ImageFormat::U8).unwrap();
    ctx.add_node(g, NodeOp::cv(CvKernel::Dilate3x3), &bind(&[a, b])).unwrap();
    let app = graphvx::verify::verify(&ctx, g).unwrap();
    graphvx::library::expand(&mut ctx, &app).unwrap();
    let vg = graphvx::verify::verify(&ctx, g).unwrap();
    let src = inputs.values().next().unwrap().clone();
    let registry = run_naive(&vg, &[(a, src)].into_iter().collect()).unwrap();
    let same = custom.outputs.values().next().unwrap().bit_eq(&registry.outputs[&b]);
    println!("custom max-window kernel equals Dilate3x3: {same}");
}
