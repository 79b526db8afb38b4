//! Builds the edge-detection graph through the context API, then breaks it.

use graphvx::graph::{bind, Context, CvNode, ImageFormat, NodeOp, PixelType};
use graphvx::ir::Value;
use graphvx::library::CvKernel;
use graphvx::verify::{render, verify};

fn main() {
    let mut ctx = Context::new();
    let g = ctx.create_graph();
    let input = ctx.create_image(640, 480, ImageFormat::Uyvy).unwrap();
    let output = ctx.create_image(640, 480, ImageFormat::U8).unwrap();
    let luma = ctx.create_virtual_image(g).unwrap();
    let smooth = ctx.create_virtual_image(g).unwrap();
    let (gx, gy, mag) = (
        ctx.create_virtual_image(g).unwrap(),
        ctx.create_virtual_image(g).unwrap(),
        ctx.create_virtual_image(g).unwrap(),
    );
    let thresh = ctx.create_scalar(PixelType::S32, Some(Value::Int(100)));

    ctx.add_node(g, NodeOp::Cv(CvNode::new(CvKernel::ChannelExtract).with("channel", "Y")), &bind(&[input, luma]))
        .unwrap();
    ctx.add_node(g, NodeOp::cv(CvKernel::Gaussian3x3), &bind(&[luma, smooth])).unwrap();
    ctx.add_node(g, NodeOp::cv(CvKernel::Sobel3x3), &bind(&[smooth, gx, gy])).unwrap();
    ctx.add_node(g, NodeOp::cv(CvKernel::Magnitude), &bind(&[gy, gy, mag])).unwrap();
    ctx.add_node(g, NodeOp::cv(CvKernel::Threshold), &bind(&[mag, thresh, output])).unwrap();

    let vg = verify(&ctx, g).expect("clean graph");
    println!("verified: {} nodes, order {:?}", vg.node_count(), vg.order());
    for id in [luma, smooth, gx, mag] {
        println!("  {id} resolved to {}", vg.data()[&id].kind.describe());
    }

    // Feed the threshold output back into the luma image: a cycle and a second writer.
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[output, luma])).unwrap();
    let diags = verify(&ctx, g).unwrap_err();
    print!("after adding a back edge:\n{}", render(&diags));
}
