//! Graphs with exactly one injected fault each, and the codes they produce.

#![allow(dead_code)]

use graphvx::graph::{bind, Binding, Context, ImageFormat, NodeOp, ObjectId, PixelType};
use graphvx::ir::Value;
use graphvx::library::CvKernel;
use graphvx::verify::{verify, DiagCode};

pub fn codes(ctx: &Context, g: ObjectId) -> Vec<DiagCode> {
    let mut c: Vec<DiagCode> = verify(ctx, g).err().unwrap_or_default().into_iter().map(|d| d.code).collect();
    c.sort();
    c.dedup();
    c
}

pub fn fresh() -> (Context, ObjectId, ObjectId, ObjectId) {
    let mut ctx = Context::new();
    let g = ctx.create_graph();
    let a = ctx.create_image(8, 8, ImageFormat::U8).unwrap();
    let b = ctx.create_image(8, 8, ImageFormat::U8).unwrap();
    (ctx, g, a, b)
}

pub fn cycle() -> Vec<DiagCode> {
    let (mut ctx, g, a, b) = fresh();
    let v = ctx.create_virtual_image_with(g, 8, 8, ImageFormat::U8).unwrap();
    let w = ctx.create_virtual_image_with(g, 8, 8, ImageFormat::U8).unwrap();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::And), &bind(&[a, w, v])).unwrap();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[v, w])).unwrap();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[v, b])).unwrap();
    codes(&ctx, g)
}

pub fn not_bipartite() -> Vec<DiagCode> {
    let (mut ctx, g, a, b) = fresh();
    let v = ctx.create_virtual_image(g).unwrap();
    let first = ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[a, v])).unwrap();
    // Operator output wired straight into another operator.
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[first, b])).unwrap();
    codes(&ctx, g)
}

pub fn unbound_param() -> Vec<DiagCode> {
    let (mut ctx, g, a, b) = fresh();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Add), &[Binding { param: 0, data: a }, Binding { param: 2, data: b }])
        .unwrap();
    codes(&ctx, g)
}

pub fn kind_mismatch() -> Vec<DiagCode> {
    let (mut ctx, g, _, b) = fresh();
    let s = ctx.create_scalar(PixelType::U8, Some(Value::Int(1)));
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Box3x3), &bind(&[s, b])).unwrap();
    codes(&ctx, g)
}

pub fn double_writer() -> Vec<DiagCode> {
    let (mut ctx, g, a, b) = fresh();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[a, b])).unwrap();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Box3x3), &bind(&[a, b])).unwrap();
    codes(&ctx, g)
}

pub fn unresolved_virtual() -> Vec<DiagCode> {
    let (mut ctx, g, _, b) = fresh();
    let v = ctx.create_virtual_image(g).unwrap();
    ctx.add_node_unchecked(g, NodeOp::cv(CvKernel::Not), &bind(&[v, b])).unwrap();
    codes(&ctx, g)
}

/// Each fault and the single code it must produce.
pub const CASES: &[(&str, fn() -> Vec<DiagCode>, DiagCode)] = &[
    ("cycle", cycle, DiagCode::CycleDetected),
    ("not_bipartite", not_bipartite, DiagCode::NotBipartite),
    ("unbound_param", unbound_param, DiagCode::UnboundParam),
    ("kind_mismatch", kind_mismatch, DiagCode::FormatMismatch),
    ("double_writer", double_writer, DiagCode::MultipleWriters),
    ("unresolved_virtual", unresolved_virtual, DiagCode::UnresolvedVirtualFormat),
];
