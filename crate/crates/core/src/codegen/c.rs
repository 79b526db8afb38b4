//! Portable C emission for point and local kernels.
//!
//! The kernel unit needs nothing beyond `math.h`: integer arithmetic runs in
//! `long long` with explicit wrap-around helpers, reals in `double`, so the
//! compiled code reproduces the interpreter bit for bit. Compile with
//! `-ffp-contract=off` (or any compiler honouring the `FP_CONTRACT` pragma).

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::Serialize;

use crate::codegen::CodegenError;
use crate::exec::{border_constant, ArrayItems, Buffer, Buffers, Image, Pixels, MEDIAN9_NETWORK};
use crate::graph::{DataKind, DataObject, ImageFormat, ObjectId, PixelType};
use crate::ir::expr::{BinOp, Expr, UnOp};
use crate::ir::kernel::{Boundary, Combine, KernelBody, LocalBody, MaskSource};
use crate::ir::types::{local_acc_type, typecheck, InputType, OutputType};
use crate::ir::value::{Overflow, Value};
use crate::verify::VerifiedGraph;

const PRELUDE: &str = r#"#include <math.h>
#pragma STDC FP_CONTRACT OFF

typedef long long gvx_int;
typedef unsigned long long gvx_uint;

/* Set when an integer or real division by zero was evaluated. */
static int gvx_error = 0;

static gvx_int gvx_add(gvx_int a, gvx_int b) { return (gvx_int)((gvx_uint)a + (gvx_uint)b); }
static gvx_int gvx_sub(gvx_int a, gvx_int b) { return (gvx_int)((gvx_uint)a - (gvx_uint)b); }
static gvx_int gvx_mul(gvx_int a, gvx_int b) { return (gvx_int)((gvx_uint)a * (gvx_uint)b); }
static gvx_int gvx_neg(gvx_int a) { return (gvx_int)(0ULL - (gvx_uint)a); }
static gvx_int gvx_abs(gvx_int a) { return a < 0 ? gvx_neg(a) : a; }
static gvx_int gvx_div(gvx_int a, gvx_int b) {
    if (b == 0) { gvx_error = 1; return 0; }
    if (b == -1) return gvx_neg(a);
    return a / b;
}
static double gvx_rdiv(double a, double b) {
    if (b == 0.0) { gvx_error = 1; return 0.0; }
    return a / b;
}
static gvx_int gvx_shl(gvx_int a, gvx_int b) { return (gvx_int)((gvx_uint)a << (b & 63)); }
static gvx_int gvx_shr(gvx_int a, gvx_int b) {
    int s = (int)(b & 63);
    return a >= 0 ? a >> s : ~((~a) >> s);
}
static gvx_int gvx_imin(gvx_int a, gvx_int b) { return a < b ? a : b; }
static gvx_int gvx_imax(gvx_int a, gvx_int b) { return a > b ? a : b; }
/* NaN loses against any number. */
static double gvx_rmin(double a, double b) {
    if (a < b) return a;
    if (b < a) return b;
    if (a != a) return b;
    return a;
}
static double gvx_rmax(double a, double b) {
    if (a > b) return a;
    if (b > a) return b;
    if (a != a) return b;
    return a;
}
/* Nearest, ties away from zero; NaN becomes 0. */
static double gvx_round(double r) { return r != r ? 0.0 : round(r); }
/* Saturating real-to-integer conversion. */
static gvx_int gvx_r2i(double r) {
    if (r != r) return 0;
    if (r >= 9223372036854775808.0) return (gvx_int)(~0ULL >> 1);
    if (r < -9223372036854775808.0) return -(gvx_int)(~0ULL >> 1) - 1;
    return (gvx_int)r;
}
static gvx_int gvx_sat(gvx_int v, gvx_int lo, gvx_int hi) { return v < lo ? lo : (v > hi ? hi : v); }
static gvx_int gvx_rsat(double r, gvx_int lo, gvx_int hi) {
    double x = gvx_round(r);
    if (x < (double)lo) x = (double)lo;
    if (x > (double)hi) x = (double)hi;
    return (gvx_int)x;
}
static gvx_int gvx_wrap_u8(gvx_int v) { return v & 0xFF; }
static gvx_int gvx_wrap_u16(gvx_int v) { return v & 0xFFFF; }
static gvx_int gvx_wrap_u32(gvx_int v) { return v & 0xFFFFFFFFLL; }
static gvx_int gvx_wrap_s16(gvx_int v) { gvx_int m = v & 0xFFFF; return m >= 0x8000 ? m - 0x10000 : m; }
static gvx_int gvx_wrap_s32(gvx_int v) { gvx_int m = v & 0xFFFFFFFFLL; return m >= 0x80000000LL ? m - 0x100000000LL : m; }
static double gvx_f32(double r) { return (double)(float)r; }
static double gvx_i2f32(gvx_int v) { return (double)(float)v; }

static int gvx_clampi(int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }
static int gvx_inside(int x, int y, int w, int h) { return x >= 0 && y >= 0 && x < w && y < h; }
static long long gvx_idx1(int w, int x, int y) { return (long long)y * w + x; }
static long long gvx_idx3(int w, int x, int y, int ch) { return ((long long)y * w + x) * 3 + ch; }
/* UYVY byte order per pixel pair: U Y0 V Y1; channel 0 is Y. */
static long long gvx_idx_uyvy(int w, int x, int y, int ch) {
    long long row = (long long)y * 2 * w;
    if (ch == 0) return row + 2LL * x + 1;
    return row + 4LL * (x / 2) + (ch == 1 ? 0 : 2);
}
static gvx_int gvx_lookup(const gvx_int *a, gvx_int n, gvx_int i) {
    if (n <= 0) return 0;
    return a[i < 0 ? 0 : (i >= n ? n - 1 : i)];
}
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Int,
    Real,
}

fn ctype(t: PixelType) -> &'static str {
    match t {
        PixelType::U8 => "unsigned char",
        PixelType::U16 => "unsigned short",
        PixelType::S16 => "short",
        PixelType::S32 => "int",
        PixelType::U32 => "unsigned int",
        PixelType::F32 => "float",
    }
}

fn int_lit(i: i64) -> String {
    if i == i64::MIN {
        "(-9223372036854775807LL - 1)".into()
    } else if i < 0 {
        format!("({i}LL)")
    } else {
        format!("{i}LL")
    }
}

fn real_lit(r: f64) -> String {
    if r.is_nan() {
        "NAN".into()
    } else if r.is_infinite() {
        if r > 0.0 { "HUGE_VAL".into() } else { "(-HUGE_VAL)".into() }
    } else if r.is_sign_negative() {
        format!("({r:?})")
    } else {
        format!("{r:?}")
    }
}

fn value_lit(v: Value) -> (String, Class) {
    match v {
        Value::Int(i) => (int_lit(i), Class::Int),
        Value::Real(r) => (real_lit(r), Class::Real),
    }
}

fn real(s: (String, Class)) -> String {
    match s.1 {
        Class::Real => s.0,
        Class::Int => format!("(double)({})", s.0),
    }
}

fn wrap_fn(t: PixelType) -> &'static str {
    match t {
        PixelType::U8 => "gvx_wrap_u8",
        PixelType::U16 => "gvx_wrap_u16",
        PixelType::S16 => "gvx_wrap_s16",
        PixelType::S32 => "gvx_wrap_s32",
        PixelType::U32 => "gvx_wrap_u32",
        PixelType::F32 => unreachable!("float has no wrap"),
    }
}

fn index_expr(format: ImageFormat, x: &str, y: &str, ch: u8) -> String {
    match format {
        ImageFormat::Rgb => format!("gvx_idx3(w, {x}, {y}, {ch})"),
        ImageFormat::Uyvy => format!("gvx_idx_uyvy(w, {x}, {y}, {ch})"),
        _ => format!("gvx_idx1(w, {x}, {y})"),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Site {
    Point,
    Tap,
    Post,
}

/// Expression emitter for one kernel body site.
struct Emit<'a> {
    inputs: &'a [InputType],
    site: Site,
    boundary: Boundary,
    acc: Option<Class>,
    /// Mask array expression, its class, window width and radius.
    mask: Option<(String, Class, u32, (i32, i32))>,
}

impl Emit<'_> {
    fn pixel(&self, k: usize, ch: u8, x: &str, y: &str) -> Result<(String, Class), String> {
        match self.inputs.get(k) {
            Some(InputType::Image(f)) => {
                let t = f.channel_type().ok_or("unresolved image format")?;
                let read = format!("in{k}[{}]", index_expr(*f, x, y, ch));
                Ok(if t.is_float() { (format!("(double){read}"), Class::Real) } else { (format!("(gvx_int){read}"), Class::Int) })
            }
            Some(InputType::Scalar(t)) => Ok((format!("in{k}"), if t.is_float() { Class::Real } else { Class::Int })),
            _ => Err(format!("input {k} is not pixel-readable")),
        }
    }

    fn window(&self, k: usize, dx: i32, dy: i32, ch: u8) -> Result<(String, Class), String> {
        let Some(InputType::Image(f)) = self.inputs.get(k) else {
            return Err(format!("window read of non-image input {k}"));
        };
        let px = format!("(x + tx + ({dx}))");
        let py = format!("(y + ty + ({dy}))");
        match self.boundary {
            Boundary::Constant(c) => {
                let t = f.channel_type().ok_or("unresolved image format")?;
                let (inside, class) = self.pixel(k, ch, &px, &py)?;
                let (border, _) = value_lit(border_constant(c, t));
                Ok((format!("(gvx_inside({px}, {py}, w, h) ? {inside} : {border})"), class))
            }
            // Undefined borders are never evaluated near the edge; reads inside clamp trivially.
            Boundary::Clamp | Boundary::Undefined => {
                self.pixel(k, ch, &format!("gvx_clampi({px}, w)"), &format!("gvx_clampi({py}, h)"))
            }
        }
    }

    fn expr(&self, e: &Expr) -> Result<(String, Class), String> {
        Ok(match e {
            Expr::ConstI(i) => (int_lit(*i), Class::Int),
            Expr::ConstF(r) => (real_lit(*r), Class::Real),
            Expr::InputPixel { input, channel } => self.pixel(*input, *channel, "x", "y")?,
            Expr::WindowPixel { input, dx, dy, channel } => {
                if self.site == Site::Point {
                    return Err("window read in a point body".into());
                }
                self.window(*input, *dx, *dy, *channel)?
            }
            Expr::MaskCoef { dx, dy } => {
                let (arr, class, mw, (rx, ry)) = self.mask.as_ref().ok_or("mask read without a mask")?;
                (format!("{arr}[(ty + ({dy}) + {ry}) * {mw} + (tx + ({dx}) + {rx})]"), *class)
            }
            Expr::Acc => ("acc".into(), self.acc.ok_or("accumulator read outside a post body")?),
            Expr::Lookup { input, index } => {
                let (i, c) = self.expr(index)?;
                if c != Class::Int {
                    return Err("real lookup index".into());
                }
                (format!("gvx_lookup(in{input}, in{input}_n, {i})"), Class::Int)
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                self.binary(*op, a, b)
            }
            Expr::Unary(op, a) => {
                let a = self.expr(a)?;
                match (op, a.1) {
                    (UnOp::Not, Class::Int) => (format!("(~{})", a.0), Class::Int),
                    (UnOp::Not, Class::Real) => return Err("`not` on a real operand".into()),
                    (UnOp::Neg, Class::Int) => (format!("gvx_neg({})", a.0), Class::Int),
                    (UnOp::Neg, Class::Real) => (format!("(-{})", a.0), Class::Real),
                    (UnOp::Abs, Class::Int) => (format!("gvx_abs({})", a.0), Class::Int),
                    (UnOp::Abs, Class::Real) => (format!("fabs({})", a.0), Class::Real),
                    (UnOp::Sqrt, _) => (format!("sqrt({})", real(a)), Class::Real),
                }
            }
            Expr::Select(c, a, b) => {
                let c = self.expr(c)?;
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                if a.1 != b.1 {
                    return Err("select branches mix integer and real values".into());
                }
                let cond = match c.1 {
                    Class::Int => format!("({} != 0)", c.0),
                    Class::Real => format!("({} != 0.0)", c.0),
                };
                (format!("({cond} ? {} : {})", a.0, b.0), a.1)
            }
            Expr::Cast { target, policy, expr } => {
                let v = self.expr(expr)?;
                if *target == PixelType::F32 {
                    return Ok(match v.1 {
                        Class::Int => (format!("gvx_i2f32({})", v.0), Class::Real),
                        Class::Real => (format!("gvx_f32({})", v.0), Class::Real),
                    });
                }
                let (lo, hi) = target.int_range().expect("integer target");
                let s = match (v.1, policy) {
                    (Class::Int, Overflow::Saturate) => format!("gvx_sat({}, {}, {})", v.0, int_lit(lo), int_lit(hi)),
                    (Class::Real, Overflow::Saturate) => format!("gvx_rsat({}, {}, {})", v.0, int_lit(lo), int_lit(hi)),
                    (Class::Int, Overflow::Wrap) => format!("{}({})", wrap_fn(*target), v.0),
                    (Class::Real, Overflow::Wrap) => format!("{}(gvx_r2i(gvx_round({})))", wrap_fn(*target), v.0),
                };
                (s, Class::Int)
            }
        })
    }

    fn binary(&self, op: BinOp, a: (String, Class), b: (String, Class)) -> (String, Class) {
        use BinOp::*;
        let both_int = a.1 == Class::Int && b.1 == Class::Int;
        match op {
            And | Or | Xor => {
                let sym = match op {
                    And => "&",
                    Or => "|",
                    _ => "^",
                };
                (format!("({} {sym} {})", a.0, b.0), Class::Int)
            }
            Shl => (format!("gvx_shl({}, {})", a.0, b.0), Class::Int),
            Shr => (format!("gvx_shr({}, {})", a.0, b.0), Class::Int),
            Lt | Gt | Eq => {
                let sym = match op {
                    Lt => "<",
                    Gt => ">",
                    _ => "==",
                };
                if both_int {
                    (format!("(gvx_int)({} {sym} {})", a.0, b.0), Class::Int)
                } else {
                    (format!("(gvx_int)({} {sym} {})", real(a), real(b)), Class::Int)
                }
            }
            Atan2 => (format!("atan2({}, {})", real(a), real(b)), Class::Real),
            _ if both_int => {
                let f = match op {
                    Add => "gvx_add",
                    Sub => "gvx_sub",
                    Mul => "gvx_mul",
                    Div => "gvx_div",
                    Min => "gvx_imin",
                    _ => "gvx_imax",
                };
                (format!("{f}({}, {})", a.0, b.0), Class::Int)
            }
            _ => {
                let (x, y) = (real(a), real(b));
                let s = match op {
                    Add => format!("({x} + {y})"),
                    Sub => format!("({x} - {y})"),
                    Mul => format!("({x} * {y})"),
                    Div => format!("gvx_rdiv({x}, {y})"),
                    Min => format!("gvx_rmin({x}, {y})"),
                    _ => format!("gvx_rmax({x}, {y})"),
                };
                (s, Class::Real)
            }
        }
    }
}

fn store(out_t: PixelType, v: (String, Class)) -> String {
    if out_t.is_float() {
        format!("(float)({})", real(v))
    } else {
        format!("({})({})", ctype(out_t), v.0)
    }
}

/// C function name of a node's kernel.
pub fn function_name(node: ObjectId) -> String {
    format!("gvx_k{}", node.0)
}

fn param_list(inputs: &[InputType], out: ImageFormat) -> Result<Vec<String>, String> {
    let mut ps = vec!["int w".to_string(), "int h".to_string()];
    for (k, t) in inputs.iter().enumerate() {
        match t {
            InputType::Image(f) => ps.push(format!("const {} *in{k}", ctype(f.channel_type().ok_or("unresolved format")?))),
            InputType::Scalar(t) => ps.push(format!("{} in{k}", if t.is_float() { "double" } else { "gvx_int" })),
            InputType::Array(_) | InputType::Distribution => {
                ps.push(format!("const gvx_int *in{k}"));
                ps.push(format!("gvx_int in{k}_n"));
            }
            InputType::Matrix { .. } => ps.push(format!("const double *in{k}")),
        }
    }
    ps.push(format!("{} *out", ctype(out.channel_type().ok_or("unresolved output format")?)));
    Ok(ps)
}

/// Emitted source of one kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceUnit {
    pub node: ObjectId,
    pub function: String,
    pub code: String,
}

fn point_body(channels: &[Expr], inputs: &[InputType], out: ImageFormat) -> Result<String, String> {
    let out_t = out.channel_type().ok_or("unresolved output format")?;
    let em = Emit { inputs, site: Site::Point, boundary: Boundary::Clamp, acc: None, mask: None };
    let mut s = String::new();
    let _ = writeln!(s, "    for (int y = 0; y < h; y++) {{");
    let _ = writeln!(s, "        for (int x = 0; x < w; x++) {{");
    for (ch, e) in channels.iter().enumerate() {
        let v = em.expr(e)?;
        let _ = writeln!(s, "            out[{}] = {};", index_expr(out, "x", "y", ch as u8), store(out_t, v));
    }
    let _ = writeln!(s, "        }}");
    let _ = writeln!(s, "    }}");
    Ok(s)
}

fn local_body(l: &LocalBody, inputs: &[InputType], out: ImageFormat) -> Result<String, String> {
    let out_t = out.channel_type().ok_or("unresolved output format")?;
    let acc_class = if local_acc_type(l, inputs).map_err(|e| e.to_string())?.is_real() { Class::Real } else { Class::Int };
    let (rx, ry) = l.radius();
    let mut s = String::new();
    let mask = match &l.mask {
        None => None,
        Some(MaskSource::Const(m)) => {
            let (ty, vals): (&str, Vec<String>) = if m.integer {
                ("gvx_int", m.coefs.iter().map(|&c| int_lit(c as i64)).collect())
            } else {
                ("double", m.coefs.iter().map(|&c| real_lit(c)).collect())
            };
            let _ = writeln!(s, "    static const {ty} mask[{}] = {{{}}};", vals.len(), vals.join(", "));
            Some(("mask".to_string(), if m.integer { Class::Int } else { Class::Real }, l.window_w, (rx, ry)))
        }
        Some(MaskSource::Param(k)) => match inputs.get(*k) {
            Some(InputType::Matrix { format, .. }) if format.is_float() => {
                Some((format!("in{k}"), Class::Real, l.window_w, (rx, ry)))
            }
            Some(InputType::Matrix { rows, cols, .. }) => {
                // Integer matrices are carried as doubles and truncated once.
                let n = rows * cols;
                let _ = writeln!(s, "    gvx_int mask[{n}];");
                let _ = writeln!(s, "    for (int i = 0; i < {n}; i++) mask[i] = (gvx_int)in{k}[i];");
                Some(("mask".to_string(), Class::Int, l.window_w, (rx, ry)))
            }
            _ => return Err(format!("mask input {k} is not a matrix")),
        },
    };
    let tap_em = Emit { inputs, site: Site::Tap, boundary: l.boundary, acc: None, mask: mask.clone() };
    let post_em = Emit { inputs, site: Site::Post, boundary: l.boundary, acc: Some(acc_class), mask };
    let tap = tap_em.expr(&l.tap)?;
    let acc_ty = if acc_class == Class::Real { "double" } else { "gvx_int" };
    let tap_ty = if tap.1 == Class::Real { "double" } else { "gvx_int" };
    let _ = writeln!(s, "    for (int y = 0; y < h; y++) {{");
    let _ = writeln!(s, "        for (int x = 0; x < w; x++) {{");
    if l.boundary == Boundary::Undefined {
        let _ = writeln!(s, "            if (x < {rx} || x >= w - {rx} || y < {ry} || y >= h - {ry}) {{");
        let _ = writeln!(s, "                out[gvx_idx1(w, x, y)] = 0;");
        let _ = writeln!(s, "                continue;");
        let _ = writeln!(s, "            }}");
    }
    let loops = |s: &mut String, inner: &str| {
        let _ = writeln!(s, "            for (int ty = -{ry}; ty <= {ry}; ty++) {{");
        let _ = writeln!(s, "                for (int tx = -{rx}; tx <= {rx}; tx++) {{");
        let _ = writeln!(s, "                    {tap_ty} t = {};", tap.0);
        let _ = writeln!(s, "                    {inner}");
        let _ = writeln!(s, "                }}");
        let _ = writeln!(s, "            }}");
    };
    match l.combine {
        Combine::Sum => {
            let zero = if acc_class == Class::Real { "0.0" } else { "0" };
            let _ = writeln!(s, "            {acc_ty} acc = {zero};");
            let add = if acc_class == Class::Real { "acc = acc + t;" } else { "acc = gvx_add(acc, t);" };
            loops(&mut s, add);
        }
        Combine::Min | Combine::Max => {
            let f = match (l.combine, acc_class) {
                (Combine::Min, Class::Int) => "gvx_imin",
                (Combine::Min, Class::Real) => "gvx_rmin",
                (_, Class::Int) => "gvx_imax",
                (_, Class::Real) => "gvx_rmax",
            };
            let _ = writeln!(s, "            {acc_ty} acc = 0;");
            let _ = writeln!(s, "            int first = 1;");
            loops(&mut s, &format!("if (first) {{ acc = t; first = 0; }} else {{ acc = {f}(acc, t); }}"));
        }
        Combine::Median => {
            let _ = writeln!(s, "            {tap_ty} p[9];");
            let _ = writeln!(s, "            int n = 0;");
            loops(&mut s, "p[n++] = t;");
            for (a, b) in MEDIAN9_NETWORK {
                let _ = writeln!(s, "            if (p[{a}] > p[{b}]) {{ {tap_ty} q = p[{a}]; p[{a}] = p[{b}]; p[{b}] = q; }}");
            }
            let _ = writeln!(s, "            {acc_ty} acc = p[4];");
        }
    }
    let v = match &l.post {
        Some(post) => {
            let _ = writeln!(s, "            {{");
            let _ = writeln!(s, "                const int tx = 0, ty = 0;");
            let v = post_em.expr(post)?;
            let _ = writeln!(s, "                out[gvx_idx1(w, x, y)] = {};", store(out_t, v));
            let _ = writeln!(s, "            }}");
            None
        }
        None => Some(("acc".to_string(), acc_class)),
    };
    if let Some(v) = v {
        let _ = writeln!(s, "            out[gvx_idx1(w, x, y)] = {};", store(out_t, v));
    }
    let _ = writeln!(s, "        }}");
    let _ = writeln!(s, "    }}");
    Ok(s)
}

fn input_types(vg: &VerifiedGraph, node: ObjectId) -> Result<Vec<InputType>, CodegenError> {
    let n = &vg.graph().nodes[&node];
    n.inputs()
        .iter()
        .map(|d| {
            vg.data().get(d).and_then(|o| o.kind.input_type()).ok_or_else(|| CodegenError::Type {
                node,
                message: format!("input object {d} has no resolved type"),
            })
        })
        .collect()
}

/// Emits the C function of one point or local kernel node.
pub fn emit_kernel(vg: &VerifiedGraph, node: ObjectId) -> Result<SourceUnit, CodegenError> {
    let n = vg.graph().nodes.get(&node).ok_or(CodegenError::Type { node, message: "no such node".into() })?;
    let kernel = n.op.as_kernel().ok_or_else(|| CodegenError::Type { node, message: "registry node was not expanded".into() })?;
    if kernel.kind().is_global() {
        return Err(CodegenError::UnsupportedKind { node, kind: kernel.kind() });
    }
    let inputs = input_types(vg, node)?;
    let type_err = |message: String| CodegenError::Type { node, message };
    let out = match typecheck(kernel, &inputs).map_err(|e| type_err(e.to_string()))?.first() {
        Some(OutputType::Image(f)) => *f,
        other => return Err(type_err(format!("unexpected output {other:?}"))),
    };
    let body = match &kernel.body {
        KernelBody::Point(p) => point_body(&p.channels, &inputs, out),
        KernelBody::Local(l) => local_body(l, &inputs, out),
        _ => unreachable!("global kinds rejected above"),
    }
    .map_err(type_err)?;
    let function = function_name(node);
    let params = param_list(&inputs, out).map_err(type_err)?;
    let mut code = format!("/* {} ({}) */\n", kernel.name.replace("*/", "* /"), kernel.kind());
    let _ = writeln!(code, "static void {function}({}) {{", params.join(", "));
    code.push_str(&body);
    code.push_str("}\n");
    Ok(SourceUnit { node, function, code })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IoDescriptor {
    pub object: ObjectId,
    pub name: Option<String>,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(rename = "virtual")]
    pub is_virtual: bool,
}

impl IoDescriptor {
    fn of(d: &DataObject) -> Self {
        let (format, dims) = match &d.kind {
            DataKind::Image { width, height, format } => (Some(format.to_string()), Some((*width, *height))),
            DataKind::Scalar { format, .. } => (Some(format.to_string()), None),
            DataKind::Array { element, .. } => (Some(element.to_string()), None),
            DataKind::Matrix { format, .. } => (Some(format.to_string()), None),
            DataKind::Distribution { .. } => (None, None),
        };
        IoDescriptor {
            object: d.id,
            name: d.name.clone(),
            kind: d.kind.tag().to_string(),
            format,
            width: dims.map(|d| d.0),
            height: dims.map(|d| d.1),
            is_virtual: d.is_virtual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifestStep {
    pub order: usize,
    pub node: ObjectId,
    pub kernel: String,
    pub kind: String,
    /// `None` for host steps.
    pub function: Option<String>,
    pub host_step: bool,
    pub inputs: Vec<IoDescriptor>,
    pub outputs: Vec<IoDescriptor>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub source: String,
    pub launches: Vec<ManifestStep>,
}

/// Kernel functions of a graph plus the manifest describing how to launch them.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSource {
    pub units: Vec<SourceUnit>,
    pub manifest: Manifest,
}

pub const KERNEL_FILE: &str = "kernels.c";

impl KernelSource {
    /// The complete kernel translation unit: prelude followed by every function.
    pub fn to_c(&self) -> String {
        let mut s = String::from(PRELUDE);
        for u in &self.units {
            s.push('\n');
            s.push_str(&u.code);
        }
        s
    }

    pub fn host_steps(&self) -> impl Iterator<Item = &ManifestStep> {
        self.manifest.launches.iter().filter(|s| s.host_step)
    }

    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n"
    }
}

/// Emits every point/local kernel in launch order; global kernels become host steps.
pub fn emit_kernel_source(vg: &VerifiedGraph) -> Result<KernelSource, CodegenError> {
    if !vg.is_stamped() {
        return Err(CodegenError::Unstamped);
    }
    let mut units = Vec::new();
    let mut launches = Vec::new();
    for (order, &id) in vg.order().iter().enumerate() {
        let n = &vg.graph().nodes[&id];
        let desc = |ids: Vec<ObjectId>| ids.iter().filter_map(|d| vg.data().get(d)).map(IoDescriptor::of).collect();
        let (function, kind) = match emit_kernel(vg, id) {
            Ok(unit) => {
                let f = unit.function.clone();
                units.push(unit);
                (Some(f), n.op.as_kernel().map(|k| k.kind().to_string()).unwrap_or_default())
            }
            Err(CodegenError::UnsupportedKind { kind, .. }) => (None, kind.to_string()),
            Err(e) => return Err(e),
        };
        launches.push(ManifestStep {
            order,
            node: id,
            kernel: n.op.name(),
            kind,
            host_step: function.is_none(),
            function,
            inputs: desc(n.inputs()),
            outputs: desc(n.outputs()),
        });
    }
    Ok(KernelSource { units, manifest: Manifest { source: KERNEL_FILE.into(), launches } })
}

fn file_name(id: ObjectId) -> String {
    format!("d{}.bin", id.0)
}

/// A `main` that loads graph inputs from a directory, runs the launches in
/// order and stores the graph outputs next to them. Includes [`KERNEL_FILE`].
///
/// File layout per object `d<id>.bin` (little-endian): images as raw storage
/// elements; scalars as one `i64` or `f64`; arrays as an `i64` count followed
/// by `i64` items; distributions as one `i64` per bin.
pub fn emit_driver(vg: &VerifiedGraph, src: &KernelSource) -> Result<String, CodegenError> {
    if let Some(h) = src.host_steps().next() {
        let kind = vg.graph().nodes[&h.node].op.as_kernel().map(|k| k.kind()).expect("host step is a kernel");
        return Err(CodegenError::UnsupportedKind { node: h.node, kind });
    }
    let producers = vg.graph().producers();
    let outputs = crate::exec::graph_outputs(vg);
    let mut s = String::from("#include <stdio.h>\n#include <stdlib.h>\n");
    let _ = writeln!(s, "#include \"{KERNEL_FILE}\"\n");
    s.push_str(
        r#"static char gvx_path[4096];

static void *gvx_load(const char *dir, const char *name, size_t bytes) {
    void *p = malloc(bytes ? bytes : 1);
    FILE *f;
    snprintf(gvx_path, sizeof gvx_path, "%s/%s", dir, name);
    f = fopen(gvx_path, "rb");
    if (!f || !p || fread(p, 1, bytes, f) != bytes) { fprintf(stderr, "cannot read %s\n", gvx_path); exit(2); }
    fclose(f);
    return p;
}

static void gvx_store(const char *dir, const char *name, const void *p, size_t bytes) {
    FILE *f;
    snprintf(gvx_path, sizeof gvx_path, "%s/%s", dir, name);
    f = fopen(gvx_path, "wb");
    if (!f || fwrite(p, 1, bytes, f) != bytes) { fprintf(stderr, "cannot write %s\n", gvx_path); exit(2); }
    fclose(f);
}

static gvx_int *gvx_load_array(const char *dir, const char *name, gvx_int *n) {
    FILE *f;
    gvx_int *p;
    snprintf(gvx_path, sizeof gvx_path, "%s/%s", dir, name);
    f = fopen(gvx_path, "rb");
    if (!f || fread(n, sizeof *n, 1, f) != 1) { fprintf(stderr, "cannot read %s\n", gvx_path); exit(2); }
    p = malloc(sizeof *p * (size_t)(*n > 0 ? *n : 1));
    if (!p || fread(p, sizeof *p, (size_t)*n, f) != (size_t)*n) { fprintf(stderr, "cannot read %s\n", gvx_path); exit(2); }
    fclose(f);
    return p;
}

int main(int argc, char **argv) {
    const char *dir;
    if (argc != 2) { fprintf(stderr, "usage: %s DIR\n", argv[0]); return 2; }
    dir = argv[1];
"#,
    );
    let used = vg.graph().data_ids();
    for d in vg.data().values().filter(|d| used.contains(&d.id)) {
        let v = format!("d{}", d.id.0);
        let file = file_name(d.id);
        let produced = producers.contains_key(&d.id);
        match &d.kind {
            DataKind::Image { width, height, format } => {
                let t = ctype(format.channel_type().ok_or(CodegenError::Type { node: d.id, message: "unresolved".into() })?);
                let n = Image::storage_len(*width, *height, *format);
                if produced {
                    let _ = writeln!(s, "    {t} *{v} = calloc({n}, sizeof({t}));");
                } else {
                    let _ = writeln!(s, "    {t} *{v} = gvx_load(dir, \"{file}\", {n} * sizeof({t}));");
                }
            }
            DataKind::Scalar { format, value } => {
                let ty = if format.is_float() { "double" } else { "gvx_int" };
                match value {
                    Some(val) => {
                        let _ = writeln!(s, "    {ty} {v} = {};", value_lit(*val).0);
                    }
                    None => {
                        let _ = writeln!(s, "    {ty} {v} = *({ty} *)gvx_load(dir, \"{file}\", sizeof({ty}));");
                    }
                }
            }
            DataKind::Array { .. } => {
                let _ = writeln!(s, "    gvx_int {v}_n = 0;");
                let _ = writeln!(s, "    gvx_int *{v} = gvx_load_array(dir, \"{file}\", &{v}_n);");
            }
            DataKind::Distribution { bins, .. } => {
                let _ = writeln!(s, "    gvx_int {v}_n = {bins};");
                let _ = writeln!(s, "    gvx_int *{v} = gvx_load(dir, \"{file}\", {bins} * sizeof(gvx_int));");
            }
            DataKind::Matrix { data, .. } => {
                let vals: Vec<String> = data.iter().map(|&c| real_lit(c)).collect();
                let _ = writeln!(s, "    static const double {v}[{}] = {{{}}};", vals.len().max(1), vals.join(", "));
            }
        }
    }
    for step in &src.manifest.launches {
        let n = &vg.graph().nodes[&step.node];
        let first_img = n
            .inputs()
            .into_iter()
            .find_map(|d| vg.data()[&d].kind.dims())
            .ok_or(CodegenError::Type { node: step.node, message: "kernel has no image input".into() })?;
        let mut args = vec![first_img.0.to_string(), first_img.1.to_string()];
        for d in n.inputs() {
            args.push(format!("d{}", d.0));
            if matches!(vg.data()[&d].kind, DataKind::Array { .. } | DataKind::Distribution { .. }) {
                args.push(format!("d{}_n", d.0));
            }
        }
        args.extend(n.outputs().iter().map(|d| format!("d{}", d.0)));
        let _ = writeln!(s, "    {}({});", step.function.as_deref().expect("no host steps"), args.join(", "));
    }
    let _ = writeln!(s, "    if (gvx_error) {{ fprintf(stderr, \"division by zero\\n\"); return 3; }}");
    for id in outputs {
        if let DataKind::Image { width, height, format } = &vg.data()[&id].kind {
            let t = ctype(format.channel_type().expect("resolved"));
            let n = Image::storage_len(*width, *height, *format);
            let _ = writeln!(s, "    gvx_store(dir, \"{}\", d{}, {n} * sizeof({t}));", file_name(id), id.0);
        }
    }
    s.push_str("    return 0;\n}\n");
    Ok(s)
}

/// Writes the driver's input files for `inputs` into `dir`.
pub fn write_driver_inputs(dir: &Path, inputs: &Buffers) -> std::io::Result<()> {
    for (id, b) in inputs {
        let bytes: Vec<u8> = match b {
            Buffer::Image(img) => img.pixels.to_le_bytes(),
            Buffer::Scalar(_, Value::Int(i)) => i.to_le_bytes().to_vec(),
            Buffer::Scalar(_, Value::Real(r)) => r.to_le_bytes().to_vec(),
            Buffer::Array { items: ArrayItems::Values(v), .. } => {
                let mut out = (v.len() as i64).to_le_bytes().to_vec();
                v.iter().for_each(|x| out.extend(x.to_le_bytes()));
                out
            }
            Buffer::Distribution { counts, .. } => counts.iter().flat_map(|&c| (c as i64).to_le_bytes()).collect(),
            Buffer::Array { .. } | Buffer::Matrix { .. } => continue,
        };
        std::fs::write(dir.join(file_name(*id)), bytes)?;
    }
    Ok(())
}

/// Reads back the image outputs the driver stored in `dir`.
pub fn read_driver_outputs(dir: &Path, vg: &VerifiedGraph) -> std::io::Result<Buffers> {
    let mut out = BTreeMap::new();
    for id in crate::exec::graph_outputs(vg) {
        if let DataKind::Image { width, height, format } = &vg.data()[&id].kind {
            let bytes = std::fs::read(dir.join(file_name(id)))?;
            let t = format.channel_type().expect("resolved");
            let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad output file for {id}"));
            let pixels = Pixels::from_le_bytes(t, &bytes).ok_or_else(bad)?;
            let img = Image::from_pixels(*width, *height, *format, pixels).ok_or_else(bad)?;
            out.insert(id, Buffer::Image(img));
        }
    }
    Ok(out)
}
