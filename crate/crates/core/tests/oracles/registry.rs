//! Brute-force references for every registry kernel, written directly over
//! pixel storage, on random 16x16 inputs.

#![allow(dead_code)]

use std::f64::consts::PI;

use crate::common::*;
use graphvx::exec::{random_inputs, run_naive, ArrayItems, Buffer, Image, Pixels};
use graphvx::graph::{CvNode, DataKind, ElementKind, ImageFormat as F, PixelType as T};
use graphvx::ir::Value;
use graphvx::library::CvKernel as K;

pub const SEEDS: u64 = 50;
const W: u32 = 16;
const H: u32 = 16;

fn img(f: F) -> Option<DataKind> {
    Some(DataKind::image(W, H, f))
}

fn range(t: T) -> (i64, i64) {
    match t {
        T::U8 => (0, 255),
        T::U16 => (0, 65535),
        T::S16 => (-32768, 32767),
        T::S32 => (i32::MIN as i64, i32::MAX as i64),
        T::U32 => (0, u32::MAX as i64),
        T::F32 => unreachable!(),
    }
}

fn sat(v: i64, t: T) -> i64 {
    let (lo, hi) = range(t);
    v.clamp(lo, hi)
}

fn sat_real(r: f64, t: T) -> i64 {
    let r = if r.is_nan() { 0.0 } else { r.round() };
    let (lo, hi) = range(t);
    r.clamp(lo as f64, hi as f64) as i64
}

fn wrap(v: i64, t: T) -> i64 {
    match t {
        T::U8 => v as u8 as i64,
        T::U16 => v as u16 as i64,
        T::S16 => v as i16 as i64,
        T::S32 => v as i32 as i64,
        T::U32 => v as u32 as i64,
        T::F32 => unreachable!(),
    }
}

/// Single-channel integer plane read straight from storage.
struct Plane {
    w: i64,
    h: i64,
    v: Vec<i64>,
}

impl Plane {
    fn of(b: &Buffer) -> Plane {
        let i = image(b);
        assert!(i.format.channels() == 1);
        Plane { w: i.width as i64, h: i.height as i64, v: (0..i.pixels.len()).map(|k| int_at(&i.pixels, k)).collect() }
    }

    fn at(&self, x: i64, y: i64) -> i64 {
        self.v[(y * self.w + x) as usize]
    }

    fn clamped(&self, x: i64, y: i64) -> i64 {
        self.at(x.clamp(0, self.w - 1), y.clamp(0, self.h - 1))
    }

    fn inside(&self, x: i64, y: i64) -> bool {
        (0..self.w).contains(&x) && (0..self.h).contains(&y)
    }
}

fn out(w: i64, h: i64, f: F, vals: impl IntoIterator<Item = i64>) -> Buffer {
    let mut img = Image::zeros(w as u32, h as u32, f);
    for (i, v) in vals.into_iter().enumerate() {
        img.pixels.set(i, Value::Int(v));
    }
    Buffer::Image(img)
}

fn map1(a: &Buffer, f: F, op: impl Fn(i64) -> i64) -> Buffer {
    let p = Plane::of(a);
    out(p.w, p.h, f, p.v.iter().map(|&x| op(x)))
}

fn map2(a: &Buffer, b: &Buffer, f: F, op: impl Fn(i64, i64) -> i64) -> Buffer {
    let (p, q) = (Plane::of(a), Plane::of(b));
    out(p.w, p.h, f, p.v.iter().zip(&q.v).map(|(&x, &y)| op(x, y)))
}

#[derive(Clone, Copy)]
enum Border {
    Clamp,
    Constant(i64),
    Undefined,
}

/// 3x3 neighbourhood in row-major order, or `None` for an undefined border pixel.
fn window(p: &Plane, x: i64, y: i64, b: Border) -> Option<[i64; 9]> {
    let mut n = [0; 9];
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (sx, sy) = (x + dx, y + dy);
            n[((dy + 1) * 3 + dx + 1) as usize] = match b {
                Border::Clamp => p.clamped(sx, sy),
                Border::Constant(c) => {
                    if p.inside(sx, sy) {
                        p.at(sx, sy)
                    } else {
                        c
                    }
                }
                Border::Undefined => {
                    if x < 1 || y < 1 || x >= p.w - 1 || y >= p.h - 1 {
                        return None;
                    }
                    p.at(sx, sy)
                }
            };
        }
    }
    Some(n)
}

fn filter3(a: &Buffer, f: F, b: Border, op: impl Fn([i64; 9]) -> i64) -> Buffer {
    let p = Plane::of(a);
    let mut vals = Vec::new();
    for y in 0..p.h {
        for x in 0..p.w {
            vals.push(window(&p, x, y, b).map(&op).unwrap_or(0));
        }
    }
    out(p.w, p.h, f, vals)
}

fn dot(n: [i64; 9], k: [i64; 9]) -> i64 {
    n.iter().zip(k).map(|(a, b)| a * b).sum()
}

type Args<'a> = [Option<&'a Buffer>];

fn check(label: &str, node: CvNode, params: Vec<Option<DataKind>>, reference: impl Fn(&Args) -> Vec<(usize, Buffer)>) {
    let s = single(node, &params);
    for seed in 0..SEEDS {
        let inputs = random_inputs(&s.expanded, seed);
        let report = run_naive(&s.expanded, &inputs).unwrap_or_else(|e| panic!("{label}: {e}"));
        let consts: Vec<Option<Buffer>> =
            params.iter().map(|p| p.as_ref().and_then(Buffer::from_constant)).collect();
        let args: Vec<Option<&Buffer>> = s
            .ids
            .iter()
            .zip(&consts)
            .map(|(id, c)| id.and_then(|id| inputs.get(&id)).or(c.as_ref()))
            .collect();
        let expected = reference(&args);
        assert!(!expected.is_empty());
        for (param, want) in expected {
            let id = s.ids[param].unwrap();
            let got = report.outputs.get(&id).unwrap_or_else(|| panic!("{label}: output {param} missing"));
            if !got.bit_eq(&want) {
                let detail = match (got, &want) {
                    (Buffer::Image(g), Buffer::Image(w)) => {
                        let i = (0..w.pixels.len()).find(|&i| !g.pixels.get(i).bit_eq(w.pixels.get(i)));
                        format!("first difference at storage index {i:?}")
                    }
                    _ => format!("got {got:?}, want {want:?}"),
                };
                panic!("{label} seed {seed} param {param}: {detail}");
            }
        }
    }
}

fn a<'a>(args: &'a Args, i: usize) -> &'a Buffer {
    args[i].unwrap()
}

pub fn channel_extract_and_combine() {
    check("extract G", CvNode::new(K::ChannelExtract).with("channel", "G"), vec![img(F::Rgb), img(F::U8)], |x| {
        let i = image(a(x, 0));
        vec![(1, out(16, 16, F::U8, (0..256).map(|k| int_at(&i.pixels, 3 * k + 1))))]
    });
    for (ch, name) in [(0usize, "Y"), (1, "U"), (2, "V")] {
        check(&format!("extract {name}"), CvNode::new(K::ChannelExtract).with("channel", name), vec![img(F::Uyvy), img(F::U8)], |x| {
            let i = image(a(x, 0));
            let vals = (0..256).map(|k| {
                let (px, py) = (k % 16, k / 16);
                let base = py * 32 + 4 * (px / 2);
                let off = match ch {
                    0 => 1 + 2 * (px % 2),
                    1 => 0,
                    _ => 2,
                };
                int_at(&i.pixels, base + off)
            });
            vec![(1, out(16, 16, F::U8, vals))]
        });
    }
    check("combine", CvNode::new(K::ChannelCombine), vec![img(F::U8), img(F::U8), img(F::U8), img(F::Rgb)], |x| {
        let planes: Vec<Plane> = (0..3).map(|i| Plane::of(a(x, i))).collect();
        vec![(3, out(16, 16, F::Rgb, (0..768).map(|k| planes[k % 3].v[k / 3])))]
    });
}

pub fn arithmetic() {
    for f in [F::U8, F::S16] {
        let t = f.channel_type().unwrap();
        check("absdiff", CvNode::new(K::AbsDiff), vec![img(f), img(f), img(f)], |x| {
            vec![(2, map2(a(x, 0), a(x, 1), f, |p, q| sat((p - q).abs(), t)))]
        });
    }
    check("add u8 sat", CvNode::new(K::Add), vec![img(F::U8), img(F::U8), img(F::U8)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::U8, |p, q| sat(p + q, T::U8)))]
    });
    check("add u8 wrap", CvNode::new(K::Add).with("policy", "wrap"), vec![img(F::U8), img(F::U8), img(F::U8)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::U8, |p, q| wrap(p + q, T::U8)))]
    });
    check("add u8+s16 -> s16", CvNode::new(K::Add), vec![img(F::U8), img(F::S16), img(F::S16)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::S16, |p, q| sat(p + q, T::S16)))]
    });
    check("sub u8 -> s16", CvNode::new(K::Subtract), vec![img(F::U8), img(F::U8), img(F::S16)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::S16, |p, q| sat(p - q, T::S16)))]
    });
    check("sub s32 wrap", CvNode::new(K::Subtract).with("policy", "wrap"), vec![img(F::S32), img(F::S32), img(F::S32)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::S32, |p, q| wrap(p - q, T::S32)))]
    });
    check("mul s16 -> s32", CvNode::new(K::Multiply), vec![img(F::S16), img(F::S16), img(F::S32)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::S32, |p, q| sat(p * q, T::S32)))]
    });
    let scale = 1.0 / 255.0;
    check("mul u8 scaled", CvNode::new(K::Multiply).with("scale", scale), vec![img(F::U8), img(F::U8), img(F::U8)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::U8, |p, q| sat_real((p * q) as f64 * scale, T::U8)))]
    });
}

pub fn bitwise() {
    let u8s = || vec![img(F::U8), img(F::U8), img(F::U8)];
    check("and", CvNode::new(K::And), u8s(), |x| vec![(2, map2(a(x, 0), a(x, 1), F::U8, |p, q| p & q))]);
    check("or", CvNode::new(K::Or), u8s(), |x| vec![(2, map2(a(x, 0), a(x, 1), F::U8, |p, q| p | q))]);
    check("xor", CvNode::new(K::Xor), u8s(), |x| vec![(2, map2(a(x, 0), a(x, 1), F::U8, |p, q| p ^ q))]);
    check("not", CvNode::new(K::Not), vec![img(F::U8), img(F::U8)], |x| {
        vec![(1, map1(a(x, 0), F::U8, |p| 255 - p))]
    });
}

pub fn gradients() {
    for f in [F::S16, F::S32] {
        let t = f.channel_type().unwrap();
        check("magnitude", CvNode::new(K::Magnitude), vec![img(f), img(f), img(f)], |x| {
            vec![(2, map2(a(x, 0), a(x, 1), f, |p, q| {
                let s = p.wrapping_mul(p).wrapping_add(q.wrapping_mul(q));
                sat_real((s as f64).sqrt(), t)
            }))]
        });
    }
    check("phase", CvNode::new(K::Phase), vec![img(F::S16), img(F::S16), img(F::U8)], |x| {
        vec![(2, map2(a(x, 0), a(x, 1), F::U8, |gx, gy| {
            let r = (gy as f64).atan2(gx as f64) * (128.0 / PI);
            (r.round() as i64) as u8 as i64
        }))]
    });
}

pub fn thresholds() {
    let s = |t| Some(DataKind::Scalar { format: t, value: None });
    check("binary", CvNode::new(K::Threshold), vec![img(F::U8), s(T::U8), img(F::U8)], |x| {
        let th = scalar(a(x, 1)).as_f64() as i64;
        vec![(2, map1(a(x, 0), F::U8, |p| if p > th { 255 } else { 0 }))]
    });
    check(
        "range s16",
        CvNode::new(K::Threshold).with("type", "range"),
        vec![img(F::S16), s(T::S16), img(F::U8), s(T::S16)],
        |x| {
            let (lo, hi) = (scalar(a(x, 1)).as_f64() as i64, scalar(a(x, 3)).as_f64() as i64);
            vec![(2, map1(a(x, 0), F::U8, |p| if p < lo || p > hi { 0 } else { 255 }))]
        },
    );
    let fixed = Some(DataKind::Scalar { format: T::S32, value: Some(Value::Int(77)) });
    check("constant threshold", CvNode::new(K::Threshold), vec![img(F::U8), fixed, img(F::U8)], |x| {
        vec![(2, map1(a(x, 0), F::U8, |p| if p > 77 { 255 } else { 0 }))]
    });
}

pub fn depth_conversion_and_copy() {
    check("u8 -> s16 << 2", CvNode::new(K::ConvertDepth).with("shift", 2), vec![img(F::U8), img(F::S16)], |x| {
        vec![(1, map1(a(x, 0), F::S16, |p| p << 2))]
    });
    check("s16 -> u8 >> 3 sat", CvNode::new(K::ConvertDepth).with("shift", 3), vec![img(F::S16), img(F::U8)], |x| {
        vec![(1, map1(a(x, 0), F::U8, |p| sat(p >> 3, T::U8)))]
    });
    check(
        "s16 -> u8 wrap",
        CvNode::new(K::ConvertDepth).with("policy", "wrap"),
        vec![img(F::S16), img(F::U8)],
        |x| vec![(1, map1(a(x, 0), F::U8, |p| wrap(p, T::U8)))],
    );
    check("s32 -> s16 sat", CvNode::new(K::ConvertDepth), vec![img(F::S32), img(F::S16)], |x| {
        vec![(1, map1(a(x, 0), F::S16, |p| sat(p, T::S16)))]
    });
    for f in [F::U8, F::S32, F::Rgb, F::F32, F::U16] {
        check(&format!("copy {f}"), CvNode::new(K::Copy), vec![img(f), img(f)], |x| vec![(1, a(x, 0).clone())]);
    }
}

pub fn box_gaussian_sobel() {
    for (f, b, node) in [
        (F::U8, Border::Clamp, CvNode::new(K::Box3x3)),
        (F::S16, Border::Constant(7), CvNode::new(K::Box3x3).with("border", "constant").with("border_value", 7)),
        (F::S32, Border::Undefined, CvNode::new(K::Box3x3).with("border", "undefined")),
    ] {
        let t = f.channel_type().unwrap();
        check(&format!("box {f}"), node, vec![img(f), img(f)], move |x| {
            vec![(1, filter3(a(x, 0), f, b, |n| sat(n.iter().sum::<i64>() / 9, t)))]
        });
    }
    const G: [i64; 9] = [1, 2, 1, 2, 4, 2, 1, 2, 1];
    check("gauss", CvNode::new(K::Gaussian3x3), vec![img(F::U8), img(F::U8)], |x| {
        vec![(1, filter3(a(x, 0), F::U8, Border::Clamp, |n| dot(n, G) / 16))]
    });
    check("gauss undefined", CvNode::new(K::Gaussian3x3).with("border", "undefined"), vec![img(F::U8), img(F::U8)], |x| {
        vec![(1, filter3(a(x, 0), F::U8, Border::Undefined, |n| dot(n, G) / 16))]
    });
    const GF: [f64; 9] = [0.057118, 0.124758, 0.057118, 0.124758, 0.272496, 0.124758, 0.057118, 0.124758, 0.057118];
    check("gauss float", CvNode::new(K::Gaussian3x3).with("precision", "float"), vec![img(F::U8), img(F::U8)], |x| {
        vec![(1, filter3(a(x, 0), F::U8, Border::Clamp, |n| {
            let s = n.iter().zip(GF).fold(0.0, |acc, (&p, k)| acc + k * p as f64);
            sat_real(s, T::U8)
        }))]
    });
    const SX: [i64; 9] = [-1, 0, 1, -2, 0, 2, -1, 0, 1];
    const SY: [i64; 9] = [-1, -2, -1, 0, 0, 0, 1, 2, 1];
    check("sobel", CvNode::new(K::Sobel3x3), vec![img(F::U8), img(F::S16), img(F::S16)], |x| {
        vec![
            (1, filter3(a(x, 0), F::S16, Border::Clamp, |n| dot(n, SX))),
            (2, filter3(a(x, 0), F::S16, Border::Clamp, |n| dot(n, SY))),
        ]
    });
    check("sobel y only", CvNode::new(K::Sobel3x3), vec![img(F::U8), None, img(F::S16)], |x| {
        vec![(2, filter3(a(x, 0), F::S16, Border::Clamp, |n| dot(n, SY)))]
    });
}

pub fn morphology_and_median() {
    for f in [F::U8, F::S16] {
        check("dilate", CvNode::new(K::Dilate3x3), vec![img(f), img(f)], move |x| {
            vec![(1, filter3(a(x, 0), f, Border::Clamp, |n| *n.iter().max().unwrap()))]
        });
        check("erode", CvNode::new(K::Erode3x3), vec![img(f), img(f)], move |x| {
            vec![(1, filter3(a(x, 0), f, Border::Clamp, |n| *n.iter().min().unwrap()))]
        });
        check("median", CvNode::new(K::Median3x3), vec![img(f), img(f)], move |x| {
            vec![(1, filter3(a(x, 0), f, Border::Clamp, |mut n| {
                n.sort();
                n[4]
            }))]
        });
    }
    check(
        "erode constant border",
        CvNode::new(K::Erode3x3).with("border", "constant").with("border_value", 3),
        vec![img(F::U8), img(F::U8)],
        |x| vec![(1, filter3(a(x, 0), F::U8, Border::Constant(3), |n| *n.iter().min().unwrap()))],
    );
}

pub fn convolve() {
    // 5 wide, 3 high, correlation (no kernel flip), truncating division by the scale.
    let coefs: Vec<f64> = vec![1., 0., -2., 0., 1., 3., 4., 5., 4., 3., -1., 0., 2., 0., -1.];
    let m = Some(DataKind::Matrix { rows: 3, cols: 5, format: T::S16, data: coefs.clone() });
    let k: Vec<i64> = coefs.iter().map(|&c| c as i64).collect();
    for (f, node, border, t) in [
        (F::U8, CvNode::new(K::Convolve).with("scale", 4), Border::Clamp, T::S16),
        (F::S16, CvNode::new(K::Convolve).with("format", "U8").with("border", "constant").with("border_value", 9), Border::Constant(9), T::U8),
    ] {
        let scale = node.attrs.get("scale").and_then(|v| v.as_i64()).unwrap_or(1);
        let of = F::single(t);
        let k = k.clone();
        check(&format!("convolve {f}"), node, vec![img(f), m.clone(), img(of)], move |x| {
            let p = Plane::of(a(x, 0));
            let mut vals = Vec::new();
            for y in 0..p.h {
                for xx in 0..p.w {
                    let mut s = 0;
                    for dy in -1..=1i64 {
                        for dx in -2..=2i64 {
                            let (sx, sy) = (xx + dx, y + dy);
                            let v = match border {
                                Border::Constant(c) if !p.inside(sx, sy) => c,
                                _ => p.clamped(sx, sy),
                            };
                            s += k[((dy + 1) * 5 + dx + 2) as usize] * v;
                        }
                    }
                    vals.push(sat(s / scale, t));
                }
            }
            vec![(2, out(p.w, p.h, of, vals))]
        });
    }
}

pub fn histogram() {
    for (f, bins, offset, rng) in [(F::U8, 16usize, 10i64, 200u64), (F::U8, 256, 0, 256), (F::U16, 64, 0, 65536)] {
        let d = Some(DataKind::Distribution { bins, offset, range: rng });
        check(&format!("histogram {f} {bins}"), CvNode::new(K::Histogram), vec![img(f), d], move |x| {
            let p = Plane::of(a(x, 0));
            let mut counts = vec![0u32; bins];
            for &v in &p.v {
                if v >= offset && v < offset + rng as i64 {
                    counts[((v - offset) * bins as i64 / rng as i64) as usize] += 1;
                }
            }
            vec![(1, Buffer::Distribution { bins, offset, range: rng, counts })]
        });
    }
}

pub fn min_max_loc() {
    let s = |t| Some(DataKind::Scalar { format: t, value: None });
    let locs = Some(DataKind::Array { capacity: 4, element: ElementKind::Coordinate });
    check(
        "minmaxloc u8",
        CvNode::new(K::MinMaxLoc),
        vec![img(F::U8), s(T::U8), s(T::U8), locs.clone(), locs, s(T::U32), s(T::U32)],
        |x| {
            let p = Plane::of(a(x, 0));
            let (lo, hi) = (*p.v.iter().min().unwrap(), *p.v.iter().max().unwrap());
            let find = |t: i64| -> (Vec<(u32, u32)>, i64) {
                let all: Vec<(u32, u32)> =
                    (0..p.v.len()).filter(|&i| p.v[i] == t).map(|i| ((i % 16) as u32, (i / 16) as u32)).collect();
                (all.iter().take(4).copied().collect(), all.len() as i64)
            };
            let ((lmin, cmin), (lmax, cmax)) = (find(lo), find(hi));
            let arr = |c| Buffer::Array { element: ElementKind::Coordinate, capacity: 4, items: ArrayItems::Coords(c) };
            vec![
                (1, Buffer::Scalar(T::U8, Value::Int(lo))),
                (2, Buffer::Scalar(T::U8, Value::Int(hi))),
                (3, arr(lmin)),
                (4, arr(lmax)),
                (5, Buffer::Scalar(T::U32, Value::Int(cmin))),
                (6, Buffer::Scalar(T::U32, Value::Int(cmax))),
            ]
        },
    );
    check("minmaxloc s16 values", CvNode::new(K::MinMaxLoc), vec![img(F::S16), s(T::S16), s(T::S16)], |x| {
        let p = Plane::of(a(x, 0));
        vec![
            (1, Buffer::Scalar(T::S16, Value::Int(*p.v.iter().min().unwrap()))),
            (2, Buffer::Scalar(T::S16, Value::Int(*p.v.iter().max().unwrap()))),
        ]
    });
}

pub fn mean_std_dev() {
    let s = Some(DataKind::Scalar { format: T::F32, value: None });
    for f in [F::U8, F::S16] {
        check(&format!("meanstddev {f}"), CvNode::new(K::MeanStdDev), vec![img(f), s.clone(), s.clone()], |x| {
            let p = Plane::of(a(x, 0));
            let n = p.v.len() as f64;
            let mean = (p.v.iter().fold(0.0, |acc, &v| acc + v as f64) / n) as f32 as f64;
            let var = p.v.iter().fold(0.0, |acc, &v| acc + (v as f64 - mean) * (v as f64 - mean)) / n;
            vec![
                (1, Buffer::Scalar(T::F32, Value::Real(mean))),
                (2, Buffer::Scalar(T::F32, Value::Real(var.sqrt() as f32 as f64))),
            ]
        });
    }
}

pub fn integral_image() {
    check("integral", CvNode::new(K::IntegralImage), vec![img(F::U8), img(F::U32)], |x| {
        let p = Plane::of(a(x, 0));
        let mut vals = Vec::new();
        for y in 0..p.h {
            for xx in 0..p.w {
                let mut s = 0i64;
                for yy in 0..=y {
                    for xxx in 0..=xx {
                        s += p.at(xxx, yy);
                    }
                }
                vals.push(s);
            }
        }
        vec![(1, out(p.w, p.h, F::U32, vals))]
    });
}

pub fn scale_image() {
    for (w, h, interp) in [(8u32, 12u32, "nearest"), (24, 20, "nearest"), (24, 20, "bilinear"), (5, 7, "bilinear")] {
        let node = CvNode::new(K::ScaleImage).with("interp", interp);
        check(&format!("scale {w}x{h} {interp}"), node, vec![img(F::U8), Some(DataKind::image(w, h, F::U8))], move |x| {
            let p = Plane::of(a(x, 0));
            // Pixel centres aligned: output pixel i samples input coordinate (i + 0.5) * in / out - 0.5.
            let src = |i: u32, n_in: i64, n_out: u32| (i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
            let mut vals = Vec::new();
            for y in 0..h {
                for xx in 0..w {
                    let (sx, sy) = (src(xx, p.w, w), src(y, p.h, h));
                    vals.push(if interp == "nearest" {
                        p.clamped((sx + 0.5).floor() as i64, (sy + 0.5).floor() as i64)
                    } else {
                        let (x0, y0) = (sx.floor(), sy.floor());
                        let (fx, fy) = (sx - x0, sy - y0);
                        let (x0, y0) = (x0 as i64, y0 as i64);
                        let q = |a: i64, b: i64| p.clamped(a, b) as f64;
                        let v = (1.0 - fx) * (1.0 - fy) * q(x0, y0)
                            + fx * (1.0 - fy) * q(x0 + 1, y0)
                            + (1.0 - fx) * fy * q(x0, y0 + 1)
                            + fx * fy * q(x0 + 1, y0 + 1);
                        sat_real(v, T::U8)
                    });
                }
            }
            vec![(1, out(w as i64, h as i64, F::U8, vals))]
        });
    }
}

pub fn equalize_hist() {
    check("equalize", CvNode::new(K::EqualizeHist), vec![img(F::U8), img(F::U8)], |x| {
        let p = Plane::of(a(x, 0));
        let mut hist = [0u64; 256];
        for &v in &p.v {
            hist[v as usize] += 1;
        }
        let n = p.v.len() as u64;
        let cdf_min = hist.iter().copied().find(|&c| c > 0).unwrap();
        let mut lut = [0i64; 256];
        let mut cdf = 0;
        for i in 0..256 {
            cdf += hist[i];
            lut[i] = if n == cdf_min {
                i as i64
            } else if cdf < cdf_min {
                0
            } else {
                ((cdf - cdf_min) as f64 * 255.0 / (n - cdf_min) as f64).round() as i64
            };
        }
        vec![(1, map1(a(x, 0), F::U8, |v| lut[v as usize]))]
    });
}

pub fn every_registry_kernel_is_covered() {
    // Keep in sync with the tests above.
    let covered = [
        K::ChannelExtract, K::ChannelCombine, K::AbsDiff, K::Add, K::Subtract, K::And, K::Or, K::Xor, K::Not,
        K::Multiply, K::Magnitude, K::Phase, K::Threshold, K::ConvertDepth, K::Copy, K::Box3x3, K::Gaussian3x3,
        K::Sobel3x3, K::Dilate3x3, K::Erode3x3, K::Median3x3, K::Convolve, K::Histogram, K::MinMaxLoc,
        K::MeanStdDev, K::IntegralImage, K::ScaleImage, K::EqualizeHist,
    ];
    for k in K::ALL {
        assert!(covered.contains(k), "{k} has no oracle");
    }
}

pub fn pixels_helper_reads_storage() {
    let i = Image::from_pixels(2, 1, F::U8, Pixels::U8(vec![3, 4])).unwrap();
    assert_eq!(Plane::of(&Buffer::Image(i)).v, vec![3, 4]);
}

/// Every check above, by name.
pub const CASES: &[(&str, fn())] = &[
    ("channel_extract_and_combine", channel_extract_and_combine),
    ("arithmetic", arithmetic),
    ("bitwise", bitwise),
    ("gradients", gradients),
    ("thresholds", thresholds),
    ("depth_conversion_and_copy", depth_conversion_and_copy),
    ("box_gaussian_sobel", box_gaussian_sobel),
    ("morphology_and_median", morphology_and_median),
    ("convolve", convolve),
    ("histogram", histogram),
    ("min_max_loc", min_max_loc),
    ("mean_std_dev", mean_std_dev),
    ("integral_image", integral_image),
    ("scale_image", scale_image),
    ("equalize_hist", equalize_hist),
    ("every_registry_kernel_is_covered", every_registry_kernel_is_covered),
    ("pixels_helper_reads_storage", pixels_helper_reads_storage),
];
