//! Expression trees used as kernel bodies.

use std::fmt;

use crate::graph::PixelType;
use crate::ir::value::Overflow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Lt,
    Gt,
    Eq,
    /// `atan2(lhs, rhs)`, i.e. the angle of the vector `(rhs, lhs)`.
    Atan2,
}

impl BinOp {
    pub const ALL: [BinOp; 15] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Min,
        BinOp::Max,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
        BinOp::Shl,
        BinOp::Shr,
        BinOp::Lt,
        BinOp::Gt,
        BinOp::Eq,
        BinOp::Atan2,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Min => "min",
            BinOp::Max => "max",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
            BinOp::Shl => "shl",
            BinOp::Shr => "shr",
            BinOp::Lt => "lt",
            BinOp::Gt => "gt",
            BinOp::Eq => "eq",
            BinOp::Atan2 => "atan2",
        }
    }

    pub fn is_bitwise(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or | BinOp::Xor | BinOp::Shl | BinOp::Shr)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Gt | BinOp::Eq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
    Abs,
    Sqrt,
}

impl UnOp {
    pub const ALL: [UnOp; 4] = [UnOp::Not, UnOp::Neg, UnOp::Abs, UnOp::Sqrt];

    pub fn keyword(self) -> &'static str {
        match self {
            UnOp::Not => "not",
            UnOp::Neg => "neg",
            UnOp::Abs => "abs",
            UnOp::Sqrt => "sqrt",
        }
    }
}

/// Kernel body expression.
///
/// Window and mask offsets are interpreted by the enclosing local kernel: inside a
/// tap body they are relative to the current tap and must be zero; inside a post
/// body they are relative to the output pixel and must stay inside the window.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    ConstI(i64),
    ConstF(f64),
    /// Pixel of input `input` at the output position (scalars broadcast).
    InputPixel { input: usize, channel: u8 },
    WindowPixel { input: usize, dx: i32, dy: i32, channel: u8 },
    MaskCoef { dx: i32, dy: i32 },
    /// The combined tap value (local post bodies) or the running accumulator (reductions).
    Acc,
    /// Element `index` of an array or distribution input, index clamped into range.
    Lookup { input: usize, index: Box<Expr> },
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Select(Box<Expr>, Box<Expr>, Box<Expr>),
    Cast { target: PixelType, policy: Overflow, expr: Box<Expr> },
}

impl Expr {
    pub fn input(input: usize) -> Expr {
        Expr::InputPixel { input, channel: 0 }
    }

    pub fn input_channel(input: usize, channel: u8) -> Expr {
        Expr::InputPixel { input, channel }
    }

    /// Window read at the current tap.
    pub fn tap(input: usize) -> Expr {
        Expr::WindowPixel { input, dx: 0, dy: 0, channel: 0 }
    }

    pub fn mask() -> Expr {
        Expr::MaskCoef { dx: 0, dy: 0 }
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn un(op: UnOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn select(c: Expr, a: Expr, b: Expr) -> Expr {
        Expr::Select(Box::new(c), Box::new(a), Box::new(b))
    }

    pub fn cast(target: PixelType, policy: Overflow, e: Expr) -> Expr {
        Expr::Cast { target, policy, expr: Box::new(e) }
    }

    pub fn lookup(input: usize, index: Expr) -> Expr {
        Expr::Lookup { input, index: Box::new(index) }
    }

    /// Visits every node in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Lookup { index, .. } => index.walk(f),
            Expr::Binary(_, a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Unary(_, a) => a.walk(f),
            Expr::Select(c, a, b) => {
                c.walk(f);
                a.walk(f);
                b.walk(f);
            }
            Expr::Cast { expr, .. } => expr.walk(f),
            _ => {}
        }
    }

    pub fn any(&self, mut pred: impl FnMut(&Expr) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= pred(e));
        found
    }

    /// Bottom-up rewrite: children are rewritten first, then `f` sees the rebuilt node.
    pub fn rewrite(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Lookup { input, index } => Expr::Lookup { input: *input, index: Box::new(index.rewrite(f)) },
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.rewrite(f))),
            Expr::Select(c, a, b) => {
                Expr::Select(Box::new(c.rewrite(f)), Box::new(a.rewrite(f)), Box::new(b.rewrite(f)))
            }
            Expr::Cast { target, policy, expr } => {
                Expr::Cast { target: *target, policy: *policy, expr: Box::new(expr.rewrite(f)) }
            }
            leaf => leaf.clone(),
        };
        f(rebuilt)
    }

    /// Input indices referenced by pixel, window, or lookup reads.
    pub fn referenced_inputs(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.walk(&mut |e| match e {
            Expr::InputPixel { input, .. } | Expr::WindowPixel { input, .. } | Expr::Lookup { input, .. } => {
                if !out.contains(input) {
                    out.push(*input);
                }
            }
            _ => {}
        });
        out.sort_unstable();
        out
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::ir::sexpr::print(self))
    }
}
