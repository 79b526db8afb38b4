//! Canonical text form of expressions, used in graph files and diagnostics.
//!
//! ```text
//! 17  -3  0.5  1e-7
//! (in K [CH])          (win K DX DY [CH])     (mask DX DY)     acc
//! (lut K INDEX)        (OP A B)   (OP A)      (select C A B)   (cast TYPE sat|wrap E)
//! ```

use thiserror::Error;

use crate::graph::PixelType;
use crate::ir::expr::{BinOp, Expr, UnOp};
use crate::ir::value::Overflow;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("expression syntax error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

// Debug formatting keeps a `.` or an exponent, so reals never re-parse as integers.
fn real_text(r: f64) -> String {
    format!("{r:?}")
}

pub fn print(e: &Expr) -> String {
    let mut out = String::new();
    write(e, &mut out);
    out
}

fn write(e: &Expr, out: &mut String) {
    use std::fmt::Write as _;
    match e {
        Expr::ConstI(i) => {
            let _ = write!(out, "{i}");
        }
        Expr::ConstF(r) => out.push_str(&real_text(*r)),
        Expr::InputPixel { input, channel: 0 } => {
            let _ = write!(out, "(in {input})");
        }
        Expr::InputPixel { input, channel } => {
            let _ = write!(out, "(in {input} {channel})");
        }
        Expr::WindowPixel { input, dx, dy, channel: 0 } => {
            let _ = write!(out, "(win {input} {dx} {dy})");
        }
        Expr::WindowPixel { input, dx, dy, channel } => {
            let _ = write!(out, "(win {input} {dx} {dy} {channel})");
        }
        Expr::MaskCoef { dx, dy } => {
            let _ = write!(out, "(mask {dx} {dy})");
        }
        Expr::Acc => out.push_str("acc"),
        Expr::Lookup { input, index } => {
            let _ = write!(out, "(lut {input} ");
            write(index, out);
            out.push(')');
        }
        Expr::Binary(op, a, b) => {
            out.push('(');
            out.push_str(op.keyword());
            out.push(' ');
            write(a, out);
            out.push(' ');
            write(b, out);
            out.push(')');
        }
        Expr::Unary(op, a) => {
            out.push('(');
            out.push_str(op.keyword());
            out.push(' ');
            write(a, out);
            out.push(')');
        }
        Expr::Select(c, a, b) => {
            out.push_str("(select ");
            write(c, out);
            out.push(' ');
            write(a, out);
            out.push(' ');
            write(b, out);
            out.push(')');
        }
        Expr::Cast { target, policy, expr } => {
            let _ = write!(out, "(cast {} {} ", target.name().to_ascii_lowercase(), policy.keyword());
            write(expr, out);
            out.push(')');
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Vec<(usize, Tok<'_>)> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                toks.push((i, Tok::Open));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::Close));
                i += 1;
            }
            c if c.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b'(' | b')') && !bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                toks.push((start, Tok::Atom(&src[start..i])));
            }
        }
    }
    toks
}

struct Parser<'a> {
    toks: Vec<(usize, Tok<'a>)>,
    pos: usize,
    len: usize,
}

impl<'a> Parser<'a> {
    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.len)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.here(), msg: msg.into() })
    }

    fn next(&mut self) -> Option<Tok<'a>> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn atom(&mut self) -> Result<&'a str, ParseError> {
        match self.toks.get(self.pos).map(|t| t.1.clone()) {
            Some(Tok::Atom(a)) => {
                self.pos += 1;
                Ok(a)
            }
            _ => self.err("expected an atom"),
        }
    }

    fn int<T: std::str::FromStr>(&mut self) -> Result<T, ParseError> {
        let a = self.atom()?;
        a.parse().or_else(|_| {
            self.pos -= 1;
            self.err(format!("expected an integer, found `{a}`"))
        })
    }

    fn close(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Tok::Close) => Ok(()),
            _ => {
                self.pos -= 1;
                self.err("expected `)`")
            }
        }
    }

    fn at_close(&self) -> bool {
        matches!(self.toks.get(self.pos), Some((_, Tok::Close)))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.next() {
            None => self.err("unexpected end of input"),
            Some(Tok::Close) => {
                self.pos -= 1;
                self.err("unexpected `)`")
            }
            Some(Tok::Atom(a)) => {
                if a == "acc" {
                    return Ok(Expr::Acc);
                }
                if let Ok(i) = a.parse::<i64>() {
                    return Ok(Expr::ConstI(i));
                }
                match a.parse::<f64>() {
                    Ok(r) => Ok(Expr::ConstF(r)),
                    Err(_) => {
                        self.pos -= 1;
                        self.err(format!("unknown atom `{a}`"))
                    }
                }
            }
            Some(Tok::Open) => {
                let head = self.atom()?;
                let e = match head {
                    "in" => {
                        let input = self.int()?;
                        let channel = if self.at_close() { 0 } else { self.int()? };
                        Expr::InputPixel { input, channel }
                    }
                    "win" => {
                        let input = self.int()?;
                        let dx = self.int()?;
                        let dy = self.int()?;
                        let channel = if self.at_close() { 0 } else { self.int()? };
                        Expr::WindowPixel { input, dx, dy, channel }
                    }
                    "mask" => {
                        let dx = self.int()?;
                        let dy = self.int()?;
                        Expr::MaskCoef { dx, dy }
                    }
                    "lut" => {
                        let input = self.int()?;
                        Expr::lookup(input, self.expr()?)
                    }
                    "select" => {
                        let c = self.expr()?;
                        let a = self.expr()?;
                        let b = self.expr()?;
                        Expr::select(c, a, b)
                    }
                    "cast" => {
                        let t = self.atom()?;
                        let target: PixelType = match t.to_ascii_uppercase().parse() {
                            Ok(t) => t,
                            Err(_) => {
                                self.pos -= 1;
                                return self.err(format!("unknown cast target `{t}`"));
                            }
                        };
                        let policy = match self.atom()? {
                            "sat" => Overflow::Saturate,
                            "wrap" => Overflow::Wrap,
                            p => {
                                self.pos -= 1;
                                return self.err(format!("unknown overflow policy `{p}`"));
                            }
                        };
                        Expr::cast(target, policy, self.expr()?)
                    }
                    op => {
                        if let Some(b) = BinOp::ALL.iter().find(|b| b.keyword() == op) {
                            let a = self.expr()?;
                            let c = self.expr()?;
                            Expr::bin(*b, a, c)
                        } else if let Some(u) = UnOp::ALL.iter().find(|u| u.keyword() == op) {
                            Expr::un(*u, self.expr()?)
                        } else {
                            self.pos -= 1;
                            return self.err(format!("unknown operator `{op}`"));
                        }
                    }
                };
                self.close()?;
                Ok(e)
            }
        }
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: tokenize(src), pos: 0, len: src.len() };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prints_canonical_form() {
        let e = Expr::cast(
            PixelType::U8,
            Overflow::Saturate,
            Expr::bin(BinOp::Div, Expr::Acc, Expr::ConstI(16)),
        );
        assert_eq!(print(&e), "(cast u8 sat (div acc 16))");
        assert_eq!(print(&Expr::ConstF(1.0)), "1.0");
        assert_eq!(print(&Expr::WindowPixel { input: 0, dx: -1, dy: 1, channel: 2 }), "(win 0 -1 1 2)");
    }

    #[test]
    fn reports_position_of_bad_token() {
        let err = parse("(add (in 0) (foo 1))").unwrap_err();
        assert_eq!(err.pos, 13);
        assert!(parse("(in 0").is_err());
        assert!(parse("(in 0) 1").is_err());
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            any::<i64>().prop_map(Expr::ConstI),
            any::<f64>().prop_filter("finite", |r| r.is_finite()).prop_map(Expr::ConstF),
            (0usize..4, 0u8..3).prop_map(|(input, channel)| Expr::InputPixel { input, channel }),
            (0usize..4, -2i32..3, -2i32..3, 0u8..3)
                .prop_map(|(input, dx, dy, channel)| Expr::WindowPixel { input, dx, dy, channel }),
            (-2i32..3, -2i32..3).prop_map(|(dx, dy)| Expr::MaskCoef { dx, dy }),
            Just(Expr::Acc),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                (0usize..BinOp::ALL.len(), inner.clone(), inner.clone())
                    .prop_map(|(i, a, b)| Expr::bin(BinOp::ALL[i], a, b)),
                (0usize..UnOp::ALL.len(), inner.clone()).prop_map(|(i, a)| Expr::un(UnOp::ALL[i], a)),
                (inner.clone(), inner.clone(), inner.clone()).prop_map(|(c, a, b)| Expr::select(c, a, b)),
                (0usize..PixelType::ALL.len(), any::<bool>(), inner.clone()).prop_map(|(t, sat, e)| {
                    Expr::cast(PixelType::ALL[t], if sat { Overflow::Saturate } else { Overflow::Wrap }, e)
                }),
                (0usize..3, inner).prop_map(|(k, e)| Expr::lookup(k, e)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let text = print(&e);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &e);
            prop_assert_eq!(print(&back), text);
        }
    }
}
