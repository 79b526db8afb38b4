use thiserror::Error;

use crate::ir::expr::{BinOp, Expr, UnOp};
use crate::ir::value::{cast_value, Value};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivByZero,
    #[error("operator `{0}` applied to a real operand")]
    RealOperand(&'static str),
    #[error("environment has no {0}")]
    Missing(&'static str),
    #[error("input {0} is not readable here")]
    BadInput(usize),
}

/// Supplies the slots an expression can reference.
pub trait Env {
    fn input(&self, input: usize, channel: u8) -> Result<Value, EvalError>;

    fn window(&self, _input: usize, _dx: i32, _dy: i32, _channel: u8) -> Result<Value, EvalError> {
        Err(EvalError::Missing("window"))
    }

    fn mask(&self, _dx: i32, _dy: i32) -> Result<Value, EvalError> {
        Err(EvalError::Missing("mask"))
    }

    fn acc(&self) -> Result<Value, EvalError> {
        Err(EvalError::Missing("accumulator"))
    }

    fn lookup(&self, input: usize, _index: i64) -> Result<Value, EvalError> {
        Err(EvalError::BadInput(input))
    }
}

/// Minimum of two doubles; NaN loses against any number.
pub fn real_min(a: f64, b: f64) -> f64 {
    if a < b {
        a
    } else if b < a {
        b
    } else if a.is_nan() {
        b
    } else {
        a
    }
}

/// Maximum of two doubles; NaN loses against any number.
pub fn real_max(a: f64, b: f64) -> f64 {
    if a > b {
        a
    } else if b > a {
        b
    } else if a.is_nan() {
        b
    } else {
        a
    }
}

pub fn apply_binary(op: BinOp, a: Value, b: Value) -> Result<Value, EvalError> {
    use Value::{Int, Real};
    if op.is_bitwise() {
        let (Int(x), Int(y)) = (a, b) else {
            return Err(EvalError::RealOperand(op.keyword()));
        };
        return Ok(Int(match op {
            BinOp::And => x & y,
            BinOp::Or => x | y,
            BinOp::Xor => x ^ y,
            BinOp::Shl => x.wrapping_shl((y & 63) as u32),
            BinOp::Shr => x.wrapping_shr((y & 63) as u32),
            _ => unreachable!(),
        }));
    }
    if op == BinOp::Atan2 {
        return Ok(Real(a.as_f64().atan2(b.as_f64())));
    }
    match (a, b) {
        (Int(x), Int(y)) => Ok(match op {
            BinOp::Add => Int(x.wrapping_add(y)),
            BinOp::Sub => Int(x.wrapping_sub(y)),
            BinOp::Mul => Int(x.wrapping_mul(y)),
            BinOp::Div => {
                if y == 0 {
                    return Err(EvalError::DivByZero);
                }
                Int(x.wrapping_div(y))
            }
            BinOp::Min => Int(x.min(y)),
            BinOp::Max => Int(x.max(y)),
            BinOp::Lt => Int((x < y) as i64),
            BinOp::Gt => Int((x > y) as i64),
            BinOp::Eq => Int((x == y) as i64),
            _ => unreachable!(),
        }),
        _ => {
            let (x, y) = (a.as_f64(), b.as_f64());
            Ok(match op {
                BinOp::Add => Real(x + y),
                BinOp::Sub => Real(x - y),
                BinOp::Mul => Real(x * y),
                BinOp::Div => {
                    if y == 0.0 {
                        return Err(EvalError::DivByZero);
                    }
                    Real(x / y)
                }
                BinOp::Min => Real(real_min(x, y)),
                BinOp::Max => Real(real_max(x, y)),
                BinOp::Lt => Int((x < y) as i64),
                BinOp::Gt => Int((x > y) as i64),
                BinOp::Eq => Int((x == y) as i64),
                _ => unreachable!(),
            })
        }
    }
}

pub fn apply_unary(op: UnOp, a: Value) -> Result<Value, EvalError> {
    use Value::{Int, Real};
    Ok(match (op, a) {
        (UnOp::Not, Int(x)) => Int(!x),
        (UnOp::Not, Real(_)) => return Err(EvalError::RealOperand("not")),
        (UnOp::Neg, Int(x)) => Int(x.wrapping_neg()),
        (UnOp::Neg, Real(x)) => Real(-x),
        (UnOp::Abs, Int(x)) => Int(x.wrapping_abs()),
        (UnOp::Abs, Real(x)) => Real(x.abs()),
        (UnOp::Sqrt, v) => Real(v.as_f64().sqrt()),
    })
}

/// Evaluates `e` against `env`. Pure: the result depends only on `e` and the slots `env` serves.
pub fn eval_expr<E: Env + ?Sized>(e: &Expr, env: &E) -> Result<Value, EvalError> {
    match e {
        Expr::ConstI(i) => Ok(Value::Int(*i)),
        Expr::ConstF(r) => Ok(Value::Real(*r)),
        Expr::InputPixel { input, channel } => env.input(*input, *channel),
        Expr::WindowPixel { input, dx, dy, channel } => env.window(*input, *dx, *dy, *channel),
        Expr::MaskCoef { dx, dy } => env.mask(*dx, *dy),
        Expr::Acc => env.acc(),
        Expr::Lookup { input, index } => {
            let idx = match eval_expr(index, env)? {
                Value::Int(i) => i,
                Value::Real(_) => return Err(EvalError::RealOperand("lookup")),
            };
            env.lookup(*input, idx)
        }
        Expr::Binary(op, a, b) => {
            let a = eval_expr(a, env)?;
            let b = eval_expr(b, env)?;
            apply_binary(*op, a, b)
        }
        Expr::Unary(op, a) => apply_unary(*op, eval_expr(a, env)?),
        Expr::Select(c, a, b) => {
            if eval_expr(c, env)?.is_truthy() {
                eval_expr(a, env)
            } else {
                eval_expr(b, env)
            }
        }
        Expr::Cast { target, policy, expr } => Ok(cast_value(eval_expr(expr, env)?, *target, *policy)),
    }
}

/// Environment with no slots; only constant expressions evaluate.
pub struct EmptyEnv;

impl Env for EmptyEnv {
    fn input(&self, input: usize, _channel: u8) -> Result<Value, EvalError> {
        Err(EvalError::BadInput(input))
    }
}

/// Fixed per-input values, a fixed accumulator, and an optional 2-D window.
#[derive(Clone, Debug, Default)]
pub struct SimpleEnv {
    pub inputs: Vec<Value>,
    pub acc: Option<Value>,
}

impl Env for SimpleEnv {
    fn input(&self, input: usize, _channel: u8) -> Result<Value, EvalError> {
        self.inputs.get(input).copied().ok_or(EvalError::BadInput(input))
    }

    fn acc(&self) -> Result<Value, EvalError> {
        self.acc.ok_or(EvalError::Missing("accumulator"))
    }
}
