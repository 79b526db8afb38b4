use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::PixelType;

/// A value in the internal arithmetic domain: 64-bit integers or doubles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
}

impl Value {
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Int(i) => i as f64,
            Value::Real(r) => r,
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Value::Real(_))
    }

    pub fn is_truthy(self) -> bool {
        match self {
            Value::Int(i) => i != 0,
            Value::Real(r) => r != 0.0,
        }
    }

    /// Bit-level identity: distinguishes `-0.0` from `0.0` and treats equal NaN payloads as equal.
    pub fn bit_eq(self, other: Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Real(a), Value::Real(b)) => a.to_bits() == b.to_bits(),
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
        }
    }
}

/// Overflow policy of an explicit cast.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overflow {
    Saturate,
    Wrap,
}

impl Overflow {
    pub fn keyword(self) -> &'static str {
        match self {
            Overflow::Saturate => "sat",
            Overflow::Wrap => "wrap",
        }
    }
}

/// Real-to-integer rounding used by every cast: nearest, ties away from zero. NaN maps to 0.
pub fn round_real(r: f64) -> f64 {
    if r.is_nan() {
        0.0
    } else {
        r.round()
    }
}

fn wrap_bits(v: i64, t: PixelType) -> i64 {
    match t {
        PixelType::U8 => v as u8 as i64,
        PixelType::U16 => v as u16 as i64,
        PixelType::S16 => v as i16 as i64,
        PixelType::S32 => v as i32 as i64,
        PixelType::U32 => v as u32 as i64,
        PixelType::F32 => unreachable!("float has no wrap semantics"),
    }
}

/// Converts `v` into the value domain of `target`.
///
/// Integer targets: reals are rounded first, then clamped (`Saturate`) or reduced
/// modulo 2^bits (`Wrap`). `F32` targets round to single precision regardless of policy.
pub fn cast_value(v: Value, target: PixelType, policy: Overflow) -> Value {
    if target == PixelType::F32 {
        return match v {
            Value::Int(i) => Value::Real(i as f32 as f64),
            Value::Real(r) => Value::Real(r as f32 as f64),
        };
    }
    let (lo, hi) = target.int_range().expect("integer target");
    match (v, policy) {
        (Value::Int(i), Overflow::Saturate) => Value::Int(i.clamp(lo, hi)),
        (Value::Int(i), Overflow::Wrap) => Value::Int(wrap_bits(i, target)),
        (Value::Real(r), Overflow::Saturate) => {
            let r = round_real(r).clamp(lo as f64, hi as f64);
            Value::Int(r as i64)
        }
        (Value::Real(r), Overflow::Wrap) => Value::Int(wrap_bits(round_real(r) as i64, target)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturating_cast_clamps() {
        assert_eq!(cast_value(Value::Int(300), PixelType::U8, Overflow::Saturate), Value::Int(255));
        assert_eq!(cast_value(Value::Int(-4), PixelType::U8, Overflow::Saturate), Value::Int(0));
        assert_eq!(
            cast_value(Value::Int(40_000), PixelType::S16, Overflow::Saturate),
            Value::Int(32_767)
        );
    }

    #[test]
    fn wrapping_cast_truncates() {
        assert_eq!(cast_value(Value::Int(300), PixelType::U8, Overflow::Wrap), Value::Int(44));
        assert_eq!(cast_value(Value::Int(-1), PixelType::U8, Overflow::Wrap), Value::Int(255));
        assert_eq!(
            cast_value(Value::Int(32_768), PixelType::S16, Overflow::Wrap),
            Value::Int(-32_768)
        );
    }

    #[test]
    fn real_casts_round_half_away() {
        assert_eq!(cast_value(Value::Real(2.5), PixelType::U8, Overflow::Saturate), Value::Int(3));
        assert_eq!(cast_value(Value::Real(-2.5), PixelType::S16, Overflow::Saturate), Value::Int(-3));
        assert_eq!(cast_value(Value::Real(f64::NAN), PixelType::U8, Overflow::Saturate), Value::Int(0));
        assert_eq!(cast_value(Value::Real(1e30), PixelType::S32, Overflow::Saturate), Value::Int(i32::MAX as i64));
    }

    #[test]
    fn float_cast_rounds_to_single() {
        let v = cast_value(Value::Real(0.1), PixelType::F32, Overflow::Saturate);
        assert_eq!(v, Value::Real(0.1f32 as f64));
    }
}
