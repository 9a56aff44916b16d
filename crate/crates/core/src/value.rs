//! Exact rational values and their literal syntax.
//!
//! Literals accepted everywhere a value is read: an integer (`-3`), a
//! decimal (`1.25`, converted exactly to `5/4`) or a fraction (`1/3`).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serializer;
use thiserror::Error;

/// Variable value. Always held in lowest terms with a positive denominator.
pub type Value = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational literal `{literal}`: {reason}")]
pub struct ValueParseError {
    pub literal: String,
    pub reason: &'static str,
}

fn bad(literal: &str, reason: &'static str) -> ValueParseError {
    ValueParseError {
        literal: literal.to_string(),
        reason,
    }
}

pub fn int(n: i64) -> Value {
    Value::from_integer(BigInt::from(n))
}

pub fn ratio(numer: i64, denom: i64) -> Value {
    Value::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses an integer, decimal or `p/q` literal.
pub fn parse_value(text: &str) -> Result<Value, ValueParseError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(bad(text, "empty literal"));
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_integer(num.trim()).ok_or_else(|| bad(text, "bad numerator"))?;
        let den = parse_integer(den.trim()).ok_or_else(|| bad(text, "bad denominator"))?;
        if den.is_zero() {
            return Err(bad(text, "zero denominator"));
        }
        return Ok(Value::new(num, den));
    }
    let (negative, body) = match s.as_bytes()[0] {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (whole, frac) = match body.split_once('.') {
        Some((w, f)) => (w, f),
        None => (body, ""),
    };
    if whole.is_empty() && frac.is_empty() {
        return Err(bad(text, "no digits"));
    }
    if !whole.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(text, "unexpected character"));
    }
    let digits = format!("{whole}{frac}");
    let numer: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().map_err(|_| bad(text, "bad digits"))?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac.len());
    let v = Value::new(numer, denom);
    Ok(if negative { -v } else { v })
}

fn parse_integer(s: &str) -> Option<BigInt> {
    let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// Canonical `p/q` rendering used in machine-readable output.
pub fn format_ratio(v: &Value) -> String {
    format!("{}/{}", v.numer(), v.denom())
}

/// Compact rendering: integers without a denominator.
pub struct Compact<'a>(pub &'a Value);

impl fmt::Display for Compact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

pub fn abs_diff(a: &Value, b: &Value) -> Value {
    (a - b).abs()
}

pub(crate) fn serialize_value<S: Serializer>(v: &Value, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_ratio(v))
}
