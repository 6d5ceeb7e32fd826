//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Everything downstream of scenario construction is generic over [`Scalar`],
//! so the same code path runs in floating point (`f64`, `f32`) and in exact
//! rational arithmetic ([`Rational`]).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational used by exact mode.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact (no rounding).
    const EXACT: bool;

    /// Magnitude below which pivots and reduced costs count as zero.
    fn pivot_tolerance() -> Self;

    /// Default tolerance for probability validation (`ε_prob`).
    fn prob_tolerance() -> Self;

    /// Parses a decimal (`"0.25"`, `"1e-3"`) or a ratio (`"3/4"`).
    fn parse_str(s: &str) -> Option<Self>;

    /// JSON rendering: a number for floats, a `"p/q"` string for rationals.
    fn to_json(&self) -> serde_json::Value;

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite value")
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits in scalar")
    }

    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

fn split_ratio(s: &str) -> Option<(&str, &str)> {
    let mut parts = s.splitn(2, '/');
    let num = parts.next()?;
    parts.next().map(|den| (num.trim(), den.trim()))
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn pivot_tolerance() -> Self {
        1e-9
    }

    fn prob_tolerance() -> Self {
        1e-9
    }

    fn parse_str(s: &str) -> Option<Self> {
        let s = s.trim();
        let value = match split_ratio(s) {
            Some((n, d)) => n.parse::<f64>().ok()? / d.parse::<f64>().ok()?,
            None => s.parse::<f64>().ok()?,
        };
        value.is_finite().then_some(value)
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self)
            .map(serde_json::Value::Number)
            .unwrap_or(serde_json::Value::Null)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn pivot_tolerance() -> Self {
        1e-5
    }

    fn prob_tolerance() -> Self {
        1e-5
    }

    fn parse_str(s: &str) -> Option<Self> {
        f64::parse_str(s).map(|v| v as f32)
    }

    fn to_json(&self) -> serde_json::Value {
        (*self as f64).to_json()
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn pivot_tolerance() -> Self {
        Rational::zero()
    }

    fn prob_tolerance() -> Self {
        Rational::zero()
    }

    fn parse_str(s: &str) -> Option<Self> {
        let s = s.trim();
        match split_ratio(s) {
            Some((n, d)) => {
                let den = parse_decimal(d)?;
                if den.is_zero() {
                    return None;
                }
                Some(parse_decimal(n)? / den)
            }
            None => parse_decimal(s),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_string())
    }
}

/// Exact parse of a decimal literal with optional sign, fraction and exponent.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let s = s.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer = BigInt::parse_bytes(all_digits.as_bytes(), 10)?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10u8);
    let mut value = Rational::from_integer(numer);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Lossless conversion of a float vector into rationals.
pub fn to_exact(values: &[f64]) -> Vec<Rational> {
    values
        .iter()
        .map(|v| Rational::from_float(*v).expect("finite value"))
        .collect()
}

/// Sum of a slice.
pub fn sum<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, v| acc + v.clone())
}
