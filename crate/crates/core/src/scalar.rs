//! Numeric abstraction shared by the exact (rational) and floating-point code paths.
//!
//! Textbook examples have rational payoffs and rational event times, so the
//! game model, path algebra, LCP enumeration and synthesis are generic over
//! [`Scalar`]. Sampled and discretized data stays in `f64`.

use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Arbitrary-precision rational number.
pub type Rational = BigRational;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Zero
    + One
    + Neg<Output = Self>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// True when arithmetic is exact and equality comparisons are meaningful.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Exact conversion for `Rational`; nearest value for `f64`.
    fn from_f64(v: f64) -> Self;
    fn from_rational(v: &Rational) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;

    /// Zero test used for active-set bookkeeping. Exact for rationals.
    fn is_negligible(&self) -> bool;

    /// Parses `"3"`, `"-1.25"`, `"10/7"`.
    fn parse(text: &str) -> Option<Self>;

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

/// Absolute tolerance used by `f64` zero tests.
pub const F64_ZERO_TOL: f64 = 1e-12;

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn from_rational(v: &Rational) -> Self {
        rational_to_f64(v)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn is_negligible(&self) -> bool {
        f64::abs(*self) <= F64_ZERO_TOL
    }

    fn parse(text: &str) -> Option<Self> {
        parse_rational(text).map(|r| rational_to_f64(&r))
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Ratio::from_integer(BigInt::from(v))
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).unwrap_or_else(Zero::zero)
    }

    fn from_rational(v: &Rational) -> Self {
        v.clone()
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn is_negligible(&self) -> bool {
        self.is_zero()
    }

    fn parse(text: &str) -> Option<Self> {
        parse_rational(text)
    }
}

pub fn rational_to_f64(v: &Rational) -> f64 {
    if let Some(x) = ToPrimitive::to_f64(v) {
        if x.is_finite() {
            return x;
        }
    }
    // Huge numerators/denominators: shift both down before dividing.
    let n = v.numer();
    let d = v.denom();
    let shift = n.bits().max(d.bits()).saturating_sub(1000);
    let n = (n >> shift).to_f64().unwrap_or(0.0);
    let d = (d >> shift).to_f64().unwrap_or(1.0);
    n / d
}

/// Parses an integer, a decimal (`-0.125`, `1e-3`) or a fraction (`47/8`) exactly.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((num, den)) = text.split_once('/') {
        let num = parse_rational(num)?;
        let den = parse_rational(den)?;
        if den.is_zero() {
            return None;
        }
        return Some(num / den);
    }
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(pos) => (&text[..pos], i32::from_str(&text[pos + 1..]).ok()?),
        None => (text, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all_digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(if all_digits.is_empty() { "0" } else { &all_digits }).ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = Ratio::from_integer(numer);
    if scale >= 0 {
        value *= Ratio::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Ratio::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if negative { -value } else { value })
}

/// Closest rational with denominator at most `max_den` (continued fractions).
pub fn approximate_rational(x: f64, max_den: i64) -> Option<Rational> {
    if !x.is_finite() {
        return None;
    }
    let r = Ratio::<i64>::approximate_float(x)?;
    if *r.denom() <= max_den {
        return Some(Ratio::new(BigInt::from(*r.numer()), BigInt::from(*r.denom())));
    }
    // Walk the convergents ourselves and stop at the denominator budget.
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = rem - a;
        if frac.abs() < 1e-18 {
            break;
        }
        rem = 1.0 / frac;
    }
    if k1 == 0 {
        return None;
    }
    Some(Ratio::new(BigInt::from(h1), BigInt::from(k1)))
}

/// Formats a rational as a JSON-friendly token: integers bare, others `p/q`.
pub fn format_rational(v: &Rational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

pub fn to_f64_vec<S: Scalar>(v: &[S]) -> Vec<f64> {
    v.iter().map(Scalar::to_f64).collect()
}

pub fn convert_vec<S: Scalar, T: Scalar>(v: &[S]) -> Vec<T> {
    v.iter().map(|x| convert::<S, T>(x)).collect()
}

/// Converts between scalar types, going through `Rational` when the source is exact.
pub fn convert<S: Scalar, T: Scalar>(x: &S) -> T {
    if S::EXACT {
        // Display of an exact scalar is its exact `p/q` form.
        match parse_rational(&x.to_string()) {
            Some(r) => T::from_rational(&r),
            None => T::from_f64(x.to_f64()),
        }
    } else {
        T::from_f64(x.to_f64())
    }
}

pub fn sum<S: Scalar>(items: impl IntoIterator<Item = S>) -> S {
    items.into_iter().fold(S::zero(), |acc, x| acc + x)
}

pub fn max_abs<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |acc, x| S::max_of(acc, x.abs()))
}
