//! Scalar plumbing shared by the exact and floating-point code paths.

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

/// A commutative ring of weights: `f64` for float-mode profiles and
/// [`BigRational`] for exactly ingested ones.
pub trait Weight:
    Clone
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Send
    + Sync
    + std::fmt::Debug
{
    fn from_bigint(value: &BigInt) -> Self;
    fn powu(&self, exp: u32) -> Self;
    fn to_f64(&self) -> f64;

    fn from_u64(value: u64) -> Self {
        Self::from_bigint(&BigInt::from(value))
    }
}

impl Weight for f64 {
    fn from_bigint(value: &BigInt) -> Self {
        value.to_f64().unwrap_or(f64::INFINITY)
    }

    fn powu(&self, exp: u32) -> Self {
        self.powi(exp as i32)
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Weight for BigRational {
    fn from_bigint(value: &BigInt) -> Self {
        BigRational::from_integer(value.clone())
    }

    fn powu(&self, exp: u32) -> Self {
        num_traits::Pow::pow(self, exp)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// A moment computed either exactly or in floating point, following the
/// exactness of the input profile.
#[derive(Debug, Clone, PartialEq)]
pub enum MomentValue {
    Exact(BigRational),
    Float(f64),
}

impl MomentValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            MomentValue::Exact(r) => Weight::to_f64(r),
            MomentValue::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, MomentValue::Exact(_))
    }

    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            MomentValue::Exact(r) => Some(r),
            MomentValue::Float(_) => None,
        }
    }

    /// Exact difference when both sides are exact, float otherwise.
    pub fn difference(&self, other: &MomentValue) -> MomentValue {
        match (self, other) {
            (MomentValue::Exact(a), MomentValue::Exact(b)) => MomentValue::Exact(a - b),
            _ => MomentValue::Float(self.to_f64() - other.to_f64()),
        }
    }

    /// Equality: exact when both sides are exact, else within `rtol` relative.
    pub fn agrees_with(&self, other: &MomentValue, rtol: f64) -> bool {
        match (self, other) {
            (MomentValue::Exact(a), MomentValue::Exact(b)) => a == b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                (a - b).abs() <= rtol * a.abs().max(b.abs())
            }
        }
    }
}

impl std::fmt::Display for MomentValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MomentValue::Exact(r) => write!(f, "{r}"),
            MomentValue::Float(x) => write!(f, "{x:?}"),
        }
    }
}

/// Exact values serialize as strings so no digits are lost.
impl serde::Serialize for MomentValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MomentValue::Exact(r) => s.serialize_str(&r.to_string()),
            MomentValue::Float(x) => s.serialize_f64(*x),
        }
    }
}

/// Neumaier-compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn csum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// `(sum_i x_i^q)^(1/q)` for nonnegative `x`, scaled by the maximum to avoid
/// overflow at large `q`.
pub fn lq_norm(values: &[f64], q: f64) -> f64 {
    let max = values.iter().copied().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let scaled = csum(values.iter().map(|&x| (x / max).powf(q)));
    max * scaled.powf(1.0 / q)
}

/// `(r - 1)!!` for even `r`, zero for odd `r`: the `r`-th standard Gaussian moment.
pub fn gaussian_moment(r: u32) -> BigInt {
    if r % 2 == 1 {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    let mut k = 1u32;
    while k < r {
        acc *= k;
        k += 2;
    }
    acc
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * k)
}
