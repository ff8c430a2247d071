//! Emulated floating-point formats.
//!
//! Every value lives in an `f64`. An operation "in precision p" is evaluated
//! in double and the result is rounded to `p` (round to nearest, ties to
//! even, gradual underflow, overflow to infinity). A double result of a
//! single `+ - * / sqrt` on half or single operands is exact enough that the
//! second rounding reproduces the correctly rounded result of the target
//! format.
//!
//! `QuadEmulated` is double-double arithmetic. Scalar operations on `f64`
//! operands return the double nearest to the double-double result; kernels
//! that need the full accuracy (residuals, reference solves) work with
//! [`DoubleDouble`](crate::dd::DoubleDouble) directly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    Half,
    Single,
    Double,
    #[serde(rename = "quad")]
    QuadEmulated,
}

/// Scalar operations accepted by [`fl_op`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlOp {
    Add,
    Sub,
    Mul,
    Div,
    /// Unary; the second operand is ignored.
    Sqrt,
}

const HALF_SIG_BITS: i32 = 11;
const HALF_EMIN: i32 = -14;
const HALF_EMAX: i32 = 15;

impl Precision {
    pub const ALL: [Precision; 4] = [
        Precision::Half,
        Precision::Single,
        Precision::Double,
        Precision::QuadEmulated,
    ];

    pub const fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Half => 4.8828125e-4,                  // 2^-11
            Precision::Single => 5.960464477539063e-8,        // 2^-24
            Precision::Double => 1.1102230246251565e-16,      // 2^-53
            Precision::QuadEmulated => 1.232595164407831e-32, // 2^-106
        }
    }

    pub const fn max_finite(self) -> f64 {
        match self {
            Precision::Half => 65504.0,
            Precision::Single => f32::MAX as f64,
            Precision::Double | Precision::QuadEmulated => f64::MAX,
        }
    }

    pub const fn min_normal(self) -> f64 {
        match self {
            Precision::Half => 6.103515625e-5, // 2^-14
            Precision::Single => f32::MIN_POSITIVE as f64,
            Precision::Double | Precision::QuadEmulated => f64::MIN_POSITIVE,
        }
    }

    /// One-letter name used on the command line.
    pub const fn code(self) -> char {
        match self {
            Precision::Half => 'h',
            Precision::Single => 's',
            Precision::Double => 'd',
            Precision::QuadEmulated => 'q',
        }
    }

    /// True when values of this format can be stored in an `f64` slot
    /// without loss (everything except the emulated quadruple format).
    pub const fn is_storage_format(self) -> bool {
        !matches!(self, Precision::QuadEmulated)
    }

    /// Rounds `x` to this format.
    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::Half => round_to_format(x, HALF_SIG_BITS, HALF_EMIN, HALF_EMAX),
            Precision::Single => x as f32 as f64,
            Precision::Double | Precision::QuadEmulated => x,
        }
    }

    #[inline]
    pub fn add(self, a: f64, b: f64) -> f64 {
        match self {
            Precision::QuadEmulated => (DoubleDouble::from(a) + DoubleDouble::from(b)).to_f64(),
            _ => self.round(a + b),
        }
    }

    #[inline]
    pub fn sub(self, a: f64, b: f64) -> f64 {
        match self {
            Precision::QuadEmulated => (DoubleDouble::from(a) - DoubleDouble::from(b)).to_f64(),
            _ => self.round(a - b),
        }
    }

    #[inline]
    pub fn mul(self, a: f64, b: f64) -> f64 {
        match self {
            Precision::QuadEmulated => DoubleDouble::from_product(a, b).to_f64(),
            _ => self.round(a * b),
        }
    }

    #[inline]
    pub fn div(self, a: f64, b: f64) -> f64 {
        match self {
            Precision::QuadEmulated => (DoubleDouble::from(a) / DoubleDouble::from(b)).to_f64(),
            _ => self.round(a / b),
        }
    }

    /// `sqrt` rounded to this format; NaN for negative input.
    #[inline]
    pub fn sqrt(self, a: f64) -> f64 {
        match self {
            Precision::QuadEmulated => DoubleDouble::from(a).sqrt().to_f64(),
            _ => self.round(a.sqrt()),
        }
    }

    /// `a + b*c` as two rounded operations (no fused multiply-add).
    #[inline]
    pub fn mul_add(self, b: f64, c: f64, a: f64) -> f64 {
        self.add(a, self.mul(b, c))
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Precision::Half => "half",
            Precision::Single => "single",
            Precision::Double => "double",
            Precision::QuadEmulated => "quad",
        };
        f.write_str(name)
    }
}

impl FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h" | "half" => Ok(Precision::Half),
            "s" | "single" => Ok(Precision::Single),
            "d" | "double" => Ok(Precision::Double),
            "q" | "quad" => Ok(Precision::QuadEmulated),
            other => Err(Error::UnknownPrecision(other.to_string())),
        }
    }
}

/// `2^k` for `k` in the normal exponent range of `f64`.
#[inline]
fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

/// Rounds `x` to a binary format with `sig_bits` significand bits
/// (including the implicit bit) and normal exponent range `[emin, emax]`.
///
/// Round-to-nearest-even with subnormals; results beyond the largest finite
/// value become infinities.
pub fn round_to_format(x: f64, sig_bits: i32, emin: i32, emax: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let a = x.abs();
    let biased = ((a.to_bits() >> 52) & 0x7ff) as i32;
    // Subnormal doubles sit far below the subnormal range of any target here.
    let e = if biased == 0 { emin } else { (biased - 1023).max(emin) };
    let shift = sig_bits - 1 - e;
    let r = (a * pow2(shift)).round_ties_even() * pow2(-shift);
    let max_finite = (2.0 - pow2(1 - sig_bits)) * pow2(emax);
    let r = if r > max_finite { f64::INFINITY } else { r };
    r.copysign(x)
}

/// Rounds `x` to `p`; alias kept for readability at call sites.
#[inline]
pub fn round_scalar(x: f64, p: Precision) -> f64 {
    p.round(x)
}

/// One scalar operation evaluated in precision `p`.
///
/// Division by zero follows IEEE semantics; the square root of a negative
/// number is reported as [`Error::Domain`].
pub fn fl_op(op: FlOp, a: f64, b: f64, p: Precision) -> Result<f64> {
    Ok(match op {
        FlOp::Add => p.add(a, b),
        FlOp::Sub => p.sub(a, b),
        FlOp::Mul => p.mul(a, b),
        FlOp::Div => p.div(a, b),
        FlOp::Sqrt => {
            if a < 0.0 {
                return Err(Error::Domain);
            }
            p.sqrt(a)
        }
    })
}

/// Full double-double result of one scalar operation on `f64` operands.
pub fn fl_op_quad(op: FlOp, a: f64, b: f64) -> Result<DoubleDouble> {
    let a = DoubleDouble::from(a);
    let b = DoubleDouble::from(b);
    Ok(match op {
        FlOp::Add => a + b,
        FlOp::Sub => a - b,
        FlOp::Mul => a * b,
        FlOp::Div => a / b,
        FlOp::Sqrt => {
            if a.is_negative() {
                return Err(Error::Domain);
            }
            a.sqrt()
        }
    })
}

/// Rounds every entry of `v` to `p` in place.
pub fn round_slice(v: &mut [f64], p: Precision) {
    if p.is_storage_format() && p != Precision::Double {
        v.iter_mut().for_each(|x| *x = p.round(*x));
    }
}

/// Inner product accumulated left to right in precision `p`.
pub fn dot(x: &[f64], y: &[f64], p: Precision) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    match p {
        Precision::Double => x.iter().zip(y).fold(0.0, |s, (a, b)| s + a * b),
        Precision::QuadEmulated => x
            .iter()
            .zip(y)
            .fold(DoubleDouble::ZERO, |s, (&a, &b)| s + DoubleDouble::from_product(a, b))
            .to_f64(),
        _ => x.iter().zip(y).fold(0.0, |s, (&a, &b)| p.add(s, p.mul(a, b))),
    }
}

/// Euclidean norm computed in precision `p` (no scaling against overflow).
pub fn norm2(x: &[f64], p: Precision) -> f64 {
    p.sqrt(dot(x, x, p))
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}
