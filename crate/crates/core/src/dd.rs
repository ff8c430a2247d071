//! Double-double arithmetic and the extra-precise kernels built on it.
//!
//! A [`DoubleDouble`] stores `hi + lo` with `|lo| <= ulp(hi)/2`, giving about
//! 106 significant bits. The error-free transformations use Dekker splitting
//! rather than `mul_add`, so results do not depend on hardware FMA support.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    let e = (a - (s - v)) + (b - v);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    // 2^27 + 1
    const SPLITTER: f64 = 134_217_729.0;
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    let e = ((ah * bh - p) + ah * bl + al * bh) + al * bl;
    (p, e)
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn from_product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    /// Nearest double.
    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0)
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.is_negative() {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        let p2 = p2 + self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 {
                Self::ZERO
            } else {
                Self {
                    hi: f64::NAN,
                    lo: f64::NAN,
                }
            };
        }
        // One Newton step on the double approximation (Karp's trick).
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let diff = (self - Self::from_product(ax, ax)).hi;
        Self::from(ax) + Self::from(diff * x * 0.5)
    }
}

impl From<f64> for DoubleDouble {
    #[inline]
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + Self::from(q3)
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl SubAssign for DoubleDouble {
    #[inline]
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

/// `b - A x` with every product and sum carried in double-double, returned
/// in double-double.
pub fn residual_dd(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<DoubleDouble>> {
    if a.ncols() != x.len() || a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "residual of {}x{} matrix with x of length {} and b of length {}",
            a.nrows(),
            a.ncols(),
            x.len(),
            b.len()
        )));
    }
    let mut r: Vec<DoubleDouble> = b.iter().map(|&v| DoubleDouble::from(v)).collect();
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            r[i] -= DoubleDouble::from_product(v, xj);
        }
    }
    Ok(r)
}

/// `b - A x` in double-double, rounded to double at the end.
pub fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    Ok(residual_dd(a, x, b)?.into_iter().map(DoubleDouble::to_f64).collect())
}

/// Dense `b - A x` in double-double.
pub fn residual_dense(a: &DenseMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.ncols() != x.len() || a.nrows() != b.len() {
        return Err(Error::Dimension("dense residual".into()));
    }
    Ok((0..a.nrows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(x)
                .fold(DoubleDouble::from(b[i]), |s, (&v, &xj)| {
                    s - DoubleDouble::from_product(v, xj)
                })
                .to_f64()
        })
        .collect())
}

/// Solves `A x = b` by partial-pivoting LU carried entirely in
/// double-double. Intended for desk-scale reference solutions.
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<DoubleDouble>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension("reference solve needs a square system".into()));
    }
    let mut lu = vec![DoubleDouble::ZERO; n * n];
    for j in 0..n {
        let (rows, vals) = a.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            lu[i * n + j] = DoubleDouble::from(v);
        }
    }
    let mut rhs: Vec<DoubleDouble> = b.iter().map(|&v| DoubleDouble::from(v)).collect();

    for k in 0..n {
        let pivot_row = (k..n)
            .max_by(|&p, &q| {
                lu[p * n + k]
                    .hi
                    .abs()
                    .partial_cmp(&lu[q * n + k].hi.abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // prefer the smallest index among equal magnitudes
                    .then(q.cmp(&p))
            })
            .unwrap();
        if lu[pivot_row * n + k].hi == 0.0 {
            return Err(Error::Singular(format!(" (zero pivot in column {k})")));
        }
        if pivot_row != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot_row * n + j);
            }
            rhs.swap(k, pivot_row);
        }
        let (head, tail) = lu.split_at_mut((k + 1) * n);
        let pivot_row_vals = &head[k * n..(k + 1) * n];
        let pivot = pivot_row_vals[k];
        let rhs_k = rhs[k];
        let mults: Vec<DoubleDouble> = tail
            .par_chunks_mut(n)
            .map(|row| {
                let l = row[k] / pivot;
                row[k] = l;
                if l.hi != 0.0 {
                    for j in k + 1..n {
                        row[j] -= l * pivot_row_vals[j];
                    }
                }
                l
            })
            .collect();
        for (off, l) in mults.into_iter().enumerate() {
            if l.hi != 0.0 {
                rhs[k + 1 + off] -= l * rhs_k;
            }
        }
    }

    let mut x = vec![DoubleDouble::ZERO; n];
    for i in (0..n).rev() {
        let row = &lu[i * n..(i + 1) * n];
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= row[j] * x[j];
        }
        x[i] = s / row[i];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_are_exact() {
        let a = 1.0 + 2f64.powi(-30);
        let p = DoubleDouble::from_product(a, a);
        assert_eq!(p.hi, 1.0 + 2f64.powi(-29));
        assert_eq!(p.lo, 2f64.powi(-60));
    }

    #[test]
    fn division_and_sqrt_accuracy() {
        let third = DoubleDouble::ONE / DoubleDouble::from(3.0);
        let err = (third * DoubleDouble::from(3.0) - DoubleDouble::ONE).to_f64();
        assert!(err.abs() < 1e-31);
        let r = DoubleDouble::from(2.0).sqrt();
        let err = (r * r - DoubleDouble::from(2.0)).to_f64();
        assert!(err.abs() < 1e-31);
    }

    #[test]
    fn identity_residual_cancels() {
        let eye = SparseMatrix::identity(4);
        let x = [1.0, -2.5, 3.25, 1e-3];
        assert_eq!(residual(&eye, &x, &x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn diagonal_solve() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 4.0)]).unwrap();
        let x = solve(&a, &[2.0, 4.0]).unwrap();
        assert_eq!(x[0].to_f64(), 1.0);
        assert_eq!(x[1].to_f64(), 1.0);
    }

    #[test]
    fn singular_solve_is_reported() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        assert!(matches!(solve(&a, &[1.0, 1.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn reference_solution_residual_is_tiny() {
        // Hilbert-like 6x6 system; residual of the dd solution must sit far
        // below double roundoff.
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push((i, j, 1.0 / (i + j + 1) as f64));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let b = vec![1.0; n];
        let x = solve(&a, &b).unwrap();
        // residual with x in dd: r = b - A(x.hi) - A(x.lo)
        let hi: Vec<f64> = x.iter().map(|v| v.hi).collect();
        let lo: Vec<f64> = x.iter().map(|v| v.lo).collect();
        let r1 = residual_dd(&a, &hi, &b).unwrap();
        let zero = vec![0.0; n];
        let r2 = residual_dd(&a, &lo, &zero).unwrap();
        let xnorm = hi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rnorm = r1
            .iter()
            .zip(&r2)
            .map(|(p, q)| (*p + *q).to_f64().abs())
            .fold(0.0, f64::max);
        assert!(rnorm <= 2f64.powi(-100) * a.norm_inf() * xnorm, "{rnorm}");
    }

    #[test]
    fn residual_is_reproducible() {
        let a = crate::gallery::random_diag_dominant(30, 0.2, 7);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let r1 = residual(&a, &x, &b).unwrap();
        let r2 = residual(&a, &x, &b).unwrap();
        assert!(r1.iter().zip(&r2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
