//! Row-major dense matrices and partial-pivoting LU.
//!
//! The LU kernel takes a [`Precision`]: every multiply, subtract and divide
//! is rounded to that format. With `Precision::Double` it is ordinary
//! floating-point LU.

use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::precision::Precision;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dense matvec dimension mismatch");
        (0..self.nrows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.ncols != other.nrows {
            return Err(Error::Dimension("dense matmul".into()));
        }
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        let oc = other.ncols;
        out.data.par_chunks_mut(oc.max(1)).enumerate().for_each(|(i, out_row)| {
            for (k, &a) in self.row(i).iter().enumerate() {
                if a != 0.0 {
                    for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            }
        });
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::Dimension("dense subtraction".into()));
        }
        Ok(DenseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.ncols + j]
    }
}

/// Packed `PA = LU` factors: unit lower triangle of `L` below the diagonal,
/// `U` on and above it. `perm[i]` is the original row placed at position `i`.
#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: DenseMatrix,
    perm: Vec<usize>,
    precision: Precision,
}

impl LuFactors {
    /// Factorises `a` with every operation rounded to `p`. The input is
    /// rounded to `p` first.
    pub fn new(a: &DenseMatrix, p: Precision) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("LU of a non-square matrix".into()));
        }
        let mut lu = a.map(|v| p.round(v));
        if !lu.is_finite() {
            return Err(Error::overflow(format!("LU input rounded to {p}")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[(k, k)].abs();
            for i in k + 1..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular(format!(" in {p} (zero pivot at step {k})")));
            }
            if piv != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let (head, tail) = lu.data.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let pivot = pivot_row[k];
            tail.par_chunks_mut(n).for_each(|row| {
                let l = p.div(row[k], pivot);
                row[k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        row[j] = p.sub(row[j], p.mul(l, pivot_row[j]));
                    }
                }
            });
        }
        if !lu.is_finite() {
            return Err(Error::overflow(format!("LU factorization in {p}")));
        }
        Ok(Self { lu, perm, precision: p })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn packed(&self) -> &DenseMatrix {
        &self.lu
    }

    pub fn lower(&self) -> DenseMatrix {
        let n = self.dim();
        let mut l = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> DenseMatrix {
        let n = self.dim();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    /// Nonzeros of `L + U` with the unit diagonal of `L` not counted twice.
    pub fn nnz_l_plus_u(&self) -> usize {
        self.lu.data.iter().filter(|v| **v != 0.0).count()
    }

    /// Solves `A x = b` with forward and back substitution rounded to `p`.
    pub fn solve_in(&self, b: &[f64], p: Precision) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension("LU solve".into()));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&i| p.round(b[i])).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let mut s = y[i];
            for j in 0..i {
                if row[j] != 0.0 {
                    s = p.sub(s, p.mul(p.round(row[j]), y[j]));
                }
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = y[i];
            for j in i + 1..n {
                if row[j] != 0.0 {
                    s = p.sub(s, p.mul(p.round(row[j]), y[j]));
                }
            }
            y[i] = p.div(s, p.round(row[i]));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::overflow(format!("triangular solves in {p}")));
        }
        Ok(y)
    }

    /// Solves in the precision used for the factorisation.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_in(b, self.precision)
    }

    /// Dense inverse, one column solve at a time.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        let n = self.dim();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.solve(&e)
            })
            .collect::<Result<_>>()?;
        let mut inv = DenseMatrix::zeros(n, n);
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n {
                inv[(i, j)] = c[i];
            }
        }
        Ok(inv)
    }
}

/// Dense inverse in double precision.
pub fn inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    LuFactors::new(a, Precision::Double)?.inverse()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn permuted_product(f: &LuFactors, a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
        let n = a.nrows();
        let mut pa = DenseMatrix::zeros(n, n);
        for (i, &src) in f.perm().iter().enumerate() {
            pa.row_mut(i).copy_from_slice(a.row(src));
        }
        (pa, f.lower().matmul(&f.upper()).unwrap())
    }

    #[test]
    fn identity_factors() {
        let f = LuFactors::new(&DenseMatrix::identity(3), Precision::Double).unwrap();
        assert_eq!(f.lower(), DenseMatrix::identity(3));
        assert_eq!(f.upper(), DenseMatrix::identity(3));
        assert_eq!(f.perm(), &[0, 1, 2]);
    }

    #[test]
    fn swap_matrix_needs_one_row_exchange() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = LuFactors::new(&a, Precision::Double).unwrap();
        assert_eq!(f.perm(), &[1, 0]);
        assert_eq!(f.lower(), DenseMatrix::identity(2));
        assert_eq!(f.upper(), DenseMatrix::identity(2));
    }

    #[test]
    fn singular_is_detected() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(LuFactors::new(&a, Precision::Double), Err(Error::Singular(_))));
    }

    #[test]
    fn reconstruction_bound_for_diagonally_dominant() {
        let a = crate::gallery::random_diag_dominant(8, 0.6, 3).to_dense();
        let f = LuFactors::new(&a, Precision::Double).unwrap();
        let (pa, lu) = permuted_product(&f, &a);
        let n = 8.0;
        let err = pa.sub(&lu).unwrap().norm_inf();
        assert!(err <= n * n * n * 2f64.powi(-53) * a.norm_inf(), "{err}");
    }

    #[test]
    fn half_factors_are_half_values() {
        let a = crate::gallery::random_diag_dominant(8, 0.6, 5).to_dense();
        let f = LuFactors::new(&a, Precision::Half).unwrap();
        assert!(f.packed().as_slice().iter().all(|&v| Precision::Half.round(v) == v));
        let (pa, lu) = permuted_product(&f, &a);
        let err = pa.sub(&lu).unwrap().norm_inf();
        assert!(err <= 8.0 * 8.0 * Precision::Half.unit_roundoff() * a.norm_inf() * 4.0);
    }

    #[test]
    fn half_overflow_is_reported() {
        let a = DenseMatrix::from_rows(&[vec![1e5, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            LuFactors::new(&a, Precision::Half),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn inverse_matches_nalgebra() {
        let a = crate::gallery::random_diag_dominant(12, 0.4, 11).to_dense();
        let inv = inverse(&a).unwrap();
        let na = nalgebra::DMatrix::from_row_slice(12, 12, a.as_slice());
        let ninv = na.try_inverse().unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!((inv[(i, j)] - ninv[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
