// Dense LU baseline: RCM reordering, partial pivoting in u_f, and the
// equilibrate-then-shift-into-range fallback for half-precision overflow.

use serde::{Deserialize, Serialize};

use super::rcm::reverse_cuthill_mckee;
use crate::dense::{DenseMatrix, LuFactors};
use crate::error::{Error, Result};
use crate::krylov::Preconditioner;
use crate::precision::Precision;
use crate::sparse::SparseMatrix;

/// Fraction of the largest finite value that the largest scaled entry is
/// moved to when the fallback is active.
const RANGE_FRACTION: f64 = 0.1;

/// `Pi A = L U` of the dense copy of `A` with every operation in `uf`.
pub fn dense_lu(a: &SparseMatrix, uf: Precision) -> Result<LuFactors> {
    if !a.is_square() {
        return Err(Error::Dimension("LU of a non-square matrix".into()));
    }
    LuFactors::new(&a.to_dense(), uf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LuScaling {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub mu: f64,
}

/// LU factors of `mu * R A C` reordered symmetrically, used as `A^{-1}`.
#[derive(Clone, Debug)]
pub struct LuPreconditioner {
    factors: LuFactors,
    /// `order[new] = old`.
    order: Vec<usize>,
    scaling: Option<LuScaling>,
}

// Row then column max-norm equilibration, so every row and column has
// largest magnitude one.
fn equilibrate(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    let row: Vec<f64> = (0..n)
        .map(|i| {
            let m = a.row(i).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        })
        .collect();
    let mut b = a.clone();
    for i in 0..n {
        b.row_mut(i).iter_mut().for_each(|v| *v *= row[i]);
    }
    let mut col = vec![0.0_f64; n];
    for i in 0..n {
        for (c, v) in col.iter_mut().zip(b.row(i)) {
            *c = c.max(v.abs());
        }
    }
    col.iter_mut().for_each(|c| *c = if *c > 0.0 { 1.0 / *c } else { 1.0 });
    for i in 0..n {
        b.row_mut(i).iter_mut().zip(&col).for_each(|(v, c)| *v *= c);
    }
    (b, row, col)
}

impl LuPreconditioner {
    pub fn new(a: &SparseMatrix, uf: Precision) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension("LU of a non-square matrix".into()));
        }
        let order = reverse_cuthill_mckee(a);
        let dense = a.to_dense();
        let n = dense.nrows();
        let mut reordered = DenseMatrix::zeros(n, n);
        for (r, &or) in order.iter().enumerate() {
            for (c, &oc) in order.iter().enumerate() {
                reordered[(r, c)] = dense[(or, oc)];
            }
        }
        match LuFactors::new(&reordered, uf) {
            Ok(factors) => Ok(Self {
                factors,
                order,
                scaling: None,
            }),
            Err(Error::Overflow { .. }) => {
                let (b, row, col) = equilibrate(&reordered);
                let mu = RANGE_FRACTION * uf.max_finite();
                let shifted = b.map(|v| v * mu);
                let factors = LuFactors::new(&shifted, uf)
                    .map_err(|e| Error::Preconditioner(format!("LU in {uf} after equilibration: {e}")))?;
                Ok(Self {
                    factors,
                    order,
                    scaling: Some(LuScaling { row, col, mu }),
                })
            }
            Err(e) => Err(Error::Preconditioner(format!("LU in {uf}: {e}"))),
        }
    }

    pub fn factors(&self) -> &LuFactors {
        &self.factors
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn scaling(&self) -> Option<&LuScaling> {
        self.scaling.as_ref()
    }

    pub fn nnz_l_plus_u(&self) -> usize {
        self.factors.nnz_l_plus_u()
    }
}

impl Preconditioner for LuPreconditioner {
    fn dim(&self) -> usize {
        self.order.len()
    }

    // With B = mu R A' C the factored matrix, A'^{-1} = mu C B^{-1} R.
    fn apply(&self, w: &[f64], p: Precision) -> Result<Vec<f64>> {
        let n = self.dim();
        if w.len() != n {
            return Err(Error::Dimension("LU preconditioner".into()));
        }
        let mut y: Vec<f64> = self.order.iter().map(|&o| p.round(w[o])).collect();
        if let Some(s) = &self.scaling {
            y.iter_mut().zip(&s.row).for_each(|(v, r)| *v = p.mul(*v, p.round(*r)));
        }
        let mut z = self.factors.solve_in(&y, p)?;
        if let Some(s) = &self.scaling {
            let mu = p.round(s.mu);
            z.iter_mut()
                .zip(&s.col)
                .for_each(|(v, c)| *v = p.mul(p.mul(*v, p.round(*c)), mu));
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.order.iter().enumerate() {
            x[old] = z[new];
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::overflow(format!("LU preconditioner in {p}")));
        }
        Ok(x)
    }

    fn nnz(&self) -> usize {
        self.nnz_l_plus_u()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;

    #[test]
    fn identity_factors() {
        let f = dense_lu(&SparseMatrix::identity(4), Precision::Half).unwrap();
        assert_eq!(f.lower(), DenseMatrix::identity(4));
        assert_eq!(f.upper(), DenseMatrix::identity(4));
        assert_eq!(f.perm(), &[0, 1, 2, 3]);
    }

    #[test]
    fn swap_needs_one_row_exchange() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let f = dense_lu(&a, Precision::Single).unwrap();
        assert_eq!(f.perm(), &[1, 0]);
        assert_eq!(f.lower(), DenseMatrix::identity(2));
        assert_eq!(f.upper(), DenseMatrix::identity(2));
    }

    #[test]
    fn preconditioner_inverts_in_double() {
        let a = gallery::random_diag_dominant(25, 0.2, 5);
        let lu = LuPreconditioner::new(&a, Precision::Double).unwrap();
        assert!(lu.scaling().is_none());
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec(&x, Precision::Double).unwrap();
        let got = lu.apply(&b, Precision::Double).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn half_overflow_triggers_scaling_fallback() {
        let a = gallery::tridiagonal(12, -3.0e4, 1.0e5, -2.0e4);
        let lu = LuPreconditioner::new(&a, Precision::Half).unwrap();
        let s = lu.scaling().expect("fallback");
        assert_eq!(s.mu, 0.1 * 65504.0);
        let x = vec![1.0; 12];
        let b = a.matvec(&x, Precision::Double).unwrap();
        let got = lu.apply(&b, Precision::Double).unwrap();
        for g in got {
            assert!((g - 1.0).abs() < 1e-2, "{g}");
        }
    }
}
