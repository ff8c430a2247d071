// Householder least squares with every operation rounded to a chosen
// precision.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::precision::{dot, norm2, Precision};

/// Solution of one reduced SPAI least-squares problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSolve {
    /// Minimiser `mbar` of `||abar * mbar - ebar||_2`.
    pub mbar: Vec<f64>,
    /// Residual `abar * mbar - ebar`, recomputed explicitly.
    pub sbar: Vec<f64>,
    /// `||sbar||_2` evaluated in the working precision.
    pub resnorm: f64,
}

/// Solves `min ||abar m - ebar||_2` by Householder QR in precision `uf`,
/// then forms `sbar = abar m - ebar` in `uf`.
///
/// A column whose remaining norm (or triangular diagonal) rounds to zero is
/// reported as [`Error::RankDeficient`].
pub fn solve_column_ls(abar: &DenseMatrix, ebar: &[f64], uf: Precision) -> Result<ColumnSolve> {
    let (m, q) = (abar.nrows(), abar.ncols());
    if ebar.len() != m {
        return Err(Error::Dimension("least-squares right-hand side".into()));
    }
    if q > m {
        return Err(Error::RankDeficient { column: m });
    }
    let a = abar.map(|v| uf.round(v));
    let e: Vec<f64> = ebar.iter().map(|&v| uf.round(v)).collect();

    // Work column-major: the reflections sweep down columns.
    let mut cols: Vec<Vec<f64>> = (0..q).map(|j| a.column(j)).collect();
    let mut rhs = e.clone();
    let mut v = vec![0.0; m];

    for c in 0..q {
        let norm = norm2(&cols[c][c..], uf);
        if norm == 0.0 {
            return Err(Error::RankDeficient { column: c });
        }
        if !norm.is_finite() {
            return Err(Error::overflow(format!("Householder norm in {uf}")));
        }
        let x0 = cols[c][c];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let vlen = m - c;
        v[..vlen].copy_from_slice(&cols[c][c..]);
        v[0] = uf.sub(x0, alpha);
        let vtv = dot(&v[..vlen], &v[..vlen], uf);
        if vtv == 0.0 || !vtv.is_finite() {
            return Err(Error::RankDeficient { column: c });
        }
        let reflect = |target: &mut [f64]| {
            let w = dot(&v[..vlen], target, uf);
            if w != 0.0 {
                let f = uf.div(uf.mul(2.0, w), vtv);
                for (t, &vi) in target.iter_mut().zip(&v[..vlen]) {
                    *t = uf.sub(*t, uf.mul(f, vi));
                }
            }
        };
        for col in cols.iter_mut().skip(c + 1) {
            reflect(&mut col[c..]);
        }
        reflect(&mut rhs[c..]);
        cols[c][c] = alpha;
        cols[c][c + 1..].iter_mut().for_each(|x| *x = 0.0);
    }

    let mut mbar = vec![0.0; q];
    for c in (0..q).rev() {
        let mut s = rhs[c];
        for j in c + 1..q {
            s = uf.sub(s, uf.mul(cols[j][c], mbar[j]));
        }
        if cols[c][c] == 0.0 {
            return Err(Error::RankDeficient { column: c });
        }
        mbar[c] = uf.div(s, cols[c][c]);
    }

    let sbar: Vec<f64> = (0..m)
        .map(|i| {
            let acc = a
                .row(i)
                .iter()
                .zip(&mbar)
                .fold(0.0, |s, (&aij, &mj)| uf.add(s, uf.mul(aij, mj)));
            uf.sub(acc, e[i])
        })
        .collect();
    let resnorm = norm2(&sbar, uf);
    Ok(ColumnSolve { mbar, sbar, resnorm })
}

/// Normal equations solved in double-double: an extended-precision route
/// independent of the Householder path.
#[cfg(test)]
pub(crate) fn dd_normal_equations(a: &DenseMatrix, e: &[f64]) -> Vec<f64> {
    use crate::dd::DoubleDouble;
    let q = a.ncols();
    let mut g = vec![vec![DoubleDouble::ZERO; q + 1]; q];
    for r in 0..q {
        for c in 0..q {
            g[r][c] = (0..a.nrows()).fold(DoubleDouble::ZERO, |s, i| {
                s + DoubleDouble::from_product(a[(i, r)], a[(i, c)])
            });
        }
        g[r][q] = (0..a.nrows()).fold(DoubleDouble::ZERO, |s, i| {
            s + DoubleDouble::from_product(a[(i, r)], e[i])
        });
    }
    for k in 0..q {
        for r in k + 1..q {
            let l = g[r][k] / g[k][k];
            for c in k..=q {
                let t = l * g[k][c];
                g[r][c] -= t;
            }
        }
    }
    let mut x = vec![DoubleDouble::ZERO; q];
    for r in (0..q).rev() {
        let mut s = g[r][q];
        for c in r + 1..q {
            s -= g[r][c] * x[c];
        }
        x[r] = s / g[r][r];
    }
    x.into_iter().map(DoubleDouble::to_f64).collect()
}

#[cfg(test)]
pub(crate) fn cond2(a: &DenseMatrix) -> f64 {
    let na = nalgebra::DMatrix::from_row_slice(a.nrows(), a.ncols(), a.as_slice());
    let sv = na.singular_values();
    sv.max() / sv.min()
}
