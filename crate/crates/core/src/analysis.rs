//! Dense condition numbers and the SPAI quality bounds.

use serde::{Deserialize, Serialize};

use crate::dense::{inverse, DenseMatrix};
use crate::error::{Error, Result};
use crate::spai::{SpaiParams, SpaiPreconditioner};
use crate::sparse::SparseMatrix;

/// `||A^{-1}||_inf ||A||_inf` for a dense matrix.
pub fn kappa_inf_dense(a: &DenseMatrix) -> Result<f64> {
    Ok(inverse(a)?.norm_inf() * a.norm_inf())
}

/// `||A^{-1}||_inf ||A||_inf` via a dense inverse in double.
pub fn kappa_inf(a: &SparseMatrix) -> Result<f64> {
    kappa_inf_dense(&a.to_dense())
}

const POWER_MAX_ITERS: usize = 500;
const POWER_RTOL: f64 = 1e-6;

/// Largest singular value of `c` by power iteration on `c^T c` started from
/// the ones vector.
pub fn norm2_power(c: &DenseMatrix) -> f64 {
    let mut v = vec![1.0 / (c.ncols() as f64).sqrt(); c.ncols()];
    let ct = c.transpose();
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = c.matvec(&v);
        let z = ct.matvec(&w);
        let nz = z.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nz == 0.0 {
            return 0.0;
        }
        let next = nz.sqrt();
        v = z.into_iter().map(|x| x / nz).collect();
        let done = (next - sigma).abs() <= POWER_RTOL * next;
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}

/// `cond_2(A^T) = || |A^{-T}| |A^T| ||_2 = || |A| |A^{-1}| ||_2`.
pub fn cond2_transpose(a: &SparseMatrix) -> Result<f64> {
    let inv = inverse(&a.to_dense())?;
    let abs_a = a.map_values(f64::abs);
    let c = abs_a.mul_dense(&inv.map(f64::abs))?;
    Ok(norm2_power(&c))
}

/// Measured SPAI quality against its a priori bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub eps: f64,
    /// `||I - P A||_inf`.
    pub norm_i_minus_pa: f64,
    /// `2 n eps`.
    pub bound_2n_eps: f64,
    /// `kappa_inf(P A)`.
    pub kappa_tilde: f64,
    /// `(1 + 2 n eps)^2`.
    pub estimate: f64,
    /// `kappa_tilde / estimate`, informational only.
    pub estimate_ratio: f64,
    /// `||P - A^{-1}||_inf`.
    pub dist_to_inverse: f64,
    /// `2 n eps ||A^{-1}||_inf`.
    pub dist_bound: f64,
    pub cond2_transpose: f64,
    /// `uf * cond_2(A^T) <= eps`.
    pub feasible: bool,
    pub all_satisfied: bool,
}

impl BoundReport {
    pub fn residual_bound_holds(&self) -> bool {
        self.norm_i_minus_pa <= self.bound_2n_eps
    }

    pub fn inverse_bound_holds(&self) -> bool {
        self.dist_to_inverse <= self.dist_bound
    }

    /// Fails when every column was satisfied yet a hard bound is violated.
    /// Unsatisfied columns are reported but not treated as a violation.
    pub fn verify(&self) -> Result<()> {
        if !self.all_satisfied {
            return Ok(());
        }
        if !self.residual_bound_holds() {
            return Err(Error::Config(format!(
                "||I - PA||_inf = {:e} exceeds 2n eps = {:e}",
                self.norm_i_minus_pa, self.bound_2n_eps
            )));
        }
        if !self.inverse_bound_holds() {
            return Err(Error::Config(format!(
                "||P - A^-1||_inf = {:e} exceeds 2n eps ||A^-1||_inf = {:e}",
                self.dist_to_inverse, self.dist_bound
            )));
        }
        Ok(())
    }
}

/// Evaluates the bounds for `pre` built from `A` with `params`. `cond2` may
/// be supplied when already known.
pub fn check_bounds_with(
    a: &SparseMatrix,
    pre: &SpaiPreconditioner,
    params: &SpaiParams,
    cond2: Option<f64>,
) -> Result<BoundReport> {
    let n = a.nrows();
    let dense = a.to_dense();
    let inv = inverse(&dense)?;
    let pa = pre.p.mul_dense(&dense)?;
    let residual = DenseMatrix::identity(n).sub(&pa)?;
    let kappa_tilde = kappa_inf_dense(&pa).unwrap_or(f64::INFINITY);
    let dist = pre.p.to_dense().sub(&inv)?;
    let cond2 = match cond2 {
        Some(c) => c,
        None => cond2_transpose(a)?,
    };
    let two_n_eps = 2.0 * n as f64 * params.eps;
    let estimate = (1.0 + two_n_eps).powi(2);
    Ok(BoundReport {
        n,
        eps: params.eps,
        norm_i_minus_pa: residual.norm_inf(),
        bound_2n_eps: two_n_eps,
        kappa_tilde,
        estimate,
        estimate_ratio: kappa_tilde / estimate,
        dist_to_inverse: dist.norm_inf(),
        dist_bound: two_n_eps * inv.norm_inf(),
        cond2_transpose: cond2,
        feasible: params.uf.unit_roundoff() * cond2 <= params.eps,
        all_satisfied: pre.all_satisfied(),
    })
}

pub fn check_bounds(a: &SparseMatrix, pre: &SpaiPreconditioner, params: &SpaiParams) -> Result<BoundReport> {
    check_bounds_with(a, pre, params, None)
}
