//! Left-preconditioned MGS-GMRES with a working precision `ug` for the
//! Arnoldi process and a separate precision `up` for applying `A` and the
//! preconditioner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{dot, norm2, round_slice, Precision};
use crate::sparse::SparseMatrix;

/// Anything that can be applied as a left preconditioner.
pub trait Preconditioner: Sync {
    fn dim(&self) -> usize;

    /// `P w` with every operation rounded to `p`.
    fn apply(&self, w: &[f64], p: Precision) -> Result<Vec<f64>>;

    /// Stored nonzeros; 0 for implicit operators.
    fn nnz(&self) -> usize {
        0
    }
}

impl Preconditioner for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, w: &[f64], p: Precision) -> Result<Vec<f64>> {
        self.matvec(w, p)
    }

    fn nnz(&self) -> usize {
        SparseMatrix::nnz(self)
    }
}

/// `P = I`.
#[derive(Clone, Copy, Debug)]
pub struct Identity(pub usize);

impl Preconditioner for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, w: &[f64], p: Precision) -> Result<Vec<f64>> {
        let mut y = w.to_vec();
        round_slice(&mut y, p);
        Ok(y)
    }
}

impl Preconditioner for crate::dense::DenseMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, w: &[f64], p: Precision) -> Result<Vec<f64>> {
        let y: Vec<f64> = (0..self.nrows()).map(|i| dot(self.row(i), w, p)).collect();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::overflow(format!("dense preconditioner in {p}")));
        }
        Ok(y)
    }

    fn nnz(&self) -> usize {
        self.as_slice().iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    /// Relative tolerance on the preconditioned residual estimate.
    pub tau: f64,
    /// Iteration cap; `None` means the problem dimension.
    pub max_iters: Option<usize>,
    pub ug: Precision,
    pub up: Precision,
    /// Record `||V^T V - I||_F` at exit.
    #[serde(default)]
    pub track_orthogonality: bool,
}

impl GmresConfig {
    pub fn new(tau: f64, ug: Precision, up: Precision) -> Self {
        Self {
            tau,
            max_iters: None,
            ug,
            up,
            track_orthogonality: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GmresReport {
    pub iters: usize,
    /// Preconditioned relative residual estimate after each iteration.
    pub relres_history: Vec<f64>,
    /// The Arnoldi process produced a zero vector before reaching `tau`.
    pub breakdown: bool,
    pub converged: bool,
    /// Stopped because the iteration cap was reached.
    pub hit_max: bool,
    pub orthogonality_loss: Option<f64>,
}

/// `P (A v)` with both products rounded to `up`.
pub fn apply_precond_matvec<P: Preconditioner + ?Sized>(
    a: &SparseMatrix,
    p: &P,
    v: &[f64],
    up: Precision,
) -> Result<Vec<f64>> {
    let w = a.matvec(v, up)?;
    p.apply(&w, up)
}

// c, s with c*a + s*b = r, -s*a + c*b = 0; scaled to keep squares in range.
fn givens(a: f64, b: f64, p: Precision) -> (f64, f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0, a);
    }
    let m = a.abs().max(b.abs());
    let (x, y) = (p.div(a, m), p.div(b, m));
    let r = p.mul(m, p.sqrt(p.add(p.mul(x, x), p.mul(y, y))));
    (p.div(a, r), p.div(b, r), r)
}

/// Solves `P A d = P r` by full GMRES with modified Gram-Schmidt from a zero
/// initial guess.
///
/// `P r` and every `P A v` are formed in `cfg.up`. Inner products, norms,
/// Givens rotations, the triangular solve and the update of `d` run in
/// `cfg.ug`, and the Krylov basis is stored in `cfg.ug`. Iteration stops
/// once the Givens residual estimate satisfies `||z - P A d||/||z|| <= tau`.
pub fn pgmres_left<P: Preconditioner + ?Sized>(
    a: &SparseMatrix,
    p: &P,
    r: &[f64],
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, GmresReport)> {
    let n = a.nrows();
    if !a.is_square() || p.dim() != n || r.len() != n {
        return Err(Error::Dimension("GMRES operands".into()));
    }
    if !(cfg.tau > 0.0 && cfg.tau < 1.0) {
        return Err(Error::Config(format!("tau must lie in (0, 1), got {}", cfg.tau)));
    }
    if !cfg.ug.is_storage_format() {
        return Err(Error::Config("GMRES working precision cannot be quad".into()));
    }
    let ug = cfg.ug;
    let max_iters = cfg.max_iters.unwrap_or(n).min(n);
    let mut report = GmresReport::default();

    let mut z = p.apply(r, cfg.up)?;
    round_slice(&mut z, ug);
    let beta = norm2(&z, ug);
    if !beta.is_finite() {
        return Err(Error::overflow(format!("preconditioned residual norm in {ug}")));
    }
    if beta == 0.0 {
        report.converged = true;
        return Ok((vec![0.0; n], report));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iters + 1);
    basis.push(z.iter().map(|&v| ug.div(v, beta)).collect());
    // column j of the rotated Hessenberg matrix, entries 0..=j
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(max_iters);
    let mut rot: Vec<(f64, f64)> = Vec::with_capacity(max_iters);
    let mut g = vec![beta];

    for j in 0..max_iters {
        let mut w = apply_precond_matvec(a, p, &basis[j], cfg.up)?;
        round_slice(&mut w, ug);
        let mut col = vec![0.0; j + 2];
        for (i, v) in basis.iter().enumerate() {
            let hij = dot(&w, v, ug);
            for (wk, &vk) in w.iter_mut().zip(v) {
                *wk = ug.sub(*wk, ug.mul(hij, vk));
            }
            col[i] = hij;
        }
        let hnext = norm2(&w, ug);
        if !hnext.is_finite() {
            return Err(Error::overflow(format!("Arnoldi step in {ug}")));
        }
        col[j + 1] = hnext;

        for (i, &(c, s)) in rot.iter().enumerate() {
            let t = ug.add(ug.mul(c, col[i]), ug.mul(s, col[i + 1]));
            col[i + 1] = ug.sub(ug.mul(c, col[i + 1]), ug.mul(s, col[i]));
            col[i] = t;
        }
        let (c, s, rr) = givens(col[j], col[j + 1], ug);
        col[j] = rr;
        col.truncate(j + 1);
        rot.push((c, s));
        let gj = g[j];
        g.push(ug.mul(-s, gj));
        g[j] = ug.mul(c, gj);
        h.push(col);

        let relres = ug.div(g[j + 1].abs(), beta);
        report.relres_history.push(relres);
        report.iters = j + 1;
        if relres <= cfg.tau {
            report.converged = true;
            break;
        }
        if hnext == 0.0 {
            report.breakdown = true;
            break;
        }
        basis.push(w.iter().map(|&v| ug.div(v, hnext)).collect());
    }
    report.hit_max = !report.converged && !report.breakdown && report.iters == max_iters;

    let k = report.iters;
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (jj, yj) in y.iter().enumerate().skip(i + 1) {
            s = ug.sub(s, ug.mul(h[jj][i], *yj));
        }
        y[i] = ug.div(s, h[i][i]);
    }
    let mut d = vec![0.0; n];
    for (v, &yi) in basis.iter().zip(&y) {
        for (dk, &vk) in d.iter_mut().zip(v) {
            *dk = ug.add(*dk, ug.mul(yi, vk));
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::overflow(format!("GMRES update in {ug}")));
    }
    if cfg.track_orthogonality {
        let m = basis.len().min(k.max(1));
        let mut loss = 0.0;
        for a_ in 0..m {
            for b_ in 0..m {
                let ip: f64 = basis[a_].iter().zip(&basis[b_]).map(|(x, y)| x * y).sum();
                let e = ip - if a_ == b_ { 1.0 } else { 0.0 };
                loss += e * e;
            }
        }
        report.orthogonality_loss = Some(loss.sqrt());
    }
    Ok((d, report))
}
