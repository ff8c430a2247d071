//! Five-precision iterative refinement.
//!
//! Precisions: `uf` for the preconditioner (SPAI or LU) and `x0`, `u` for
//! storing iterates, `ur` for residuals, `ug` inside GMRES and `up` for
//! applying `A` and the preconditioner inside GMRES.

mod lu;
mod rcm;

pub use lu::{dense_lu, LuPreconditioner, LuScaling};
pub use rcm::reverse_cuthill_mckee;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::kappa_inf_dense;
use crate::dd::{self, DoubleDouble};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::krylov::{pgmres_left, GmresConfig, Identity, Preconditioner};
use crate::precision::{norm_inf, round_slice, Precision};
use crate::spai::{build_left_preconditioner, SpaiParams, SpaiPreconditioner};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precisions {
    pub uf: Precision,
    pub u: Precision,
    pub ur: Precision,
    pub ug: Precision,
    pub up: Precision,
}

impl Precisions {
    /// `ug = up = u`.
    pub fn new(uf: Precision, u: Precision, ur: Precision) -> Self {
        Self {
            uf,
            u,
            ur,
            ug: u,
            up: u,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("uf", self.uf), ("u", self.u), ("ug", self.ug), ("up", self.up)] {
            if !p.is_storage_format() {
                return Err(Error::Config(format!(
                    "{name} must be half, single or double; quad is only available for ur"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Precisions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.uf.code(),
            self.u.code(),
            self.ur.code(),
            self.ug.code(),
            self.up.code()
        )
    }
}

/// Parses `uf,u,ur` or `uf,u,ur,ug,up`.
impl FromStr for Precisions {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<Precision> = s.split(',').map(|t| t.trim().parse()).collect::<Result<_>>()?;
        match parts.as_slice() {
            [uf, u, ur] => Ok(Self::new(*uf, *u, *ur)),
            [uf, u, ur, ug, up] => Ok(Self {
                uf: *uf,
                u: *u,
                ur: *ur,
                ug: *ug,
                up: *up,
            }),
            _ => Err(Error::Config(format!(
                "expected `uf,u,ur` or `uf,u,ur,ug,up`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// GMRES left-preconditioned by SPAI.
    SpaiGmres,
    /// GMRES left-preconditioned by dense LU factors.
    LuGmres,
    /// GMRES without preconditioning.
    PlainGmres,
    /// Triangular solves with the LU factors in `uf`.
    TriangularSir,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::SpaiGmres => "spai",
            SolverKind::LuGmres => "lu",
            SolverKind::PlainGmres => "none",
            SolverKind::TriangularSir => "sir",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spai" => Ok(SolverKind::SpaiGmres),
            "lu" => Ok(SolverKind::LuGmres),
            "none" | "plain" => Ok(SolverKind::PlainGmres),
            "sir" => Ok(SolverKind::TriangularSir),
            other => Err(Error::Config(format!(
                "unknown solver `{other}` (expected spai, lu, none or sir)"
            ))),
        }
    }
}

/// Stopping rule: converged when `nbe <= c_nbe * n * u` and
/// `ferr <= c_ferr * n * u`. Without a reference solution the forward-error
/// test is replaced by `||d||_inf / ||x||_inf <= u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriteria {
    pub c_ferr: f64,
    pub c_nbe: f64,
    pub use_reference: bool,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self {
            c_ferr: 1.0,
            c_nbe: 1.0,
            use_reference: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrConfig {
    pub precisions: Precisions,
    pub tau: f64,
    pub i_max: usize,
    pub solver: SolverKind,
    /// Used by `SpaiGmres`; its `uf` is overridden by `precisions.uf`.
    pub spai: SpaiParams,
    pub convergence: ConvergenceCriteria,
    /// GMRES iteration cap per step; `None` means `n`.
    pub gmres_max_iters: Option<usize>,
    /// Form the preconditioned matrix densely and report its condition number.
    pub compute_kappa: bool,
}

/// GMRES tolerance commonly paired with a working precision.
pub fn default_tau(u: Precision) -> f64 {
    match u {
        Precision::Half => 1e-2,
        Precision::Single => 1e-4,
        _ => 1e-8,
    }
}

impl IrConfig {
    pub fn new(solver: SolverKind, precisions: Precisions) -> Self {
        Self {
            precisions,
            tau: default_tau(precisions.u),
            i_max: 10,
            solver,
            spai: SpaiParams::new(0.3, precisions.uf),
            convergence: ConvergenceCriteria::default(),
            gmres_max_iters: None,
            compute_kappa: true,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.spai.eps = eps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.precisions.validate()?;
        if self.i_max == 0 {
            return Err(Error::Config("i_max must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.solver == SolverKind::SpaiGmres {
            self.spai_params().validate()?;
        }
        Ok(())
    }

    fn spai_params(&self) -> SpaiParams {
        SpaiParams {
            uf: self.precisions.uf,
            ..self.spai.clone()
        }
    }
}

/// Outcome of one refinement run. Histories include the initial iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrReport {
    pub n: usize,
    pub nnz_a: usize,
    pub solver: SolverKind,
    pub precisions: Precisions,
    pub tau: f64,
    pub eps: Option<f64>,
    pub steps: usize,
    pub gmres_iters_per_step: Vec<usize>,
    pub total_gmres_iters: usize,
    /// Empty when no reference solution is used.
    pub ferr_history: Vec<f64>,
    pub nbe_history: Vec<f64>,
    pub converged: bool,
    pub stagnated: bool,
    /// Refinement steps whose GMRES call hit the iteration cap.
    pub gmres_capped_steps: usize,
    /// `nnz(P)` for SPAI, `nnz(L+U)` for LU, 0 otherwise.
    pub precond_nnz: usize,
    /// `kappa_inf` of the preconditioned matrix.
    pub kappa_tilde: Option<f64>,
    pub spai_unsatisfied_columns: Option<usize>,
    /// The LU baseline needed equilibration to avoid overflow.
    pub lu_scaled: Option<bool>,
}

impl IrReport {
    pub fn final_ferr(&self) -> Option<f64> {
        self.ferr_history.last().copied()
    }

    pub fn final_nbe(&self) -> Option<f64> {
        self.nbe_history.last().copied()
    }

    /// `223(110,113)` style summary; `0` when no refinement step ran.
    pub fn iteration_tuple(&self) -> String {
        if self.gmres_iters_per_step.is_empty() {
            return self.total_gmres_iters.to_string();
        }
        let inner: Vec<String> = self.gmres_iters_per_step.iter().map(|k| k.to_string()).collect();
        format!("{}({})", self.total_gmres_iters, inner.join(","))
    }
}

/// High-accuracy solution of `A x = b` used to measure forward errors.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    x: Vec<DoubleDouble>,
    norm_x: f64,
}

impl ReferenceSolution {
    pub fn new(a: &SparseMatrix, b: &[f64]) -> Result<Self> {
        let x = dd::solve(a, b)?;
        let norm_x = x.iter().fold(0.0_f64, |m, v| m.max(v.to_f64().abs()));
        Ok(Self { x, norm_x })
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.iter().map(|v| v.to_f64()).collect()
    }

    /// `||x_ref - x||_inf / ||x_ref||_inf`, differences in double-double.
    pub fn ferr(&self, x: &[f64]) -> f64 {
        let diff = self
            .x
            .iter()
            .zip(x)
            .fold(0.0_f64, |m, (r, &v)| m.max((*r - DoubleDouble::from(v)).to_f64().abs()));
        if self.norm_x == 0.0 {
            diff
        } else {
            diff / self.norm_x
        }
    }
}

/// `||b - A x||_inf / (||b||_inf + ||A||_inf ||x||_inf)` with the residual
/// in double-double.
pub fn normwise_backward_error(a: &SparseMatrix, b: &[f64], x: &[f64]) -> Result<f64> {
    let r = dd::residual(a, x, b)?;
    let denom = norm_inf(b) + a.norm_inf() * norm_inf(x);
    Ok(if denom == 0.0 { 0.0 } else { norm_inf(&r) / denom })
}

/// Forward error against a double-double reference and normwise backward
/// error.
pub fn measure_errors(a: &SparseMatrix, b: &[f64], x: &[f64]) -> Result<(f64, f64)> {
    let reference = ReferenceSolution::new(a, b)?;
    Ok((reference.ferr(x), normwise_backward_error(a, b, x)?))
}

/// Right-hand side with equal components and unit 2-norm.
pub fn unit_rhs(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

enum Prepared {
    Spai(SpaiPreconditioner),
    Lu(LuPreconditioner),
    Plain(Identity),
}

impl Prepared {
    fn as_preconditioner(&self) -> &dyn Preconditioner {
        match self {
            Prepared::Spai(s) => &s.p,
            Prepared::Lu(l) => l,
            Prepared::Plain(i) => i,
        }
    }
}

/// Dense `P A` with `P` applied column by column in double.
pub fn preconditioned_dense(a: &SparseMatrix, p: &dyn Preconditioner) -> Result<DenseMatrix> {
    let n = a.nrows();
    let dense = a.to_dense();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| p.apply(&dense.column(j), Precision::Double))
        .collect::<Result<_>>()?;
    let mut out = DenseMatrix::zeros(n, n);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Iterative refinement for `A x = b`.
pub fn run_ir(a: &SparseMatrix, b: &[f64], cfg: &IrConfig) -> Result<(Vec<f64>, IrReport)> {
    let reference = if cfg.convergence.use_reference {
        Some(ReferenceSolution::new(a, b)?)
    } else {
        None
    };
    run_ir_with_reference(a, b, cfg, reference.as_ref())
}

/// As [`run_ir`], reusing a precomputed reference solution.
pub fn run_ir_with_reference(
    a: &SparseMatrix,
    b: &[f64],
    cfg: &IrConfig,
    reference: Option<&ReferenceSolution>,
) -> Result<(Vec<f64>, IrReport)> {
    cfg.validate()?;
    if !a.is_square() || b.len() != a.nrows() {
        return Err(Error::Dimension("refinement needs a square system".into()));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("right-hand side must be finite".into()));
    }
    let use_reference = cfg.convergence.use_reference;
    if use_reference && reference.is_none() {
        return Err(Error::Config(
            "reference solution required by the convergence test".into(),
        ));
    }
    let n = a.nrows();
    let Precisions { uf, u, ur, ug, up } = cfg.precisions;

    let prepared = match cfg.solver {
        SolverKind::SpaiGmres => Prepared::Spai(
            build_left_preconditioner(a, &cfg.spai_params())
                .map_err(|e| Error::Preconditioner(format!("SPAI in {uf}: {e}")))?,
        ),
        SolverKind::LuGmres | SolverKind::TriangularSir => Prepared::Lu(LuPreconditioner::new(a, uf)?),
        SolverKind::PlainGmres => Prepared::Plain(Identity(n)),
    };
    let precond = prepared.as_preconditioner();

    let mut report = IrReport {
        n,
        nnz_a: a.nnz(),
        solver: cfg.solver,
        precisions: cfg.precisions,
        tau: cfg.tau,
        eps: (cfg.solver == SolverKind::SpaiGmres).then_some(cfg.spai.eps),
        steps: 0,
        gmres_iters_per_step: Vec::new(),
        total_gmres_iters: 0,
        ferr_history: Vec::new(),
        nbe_history: Vec::new(),
        converged: false,
        stagnated: false,
        gmres_capped_steps: 0,
        precond_nnz: precond.nnz(),
        kappa_tilde: None,
        spai_unsatisfied_columns: None,
        lu_scaled: None,
    };
    match &prepared {
        Prepared::Spai(s) => report.spai_unsatisfied_columns = Some(s.unsatisfied_count()),
        Prepared::Lu(l) => report.lu_scaled = Some(l.scaling().is_some()),
        Prepared::Plain(_) => {}
    }
    if cfg.compute_kappa {
        report.kappa_tilde = Some(kappa_inf_dense(&preconditioned_dense(a, precond)?)?);
    }

    let mut x = match &prepared {
        Prepared::Spai(s) => s.p.matvec(b, uf)?,
        Prepared::Lu(l) => l.apply(b, uf)?,
        Prepared::Plain(_) => vec![0.0; n],
    };
    round_slice(&mut x, u);

    let threshold = |c: f64| c * n as f64 * u.unit_roundoff();
    let record = |x: &[f64], report: &mut IrReport| -> Result<()> {
        if let Some(r) = reference {
            report.ferr_history.push(r.ferr(x));
        }
        report.nbe_history.push(normwise_backward_error(a, b, x)?);
        Ok(())
    };
    let converged = |report: &IrReport, step_size: Option<f64>| -> bool {
        let nbe_ok = report
            .nbe_history
            .last()
            .is_some_and(|&v| v <= threshold(cfg.convergence.c_nbe));
        let fwd_ok = if use_reference {
            report
                .ferr_history
                .last()
                .is_some_and(|&v| v <= threshold(cfg.convergence.c_ferr))
        } else {
            step_size.is_some_and(|s| s <= u.unit_roundoff())
        };
        nbe_ok && fwd_ok
    };

    record(&x, &mut report)?;
    if use_reference && converged(&report, None) {
        report.converged = true;
        return Ok((x, report));
    }

    let gcfg = GmresConfig {
        tau: cfg.tau,
        max_iters: cfg.gmres_max_iters,
        ug,
        up,
        track_orthogonality: false,
    };
    let mut slow_steps = 0;
    for _ in 0..cfg.i_max {
        let mut r = if ur == Precision::QuadEmulated {
            dd::residual(a, &x, b)?
        } else {
            let ax = a.matvec(&x, ur)?;
            b.iter().zip(&ax).map(|(&bi, &v)| ur.sub(ur.round(bi), v)).collect()
        };
        round_slice(&mut r, u);

        let mut d = match (&prepared, cfg.solver) {
            (Prepared::Lu(l), SolverKind::TriangularSir) => {
                // keep the low-precision solve in range
                let scale = norm_inf(&r);
                if scale == 0.0 {
                    vec![0.0; n]
                } else {
                    let rs: Vec<f64> = r.iter().map(|v| v / scale).collect();
                    l.apply(&rs, uf)?.into_iter().map(|v| v * scale).collect()
                }
            }
            _ => {
                let (d, g) = pgmres_left(a, precond, &r, &gcfg)?;
                report.gmres_iters_per_step.push(g.iters);
                report.total_gmres_iters += g.iters;
                if g.hit_max {
                    report.gmres_capped_steps += 1;
                }
                d
            }
        };
        round_slice(&mut d, u);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi = u.add(*xi, *di);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::overflow(format!("refinement update in {u}")));
        }
        report.steps += 1;
        record(&x, &mut report)?;

        let step_size = {
            let nx = norm_inf(&x);
            (nx > 0.0).then(|| norm_inf(&d) / nx)
        };
        if converged(&report, step_size) {
            report.converged = true;
            break;
        }
        let history = if use_reference {
            &report.ferr_history
        } else {
            &report.nbe_history
        };
        let (prev, cur) = (history[history.len() - 2], history[history.len() - 1]);
        if cur > 0.5 * prev {
            slow_steps += 1;
        } else {
            slow_steps = 0;
        }
        if slow_steps >= 2 {
            report.stagnated = true;
            break;
        }
    }
    Ok((x, report))
}
