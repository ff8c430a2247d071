//! Adaptive sparse approximate inverse construction.
//!
//! [`build_spai`] computes a right approximate inverse `M` of the matrix it
//! is given, one column at a time: solve the reduced least-squares problem
//! on the current pattern, stop once `||sbar_k||_2 <= eps`, otherwise grow
//! the pattern by at most `beta` indices chosen by the univariate residual
//! estimate `rho_jk`. All arithmetic is rounded to `uf`.
//!
//! [`build_left_preconditioner`] runs the construction on the column-scaled
//! transpose and returns `P = M^T D`.

mod lsq;

pub use lsq::{solve_column_ls, ColumnSolve};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::precision::{dot, Precision};
use crate::sparse::{column_scale, extract_submatrix, shadow, IndexSet, ScalingInfo, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPattern {
    Identity,
    PatternOfA,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaiParams {
    /// Per-column residual tolerance.
    pub eps: f64,
    /// Maximum augmentation rounds; `None` means `ceil(n / beta)`.
    pub alpha: Option<usize>,
    /// Maximum indices added per round.
    pub beta: usize,
    pub initial_pattern: InitialPattern,
    pub uf: Precision,
}

impl Default for SpaiParams {
    fn default() -> Self {
        Self {
            eps: 0.3,
            alpha: None,
            beta: 8,
            initial_pattern: InitialPattern::Identity,
            uf: Precision::Single,
        }
    }
}

impl SpaiParams {
    pub fn new(eps: f64, uf: Precision) -> Self {
        Self {
            eps,
            uf,
            ..Self::default()
        }
    }

    pub fn alpha_for(&self, n: usize) -> usize {
        self.alpha.unwrap_or_else(|| n.div_ceil(self.beta.max(1)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_nan() || self.eps <= 0.0 || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.beta == 0 {
            return Err(Error::Config("beta must be at least 1".into()));
        }
        if !self.uf.is_storage_format() {
            return Err(Error::Config("SPAI cannot be computed in emulated quad".into()));
        }
        Ok(())
    }
}

/// Why a column stopped iterating.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnStatus {
    Satisfied,
    /// Ran out of augmentation rounds.
    MaxRounds,
    /// No candidate index could be added.
    Stagnated,
    RankDeficient,
    /// A non-finite value appeared; the column keeps its last finite state.
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    /// Final `||sbar_k||_2` measured in `uf`.
    pub resnorm: f64,
    /// Augmentation rounds performed.
    pub rounds: usize,
    pub status: ColumnStatus,
    /// Final extraction set `J_k`.
    pub pattern: Vec<usize>,
}

impl ColumnReport {
    pub fn satisfied(&self) -> bool {
        self.status == ColumnStatus::Satisfied
    }
}

/// Output of [`build_spai`]: the right approximate inverse of the input.
#[derive(Clone, Debug)]
pub struct ApproximateInverse {
    pub m: SparseMatrix,
    pub columns: Vec<ColumnReport>,
}

/// Left preconditioner `P = M^T D` with the per-column statistics of `M`.
#[derive(Clone, Debug)]
pub struct SpaiPreconditioner {
    pub p: SparseMatrix,
    pub columns: Vec<ColumnReport>,
    pub scaling: ScalingInfo,
    pub params: SpaiParams,
}

macro_rules! column_stats {
    ($t:ty) => {
        impl $t {
            pub fn col_resnorm(&self) -> Vec<f64> {
                self.columns.iter().map(|c| c.resnorm).collect()
            }

            pub fn col_rounds(&self) -> Vec<usize> {
                self.columns.iter().map(|c| c.rounds).collect()
            }

            pub fn satisfied(&self) -> Vec<bool> {
                self.columns.iter().map(ColumnReport::satisfied).collect()
            }

            pub fn all_satisfied(&self) -> bool {
                self.columns.iter().all(ColumnReport::satisfied)
            }

            pub fn unsatisfied_count(&self) -> usize {
                self.columns.iter().filter(|c| !c.satisfied()).count()
            }
        }
    };
}

column_stats!(ApproximateInverse);
column_stats!(SpaiPreconditioner);

impl SpaiPreconditioner {
    pub fn nnz(&self) -> usize {
        self.p.nnz()
    }
}

/// `(||sbar||^2 - (sbar . a)^2 / ||a||^2)^(1/2)` in `uf`, clamped at zero.
/// `None` when the candidate column is zero on the shadow.
pub fn rho_score(sbar: &[f64], a_col_on_i: &[f64], uf: Precision) -> Option<f64> {
    let a2 = dot(a_col_on_i, a_col_on_i, uf);
    if a2 == 0.0 {
        return None;
    }
    let s2 = dot(sbar, sbar, uf);
    let sa = dot(sbar, a_col_on_i, uf);
    let gain = uf.div(uf.mul(sa, sa), a2);
    let rad = uf.sub(s2, gain);
    Some(if rad > 0.0 { uf.sqrt(rad) } else { 0.0 })
}

/// Result of one pattern-augmentation attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Augmentation {
    Extended(IndexSet),
    /// No admissible candidate; the pattern is unchanged.
    Stagnated,
}

/// Chooses up to `beta` new indices for column `k`.
///
/// `at` is the matrix being inverted and `at_t` its transpose (row access).
/// Candidates are the columns hit by rows of `i_set ∪ {k}` that are not in
/// `j_set`. Scores are computed once; those at or below their arithmetic
/// mean are admitted in `(rho, index)` order.
#[allow(clippy::too_many_arguments)]
pub fn augment_pattern(
    at: &SparseMatrix,
    at_t: &SparseMatrix,
    k: usize,
    i_set: &IndexSet,
    j_set: &IndexSet,
    sbar: &[f64],
    beta: usize,
    uf: Precision,
) -> Augmentation {
    let mut rows = i_set.clone();
    rows.insert(k);
    let mut candidates: Vec<usize> = rows
        .iter()
        .flat_map(|l| at_t.col(l).0.iter().copied())
        .filter(|&j| !j_set.contains(j))
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(candidates.len());
    let mut a_on_i = vec![0.0; i_set.len()];
    for &j in &candidates {
        a_on_i.iter_mut().for_each(|v| *v = 0.0);
        let (r, vals) = at.col(j);
        for (&row, &v) in r.iter().zip(vals) {
            if let Some(pos) = i_set.position(row) {
                a_on_i[pos] = v;
            }
        }
        if let Some(rho) = rho_score(sbar, &a_on_i, uf) {
            if rho.is_finite() {
                scored.push((rho, j));
            }
        }
    }
    if scored.is_empty() {
        return Augmentation::Stagnated;
    }
    let total = scored.iter().fold(0.0, |s, &(r, _)| uf.add(s, r));
    let mean = uf.div(total, scored.len() as f64);
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut extended = j_set.clone();
    // the smallest score never exceeds the exact mean; admit it even when
    // rounding of the mean says otherwise
    for (_, &(_, j)) in scored
        .iter()
        .enumerate()
        .take_while(|(pos, (rho, _))| *pos == 0 || *rho <= mean)
        .take(beta)
    {
        extended.insert(j);
    }
    Augmentation::Extended(extended)
}

struct ColumnResult {
    entries: Vec<(usize, f64)>,
    report: ColumnReport,
}

type ColumnEntries = (Vec<(usize, f64)>, f64, Vec<usize>);

fn compute_column(at: &SparseMatrix, at_t: &SparseMatrix, k: usize, params: &SpaiParams, alpha: usize) -> ColumnResult {
    let uf = params.uf;
    let mut j_set = match params.initial_pattern {
        InitialPattern::Identity => IndexSet::singleton(k),
        InitialPattern::PatternOfA => {
            let mut s = IndexSet::from_unsorted(at.col(k).0.to_vec());
            if s.is_empty() {
                s.insert(k);
            }
            s
        }
    };
    // (entries of the column, residual norm, pattern) of the last finite solve
    let mut best: Option<ColumnEntries> = None;
    let mut rounds = 0;
    let status = loop {
        let mut i_set = shadow(at, &j_set);
        // keep e_k visible even when row k is outside the shadow
        i_set.insert(k);
        let abar = extract_submatrix(at, &i_set, &j_set);
        let ebar: Vec<f64> = i_set.iter().map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        let solved = match solve_column_ls(&abar, &ebar, uf) {
            Ok(s) => s,
            Err(Error::RankDeficient { .. }) => break ColumnStatus::RankDeficient,
            Err(_) => break ColumnStatus::Overflow,
        };
        let finite = solved.resnorm.is_finite()
            && solved.mbar.iter().all(|v| v.is_finite())
            && solved.sbar.iter().all(|v| v.is_finite());
        if !finite {
            break ColumnStatus::Overflow;
        }
        let entries = j_set.iter().zip(solved.mbar.iter().copied()).collect();
        best = Some((entries, solved.resnorm, j_set.as_slice().to_vec()));
        if solved.resnorm <= params.eps {
            break ColumnStatus::Satisfied;
        }
        if rounds == alpha {
            break ColumnStatus::MaxRounds;
        }
        match augment_pattern(at, at_t, k, &i_set, &j_set, &solved.sbar, params.beta, uf) {
            Augmentation::Extended(next) => j_set = next,
            Augmentation::Stagnated => break ColumnStatus::Stagnated,
        }
        rounds += 1;
    };
    let (entries, resnorm, pattern) = best.unwrap_or_else(|| (Vec::new(), 1.0, j_set.as_slice().to_vec()));
    ColumnResult {
        entries,
        report: ColumnReport {
            resnorm,
            rounds,
            status,
            pattern,
        },
    }
}

/// Right approximate inverse of `at` computed in `params.uf`.
///
/// `at` is rounded to `uf` first. Columns are independent and run on the
/// rayon pool; assembly is in column order, so the result does not depend
/// on scheduling.
pub fn build_spai(at: &SparseMatrix, params: &SpaiParams) -> Result<ApproximateInverse> {
    params.validate()?;
    if !at.is_square() {
        return Err(Error::Dimension("SPAI needs a square matrix".into()));
    }
    let n = at.ncols();
    let at = at.rounded(params.uf);
    if at.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::overflow(format!("matrix rounded to {}", params.uf)));
    }
    if params.initial_pattern == InitialPattern::Identity {
        if let Some(k) = at.diagonal().iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDiagonal(k));
        }
    }
    let at_t = at.transpose();
    let alpha = params.alpha_for(n);
    let results: Vec<ColumnResult> = (0..n)
        .into_par_iter()
        .map(|k| compute_column(&at, &at_t, k, params, alpha))
        .collect();

    let mut triplets = Vec::new();
    let mut columns = Vec::with_capacity(n);
    for (k, r) in results.into_iter().enumerate() {
        triplets.extend(r.entries.into_iter().map(|(i, v)| (i, k, v)));
        columns.push(r.report);
    }
    let m = SparseMatrix::from_triplets(n, n, &triplets)?;
    Ok(ApproximateInverse { m, columns })
}

/// Left preconditioner for `A`: SPAI on the column-scaled `A^T D`, then
/// `P = M^T D`.
pub fn build_left_preconditioner(a: &SparseMatrix, params: &SpaiParams) -> Result<SpaiPreconditioner> {
    if !a.is_square() {
        return Err(Error::Dimension("preconditioner needs a square matrix".into()));
    }
    let (scaled, scaling) = column_scale(&a.transpose())?;
    let inv = build_spai(&scaled, params)?;
    let p = inv.m.transpose().scale_columns(&scaling.d)?;
    Ok(SpaiPreconditioner {
        p,
        columns: inv.columns,
        scaling,
        params: params.clone(),
    })
}
