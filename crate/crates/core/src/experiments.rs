//! Reference data for the nine benchmark matrices and the harness that
//! re-runs the comparison tables and the epsilon sweeps.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::kappa_inf_dense;
use crate::error::{Error, Result};
use crate::precision::Precision;
use crate::refine::{
    preconditioned_dense, run_ir_with_reference, unit_rhs, IrConfig, IrReport, Precisions, ReferenceSolution,
    SolverKind,
};
use crate::spai::{build_left_preconditioner, SpaiParams};
use crate::sparse::{read_matrix_market_file, SparseMatrix};

pub const MATRIX_DIR_ENV: &str = "SPAI_IR_MATRIX_DIR";
pub const DEFAULT_MATRIX_DIR: &str = "data/matrices";

/// Relative band on preconditioner nonzeros.
pub const NNZ_BAND: f64 = 0.15;
/// Relative band on total GMRES iterations.
pub const ITER_BAND: f64 = 0.25;
/// Final errors must satisfy `ferr, nbe <= ERROR_FACTOR * n * u`.
pub const ERROR_FACTOR: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MatrixInfo {
    pub name: &'static str,
    pub n: usize,
    pub nnz: usize,
    pub kappa_inf: f64,
    pub cond2_transpose: f64,
}

pub const MATRICES: [MatrixInfo; 9] = [
    MatrixInfo {
        name: "pores_3",
        n: 532,
        nnz: 3474,
        kappa_inf: 1.2e6,
        cond2_transpose: 1.7e5,
    },
    MatrixInfo {
        name: "steam1",
        n: 240,
        nnz: 2248,
        kappa_inf: 3.1e7,
        cond2_transpose: 2.8e3,
    },
    MatrixInfo {
        name: "steam3",
        n: 80,
        nnz: 314,
        kappa_inf: 7.6e10,
        cond2_transpose: 5.6e3,
    },
    MatrixInfo {
        name: "saylr1",
        n: 238,
        nnz: 1128,
        kappa_inf: 1.6e9,
        cond2_transpose: 5.2e5,
    },
    MatrixInfo {
        name: "bfwa782",
        n: 782,
        nnz: 7514,
        kappa_inf: 6.8e3,
        cond2_transpose: 1.3e3,
    },
    MatrixInfo {
        name: "cage5",
        n: 37,
        nnz: 233,
        kappa_inf: 2.9e1,
        cond2_transpose: 7.5,
    },
    MatrixInfo {
        name: "gre_115",
        n: 115,
        nnz: 421,
        kappa_inf: 1.4e2,
        cond2_transpose: 3.7e1,
    },
    MatrixInfo {
        name: "orsreg_1",
        n: 2205,
        nnz: 14133,
        kappa_inf: 7.0e3,
        cond2_transpose: 5.9e3,
    },
    MatrixInfo {
        name: "sherman4",
        n: 1104,
        nnz: 3786,
        kappa_inf: 3.1e3,
        cond2_transpose: 1.2e3,
    },
];

pub fn matrix_info(name: &str) -> Option<&'static MatrixInfo> {
    MATRICES.iter().find(|m| m.name == name)
}

/// `$SPAI_IR_MATRIX_DIR`, or `data/matrices`.
pub fn matrix_dir() -> PathBuf {
    std::env::var_os(MATRIX_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_MATRIX_DIR))
}

/// Loads `<dir>/<name>.mtx`. Returns `Ok(None)` when the file is absent and
/// a dimension error when a manifest entry disagrees with the file.
pub fn load_named(dir: &Path, name: &str) -> Result<Option<SparseMatrix>> {
    let path = dir.join(format!("{name}.mtx"));
    if !path.exists() {
        return Ok(None);
    }
    let a = read_matrix_market_file(&path)?;
    if let Some(info) = matrix_info(name) {
        if a.nrows() != info.n || a.ncols() != info.n || a.nnz() != info.nnz {
            return Err(Error::Dimension(format!(
                "{}: expected n={} nnz={}, found {}x{} nnz={}",
                path.display(),
                info.n,
                info.nnz,
                a.nrows(),
                a.ncols(),
                a.nnz()
            )));
        }
    }
    Ok(Some(a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableId {
    T4,
    T5,
    T6,
}

impl TableId {
    pub const ALL: [TableId; 3] = [TableId::T4, TableId::T5, TableId::T6];

    pub fn precisions(self) -> Precisions {
        use Precision::*;
        match self {
            TableId::T4 => Precisions::new(Single, Double, QuadEmulated),
            TableId::T5 => Precisions::new(Half, Single, Double),
            TableId::T6 => Precisions::new(Single, Single, Double),
        }
    }

    pub fn tau(self) -> f64 {
        match self {
            TableId::T4 => 1e-8,
            TableId::T5 | TableId::T6 => 1e-4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableId::T4 => "t4",
            TableId::T5 => "t5",
            TableId::T6 => "t6",
        }
    }
}

impl std::str::FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t4" | "4" => Ok(TableId::T4),
            "t5" | "5" => Ok(TableId::T5),
            "t6" | "6" => Ok(TableId::T6),
            other => Err(Error::Config(format!("unknown table `{other}` (t4, t5 or t6)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RowKind {
    Spai { eps: f64 },
    Lu,
    None,
}

impl RowKind {
    pub fn solver(self) -> SolverKind {
        match self {
            RowKind::Spai { .. } => SolverKind::SpaiGmres,
            RowKind::Lu => SolverKind::LuGmres,
            RowKind::None => SolverKind::PlainGmres,
        }
    }

    pub fn label(self) -> String {
        match self {
            RowKind::Spai { eps } => format!("SPAI eps={eps}"),
            RowKind::Lu => "Full LU".into(),
            RowKind::None => "None".into(),
        }
    }

    pub fn eps(self) -> Option<f64> {
        match self {
            RowKind::Spai { eps } => Some(eps),
            _ => None,
        }
    }
}

/// One published row: kappa of the preconditioned matrix, preconditioner
/// nonzeros and GMRES iterations per refinement step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub matrix: &'static str,
    pub kind: RowKind,
    pub kappa_tilde: f64,
    pub nnz: usize,
    pub iters: &'static [usize],
    pub ordering: Option<&'static str>,
}

impl ReferenceRow {
    pub fn total_iters(&self) -> usize {
        self.iters.iter().sum()
    }
}

macro_rules! rows {
    ($($m:literal, $kind:expr, $k:expr, $nnz:expr, [$($it:expr),*], $ord:expr;)*) => {
        vec![$(ReferenceRow {
            matrix: $m,
            kind: $kind,
            kappa_tilde: $k,
            nnz: $nnz,
            iters: &[$($it),*],
            ordering: $ord,
        }),*]
    };
}

const fn spai(eps: f64) -> RowKind {
    RowKind::Spai { eps }
}

pub fn reference_rows(table: TableId) -> Vec<ReferenceRow> {
    use RowKind::{Lu, None as Plain};
    match table {
        TableId::T4 => rows![
            "pores_3", spai(0.5), 6.6e3, 3560, [110, 113], None;
            "pores_3", spai(0.4), 3.8e3, 4871, [86, 88], None;
            "pores_3", Lu, 1.0, 9706, [2, 2], Some("amd");
            "pores_3", Plain, 1.2e6, 0, [417, 456, 441], None;
            "steam1", spai(0.2), 1.5, 1140, [7, 7], None;
            "steam1", spai(0.1), 1.5, 1303, [7, 7], None;
            "steam1", Lu, 1.9, 14133, [2], Some("amd");
            "steam1", Plain, 3.1e7, 0, [158, 193, 192], None;
            "steam3", spai(0.5), 3.9, 244, [9, 12, 10], None;
            "steam3", spai(0.1), 1.9, 403, [5, 6, 6], None;
            "steam3", Lu, 1.1, 483, [2], Some("amd");
            "steam3", Plain, 7.6e10, 0, [61, 80, 80], None;
            "saylr1", spai(0.4), 1.9e4, 1932, [64, 66, 65], None;
            "saylr1", spai(0.3), 7.5e3, 3405, [44, 45], None;
            "saylr1", Lu, 1.0, 3607, [2, 3], Some("amd");
            "saylr1", Plain, 1.6e9, 0, [214, 229, 215], None;
        ],
        TableId::T5 => rows![
            "bfwa782", spai(0.5), 1.1e3, 6271, [75, 89], None;
            "bfwa782", spai(0.3), 5.0e2, 11430, [54, 60], None;
            "bfwa782", Lu, 2.1, 21838, [3, 4], Some("amd");
            "bfwa782", Plain, 6.8e3, 0, [172, 209], None;
            "cage5", spai(0.5), 9.9, 101, [8, 8], None;
            "cage5", spai(0.3), 3.9, 213, [6, 6], None;
            "cage5", Lu, 1.0, 359, [2], Some("amd");
            "cage5", Plain, 2.9e1, 0, [13, 12], None;
            "gre_115", spai(0.5), 5.8e2, 725, [24, 24], None;
            "gre_115", spai(0.3), 1.8e1, 1719, [10, 11], None;
            "gre_115", Lu, 1.0, 1551, [2], Some("nds");
            "gre_115", Plain, 1.4e2, 0, [49, 51], None;
            "orsreg_1", spai(0.5), 1.7e2, 9261, [29, 45, 34], None;
            "orsreg_1", spai(0.3), 1.3e2, 11120, [23, 38], None;
            "orsreg_1", Lu, 2.2, 133634, [4, 5], Some("rcm");
            "orsreg_1", Plain, 7.0e3, 0, [107, 150, 95], None;
            "sherman4", spai(0.5), 1.6e3, 1386, [67, 73], None;
            "sherman4", spai(0.3), 5.0e2, 8496, [35, 39], None;
            "sherman4", Lu, 1.8, 14211, [2, 3], Some("amd");
            "sherman4", Plain, 3.1e3, 0, [85, 93], None;
        ],
        TableId::T6 => rows![
            "bfwa782", spai(0.5), 1.1e3, 6261, [74, 92], None;
            "bfwa782", spai(0.3), 5.0e2, 11470, [54, 60], None;
            "bfwa782", Lu, 1.0, 21848, [1], Some("amd");
            "bfwa782", Plain, 6.8e3, 0, [172, 209], None;
            "cage5", spai(0.5), 9.9, 101, [8, 8], None;
            "cage5", spai(0.3), 3.9, 213, [6, 6], None;
            "cage5", Lu, 1.0, 359, [1], Some("amd");
            "cage5", Plain, 2.9e1, 0, [13, 12], None;
            "gre_115", spai(0.5), 6.2e2, 725, [24, 27], None;
            "gre_115", spai(0.3), 1.7e1, 1739, [10, 10], None;
            "gre_115", Lu, 1.0, 1556, [1], Some("nds");
            "gre_115", Plain, 1.4e2, 0, [49, 51], None;
            "orsreg_1", spai(0.5), 1.4e2, 9261, [25, 40, 32], None;
            "orsreg_1", spai(0.3), 1.1e2, 11025, [22, 38], None;
            "orsreg_1", Lu, 1.0, 330910, [1], Some("rcm");
            "orsreg_1", Plain, 7.0e3, 0, [107, 150, 95], None;
            "sherman4", spai(0.5), 1.6e3, 1385, [67, 73], None;
            "sherman4", spai(0.3), 5.0e2, 8499, [35, 39], None;
            "sherman4", Lu, 1.0, 14211, [1], Some("amd");
            "sherman4", Plain, 3.1e3, 0, [85, 93], None;
        ],
    }
}

pub fn within_band(got: f64, reference: f64, band: f64) -> bool {
    (got - reference).abs() <= band * reference.abs()
}

/// True when `a` and `b` agree to two significant figures, i.e. `a` rounds
/// to the same two-digit mantissa as `b`.
pub fn same_two_sig_figs(a: f64, b: f64) -> bool {
    fn two(x: f64) -> (i32, i64) {
        let e = x.abs().log10().floor() as i32;
        let m = (x.abs() / 10f64.powi(e - 1)).round() as i64;
        // 9.96 rounds up to 100 at this exponent
        if m >= 100 {
            (e + 1, m / 10)
        } else {
            (e, m)
        }
    }
    a > 0.0 && b > 0.0 && two(a) == two(b)
}

/// Measured outcome of one table row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowOutcome {
    pub table: TableId,
    pub matrix: String,
    pub preconditioner: String,
    pub eps: Option<f64>,
    pub report: IrReport,
    pub reference: ReferenceRow,
    /// `None` for rows that carry no band (the LU baseline).
    pub nnz_ok: Option<bool>,
    pub iters_ok: Option<bool>,
    pub errors_ok: bool,
}

impl RowOutcome {
    pub fn passed(&self) -> bool {
        self.nnz_ok.unwrap_or(true) && self.iters_ok.unwrap_or(true) && self.errors_ok
    }

    pub fn status(&self) -> &'static str {
        if self.nnz_ok.is_none() && self.iters_ok.is_none() {
            if self.errors_ok {
                "info"
            } else {
                "fail"
            }
        } else if self.passed() {
            "pass"
        } else {
            "fail"
        }
    }
}

pub fn table_config(table: TableId, kind: RowKind) -> IrConfig {
    let precisions = table.precisions();
    let mut cfg = IrConfig::new(kind.solver(), precisions);
    cfg.tau = table.tau();
    cfg.spai = SpaiParams::new(kind.eps().unwrap_or(0.3), precisions.uf);
    cfg
}

/// Runs one table row on `a` with the equal-component unit-norm right-hand
/// side.
pub fn run_row(
    a: &SparseMatrix,
    table: TableId,
    row: &ReferenceRow,
    reference: &ReferenceSolution,
) -> Result<RowOutcome> {
    let cfg = table_config(table, row.kind);
    let b = unit_rhs(a.nrows());
    let (_, report) = run_ir_with_reference(a, &b, &cfg, Some(reference))?;
    let limit = ERROR_FACTOR * a.nrows() as f64 * cfg.precisions.u.unit_roundoff();
    let errors_ok = report.converged
        && report.final_ferr().is_some_and(|e| e <= limit)
        && report.final_nbe().is_some_and(|e| e <= limit);
    let (nnz_ok, iters_ok) = match row.kind {
        RowKind::Spai { .. } => (
            Some(within_band(report.precond_nnz as f64, row.nnz as f64, NNZ_BAND)),
            Some(within_band(
                report.total_gmres_iters as f64,
                row.total_iters() as f64,
                ITER_BAND,
            )),
        ),
        RowKind::None => (
            None,
            Some(within_band(
                report.total_gmres_iters as f64,
                row.total_iters() as f64,
                ITER_BAND,
            )),
        ),
        RowKind::Lu => (None, None),
    };
    Ok(RowOutcome {
        table,
        matrix: row.matrix.to_string(),
        preconditioner: row.kind.label(),
        eps: row.kind.eps(),
        report,
        reference: row.clone(),
        nnz_ok,
        iters_ok,
        errors_ok,
    })
}

/// Fixed CSV header for table rows.
pub const TABLE_CSV_HEADER: [&str; 16] = [
    "table",
    "matrix",
    "preconditioner",
    "eps",
    "kappa_tilde",
    "nnz",
    "iterations",
    "converged",
    "final_ferr",
    "final_nbe",
    "ref_kappa_tilde",
    "ref_nnz",
    "ref_iterations",
    "nnz_ok",
    "iters_ok",
    "status",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RowOutcome {
    pub fn csv_record(&self) -> Vec<String> {
        let r = &self.reference;
        let ref_iters: Vec<String> = r.iters.iter().map(|k| k.to_string()).collect();
        vec![
            self.table.name().into(),
            self.matrix.clone(),
            self.preconditioner.clone(),
            opt(self.eps),
            opt(self.report.kappa_tilde.map(|k| format!("{k:.2e}"))),
            self.report.precond_nnz.to_string(),
            self.report.iteration_tuple(),
            self.report.converged.to_string(),
            opt(self.report.final_ferr().map(|e| format!("{e:.3e}"))),
            opt(self.report.final_nbe().map(|e| format!("{e:.3e}"))),
            format!("{:.2e}", r.kappa_tilde),
            r.nnz.to_string(),
            format!("{}({})", r.total_iters(), ref_iters.join(",")),
            opt(self.nnz_ok),
            opt(self.iters_ok),
            self.status().into(),
        ]
    }
}

/// A table row whose matrix file is not available.
pub fn missing_record(table: TableId, row: &ReferenceRow) -> Vec<String> {
    let ref_iters: Vec<String> = row.iters.iter().map(|k| k.to_string()).collect();
    vec![
        table.name().into(),
        row.matrix.into(),
        row.kind.label(),
        opt(row.kind.eps()),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        format!("{:.2e}", row.kappa_tilde),
        row.nnz.to_string(),
        format!("{}({})", row.total_iters(), ref_iters.join(",")),
        String::new(),
        String::new(),
        "missing".into(),
    ]
}

/// One cell of an epsilon sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub uf: Precision,
    pub nnz: Option<usize>,
    pub kappa_tilde: Option<f64>,
    /// `(1 + 2 n eps)^2`.
    pub estimate: f64,
    pub ratio: Option<f64>,
    pub all_satisfied: Option<bool>,
    /// `uf * cond_2(A^T) <= eps`, when `cond_2(A^T)` was supplied.
    pub feasible: Option<bool>,
    pub error: Option<String>,
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "eps",
    "uf",
    "nnz",
    "kappa_tilde",
    "estimate",
    "ratio",
    "all_satisfied",
    "feasible",
    "error",
];

impl SweepRow {
    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.eps.to_string(),
            self.uf.to_string(),
            opt(self.nnz),
            opt(self.kappa_tilde.map(|k| format!("{k:.4e}"))),
            format!("{:.4e}", self.estimate),
            opt(self.ratio.map(|r| format!("{r:.4e}"))),
            opt(self.all_satisfied),
            opt(self.feasible),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// Builds the SPAI preconditioner for one `(eps, uf)` cell and measures
/// `kappa_inf(P A)` against `(1 + 2 n eps)^2`. Failures are recorded in the
/// row rather than returned.
pub fn sweep_cell(a: &SparseMatrix, eps: f64, uf: Precision, cond2: Option<f64>, base: &SpaiParams) -> SweepRow {
    let n = a.nrows();
    let estimate = (1.0 + 2.0 * n as f64 * eps).powi(2);
    let mut row = SweepRow {
        eps,
        uf,
        nnz: None,
        kappa_tilde: None,
        estimate,
        ratio: None,
        all_satisfied: None,
        feasible: cond2.map(|c| uf.unit_roundoff() * c <= eps),
        error: None,
    };
    let params = SpaiParams {
        eps,
        uf,
        ..base.clone()
    };
    let result = build_left_preconditioner(a, &params).and_then(|pre| {
        let k = kappa_inf_dense(&preconditioned_dense(a, &pre.p)?)?;
        Ok((pre, k))
    });
    match result {
        Ok((pre, k)) => {
            row.nnz = Some(pre.nnz());
            row.kappa_tilde = Some(k);
            row.ratio = Some(k / estimate);
            row.all_satisfied = Some(pre.all_satisfied());
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Sweep over `eps_grid x uf_list`, evaluated in parallel and returned in
/// grid order (epsilon outer, precision inner).
pub fn sweep(
    a: &SparseMatrix,
    eps_grid: &[f64],
    uf_list: &[Precision],
    cond2: Option<f64>,
    base: &SpaiParams,
) -> Vec<SweepRow> {
    use rayon::prelude::*;
    let cells: Vec<(f64, Precision)> = eps_grid
        .iter()
        .flat_map(|&e| uf_list.iter().map(move |&p| (e, p)))
        .collect();
    cells
        .par_iter()
        .map(|&(e, p)| sweep_cell(a, e, p, cond2, base))
        .collect()
}

/// The epsilon grid used throughout the experiments.
pub const EPS_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
