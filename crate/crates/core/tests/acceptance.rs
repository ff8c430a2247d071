// Acceptance suite. Prints one PASS / FAIL / BLOCKED line per criterion and
// exits nonzero if any criterion fails. BLOCKED means the inputs a criterion
// needs (the benchmark matrix files) are not available.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spai_ir::analysis::{check_bounds_with, cond2_transpose, kappa_inf};
use spai_ir::dd::DoubleDouble;
use spai_ir::dense::inverse;
use spai_ir::experiments::{
    load_named, reference_rows, run_row, same_two_sig_figs, sweep, table_config, RowKind, TableId, EPS_GRID, ITER_BAND,
    MATRICES, MATRIX_DIR_ENV, NNZ_BAND,
};
use spai_ir::gallery;
use spai_ir::krylov::{pgmres_left, GmresConfig, Identity};
use spai_ir::refine::{run_ir_with_reference, unit_rhs, ReferenceSolution};
use spai_ir::spai::{build_left_preconditioner, build_spai, rho_score, SpaiParams};
use spai_ir::sparse::{extract_submatrix, shadow, IndexSet, SparseMatrix};
use spai_ir::{DenseMatrix, Precision};

enum Verdict {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn matrix_dir() -> PathBuf {
    std::env::var_os(MATRIX_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/matrices"))
}

/// The nine benchmark matrices that are present, plus the names of those
/// that are not. Files that exist but fail to load are reported as errors.
struct Benchmarks {
    found: BTreeMap<&'static str, SparseMatrix>,
    missing: Vec<&'static str>,
    errors: Vec<String>,
}

impl Benchmarks {
    fn load() -> Self {
        let dir = matrix_dir();
        let mut out = Benchmarks {
            found: BTreeMap::new(),
            missing: Vec::new(),
            errors: Vec::new(),
        };
        for info in &MATRICES {
            match load_named(&dir, info.name) {
                Ok(Some(a)) => {
                    out.found.insert(info.name, a);
                }
                Ok(None) => out.missing.push(info.name),
                Err(e) => out.errors.push(format!("{}: {e}", info.name)),
            }
        }
        out
    }

    fn need(&self, names: &[&str]) -> Option<String> {
        let mut absent: Vec<&str> = names.iter().copied().filter(|n| !self.found.contains_key(n)).collect();
        absent.dedup();
        (!absent.is_empty()).then(|| format!("missing {} in {}", absent.join(", "), matrix_dir().display()))
    }
}

// Folds per-item failures and a possible missing-input note into a verdict.
// Failures on the inputs that are present take priority over BLOCKED.
fn conclude(failures: Vec<String>, checked: usize, blocked: Option<String>, what: &str) -> Verdict {
    if !failures.is_empty() {
        let shown: Vec<String> = failures.iter().take(4).cloned().collect();
        let more = failures.len().saturating_sub(4);
        let tail = if more > 0 {
            format!(" (+{more} more)")
        } else {
            String::new()
        };
        return Verdict::Fail(format!("{}{tail}", shown.join("; ")));
    }
    match blocked {
        Some(why) => Verdict::Blocked(format!("{checked} {what} passed; {why}")),
        None => Verdict::Pass(format!("{checked} {what}")),
    }
}

fn criterion_1(bench: &Benchmarks) -> Verdict {
    let mut cases: Vec<(String, SparseMatrix)> = gallery::shipped()
        .into_iter()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    cases.extend(bench.found.iter().map(|(n, a)| (n.to_string(), a.clone())));
    let mut failures = Vec::new();
    let mut checked = 0;
    for (name, a) in &cases {
        let cond2 = match cond2_transpose(a) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("{name}: cond2 {e}"));
                continue;
            }
        };
        for &eps in &EPS_GRID {
            for uf in [Precision::Half, Precision::Single] {
                if uf.unit_roundoff() * cond2 > eps {
                    continue;
                }
                let params = SpaiParams::new(eps, uf);
                let result = build_left_preconditioner(a, &params)
                    .and_then(|pre| Ok((check_bounds_with(a, &pre, &params, Some(cond2))?, pre)));
                checked += 1;
                match result {
                    Ok((rep, pre)) => {
                        if !pre.all_satisfied() {
                            failures.push(format!(
                                "{name} eps={eps} uf={uf}: {} unsatisfied columns",
                                pre.unsatisfied_count()
                            ));
                        } else if !rep.residual_bound_holds() {
                            failures.push(format!(
                                "{name} eps={eps} uf={uf}: ||I-PA|| {:.3e} > {:.3e}",
                                rep.norm_i_minus_pa, rep.bound_2n_eps
                            ));
                        } else if !rep.inverse_bound_holds() {
                            failures.push(format!(
                                "{name} eps={eps} uf={uf}: ||P-A^-1|| {:.3e} > {:.3e}",
                                rep.dist_to_inverse, rep.dist_bound
                            ));
                        }
                    }
                    Err(e) => failures.push(format!("{name} eps={eps} uf={uf}: {e}")),
                }
            }
        }
    }
    let blocked = bench.need(&MATRICES.map(|m| m.name));
    conclude(failures, checked, blocked, "feasible (matrix, eps, uf) cases")
}

fn criterion_2(bench: &Benchmarks) -> Verdict {
    let mut failures = bench.errors.clone();
    let mut checked = 0;
    for info in &MATRICES {
        let Some(a) = bench.found.get(info.name) else { continue };
        checked += 1;
        match (kappa_inf(a), cond2_transpose(a)) {
            (Ok(k), Ok(c)) => {
                if !same_two_sig_figs(k, info.kappa_inf) {
                    failures.push(format!("{}: kappa_inf {k:.2e} vs {:.1e}", info.name, info.kappa_inf));
                }
                if !same_two_sig_figs(c, info.cond2_transpose) {
                    failures.push(format!(
                        "{}: cond2(A^T) {c:.2e} vs {:.1e}",
                        info.name, info.cond2_transpose
                    ));
                }
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("{}: {e}", info.name)),
        }
    }
    conclude(failures, checked, bench.need(&MATRICES.map(|m| m.name)), "matrices")
}

fn table_criterion(bench: &Benchmarks, table: TableId) -> Verdict {
    let rows = reference_rows(table);
    let names: Vec<&str> = rows.iter().map(|r| r.matrix).collect();
    let mut failures = bench.errors.clone();
    let mut checked = 0;
    let mut references: BTreeMap<&str, ReferenceSolution> = BTreeMap::new();
    for row in &rows {
        let Some(a) = bench.found.get(row.matrix) else { continue };
        let reference = match references.get(row.matrix) {
            Some(r) => r.clone(),
            None => match ReferenceSolution::new(a, &unit_rhs(a.nrows())) {
                Ok(r) => {
                    references.insert(row.matrix, r.clone());
                    r
                }
                Err(e) => {
                    failures.push(format!("{}: reference {e}", row.matrix));
                    continue;
                }
            },
        };
        checked += 1;
        match run_row(a, table, row, &reference) {
            Ok(out) if out.passed() => {}
            Ok(out) => failures.push(format!(
                "{} {}: nnz {} (ref {}), iters {} (ref {}), converged {}",
                row.matrix,
                out.preconditioner,
                out.report.precond_nnz,
                row.nnz,
                out.report.iteration_tuple(),
                row.total_iters(),
                out.errors_ok
            )),
            Err(e) => failures.push(format!("{} {}: {e}", row.matrix, row.kind.label())),
        }
    }
    conclude(failures, checked, bench.need(&names), "rows")
}

fn criterion_5(bench: &Benchmarks) -> Verdict {
    let rows: Vec<_> = reference_rows(TableId::T6)
        .into_iter()
        .filter(|r| matches!(r.kind, RowKind::Spai { .. }))
        .collect();
    let names: Vec<&str> = rows.iter().map(|r| r.matrix).collect();
    let mut failures = bench.errors.clone();
    let mut checked = 0;
    for row in &rows {
        let Some(a) = bench.found.get(row.matrix) else { continue };
        let b = unit_rhs(a.nrows());
        let run = |table: TableId| {
            let reference = ReferenceSolution::new(a, &b)?;
            run_ir_with_reference(a, &b, &table_config(table, row.kind), Some(&reference)).map(|r| r.1)
        };
        checked += 1;
        match (run(TableId::T6), run(TableId::T5)) {
            (Ok(single), Ok(half)) => {
                let (is, ih) = (single.total_gmres_iters as f64, half.total_gmres_iters as f64);
                let (ns, nh) = (single.precond_nnz as f64, half.precond_nnz as f64);
                let iters_ok = (is - ih).abs() <= ITER_BAND * is.max(ih);
                let nnz_ok = (ns - nh).abs() <= NNZ_BAND * ns.max(nh);
                if !(iters_ok && nnz_ok) {
                    failures.push(format!(
                        "{} {}: iters {is} vs {ih}, nnz {ns} vs {nh}",
                        row.matrix,
                        row.kind.label()
                    ));
                }
            }
            (Err(e), _) | (_, Err(e)) => failures.push(format!("{} {}: {e}", row.matrix, row.kind.label())),
        }
    }
    conclude(failures, checked, bench.need(&names), "SPAI rows")
}

fn criterion_6(bench: &Benchmarks) -> Verdict {
    let names = ["saylr1", "steam3"];
    let mut failures = bench.errors.clone();
    let mut checked = 0;
    for name in names {
        let Some(a) = bench.found.get(name) else { continue };
        let base = SpaiParams::default();
        for cell in sweep(a, &EPS_GRID, &[Precision::Single, Precision::Double], None, &base) {
            checked += 1;
            match cell.ratio {
                Some(r) if (0.5..=50.0).contains(&r) => {}
                Some(r) => failures.push(format!("{name} eps={} uf={}: ratio {r:.3e}", cell.eps, cell.uf)),
                None => failures.push(format!(
                    "{name} eps={} uf={}: {}",
                    cell.eps,
                    cell.uf,
                    cell.error.unwrap_or_default()
                )),
            }
        }
    }
    conclude(failures, checked, bench.need(&names), "sweep cells")
}

// Least squares via the normal equations in double-double: a route
// independent of the Householder kernel and accurate well below double
// roundoff for the well-conditioned blocks used here. The SVD only supplies
// kappa_2.
#[allow(clippy::needless_range_loop)]
fn dd_lstsq(abar: &DenseMatrix, ebar: &[f64]) -> (Vec<f64>, f64) {
    let (m, q) = (abar.nrows(), abar.ncols());
    let zero = DoubleDouble::from(0.0);
    let mut g = vec![vec![zero; q + 1]; q];
    for r in 0..q {
        for c in 0..q {
            g[r][c] = (0..m).fold(zero, |s, i| s + DoubleDouble::from_product(abar[(i, r)], abar[(i, c)]));
        }
        g[r][q] = (0..m).fold(zero, |s, i| s + DoubleDouble::from_product(abar[(i, r)], ebar[i]));
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
    let mut x = vec![zero; q];
    for r in (0..q).rev() {
        let s = (r + 1..q).fold(g[r][q], |s, c| s - g[r][c] * x[c]);
        x[r] = s / g[r][r];
    }
    let sv = nalgebra::DMatrix::from_row_slice(m, q, abar.as_slice()).singular_values();
    (x.into_iter().map(DoubleDouble::to_f64).collect(), sv.max() / sv.min())
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a1);
    let mut failures = Vec::new();
    let mut columns = 0;
    for trial in 0..50 {
        let n = rng.gen_range(5..=20);
        let a = gallery::random_diag_dominant(n, rng.gen_range(0.1..0.4), rng.gen());
        for uf in [Precision::Single, Precision::Double] {
            let params = SpaiParams::new(0.3, uf);
            let inv = match build_spai(&a, &params) {
                Ok(m) => m,
                Err(e) => {
                    failures.push(format!("trial {trial} {uf}: {e}"));
                    continue;
                }
            };
            for (k, col) in inv.columns.iter().enumerate() {
                let j_set = IndexSet::from_unsorted(col.pattern.clone());
                let mut i_set = shadow(&a, &j_set);
                i_set.insert(k);
                let abar = extract_submatrix(&a, &i_set, &j_set);
                let ebar: Vec<f64> = i_set.iter().map(|i| (i == k) as u8 as f64).collect();
                let (oracle, kappa) = dd_lstsq(&abar, &ebar);
                let got: Vec<f64> = j_set.iter().map(|j| inv.m.get(j, k)).collect();
                let err = got
                    .iter()
                    .zip(&oracle)
                    .map(|(x, y)| (x - y).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let size = oracle.iter().map(|y| y * y).sum::<f64>().sqrt();
                let bound = 10.0 * n as f64 * uf.unit_roundoff() * kappa;
                columns += 1;
                if err > bound * size {
                    failures.push(format!(
                        "trial {trial} n={n} {uf} column {k}: {:.2e} > {bound:.2e}",
                        err / size
                    ));
                }
            }
        }
    }
    let mut rho_checked = 0;
    for _ in 0..500 {
        let len = rng.gen_range(2..=12);
        let s: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = |mu: f64| s.iter().zip(&a).map(|(x, y)| (x + mu * y).powi(2)).sum::<f64>().sqrt();
        let oracle = golden_section_min(f, -1e4, 1e4);
        let Some(rho) = rho_score(&s, &a, Precision::Double) else {
            failures.push("rho undefined for a nonzero column".into());
            continue;
        };
        rho_checked += 1;
        if (rho - oracle).abs() > 1e-8 * oracle {
            failures.push(format!("rho {rho:.12e} vs oracle {oracle:.12e}"));
        }
    }
    conclude(
        failures,
        columns,
        None,
        &format!("columns over 50 matrices x {{s,d}}; {rho_checked} rho scores"),
    )
}

fn criterion_8() -> Verdict {
    let mut failures = Vec::new();
    let mut cases = 0;
    for seed in 0..5 {
        let a = gallery::random_diag_dominant(15, 0.3, 100 + seed);
        let p = inverse(&a.to_dense()).expect("nonsingular");
        let r = unit_rhs(15);
        let cfg = GmresConfig::new(1e-10, Precision::Double, Precision::Double);
        cases += 1;
        match pgmres_left(&a, &p, &r, &cfg) {
            Ok((_, rep)) if rep.iters == 1 && rep.converged => {}
            Ok((_, rep)) => failures.push(format!("exact inverse seed {seed}: {} iterations", rep.iters)),
            Err(e) => failures.push(format!("exact inverse seed {seed}: {e}")),
        }
    }
    for n in 1..=20 {
        let a = SparseMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, (i + 1) as f64)).collect::<Vec<_>>())
            .expect("diagonal");
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let exact: Vec<f64> = b.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).collect();
        let cfg = GmresConfig::new(1e-13, Precision::Double, Precision::Double);
        cases += 1;
        match pgmres_left(&a, &Identity(n), &b, &cfg) {
            Ok((x, rep)) => {
                let err = x.iter().zip(&exact).fold(0.0_f64, |m, (g, e)| m.max((g - e).abs()));
                let size = exact.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
                if rep.iters > n || err > 1e-10 * size {
                    failures.push(format!(
                        "diag n={n}: {} iterations, rel err {:.2e}",
                        rep.iters,
                        err / size
                    ));
                }
            }
            Err(e) => failures.push(format!("diag n={n}: {e}")),
        }
    }
    conclude(failures, cases, None, "GMRES cases")
}

fn criterion_9(bench: &Benchmarks) -> Verdict {
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut cases: Vec<(String, SparseMatrix)> = gallery::shipped()
        .into_iter()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    if let Some(a) = bench.found.get("cage5") {
        cases.push(("cage5".into(), a.clone()));
    }
    for (name, a) in &cases {
        for table in TableId::ALL {
            for kind in [RowKind::Spai { eps: 0.3 }, RowKind::Lu, RowKind::None] {
                let b = unit_rhs(a.nrows());
                let once = || -> Result<String, String> {
                    let reference = ReferenceSolution::new(a, &b).map_err(|e| e.to_string())?;
                    let (x, rep) = run_ir_with_reference(a, &b, &table_config(table, kind), Some(&reference))
                        .map_err(|e| e.to_string())?;
                    serde_json::to_string(&(x, rep)).map_err(|e| e.to_string())
                };
                runs += 1;
                match (once(), once()) {
                    (Ok(x), Ok(y)) if x == y => {}
                    (Ok(_), Ok(_)) => failures.push(format!("{name} {} {}: JSON differs", table.name(), kind.label())),
                    // a failing configuration must fail the same way twice
                    (Err(x), Err(y)) if x == y => {}
                    (x, y) => failures.push(format!("{name} {} {}: {x:?} vs {y:?}", table.name(), kind.label())),
                }
            }
        }
        for uf in [Precision::Half, Precision::Single, Precision::Double] {
            let params = SpaiParams::new(0.2, uf);
            let build = |threads: usize| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .expect("thread pool")
                    .install(|| build_left_preconditioner(a, &params).map(|p| p.p))
            };
            let one = build(1);
            let many = build(8);
            runs += 1;
            let same = match (&one, &many) {
                (Ok(x), Ok(y)) => {
                    x.colptr() == y.colptr()
                        && x.rowind() == y.rowind()
                        && x.values()
                            .iter()
                            .zip(y.values())
                            .all(|(u, v)| u.to_bits() == v.to_bits())
                }
                (Err(x), Err(y)) => x.to_string() == y.to_string(),
                _ => false,
            };
            if !same {
                failures.push(format!("{name} uf={uf}: P differs between 1 and 8 threads"));
            }
        }
    }
    conclude(failures, runs, None, "repeated runs and thread comparisons")
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);

fn main() -> ExitCode {
    let bench = Benchmarks::load();
    let criteria: Vec<Criterion> = vec![
        (
            "bound suite on feasible (matrix, eps, uf)",
            Box::new(|| criterion_1(&bench)),
        ),
        (
            "condition numbers of the nine benchmark matrices",
            Box::new(|| criterion_2(&bench)),
        ),
        (
            "s,d,q table, tau 1e-8",
            Box::new(|| table_criterion(&bench, TableId::T4)),
        ),
        (
            "h,s,d table, tau 1e-4",
            Box::new(|| table_criterion(&bench, TableId::T5)),
        ),
        ("half vs single uf insensitivity", Box::new(|| criterion_5(&bench))),
        ("kappa(PA) / (1+2n eps)^2 trend", Box::new(|| criterion_6(&bench))),
        ("SPAI columns and rho against dense oracles", Box::new(criterion_7)),
        ("GMRES sanity", Box::new(criterion_8)),
        ("determinism", Box::new(|| criterion_9(&bench))),
    ];
    let mut failed = false;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed = true;
                ("FAIL", d)
            }
            Verdict::Blocked(d) => ("BLOCKED", d),
        };
        println!("criterion {}: {tag} - {title} [{secs:.1}s] {detail}", i + 1);
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
