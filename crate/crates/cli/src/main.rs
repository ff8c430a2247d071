use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spai_ir::analysis::{check_bounds, cond2_transpose, kappa_inf, BoundReport};
use spai_ir::experiments::{
    self, load_named, matrix_info, missing_record, reference_rows, run_row, RowOutcome, SweepRow, TableId, EPS_GRID,
    MATRICES, SWEEP_CSV_HEADER, TABLE_CSV_HEADER,
};
use spai_ir::gallery;
use spai_ir::refine::{default_tau, run_ir, unit_rhs, IrConfig, IrReport, Precisions, ReferenceSolution, SolverKind};
use spai_ir::spai::{build_left_preconditioner, SpaiParams};
use spai_ir::sparse::{read_matrix_market_file, write_matrix_market, SparseMatrix};
use spai_ir::Precision;

/// Exit status for a run that finished without converging, or a table with
/// failing or missing rows.
const NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "spai-ir",
    version,
    about = "Mixed-precision SPAI-preconditioned GMRES-based iterative refinement"
)]
struct Cli {
    /// Folder searched for `<name>.mtx` when --matrix is not a path.
    #[arg(long, global = true, env = "SPAI_IR_MATRIX_DIR", default_value = experiments::DEFAULT_MATRIX_DIR)]
    matrix_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve A x = b (b has equal components and unit 2-norm) by iterative refinement.
    Solve(SolveArgs),
    /// Build SPAI preconditioners over a grid of eps and factorization precisions.
    Sweep(SweepArgs),
    /// Re-run a comparison table against its reference values.
    Table(TableArgs),
    /// Check the SPAI residual and distance-to-inverse bounds.
    Bounds(BoundsArgs),
    /// Print kappa_inf(A) and cond_2(A^T).
    Cond(CondArgs),
    /// Write the synthetic test matrices as Matrix Market files.
    Gallery(GalleryArgs),
}

#[derive(Clone, Copy, Default)]
enum Format {
    #[default]
    Human,
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Write output to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, conflicts_with = "csv")]
    json: bool,
    #[arg(long)]
    csv: bool,
}

impl OutputArgs {
    fn format(&self) -> Format {
        if self.json {
            Format::Json
        } else if self.csv {
            Format::Csv
        } else {
            Format::Human
        }
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct SpaiArgs {
    /// Per-column residual tolerance.
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Maximum augmentation rounds per column (default ceil(n / beta)).
    #[arg(long)]
    alpha: Option<usize>,
    /// Maximum indices added per round.
    #[arg(long, default_value_t = 8)]
    beta: usize,
}

impl SpaiArgs {
    fn params(&self, uf: Precision) -> SpaiParams {
        SpaiParams {
            eps: self.eps,
            alpha: self.alpha,
            beta: self.beta,
            ..SpaiParams::new(self.eps, uf)
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    matrix: String,
    /// spai, lu, none or sir.
    #[arg(long, default_value = "spai")]
    solver: SolverKind,
    /// uf,u,ur[,ug,up] using h, s, d, q.
    #[arg(long, default_value = "s,d,q")]
    precisions: Precisions,
    #[command(flatten)]
    spai: SpaiArgs,
    /// GMRES tolerance (default 1e-4 when u is single, 1e-8 when double).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 10)]
    imax: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    matrix: String,
    /// Comma-separated eps values.
    #[arg(long, value_delimiter = ',', default_values_t = EPS_GRID)]
    eps_grid: Vec<f64>,
    /// Comma-separated factorization precisions.
    #[arg(long, value_delimiter = ',', default_values_t = [Precision::Single, Precision::Double])]
    uf: Vec<Precision>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long, default_value_t = 8)]
    beta: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TableArgs {
    /// t4, t5 or t6.
    name: TableId,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    matrix: String,
    #[arg(long, default_value = "s")]
    uf: Precision,
    #[command(flatten)]
    spai: SpaiArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CondArgs {
    #[arg(long)]
    matrix: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct GalleryArgs {
    /// Destination folder.
    #[arg(long, default_value = experiments::DEFAULT_MATRIX_DIR)]
    out: PathBuf,
}

/// Accepts a file path, or a bare name looked up as `<dir>/<name>.mtx`.
fn resolve_matrix(dir: &Path, arg: &str) -> Result<(String, SparseMatrix)> {
    let direct = PathBuf::from(arg);
    let path = if direct.is_file() {
        direct
    } else {
        let named = dir.join(format!("{arg}.mtx"));
        if !named.is_file() {
            bail!("matrix `{arg}` not found (also looked for {})", named.display());
        }
        named
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| arg.to_string());
    let a = read_matrix_market_file(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok((name, a))
}

fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn json_text<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    matrix: &'a str,
    report: &'a IrReport,
}

const SOLVE_CSV_HEADER: [&str; 12] = [
    "matrix",
    "solver",
    "precisions",
    "eps",
    "tau",
    "precond_nnz",
    "kappa_tilde",
    "steps",
    "iterations",
    "converged",
    "final_ferr",
    "final_nbe",
];

fn cmd_solve(dir: &Path, args: &SolveArgs) -> Result<u8> {
    let (name, a) = resolve_matrix(dir, &args.matrix)?;
    let mut cfg = IrConfig::new(args.solver, args.precisions);
    cfg.tau = args.tau.unwrap_or_else(|| default_tau(args.precisions.u));
    cfg.i_max = args.imax;
    cfg.spai = args.spai.params(args.precisions.uf);
    let b = unit_rhs(a.nrows());
    let (_, report) = run_ir(&a, &b, &cfg)?;
    let text = match args.output.format() {
        Format::Json => json_text(&SolveOutput {
            matrix: &name,
            report: &report,
        })?,
        Format::Csv => csv_text(
            &SOLVE_CSV_HEADER,
            [vec![
                name.clone(),
                report.solver.to_string(),
                report.precisions.to_string(),
                report.eps.map(|e| e.to_string()).unwrap_or_default(),
                report.tau.to_string(),
                report.precond_nnz.to_string(),
                report.kappa_tilde.map(|k| format!("{k:.4e}")).unwrap_or_default(),
                report.steps.to_string(),
                report.iteration_tuple(),
                report.converged.to_string(),
                report.final_ferr().map(|e| format!("{e:.4e}")).unwrap_or_default(),
                report.final_nbe().map(|e| format!("{e:.4e}")).unwrap_or_default(),
            ]],
        )?,
        Format::Human => {
            let mut s = String::new();
            s += &format!("matrix       {name} (n = {}, nnz = {})\n", report.n, report.nnz_a);
            s += &format!(
                "solver       {}  precisions {}  tau {:e}\n",
                report.solver, report.precisions, report.tau
            );
            if let Some(eps) = report.eps {
                s += &format!("eps          {eps}\n");
            }
            s += &format!("precond nnz  {}\n", report.precond_nnz);
            s += &format!("kappa(PA)    {}\n", sci(report.kappa_tilde));
            if let Some(u) = report.spai_unsatisfied_columns {
                s += &format!("unsatisfied  {u} columns\n");
            }
            s += &format!("iterations   {}\n", report.iteration_tuple());
            s += &format!("final ferr   {}\n", sci(report.final_ferr()));
            s += &format!("final nbe    {}\n", sci(report.final_nbe()));
            let state = if report.converged {
                "converged"
            } else if report.stagnated {
                "stagnated"
            } else {
                "not converged"
            };
            s += &format!("status       {state}\n");
            s
        }
    };
    args.output.emit(&text)?;
    Ok(if report.converged { 0 } else { NOT_CONVERGED })
}

fn cmd_sweep(dir: &Path, args: &SweepArgs) -> Result<u8> {
    let (name, a) = resolve_matrix(dir, &args.matrix)?;
    if args.eps_grid.is_empty() || args.uf.is_empty() {
        bail!("empty sweep grid");
    }
    let cond2 = cond2_transpose(&a).ok();
    let base = SpaiParams {
        alpha: args.alpha,
        beta: args.beta,
        ..SpaiParams::default()
    };
    let rows = experiments::sweep(&a, &args.eps_grid, &args.uf, cond2, &base);
    let text = match args.output.format() {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                matrix: &'a str,
                n: usize,
                cond2_transpose: Option<f64>,
                rows: &'a [SweepRow],
            }
            json_text(&Out {
                matrix: &name,
                n: a.nrows(),
                cond2_transpose: cond2,
                rows: &rows,
            })?
        }
        Format::Csv => csv_text(&SWEEP_CSV_HEADER, rows.iter().map(SweepRow::csv_record))?,
        Format::Human => {
            let mut s = format!("{name}: n = {}, cond2(A^T) = {}\n", a.nrows(), sci(cond2));
            s += &format!(
                "{:>5} {:>7} {:>8} {:>11} {:>11} {:>11} {:>9} {:>8}\n",
                "eps", "uf", "nnz", "kappa(PA)", "(1+2ne)^2", "ratio", "satisfied", "feasible"
            );
            for r in &rows {
                if let Some(e) = &r.error {
                    s += &format!("{:>5} {:>7} error: {e}\n", r.eps, r.uf.to_string());
                    continue;
                }
                s += &format!(
                    "{:>5} {:>7} {:>8} {:>11} {:>11.3e} {:>11} {:>9} {:>8}\n",
                    r.eps,
                    r.uf.to_string(),
                    r.nnz.map(|v| v.to_string()).unwrap_or_default(),
                    sci(r.kappa_tilde),
                    r.estimate,
                    sci(r.ratio),
                    r.all_satisfied.map(|v| v.to_string()).unwrap_or_default(),
                    r.feasible.map(|v| v.to_string()).unwrap_or_default(),
                );
            }
            s
        }
    };
    args.output.emit(&text)?;
    Ok(0)
}

enum TableRow {
    Ran(Box<RowOutcome>),
    Missing(Vec<String>),
    Failed(Vec<String>, String),
}

impl TableRow {
    fn record(&self) -> Vec<String> {
        match self {
            TableRow::Ran(o) => o.csv_record(),
            TableRow::Missing(r) => r.clone(),
            TableRow::Failed(r, _) => r.clone(),
        }
    }

    fn ok(&self) -> bool {
        matches!(self, TableRow::Ran(o) if o.status() != "fail")
    }
}

fn cmd_table(dir: &Path, args: &TableArgs) -> Result<u8> {
    let table = args.name;
    let mut rows = Vec::new();
    let mut cache: Vec<(&str, Option<(SparseMatrix, ReferenceSolution)>)> = Vec::new();
    for row in reference_rows(table) {
        if !cache.iter().any(|(n, _)| *n == row.matrix) {
            let loaded = match load_named(dir, row.matrix)? {
                Some(a) => {
                    let reference = ReferenceSolution::new(&a, &unit_rhs(a.nrows()))?;
                    Some((a, reference))
                }
                None => None,
            };
            cache.push((row.matrix, loaded));
        }
        let entry = cache.iter().find(|(n, _)| *n == row.matrix).map(|(_, v)| v);
        let out = match entry {
            Some(Some((a, reference))) => match run_row(a, table, &row, reference) {
                Ok(o) => TableRow::Ran(Box::new(o)),
                Err(e) => {
                    let mut rec = missing_record(table, &row);
                    *rec.last_mut().expect("status column") = "error".into();
                    TableRow::Failed(rec, e.to_string())
                }
            },
            _ => TableRow::Missing(missing_record(table, &row)),
        };
        rows.push(out);
    }
    let all_ok = rows.iter().all(TableRow::ok);
    let text = match args.output.format() {
        Format::Json => {
            #[derive(Serialize)]
            #[serde(tag = "status", rename_all = "lowercase")]
            enum JsonRow<'a> {
                Ran(&'a RowOutcome),
                Missing { record: &'a [String] },
                Error { record: &'a [String], message: &'a str },
            }
            let items: Vec<JsonRow> = rows
                .iter()
                .map(|r| match r {
                    TableRow::Ran(o) => JsonRow::Ran(o),
                    TableRow::Missing(rec) => JsonRow::Missing { record: rec },
                    TableRow::Failed(rec, m) => JsonRow::Error {
                        record: rec,
                        message: m,
                    },
                })
                .collect();
            json_text(&items)?
        }
        Format::Csv => csv_text(&TABLE_CSV_HEADER, rows.iter().map(TableRow::record))?,
        Format::Human => {
            let mut s = format!(
                "{:<9} {:<12} {:>10} {:>8} {:>16} | {:>10} {:>8} {:>16} | {}\n",
                "matrix",
                "precond",
                "kappa(PA)",
                "nnz",
                "iterations",
                "ref kappa",
                "ref nnz",
                "ref iterations",
                "status"
            );
            for r in &rows {
                let rec = r.record();
                s += &format!(
                    "{:<9} {:<12} {:>10} {:>8} {:>16} | {:>10} {:>8} {:>16} | {}\n",
                    rec[1], rec[2], rec[4], rec[5], rec[6], rec[10], rec[11], rec[12], rec[15]
                );
                if let TableRow::Failed(_, m) = r {
                    s += &format!("  error: {m}\n");
                }
            }
            s
        }
    };
    args.output.emit(&text)?;
    Ok(if all_ok { 0 } else { NOT_CONVERGED })
}

fn cmd_bounds(dir: &Path, args: &BoundsArgs) -> Result<u8> {
    let (name, a) = resolve_matrix(dir, &args.matrix)?;
    let params = args.spai.params(args.uf);
    let pre = build_left_preconditioner(&a, &params)?;
    let report = check_bounds(&a, &pre, &params)?;
    let violated = report.verify().err();
    let text = match args.output.format() {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                matrix: &'a str,
                uf: Precision,
                nnz: usize,
                unsatisfied_columns: usize,
                bounds: &'a BoundReport,
            }
            json_text(&Out {
                matrix: &name,
                uf: args.uf,
                nnz: pre.nnz(),
                unsatisfied_columns: pre.unsatisfied_count(),
                bounds: &report,
            })?
        }
        Format::Csv => csv_text(
            &[
                "matrix",
                "uf",
                "eps",
                "nnz",
                "unsatisfied",
                "norm_i_minus_pa",
                "bound_2n_eps",
                "dist_to_inverse",
                "dist_bound",
                "kappa_tilde",
                "estimate",
                "cond2_transpose",
                "feasible",
            ],
            [vec![
                name.clone(),
                args.uf.to_string(),
                report.eps.to_string(),
                pre.nnz().to_string(),
                pre.unsatisfied_count().to_string(),
                format!("{:.4e}", report.norm_i_minus_pa),
                format!("{:.4e}", report.bound_2n_eps),
                format!("{:.4e}", report.dist_to_inverse),
                format!("{:.4e}", report.dist_bound),
                format!("{:.4e}", report.kappa_tilde),
                format!("{:.4e}", report.estimate),
                format!("{:.4e}", report.cond2_transpose),
                report.feasible.to_string(),
            ]],
        )?,
        Format::Human => {
            let mark = |ok: bool| if ok { "ok" } else { "VIOLATED" };
            let mut s = format!("{name}: n = {}, eps = {}, uf = {}\n", report.n, report.eps, args.uf);
            s += &format!("nnz(P)            {}\n", pre.nnz());
            s += &format!("unsatisfied       {}\n", pre.unsatisfied_count());
            s += &format!(
                "||I - PA||_inf    {:.3e} <= {:.3e}  {}\n",
                report.norm_i_minus_pa,
                report.bound_2n_eps,
                mark(report.residual_bound_holds())
            );
            s += &format!(
                "||P - A^-1||_inf  {:.3e} <= {:.3e}  {}\n",
                report.dist_to_inverse,
                report.dist_bound,
                mark(report.inverse_bound_holds())
            );
            s += &format!(
                "kappa(PA)         {:.3e}  (1+2n eps)^2 = {:.3e}, ratio {:.3e}\n",
                report.kappa_tilde, report.estimate, report.estimate_ratio
            );
            s += &format!(
                "cond2(A^T)        {:.3e}  feasible: {}\n",
                report.cond2_transpose, report.feasible
            );
            s
        }
    };
    args.output.emit(&text)?;
    if let Some(e) = violated {
        eprintln!("bound violated: {e}");
        return Ok(NOT_CONVERGED);
    }
    Ok(0)
}

fn cmd_cond(dir: &Path, args: &CondArgs) -> Result<u8> {
    let (name, a) = resolve_matrix(dir, &args.matrix)?;
    let k = kappa_inf(&a)?;
    let c = cond2_transpose(&a)?;
    let reference = matrix_info(&name);
    let text = match args.output.format() {
        Format::Json => {
            #[derive(Serialize)]
            struct Out<'a> {
                matrix: &'a str,
                n: usize,
                nnz: usize,
                kappa_inf: f64,
                cond2_transpose: f64,
                reference: Option<&'a experiments::MatrixInfo>,
            }
            json_text(&Out {
                matrix: &name,
                n: a.nrows(),
                nnz: a.nnz(),
                kappa_inf: k,
                cond2_transpose: c,
                reference,
            })?
        }
        Format::Csv => csv_text(
            &["matrix", "n", "nnz", "kappa_inf", "cond2_transpose"],
            [vec![
                name.clone(),
                a.nrows().to_string(),
                a.nnz().to_string(),
                format!("{k:.4e}"),
                format!("{c:.4e}"),
            ]],
        )?,
        Format::Human => {
            let mut s = format!("{name}: n = {}, nnz = {}\n", a.nrows(), a.nnz());
            s += &format!("kappa_inf(A)   {k:.3e}\n");
            s += &format!("cond2(A^T)     {c:.3e}\n");
            if let Some(r) = reference {
                s += &format!("reference      {:.1e} / {:.1e}\n", r.kappa_inf, r.cond2_transpose);
            }
            s
        }
    };
    args.output.emit(&text)?;
    Ok(0)
}

fn cmd_gallery(args: &GalleryArgs) -> Result<u8> {
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut manifest = csv::Writer::from_writer(Vec::new());
    manifest.write_record(["name", "n", "nnz", "source"])?;
    for (name, a) in gallery::shipped() {
        let path = args.out.join(format!("{name}.mtx"));
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_matrix_market(&a, std::io::BufWriter::new(file))?;
        manifest.write_record([
            name.to_string(),
            a.nrows().to_string(),
            a.nnz().to_string(),
            "generated".into(),
        ])?;
        println!("wrote {}", path.display());
    }
    for info in &MATRICES {
        manifest.write_record([
            info.name.to_string(),
            info.n.to_string(),
            info.nnz.to_string(),
            "suitesparse".into(),
        ])?;
    }
    let path = args.out.join("manifest.csv");
    fs::write(&path, manifest.into_inner()?)?;
    println!("wrote {}", path.display());
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8> {
    let dir = &cli.matrix_dir;
    match &cli.command {
        Command::Solve(a) => cmd_solve(dir, a),
        Command::Sweep(a) => cmd_sweep(dir, a),
        Command::Table(a) => cmd_table(dir, a),
        Command::Bounds(a) => cmd_bounds(dir, a),
        Command::Cond(a) => cmd_cond(dir, a),
        Command::Gallery(a) => cmd_gallery(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
