use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn spai_ir(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spai-ir"))
        .args(args)
        .env("SPAI_IR_MATRIX_DIR", dir)
        .output()
        .expect("spawn spai-ir")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn gallery() -> TempDir {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = spai_ir(dir.path(), &["gallery", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn gallery_writes_matrices_and_manifest() {
    let dir = gallery();
    for name in ["identity_16", "tridiag_100", "convdiff_10", "randdd_60", "laplace_12"] {
        assert!(dir.path().join(format!("{name}.mtx")).is_file(), "{name}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert!(manifest.starts_with("name,n,nnz,source\n"));
    assert!(manifest.contains("orsreg_1,2205,14133,suitesparse"));
}

#[test]
fn identity_converges_immediately() {
    let dir = gallery();
    let o = spai_ir(dir.path(), &["solve", "--matrix", "identity_16", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["converged"], true);
    assert!(v["report"]["steps"].as_u64().unwrap() <= 1);
}

#[test]
fn matrix_can_be_given_as_a_path() {
    let dir = gallery();
    let path = dir.path().join("convdiff_10.mtx");
    let o = spai_ir(
        Path::new("/nonexistent"),
        &[
            "solve",
            "--matrix",
            path.to_str().unwrap(),
            "--precisions",
            "h,s,d",
            "--solver",
            "lu",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("converged"));
}

#[test]
fn solve_json_is_byte_identical_across_runs() {
    let dir = gallery();
    let args = [
        "solve",
        "--matrix",
        "randdd_60",
        "--precisions",
        "h,s,d",
        "--eps",
        "0.2",
        "--json",
    ];
    let a = spai_ir(dir.path(), &args);
    let b = spai_ir(dir.path(), &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn unconverged_run_exits_with_two() {
    let dir = gallery();
    let o = spai_ir(
        dir.path(),
        &[
            "solve",
            "--matrix",
            "laplace_12",
            "--solver",
            "none",
            "--tau",
            "0.5",
            "--imax",
            "1",
        ],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn errors_exit_with_one() {
    let dir = gallery();
    let o = spai_ir(dir.path(), &["solve", "--matrix", "not_there"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
    let o = spai_ir(
        dir.path(),
        &["solve", "--matrix", "identity_16", "--precisions", "q,d,d"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_csv_has_stable_header_and_grid_order() {
    let dir = gallery();
    let out = dir.path().join("sweep.csv");
    let o = spai_ir(
        dir.path(),
        &[
            "sweep",
            "--matrix",
            "convdiff_10",
            "--eps-grid",
            "0.2,0.4",
            "--uf",
            "h,s",
            "--csv",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        [
            "eps",
            "uf",
            "nnz",
            "kappa_tilde",
            "estimate",
            "ratio",
            "all_satisfied",
            "feasible",
            "error"
        ]
    );
    let cells: Vec<(String, String)> = rdr
        .records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].to_string(), r[1].to_string())
        })
        .collect();
    let expected = [("0.2", "half"), ("0.2", "single"), ("0.4", "half"), ("0.4", "single")];
    assert_eq!(cells.len(), 4);
    for ((e, u), (ee, uu)) in cells.iter().zip(expected) {
        assert_eq!((e.as_str(), u.as_str()), (ee, uu));
    }
}

#[test]
fn single_cell_sweep_matches_solve_preconditioner() {
    let dir = gallery();
    let sweep = spai_ir(
        dir.path(),
        &[
            "sweep",
            "--matrix",
            "tridiag_100",
            "--eps-grid",
            "0.3",
            "--uf",
            "s",
            "--json",
        ],
    );
    let solve = spai_ir(
        dir.path(),
        &[
            "solve",
            "--matrix",
            "tridiag_100",
            "--eps",
            "0.3",
            "--precisions",
            "s,d,q",
            "--json",
        ],
    );
    let sweep: serde_json::Value = serde_json::from_str(&stdout(&sweep)).unwrap();
    let solve: serde_json::Value = serde_json::from_str(&stdout(&solve)).unwrap();
    assert_eq!(sweep["rows"][0]["nnz"], solve["report"]["precond_nnz"]);
    let k1 = sweep["rows"][0]["kappa_tilde"].as_f64().unwrap();
    let k2 = solve["report"]["kappa_tilde"].as_f64().unwrap();
    assert!((k1 - k2).abs() <= 1e-12 * k1);
}

#[test]
fn table_with_missing_matrices_marks_rows_and_fails() {
    let dir = TempDir::new().unwrap();
    let o = spai_ir(dir.path(), &["table", "t4", "--csv"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("table,matrix,preconditioner,eps,"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 16);
    assert!(rows.iter().all(|r| r.ends_with(",missing")));
    assert!(rows
        .iter()
        .any(|r| r.starts_with("t4,steam1,SPAI eps=0.2,0.2,") && r.contains(",1140,")));
}

#[test]
fn bounds_and_cond_report() {
    let dir = gallery();
    let o = spai_ir(
        dir.path(),
        &[
            "bounds",
            "--matrix",
            "laplace_12",
            "--eps",
            "0.3",
            "--uf",
            "h",
            "--json",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let b = &v["bounds"];
    assert!(b["norm_i_minus_pa"].as_f64().unwrap() <= b["bound_2n_eps"].as_f64().unwrap());
    let o = spai_ir(dir.path(), &["cond", "--matrix", "identity_16", "--csv"]);
    assert_eq!(
        stdout(&o),
        "matrix,n,nnz,kappa_inf,cond2_transpose\nidentity_16,16,16,1.0000e0,1.0000e0\n"
    );
}
