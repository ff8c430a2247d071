use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use spai_ir::krylov::{pgmres_left, GmresConfig};
use spai_ir::spai::{build_left_preconditioner, solve_column_ls, SpaiParams};
use spai_ir::{DenseMatrix, Precision};
use spai_ir_bench::{test_vector, workload};

const PRECISIONS: [Precision; 3] = [Precision::Half, Precision::Single, Precision::Double];

fn matvec(c: &mut Criterion) {
    let a = workload(30);
    let x = test_vector(a.ncols());
    let mut g = c.benchmark_group("matvec");
    for p in PRECISIONS {
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| a.matvec(black_box(&x), p).unwrap())
        });
    }
    g.finish();
}

fn least_squares(c: &mut Criterion) {
    let (m, q) = (40, 12);
    let data = test_vector(m * q);
    let abar = DenseMatrix::from_row_major(m, q, data).unwrap();
    let ebar: Vec<f64> = (0..m).map(|i| (i == 3) as u8 as f64).collect();
    let mut g = c.benchmark_group("solve_column_ls");
    for p in PRECISIONS {
        g.bench_with_input(BenchmarkId::from_parameter(p), &p, |b, &p| {
            b.iter(|| solve_column_ls(black_box(&abar), &ebar, p).unwrap())
        });
    }
    g.finish();
}

fn spai_build(c: &mut Criterion) {
    let a = workload(15);
    let mut g = c.benchmark_group("build_spai");
    g.sample_size(10);
    for eps in [0.5, 0.3] {
        for p in [Precision::Half, Precision::Single] {
            let params = SpaiParams::new(eps, p);
            g.bench_function(format!("eps={eps}/{p}"), |b| {
                b.iter(|| build_left_preconditioner(black_box(&a), &params).unwrap())
            });
        }
    }
    g.finish();
}

fn gmres(c: &mut Criterion) {
    let a = workload(15);
    let pre = build_left_preconditioner(&a, &SpaiParams::new(0.3, Precision::Single)).unwrap();
    let r = test_vector(a.nrows());
    let mut g = c.benchmark_group("pgmres_left");
    for (ug, tau) in [(Precision::Single, 1e-4), (Precision::Double, 1e-8)] {
        let cfg = GmresConfig::new(tau, ug, ug);
        g.bench_with_input(BenchmarkId::from_parameter(ug), &cfg, |b, cfg| {
            b.iter(|| pgmres_left(&a, &pre.p, black_box(&r), cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, matvec, least_squares, spai_build, gmres);
criterion_main!(benches);
