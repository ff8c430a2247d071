//! Deterministic test matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseMatrix;

/// Tridiagonal matrix with constant bands.
pub fn tridiagonal(n: usize, sub: f64, diag: f64, sup: f64) -> SparseMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            t.push((i, i - 1, sub));
        }
        t.push((i, i, diag));
        if i + 1 < n {
            t.push((i, i + 1, sup));
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("valid tridiagonal")
}

/// Five-point upwind convection-diffusion operator on an `m x m` grid with
/// cell Peclet number `peclet` in both directions.
pub fn convection_diffusion_2d(m: usize, peclet: f64) -> SparseMatrix {
    let n = m * m;
    let mut t = Vec::with_capacity(5 * n);
    let idx = |r: usize, c: usize| r * m + c;
    for r in 0..m {
        for c in 0..m {
            let k = idx(r, c);
            t.push((k, k, 4.0 + 2.0 * peclet));
            if c > 0 {
                t.push((k, idx(r, c - 1), -1.0 - peclet));
            }
            if c + 1 < m {
                t.push((k, idx(r, c + 1), -1.0));
            }
            if r > 0 {
                t.push((k, idx(r - 1, c), -1.0 - peclet));
            }
            if r + 1 < m {
                t.push((k, idx(r + 1, c), -1.0));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &t).expect("valid stencil")
}

/// Random sparse matrix with off-diagonal density `density` and a diagonal
/// that dominates each row by a factor between 1.1 and 2.
pub fn random_diag_dominant(n: usize, density: f64, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let mut row_sums = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < density {
                let v: f64 = rng.gen_range(-1.0..1.0);
                row_sums[i] += v.abs();
                t.push((i, j, v));
            }
        }
    }
    for (i, s) in row_sums.iter().enumerate() {
        let factor: f64 = rng.gen_range(1.1..2.0);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        t.push((i, i, sign * (factor * s).max(0.5)));
    }
    SparseMatrix::from_triplets(n, n, &t).expect("valid random matrix")
}

/// Matrices shipped with the repository under `data/matrices`.
pub fn shipped() -> Vec<(&'static str, SparseMatrix)> {
    vec![
        ("identity_16", SparseMatrix::identity(16)),
        ("tridiag_100", tridiagonal(100, -1.0, 4.0, -2.0)),
        ("convdiff_10", convection_diffusion_2d(10, 0.5)),
        ("randdd_60", random_diag_dominant(60, 0.08, 2024)),
        ("laplace_12", convection_diffusion_2d(12, 0.0)),
    ]
}
