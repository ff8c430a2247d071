//! Inputs shared by the kernel benchmarks.

use spai_ir::gallery;
use spai_ir::SparseMatrix;

/// Convection-diffusion operator on an `m x m` grid, the default workload.
pub fn workload(m: usize) -> SparseMatrix {
    gallery::convection_diffusion_2d(m, 0.5)
}

/// Deterministic vector with entries in `[-1, 1]`.
pub fn test_vector(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i * 7919) % 2001) as f64 / 1000.0 - 1.0).collect()
}
