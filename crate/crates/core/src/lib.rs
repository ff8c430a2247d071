//! Mixed-precision sparse approximate inverse (SPAI) preconditioning for
//! GMRES-based iterative refinement.
//!
//! The crate is organised bottom-up:
//!
//! * [`precision`] emulates half/single/double arithmetic by rounding after
//!   every operation, and [`dd`] supplies double-double arithmetic for the
//!   extra-precise residual and reference-solution kernels.
//! * [`sparse`] holds the compressed-column container, Matrix Market I/O and
//!   precision-aware products.
//! * [`spai`] builds adaptive sparse approximate inverses in a chosen
//!   precision.
//! * [`krylov`] is left-preconditioned MGS-GMRES with separate working and
//!   operator-application precisions.
//! * [`refine`] drives five-precision iterative refinement with SPAI, LU or no
//!   preconditioner.
//! * [`analysis`] evaluates condition numbers and the SPAI quality bounds.
//! * [`experiments`] carries the reference tables and the desk-scale
//!   reproduction harness used by the CLI and the acceptance suite.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod dd;
pub mod dense;
mod error;
pub mod experiments;
pub mod gallery;
pub mod krylov;
pub mod precision;
pub mod refine;
pub mod spai;
pub mod sparse;

pub use analysis::{check_bounds, cond2_transpose, kappa_inf, BoundReport};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use krylov::{pgmres_left, GmresConfig, GmresReport, Preconditioner};
pub use precision::Precision;
pub use refine::{measure_errors, run_ir, ConvergenceCriteria, IrConfig, IrReport, Precisions, SolverKind};
pub use spai::{build_left_preconditioner, build_spai, SpaiParams, SpaiPreconditioner};
pub use sparse::{IndexSet, ScalingInfo, SparseMatrix};
