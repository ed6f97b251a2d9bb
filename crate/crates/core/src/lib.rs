//! Orthogonal multi-matching pursuit (OMMP) for sparse recovery, together with
//! exact small-scale analyzers for restricted isometry constants and spark, and
//! a seeded Monte Carlo harness for recovery benchmarks.

pub mod analysis;
pub mod bench;
pub mod linalg;
pub mod norms;
pub mod pursuit;
pub mod signals;
pub mod suites;

pub use linalg::{DenseMatrix, LinalgError};
pub use pursuit::{ommp_run, recover_success, PursuitConfig, RecoveryResult, StopReason};
pub use signals::{SensingMatrix, SparseSignal};
