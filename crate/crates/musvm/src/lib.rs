//! Multiclass support vector machines with universum augmentation.
//!
//! Trains a single-machine multiclass SVM whose dual treats contradictory
//! universum samples as extra rows with zero-cost-by-default labels, and
//! provides analytic leave-one-out machinery on top of the trained dual:
//! a fast span-based error estimate, a guaranteed leave-one-out upper
//! bound, model selection driven by either, and histogram diagnostics of
//! decision-value projections. Slow independent reference implementations
//! for every nontrivial result live in [`oracle`] and back the test suite.

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod select;
pub mod solver;
pub mod span;
pub mod synth;
pub mod verify;

pub use error::{Error, Result};
pub use kernel::{gram_matrix, kernel_eval, GramMatrix, KernelSpec};
pub use model::{
    augment, classify_support_vectors, primal_objective, AugmentedProblem, Dataset, Hyperparams,
    Model, RowOrigin, SvCategory, SvPartition, UniversumSet,
};
pub use solver::{kkt_violation, solve_dual, AlphaMat, DualSolution, SolveOptions};
pub use span::{loo_span_estimate, loo_upper_bound, BoundReport, SpanEngine, SpanReport};

/// Configures the size of the global worker pool used by parallel paths
/// (Gram assembly, cross-validation folds, leave-one-out re-solves).
///
/// Returns an error when the pool was already built, which happens at the
/// first parallel call; call this before any other library entry point.
/// Zero threads means "one per core". All numeric paths are deterministic
/// regardless of the pool size.
pub fn configure_threads(threads: usize) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if threads > 0 {
        builder = builder.num_threads(threads);
    }
    builder
        .build_global()
        .map_err(|e| Error::InvalidParam(format!("worker pool already configured: {e}")))
}
