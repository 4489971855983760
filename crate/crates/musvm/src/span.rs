//! Span-based leave-one-out estimates.
//!
//! After training, each support row `t` gets a span value `S_t^2`: the
//! minimal kernel-metric cost of redistributing its dual row onto the other
//! margin support vectors while keeping every per-row zero-sum constraint.
//! Spans feed two leave-one-out results over the training rows:
//!
//! * a guaranteed upper bound counting at-bound support rows plus margin
//!   rows whose span is large against the data diameter (see
//!   [`loo_upper_bound`]), and
//! * a fast estimate counting support rows whose span reaches the row's own
//!   decision margin `sum_l alpha_tl f_l(x_t)` (see [`loo_span_estimate`]).
//!
//! Both rest on the saddle system over the margin support rows
//! `H = [[Ktilde (x) I_L, A^T], [A, 0]]` with one zero-sum constraint per
//! row (`A = I (x) 1^T`). Because the kernel block is a Kronecker product,
//! `H^{-1}` has the closed form `[[Ktilde^{-1} (x) P, (1/L) I (x) 1],
//! [(1/L) I (x) 1^T, -Ktilde/L]]` where `P = I - 1 1^T / L` is the centering
//! projector. Every diagonal `L x L` block of the top-left corner is a
//! multiple of `P`, hence exactly singular in the direction of the all-ones
//! vector; dual rows are zero-sum, so the span quadratic form is evaluated
//! through the pseudo-inverse restricted to the zero-sum subspace.

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::model::{
    classify_support_vectors, decision_values_gram, AugmentedProblem, SvCategory, SvPartition,
};
use crate::solver::DualSolution;
use nalgebra::{DMatrix, DVector};

/// Relative eigenvalue cutoff below which a direction counts as null.
const NULL_CUTOFF: f64 = 1e-12;

/// Relative slack on span-versus-margin comparisons, so that exact ties do
/// not flap between the two sides.
const FLAG_SLACK: f64 = 1e-9;

/// Saddle system over the margin support rows.
#[derive(Debug, Clone)]
pub struct HSystem {
    /// The assembled matrix, size `|SV1| * (L + 1)`.
    pub h: DMatrix<f64>,
    /// Its inverse (pseudo-inverse when the kernel block is singular).
    pub h_inv: DMatrix<f64>,
    /// Problem row index of each kernel block position.
    pub sv1_rows: Vec<usize>,
    /// Classes per block.
    pub n_classes: usize,
    /// Ridge added to the kernel block diagonal before inversion.
    pub ridge: f64,
    /// True when a pseudo-inverse fallback was required.
    pub used_pseudo_inverse: bool,
}

impl HSystem {
    /// Position of problem row `t` within the block ordering.
    pub fn position(&self, t: usize) -> Option<usize> {
        self.sv1_rows.iter().position(|&r| r == t)
    }
}

/// Default ridge: `1e-10 * trace(K_sv1) / |SV1|`.
pub fn default_ridge(gram: &GramMatrix, sv1_rows: &[usize]) -> f64 {
    if sv1_rows.is_empty() {
        return 0.0;
    }
    let tr: f64 = sv1_rows.iter().map(|&r| gram.diag(r)).sum();
    1e-10 * tr / sv1_rows.len() as f64
}

/// Assembles the saddle system over the given margin support rows and
/// computes its (pseudo)inverse.
///
/// With `L` classes and `N = |SV1|` rows the matrix has size `N(L+1)`: the
/// kernel block `Ktilde (x) I_L` with `Ktilde = K_sv1 + ridge I`, bordered
/// by one zero-sum constraint row per block. The inverse is formed from the
/// Kronecker closed form when `Ktilde` admits a Cholesky factorization and
/// by a dense pseudo-inverse otherwise (flagged).
pub fn build_h_system(
    sv1_rows: &[usize],
    gram: &GramMatrix,
    n_classes: usize,
    ridge: Option<f64>,
) -> Result<HSystem> {
    let n = sv1_rows.len();
    if n == 0 {
        return Err(Error::InvalidParam(
            "cannot build a span system over an empty margin support set".into(),
        ));
    }
    if n_classes < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 classes, got {n_classes}")));
    }
    for &r in sv1_rows {
        if r >= gram.len() {
            return Err(Error::InvalidParam(format!(
                "support row {r} out of range 0..{}",
                gram.len()
            )));
        }
    }
    let ridge = ridge.unwrap_or_else(|| default_ridge(gram, sv1_rows));
    let l = n_classes;
    let size = n * l + n;

    let ktilde = DMatrix::from_fn(n, n, |a, b| {
        gram.get(sv1_rows[a], sv1_rows[b]) + if a == b { ridge } else { 0.0 }
    });

    let mut h = DMatrix::zeros(size, size);
    for a in 0..n {
        for b in 0..n {
            let k = ktilde[(a, b)];
            for c in 0..l {
                h[(a * l + c, b * l + c)] = k;
            }
        }
        for c in 0..l {
            h[(n * l + a, a * l + c)] = 1.0;
            h[(a * l + c, n * l + a)] = 1.0;
        }
    }

    let (kernel_inv, used_pseudo_inverse) = match ktilde.clone().cholesky() {
        Some(chol) => (chol.inverse(), false),
        None => {
            let pinv = ktilde
                .clone()
                .pseudo_inverse(NULL_CUTOFF * (1.0 + ktilde.trace().abs()))
                .map_err(|e| Error::SingularSystem { what: format!("kernel block: {e}"), cond: f64::INFINITY })?;
            (pinv, true)
        }
    };

    // Closed-form inverse blocks (exact inverse of H when Ktilde is regular):
    // top-left Ktilde^{-1} (x) P, coupling (1/L) I (x) 1, corner -Ktilde/L.
    let mut h_inv = DMatrix::zeros(size, size);
    let inv_l = 1.0 / l as f64;
    for a in 0..n {
        for b in 0..n {
            let g = kernel_inv[(a, b)];
            for c in 0..l {
                for d in 0..l {
                    let p = if c == d { 1.0 - inv_l } else { -inv_l };
                    h_inv[(a * l + c, b * l + d)] = g * p;
                }
            }
            h_inv[(n * l + a, n * l + b)] = -ktilde[(a, b)] * inv_l;
        }
        for c in 0..l {
            h_inv[(a * l + c, n * l + a)] = inv_l;
            h_inv[(n * l + a, a * l + c)] = inv_l;
        }
    }

    Ok(HSystem {
        h,
        h_inv,
        sv1_rows: sv1_rows.to_vec(),
        n_classes,
        ridge,
        used_pseudo_inverse,
    })
}

/// Span of a margin support row: `S_t^2 = alpha_t^T [(H^{-1})_tt]^+ alpha_t`
/// with the pseudo-inverse taken on the zero-sum subspace.
///
/// The diagonal block `(H^{-1})_tt` annihilates the all-ones direction by
/// construction, so a plain inverse never exists; `alpha_t` is zero-sum,
/// which keeps the quadratic form well defined. An error is returned when
/// the block is singular beyond that structural direction.
pub fn span_sv1(hs: &HSystem, t: usize, alpha_t: &[f64]) -> Result<f64> {
    let l = hs.n_classes;
    if alpha_t.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "alpha row has {} entries for {l} classes",
            alpha_t.len()
        )));
    }
    let p = hs.position(t).ok_or_else(|| {
        Error::InvalidParam(format!("row {t} is not a margin support row of this system"))
    })?;
    let block = hs.h_inv.view((p * l, p * l), (l, l)).into_owned();
    quad_form_pinv(&block, alpha_t, &format!("span block of row {t}"))
}

/// Quadratic form through the pseudo-inverse of a symmetric PSD block with
/// a structural null space spanned by the all-ones vector.
fn quad_form_pinv(block: &DMatrix<f64>, x: &[f64], what: &str) -> Result<f64> {
    let l = x.len();
    let sym = (block + block.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if lam_max == 0.0 {
        return Err(Error::SingularSystem { what: format!("{what}: zero block"), cond: f64::INFINITY });
    }
    let cutoff = NULL_CUTOFF * lam_max;
    let xv = DVector::from_column_slice(x);
    let mut value = 0.0;
    let mut explained = DVector::zeros(l);
    let mut lam_min_kept = f64::INFINITY;
    for k in 0..l {
        let lam = eig.eigenvalues[k];
        if lam > cutoff {
            let q = eig.eigenvectors.column(k);
            let proj = q.dot(&xv);
            value += proj * proj / lam;
            explained += q * proj;
            lam_min_kept = lam_min_kept.min(lam);
        }
    }
    let residual = (&xv - &explained).norm();
    let scale = xv.norm();
    if scale > 0.0 && residual > 1e-6 * scale {
        return Err(Error::SingularSystem {
            what: format!("{what}: {:.1}% of the row lies in a null direction", 100.0 * residual / scale),
            cond: lam_max / lam_min_kept.min(lam_max),
        });
    }
    Ok(value)
}

/// Span of an at-bound support row:
/// `S_t^2 = alpha_t^T [K_tt I_L - Kt^T H^{-1} Kt] alpha_t` where `Kt` stacks
/// the kernel column of `t` against the margin rows (Kronecker-expanded)
/// over a zero block for the multiplier coordinates.
pub fn span_sv2(hs: &HSystem, gram: &GramMatrix, t: usize, alpha_t: &[f64]) -> Result<f64> {
    let l = hs.n_classes;
    if alpha_t.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "alpha row has {} entries for {l} classes",
            alpha_t.len()
        )));
    }
    let n = hs.sv1_rows.len();
    let size = n * l + n;
    let mut kt = DMatrix::zeros(size, l);
    for a in 0..n {
        let k = gram.get(hs.sv1_rows[a], t);
        for c in 0..l {
            kt[(a * l + c, c)] = k;
        }
    }
    let reduced = &hs.h_inv * &kt;
    let mut m = DMatrix::from_diagonal_element(l, l, gram.diag(t));
    m -= kt.transpose() * reduced;
    let av = DVector::from_column_slice(alpha_t);
    Ok((av.transpose() * m * av)[(0, 0)])
}

/// Fast span evaluator over a fixed margin support set.
///
/// Produces the same values as [`span_sv1`] / [`span_sv2`] through the
/// Kronecker closed form, without materializing the saddle matrix: for a
/// margin row `S_t^2 = ||alpha_t||^2 / (Ktilde^{-1})_tt`, for an at-bound
/// row `S_t^2 = ||alpha_t||^2 (K_tt - k_t^T Ktilde^{-1} k_t)`, both after
/// projecting `alpha_t` onto the zero-sum subspace.
pub struct SpanEngine {
    sv1_rows: Vec<usize>,
    position: Vec<Option<usize>>,
    kernel_inv: DMatrix<f64>,
}

impl SpanEngine {
    /// Factors the ridged kernel block over the margin support rows.
    pub fn new(
        sv1_rows: &[usize],
        gram: &GramMatrix,
        ridge: Option<f64>,
    ) -> Result<SpanEngine> {
        let n = sv1_rows.len();
        if n == 0 {
            return Err(Error::InvalidParam(
                "cannot build a span engine over an empty margin support set".into(),
            ));
        }
        let ridge = ridge.unwrap_or_else(|| default_ridge(gram, sv1_rows));
        let ktilde = DMatrix::from_fn(n, n, |a, b| {
            gram.get(sv1_rows[a], sv1_rows[b]) + if a == b { ridge } else { 0.0 }
        });
        let kernel_inv = match ktilde.clone().cholesky() {
            Some(chol) => chol.inverse(),
            None => ktilde
                .pseudo_inverse(NULL_CUTOFF)
                .map_err(|e| Error::SingularSystem { what: format!("kernel block: {e}"), cond: f64::INFINITY })?,
        };
        let mut position = vec![None; gram.len()];
        for (p, &r) in sv1_rows.iter().enumerate() {
            position[r] = Some(p);
        }
        Ok(SpanEngine { sv1_rows: sv1_rows.to_vec(), position, kernel_inv })
    }

    /// Squared norm of the zero-sum projection of a dual row.
    fn centered_norm_sq(alpha_t: &[f64]) -> f64 {
        let mean = alpha_t.iter().sum::<f64>() / alpha_t.len() as f64;
        alpha_t.iter().map(|&a| (a - mean) * (a - mean)).sum()
    }

    /// Span of a margin support row (must belong to the support set).
    pub fn span_sq_margin(&self, t: usize, alpha_t: &[f64]) -> Result<f64> {
        Ok(Self::centered_norm_sq(alpha_t) * self.distance_sq_margin(t)?)
    }

    /// The dual-weight-independent part of a margin row's span: the squared
    /// feature-space distance from the row to the constrained span of the
    /// remaining margin support rows, `1 / (Ktilde^{-1})_tt`. Enlarging the
    /// support set can only shrink this value.
    pub fn distance_sq_margin(&self, t: usize) -> Result<f64> {
        let p = self.position.get(t).copied().flatten().ok_or_else(|| {
            Error::InvalidParam(format!("row {t} is not a margin support row of this engine"))
        })?;
        let diag = self.kernel_inv[(p, p)];
        if diag <= 0.0 {
            return Err(Error::SingularSystem {
                what: format!("non-positive inverse diagonal at row {t}"),
                cond: f64::INFINITY,
            });
        }
        Ok(1.0 / diag)
    }

    /// Span of an at-bound support row (any row outside the margin set).
    pub fn span_sq_at_bound(&self, gram: &GramMatrix, t: usize, alpha_t: &[f64]) -> f64 {
        let n = self.sv1_rows.len();
        let kt = DVector::from_fn(n, |a, _| gram.get(self.sv1_rows[a], t));
        let reduced = &self.kernel_inv * &kt;
        let schur = gram.diag(t) - kt.dot(&reduced);
        Self::centered_norm_sq(alpha_t) * schur
    }
}

/// Report of the fast span-based leave-one-out estimate.
#[derive(Debug, Clone)]
pub struct SpanReport {
    /// `(training row, S_t^2)` for every support row of the training set.
    pub spans_sq: Vec<(usize, f64)>,
    /// Training support rows whose span reaches their decision margin.
    pub flagged: Vec<usize>,
    /// The estimate: flagged count over the number of training samples.
    pub estimate: f64,
    /// True when the margin support set was empty and the at-bound spans
    /// fell back to `K_tt ||alpha_t||^2`.
    pub sv1_empty_fallback: bool,
}

/// Fast leave-one-out estimate: counts training support rows `t` with
/// `S_t^2 >= sum_l alpha_tl f_l(x_t)` (within a relative slack).
///
/// Works on a converged solution at tight tolerance; spans are computed
/// with the Kronecker closed form over the margin support set.
pub fn loo_span_estimate(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    solution: &DualSolution,
    ridge: Option<f64>,
) -> Result<SpanReport> {
    let partition = classify_support_vectors(solution, problem);
    loo_span_estimate_with_partition(problem, gram, solution, &partition, ridge)
}

/// Same as [`loo_span_estimate`] with a caller-supplied partition.
pub fn loo_span_estimate_with_partition(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    solution: &DualSolution,
    partition: &SvPartition,
    ridge: Option<f64>,
) -> Result<SpanReport> {
    let n_train = problem.n_train;
    let l = problem.n_classes;
    let engine = if partition.margin.is_empty() {
        None
    } else {
        Some(SpanEngine::new(&partition.margin, gram, ridge)?)
    };
    let decision = decision_values_gram(problem, gram, solution);

    let mut spans_sq = Vec::new();
    let mut flagged = Vec::new();
    for t in 0..n_train {
        let cat = partition.category[t];
        if cat == SvCategory::NonSv {
            continue;
        }
        let alpha_t = solution.alpha.row(t);
        let span_sq = match (&engine, cat) {
            (Some(e), SvCategory::Margin) => e.span_sq_margin(t, alpha_t)?,
            (Some(e), SvCategory::AtBound) => e.span_sq_at_bound(gram, t, alpha_t),
            (Some(_), SvCategory::NonSv) => unreachable!("non-support rows are skipped"),
            // No margin rows to redistribute onto: the whole row must be
            // carried by the point itself.
            (None, _) => gram.diag(t) * alpha_t.iter().map(|a| a * a).sum::<f64>(),
        };
        spans_sq.push((t, span_sq));
        let margin_value: f64 = (0..l).map(|c| alpha_t[c] * decision[t * l + c]).sum();
        if span_sq >= margin_value - FLAG_SLACK * margin_value.abs().max(1.0) {
            flagged.push(t);
        }
    }
    let estimate = if n_train == 0 { 0.0 } else { flagged.len() as f64 / n_train as f64 };
    Ok(SpanReport {
        spans_sq,
        flagged,
        estimate,
        sv1_empty_fallback: engine.is_none(),
    })
}

/// Report of the guaranteed leave-one-out upper bound.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// The bound: `(at-bound training rows + large-span margin rows) / n`.
    pub bound: f64,
    /// Number of at-bound support rows among the training rows.
    pub at_bound_count: usize,
    /// Number of margin training rows whose span crosses the threshold.
    pub large_span_count: usize,
    /// Feature-space diameter used in the threshold.
    pub diameter: f64,
    /// The scale `max(sqrt(2) * D, 1/sqrt(C))` multiplying each span.
    pub threshold_scale: f64,
}

/// Guaranteed leave-one-out upper bound from redistribution spans.
///
/// Every at-bound training support row counts as a potential mistake; a
/// margin training row counts when `S_t * max(sqrt(2) D, 1/sqrt(C)) >= 1`,
/// where `S_t` must come from the inequality-constrained redistribution
/// problem (see `oracle::span_qp`) and `D` is the feature-space diameter of
/// the training samples. `spans_sq` maps margin training rows to `S_t^2`;
/// an entry must be present for every margin training row.
pub fn loo_upper_bound(
    problem: &AugmentedProblem,
    solution: &DualSolution,
    spans_sq: &[(usize, f64)],
    diameter: f64,
) -> Result<BoundReport> {
    let partition = classify_support_vectors(solution, problem);
    let n_train = problem.n_train;
    if n_train == 0 {
        return Err(Error::InvalidParam("bound undefined without training rows".into()));
    }
    let c = problem.costs[0];
    let threshold_scale = (2.0f64.sqrt() * diameter).max(1.0 / c.sqrt());

    let at_bound_count = partition.at_bound_train(problem).count();
    let mut large_span_count = 0;
    for t in partition.margin_train(problem) {
        let span_sq = spans_sq
            .iter()
            .find(|&&(row, _)| row == t)
            .map(|&(_, s)| s)
            .ok_or_else(|| {
                Error::DimensionMismatch(format!("no span supplied for margin training row {t}"))
            })?;
        if span_sq.max(0.0).sqrt() * threshold_scale >= 1.0 {
            large_span_count += 1;
        }
    }
    let bound = (at_bound_count + large_span_count) as f64 / n_train as f64;
    Ok(BoundReport { bound, at_bound_count, large_span_count, diameter, threshold_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram_matrix, KernelSpec};
    use crate::model::{augment, Dataset, Hyperparams, UniversumSet};
    use crate::solver::{solve_dual, SolveOptions};

    #[test]
    fn single_row_system_matches_hand_computation() {
        // One margin row, two classes, unit self-kernel, no ridge:
        // H = [[1, 0, 1], [0, 1, 1], [1, 1, 0]].
        let gram = gram_matrix(KernelSpec::Linear, &[vec![1.0]]).unwrap();
        let hs = build_h_system(&[0], &gram, 2, Some(0.0)).unwrap();
        let expect = [
            [1.0, 0.0, 1.0],
            [0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((hs.h[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        // Inverse: [[.5, -.5, .5], [-.5, .5, .5], [.5, .5, -.5]].
        let inv_expect = [
            [0.5, -0.5, 0.5],
            [-0.5, 0.5, 0.5],
            [0.5, 0.5, -0.5],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (hs.h_inv[(i, j)] - inv_expect[i][j]).abs() < 1e-12,
                    "h_inv[{i}][{j}] = {}",
                    hs.h_inv[(i, j)]
                );
            }
        }
        // For alpha = (a, -a) the span is 2 a^2 (the row must carry itself).
        let s = span_sv1(&hs, 0, &[0.7, -0.7]).unwrap();
        assert!((s - 2.0 * 0.49).abs() < 1e-12, "span {s}");
    }

    #[test]
    fn h_is_symmetric_and_inverse_is_consistent() {
        let samples = vec![
            vec![1.0, 0.3],
            vec![-0.4, 1.0],
            vec![0.2, -0.8],
            vec![1.1, 1.0],
        ];
        let gram = gram_matrix(KernelSpec::Rbf { gamma: 0.7 }, &samples).unwrap();
        let hs = build_h_system(&[0, 1, 2, 3], &gram, 3, None).unwrap();
        assert!(!hs.used_pseudo_inverse);
        let size = hs.h.nrows();
        for i in 0..size {
            for j in 0..size {
                assert!((hs.h[(i, j)] - hs.h[(j, i)]).abs() < 1e-15);
            }
        }
        let prod = &hs.h * &hs.h_inv;
        for i in 0..size {
            for j in 0..size {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (prod[(i, j)] - expect).abs() < 1e-6,
                    "H * H_inv deviates at ({i}, {j}): {}",
                    prod[(i, j)]
                );
            }
        }
    }

    #[test]
    fn margin_block_is_singular_in_the_ones_direction() {
        // Structural property of the closed form: every diagonal block of
        // the top-left corner kills the all-ones vector.
        let samples = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]];
        let gram = gram_matrix(KernelSpec::Linear, &samples).unwrap();
        let hs = build_h_system(&[0, 1, 2], &gram, 2, None).unwrap();
        for p in 0..3 {
            let block = hs.h_inv.view((p * 2, p * 2), (2, 2));
            for r in 0..2 {
                let row_sum: f64 = (0..2).map(|c| block[(r, c)]).sum();
                assert!(row_sum.abs() < 1e-10, "block row sum {row_sum}");
            }
        }
    }

    #[test]
    fn span_engine_agrees_with_block_route() {
        let samples = vec![
            vec![1.0, 0.3, -0.2],
            vec![-0.4, 1.0, 0.9],
            vec![0.2, -0.8, 0.1],
            vec![1.1, 1.0, -0.5],
            vec![-0.9, 0.2, 0.4],
        ];
        let gram = gram_matrix(KernelSpec::Rbf { gamma: 0.4 }, &samples).unwrap();
        let sv1 = [0, 2, 3];
        let hs = build_h_system(&sv1, &gram, 3, None).unwrap();
        let engine = SpanEngine::new(&sv1, &gram, None).unwrap();
        let alpha = [0.4, -0.1, -0.3];
        for &t in &sv1 {
            let a = span_sv1(&hs, t, &alpha).unwrap();
            let b = engine.span_sq_margin(t, &alpha).unwrap();
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "margin {t}: {a} vs {b}");
        }
        for t in [1usize, 4] {
            let a = span_sv2(&hs, &gram, t, &alpha).unwrap();
            let b = engine.span_sq_at_bound(&gram, t, &alpha);
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "at-bound {t}: {a} vs {b}");
        }
    }

    #[test]
    fn at_bound_span_of_orthogonal_point_is_diagonal_times_norm() {
        // A point with zero kernel column against the margin set cannot
        // redistribute anything: S^2 = K_tt ||alpha||^2.
        let samples = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let gram = gram_matrix(KernelSpec::Linear, &samples).unwrap();
        let hs = build_h_system(&[0], &gram, 2, Some(0.0)).unwrap();
        let s = span_sv2(&hs, &gram, 1, &[0.3, -0.3]).unwrap();
        assert!((s - 4.0 * 0.18).abs() < 1e-12, "span {s}");
    }

    #[test]
    fn empty_margin_set_is_rejected() {
        let gram = gram_matrix(KernelSpec::Linear, &[vec![1.0]]).unwrap();
        assert!(build_h_system(&[], &gram, 2, None).is_err());
        assert!(SpanEngine::new(&[], &gram, None).is_err());
    }

    #[test]
    fn span_estimate_runs_on_trained_solution() {
        let train = Dataset {
            samples: vec![
                vec![1.0, 0.1],
                vec![0.8, -0.3],
                vec![-0.7, 0.2],
                vec![-1.2, -0.1],
                vec![0.1, 0.9],
                vec![-0.3, 1.1],
            ],
            labels: vec![0, 0, 1, 1, 2, 2],
            n_classes: 3,
        };
        let universum = UniversumSet { samples: vec![vec![0.0, 0.25], vec![0.1, 0.2]] };
        let params = Hyperparams { c: 0.8, c_star: 0.3, delta: 0.02 };
        let problem = augment(&train, &universum, &params).unwrap();
        let gram = gram_matrix(KernelSpec::Rbf { gamma: 0.6 }, &problem.samples).unwrap();
        let sol = solve_dual(&problem, &gram, &SolveOptions::with_tol(1e-8)).unwrap();
        assert!(sol.converged);
        let report = loo_span_estimate(&problem, &gram, &sol, None).unwrap();
        assert!(report.estimate >= 0.0 && report.estimate <= 1.0);
        // Spans are non-negative up to rounding.
        for &(_, s) in &report.spans_sq {
            assert!(s >= -1e-9, "negative span {s}");
        }
        // Only training rows are reported.
        for &(t, _) in &report.spans_sq {
            assert!(t < problem.n_train);
        }
    }

    #[test]
    fn upper_bound_requires_span_for_every_margin_row() {
        let train = Dataset {
            samples: vec![vec![1.0], vec![-1.0]],
            labels: vec![0, 1],
            n_classes: 2,
        };
        let problem = augment(&train, &UniversumSet::default(), &Hyperparams::plain(10.0)).unwrap();
        let gram = gram_matrix(KernelSpec::Linear, &problem.samples).unwrap();
        let sol = solve_dual(&problem, &gram, &SolveOptions::with_tol(1e-10)).unwrap();
        let partition = classify_support_vectors(&sol, &problem);
        if !partition.margin.is_empty() {
            assert!(loo_upper_bound(&problem, &sol, &[], 1.0).is_err());
        }
    }
}
