//! Problem construction and trained-model types.
//!
//! A labeled training set plus an optional universum set is rewritten into a
//! single augmented problem before training: every universum sample is
//! expanded into one artificial row per class. Each augmented row carries its
//! own misclassification cost and a per-class margin vector, so the solver
//! never needs to distinguish the two sample kinds. Class ids are 0-based
//! everywhere in this crate; external 1-based or arbitrary integer labels are
//! converted at the I/O boundary only.

use crate::error::{Error, Result};
use crate::kernel::{kernel_eval, GramMatrix, KernelSpec};
use crate::solver::DualSolution;

/// Labeled training samples with contiguous 0-based class ids.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the dataset holds no samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Dimension of the samples (0 for an empty set).
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    /// Checks labels lie in `0..n_classes` and all samples share a dimension.
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() != self.labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples but {} labels",
                self.samples.len(),
                self.labels.len()
            )));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidParam(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        let d = self.dim();
        for (i, s) in self.samples.iter().enumerate() {
            if s.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "sample {i} has dimension {} but sample 0 has {d}",
                    s.len()
                )));
            }
        }
        if let Some(bad) = self.labels.iter().position(|&y| y >= self.n_classes) {
            return Err(Error::InvalidParam(format!(
                "label {} at row {bad} outside 0..{}",
                self.labels[bad], self.n_classes
            )));
        }
        Ok(())
    }

    /// Per-class sample counts.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Unlabeled universum samples; must match the paired dataset's dimension.
#[derive(Debug, Clone, Default)]
pub struct UniversumSet {
    pub samples: Vec<Vec<f64>>,
}

impl UniversumSet {
    /// Number of universum samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when there are no universum samples.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Cost and margin hyperparameters of the augmented problem.
///
/// `c` is the misclassification cost on training rows, `c_star` the cost on
/// universum rows and `delta` the width of the insensitivity tube around
/// universum decision values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub c: f64,
    pub c_star: f64,
    pub delta: f64,
}

impl Hyperparams {
    /// Plain multiclass SVM: universum rows get zero cost.
    pub fn plain(c: f64) -> Self {
        Hyperparams { c, c_star: 0.0, delta: 0.0 }
    }

    /// The default universum cost scales `c` by `n / (m * L)`, balancing the
    /// total cost mass of training and universum rows.
    pub fn auto_c_star(c: f64, delta: f64, n: usize, m: usize, l: usize) -> Self {
        let c_star = if m == 0 { 0.0 } else { c * n as f64 / (m * l) as f64 };
        Hyperparams { c, c_star, delta }
    }

    /// Validates positivity/sign requirements.
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParam(format!("c must be positive, got {}", self.c)));
        }
        if !(self.c_star >= 0.0 && self.c_star.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "c_star must be non-negative, got {}",
                self.c_star
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "delta must be non-negative, got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// Where an augmented row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOrigin {
    /// Training sample `index` of the source dataset.
    Train { index: usize },
    /// Copy `artificial_label` of universum sample `index`.
    Universum { index: usize, artificial_label: usize },
}

/// The augmented training problem: training rows followed by `m * L`
/// universum rows, each with per-row cost and per-class margins.
#[derive(Debug, Clone)]
pub struct AugmentedProblem {
    /// Row sample vectors (universum samples repeated once per class).
    pub samples: Vec<Vec<f64>>,
    /// Row labels; for universum rows this is the artificial label.
    pub labels: Vec<usize>,
    /// Upper bound on `alpha[i][labels[i]]` for each row.
    pub costs: Vec<f64>,
    /// Flattened row-major `N x L` margin matrix `e`.
    pub margins: Vec<f64>,
    /// Provenance of each row.
    pub origins: Vec<RowOrigin>,
    /// Number of training rows (they come first).
    pub n_train: usize,
    /// Number of source universum samples.
    pub n_universum: usize,
    /// Number of classes `L`.
    pub n_classes: usize,
}

impl AugmentedProblem {
    /// Total number of rows `n + m * L`.
    pub fn n_rows(&self) -> usize {
        self.samples.len()
    }

    /// Margin entry `e[i][l]`.
    #[inline(always)]
    pub fn margin(&self, i: usize, l: usize) -> f64 {
        self.margins[i * self.n_classes + l]
    }

    /// True for rows that came from the training set.
    #[inline]
    pub fn is_train_row(&self, i: usize) -> bool {
        i < self.n_train
    }

    /// Rewrites the universum margins for a new contradiction width.
    ///
    /// The samples, labels and costs are untouched, so a Gram matrix built
    /// for this problem stays valid — which is what makes sweeping a width
    /// grid cheap.
    pub fn set_universum_delta(&mut self, delta: f64) {
        let l_classes = self.n_classes;
        for i in self.n_train..self.n_rows() {
            let k = self.labels[i];
            for l in 0..l_classes {
                self.margins[i * l_classes + l] = if l == k { 0.0 } else { -delta };
            }
        }
    }
}

/// Builds the augmented problem.
///
/// Training row `i` keeps cost `c` and margins `e[i][l] = 1 - [l == y_i]`.
/// Universum sample `i'` becomes `L` rows with artificial labels `0..L`,
/// cost `c_star` and margins `e[i][l] = -delta * (1 - [l == y_i])`.
pub fn augment(
    train: &Dataset,
    universum: &UniversumSet,
    params: &Hyperparams,
) -> Result<AugmentedProblem> {
    train.validate()?;
    params.validate()?;
    let d = train.dim();
    if let Some(bad) = universum.samples.iter().position(|s| s.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "universum sample {bad} has dimension {} but training data has {d}",
            universum.samples[bad].len()
        )));
    }
    let n = train.len();
    let m = universum.len();
    let l_classes = train.n_classes;
    let n_rows = n + m * l_classes;

    let mut samples = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    let mut costs = Vec::with_capacity(n_rows);
    let mut margins = Vec::with_capacity(n_rows * l_classes);
    let mut origins = Vec::with_capacity(n_rows);

    for i in 0..n {
        let y = train.labels[i];
        samples.push(train.samples[i].clone());
        labels.push(y);
        costs.push(params.c);
        origins.push(RowOrigin::Train { index: i });
        for l in 0..l_classes {
            margins.push(if l == y { 0.0 } else { 1.0 });
        }
    }
    for (i, x) in universum.samples.iter().enumerate() {
        for k in 0..l_classes {
            samples.push(x.clone());
            labels.push(k);
            costs.push(params.c_star);
            origins.push(RowOrigin::Universum { index: i, artificial_label: k });
            for l in 0..l_classes {
                margins.push(if l == k { 0.0 } else { -params.delta });
            }
        }
    }

    Ok(AugmentedProblem {
        samples,
        labels,
        costs,
        margins,
        origins,
        n_train: n,
        n_universum: m,
        n_classes: l_classes,
    })
}

/// A trained model: the support rows with their dual weights.
#[derive(Debug, Clone)]
pub struct Model {
    pub kernel: KernelSpec,
    pub params: Hyperparams,
    pub n_classes: usize,
    pub dim: usize,
    /// External label shown for each internal class id.
    pub label_map: Vec<i64>,
    /// Support sample vectors, in original row order.
    pub support_samples: Vec<Vec<f64>>,
    /// One row of `L` dual weights per support sample.
    pub alpha: Vec<Vec<f64>>,
}

impl Model {
    /// Extracts the support rows (any nonzero dual weight) of a solution.
    pub fn from_solution(
        problem: &AugmentedProblem,
        kernel: KernelSpec,
        params: Hyperparams,
        solution: &DualSolution,
        label_map: Vec<i64>,
    ) -> Result<Self> {
        if label_map.len() != problem.n_classes {
            return Err(Error::DimensionMismatch(format!(
                "label map has {} entries for {} classes",
                label_map.len(),
                problem.n_classes
            )));
        }
        let mut support_samples = Vec::new();
        let mut alpha = Vec::new();
        for i in 0..problem.n_rows() {
            let row = solution.alpha.row(i);
            if row.iter().any(|&a| a != 0.0) {
                support_samples.push(problem.samples[i].clone());
                alpha.push(row.to_vec());
            }
        }
        Ok(Model {
            kernel,
            params,
            n_classes: problem.n_classes,
            dim: problem.samples.first().map_or(0, Vec::len),
            label_map,
            support_samples,
            alpha,
        })
    }

    /// Per-class decision values `f_l(x) = sum_i alpha[i][l] K(x_i, x)`.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let mut f = vec![0.0; self.n_classes];
        for (sv, a) in self.support_samples.iter().zip(&self.alpha) {
            let k = kernel_eval(self.kernel, sv, x);
            for l in 0..self.n_classes {
                f[l] += a[l] * k;
            }
        }
        f
    }

    /// Predicted internal class id: argmax of the decision values, ties
    /// resolved toward the smallest class id.
    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_first(&self.decision_values(x))
    }

    /// Predicted external label.
    pub fn predict_label(&self, x: &[f64]) -> i64 {
        self.label_map[self.predict(x)]
    }

    /// Fraction of samples whose prediction differs from the label.
    pub fn error_rate(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let wrong = data
            .samples
            .iter()
            .zip(&data.labels)
            .filter(|(x, &y)| self.predict(x) != y)
            .count();
        wrong as f64 / data.len() as f64
    }
}

/// Index of the largest value, first one on ties.
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Value of the regularized primal objective at the model's weights:
/// `0.5 * sum_l ||w_l||^2 + sum_i C_i * xi_i` with
/// `xi_i = max_l (e_il - f_{y_i}(x_i) + f_l(x_i))`.
///
/// At an optimal dual solution this equals the dual objective.
pub fn primal_objective(model: &Model, problem: &AugmentedProblem) -> f64 {
    let l_classes = model.n_classes;
    // ||w_l||^2 from the support expansion.
    let mut w_norms = vec![0.0; l_classes];
    for (i, xi) in model.support_samples.iter().enumerate() {
        for (j, xj) in model.support_samples.iter().enumerate() {
            let k = kernel_eval(model.kernel, xi, xj);
            for l in 0..l_classes {
                w_norms[l] += model.alpha[i][l] * model.alpha[j][l] * k;
            }
        }
    }
    let reg = 0.5 * w_norms.iter().sum::<f64>();

    let mut loss = 0.0;
    for i in 0..problem.n_rows() {
        let f = model.decision_values(&problem.samples[i]);
        let y = problem.labels[i];
        let mut xi = 0.0f64;
        for l in 0..l_classes {
            xi = xi.max(problem.margin(i, l) - f[y] + f[l]);
        }
        loss += problem.costs[i] * xi;
    }
    reg + loss
}

/// Support-vector category of one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvCategory {
    /// `alpha[i][y_i]` is zero: the whole row is zero.
    NonSv,
    /// `alpha[i][y_i]` strictly between the bounds (a margin support vector).
    Margin,
    /// `alpha[i][y_i]` at its cost bound.
    AtBound,
}

/// Partition of the rows by support-vector category.
#[derive(Debug, Clone)]
pub struct SvPartition {
    /// Category per row.
    pub category: Vec<SvCategory>,
    /// Rows with `alpha[i][y_i]` strictly inside `(0, C_i)`.
    pub margin: Vec<usize>,
    /// Rows with `alpha[i][y_i]` at `C_i`.
    pub at_bound: Vec<usize>,
}

impl SvPartition {
    /// True when row `i` is a support vector of either category.
    pub fn is_sv(&self, i: usize) -> bool {
        self.category[i] != SvCategory::NonSv
    }

    /// Margin rows that came from the training set.
    pub fn margin_train<'a>(&'a self, problem: &'a AugmentedProblem) -> impl Iterator<Item = usize> + 'a {
        self.margin.iter().copied().filter(|&i| problem.is_train_row(i))
    }

    /// At-bound rows that came from the training set.
    pub fn at_bound_train<'a>(&'a self, problem: &'a AugmentedProblem) -> impl Iterator<Item = usize> + 'a {
        self.at_bound.iter().copied().filter(|&i| problem.is_train_row(i))
    }
}

/// Classifies every row by the value of `alpha[i][y_i]`.
///
/// The boundary tolerance is `1e-6 * C_i`: values within it of `C_i` count
/// as at-bound, values within it of `0` count as non-support.
pub fn classify_support_vectors(
    solution: &DualSolution,
    problem: &AugmentedProblem,
) -> SvPartition {
    let mut category = Vec::with_capacity(problem.n_rows());
    let mut margin = Vec::new();
    let mut at_bound = Vec::new();
    for i in 0..problem.n_rows() {
        let c_i = problem.costs[i];
        let tau = 1e-6 * c_i;
        let a = solution.alpha.get(i, problem.labels[i]);
        let cat = if a <= tau {
            SvCategory::NonSv
        } else if a >= c_i - tau {
            SvCategory::AtBound
        } else {
            SvCategory::Margin
        };
        category.push(cat);
        match cat {
            SvCategory::Margin => margin.push(i),
            SvCategory::AtBound => at_bound.push(i),
            SvCategory::NonSv => {}
        }
    }
    SvPartition { category, margin, at_bound }
}

/// Decision values at `x` computed straight from a solution over the
/// augmented problem (used before a `Model` is extracted).
pub fn decision_values_from_solution(
    problem: &AugmentedProblem,
    kernel: KernelSpec,
    solution: &DualSolution,
    x: &[f64],
) -> Vec<f64> {
    let l_classes = problem.n_classes;
    let mut f = vec![0.0; l_classes];
    for i in 0..problem.n_rows() {
        let row = solution.alpha.row(i);
        if row.iter().all(|&a| a == 0.0) {
            continue;
        }
        let k = kernel_eval(kernel, &problem.samples[i], x);
        for l in 0..l_classes {
            f[l] += row[l] * k;
        }
    }
    f
}

/// Decision values of every training row against a Gram matrix, flattened
/// row-major `N x L`: `f[i][l] = sum_j alpha[j][l] K(x_j, x_i)`.
pub fn decision_values_gram(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    solution: &DualSolution,
) -> Vec<f64> {
    let n = problem.n_rows();
    let l_classes = problem.n_classes;
    let mut f = vec![0.0; n * l_classes];
    for j in 0..n {
        let row = solution.alpha.row(j);
        if row.iter().all(|&a| a == 0.0) {
            continue;
        }
        let krow = gram.row(j);
        for i in 0..n {
            let k = krow[i];
            for l in 0..l_classes {
                f[i * l_classes + l] += row[l] * k;
            }
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_train() -> Dataset {
        Dataset {
            samples: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            labels: vec![0, 1],
            n_classes: 2,
        }
    }

    #[test]
    fn augment_counts_and_margins() {
        // 1 training sample, 2 universum samples, 2 classes -> 5 rows.
        let train = Dataset {
            samples: vec![vec![1.0]],
            labels: vec![0],
            n_classes: 2,
        };
        let universum = UniversumSet { samples: vec![vec![0.5], vec![-0.5]] };
        let params = Hyperparams { c: 1.0, c_star: 0.25, delta: 0.0 };
        let p = augment(&train, &universum, &params).unwrap();
        assert_eq!(p.n_rows(), 5);
        assert_eq!(p.n_train, 1);
        assert_eq!(p.n_universum, 2);
        // Training row margins: 0 at own label, 1 elsewhere.
        assert_eq!(p.margin(0, 0), 0.0);
        assert_eq!(p.margin(0, 1), 1.0);
        // delta = 0 makes every universum margin zero.
        for i in 1..5 {
            for l in 0..2 {
                assert_eq!(p.margin(i, l), 0.0);
            }
        }
        // Universum copies carry c_star and cycle artificial labels.
        assert_eq!(p.costs[1], 0.25);
        assert_eq!(p.labels[1], 0);
        assert_eq!(p.labels[2], 1);
        assert_eq!(
            p.origins[3],
            RowOrigin::Universum { index: 1, artificial_label: 0 }
        );
    }

    #[test]
    fn augment_universum_margins_scale_with_delta() {
        let train = toy_train();
        let universum = UniversumSet { samples: vec![vec![0.0, 0.0]] };
        let params = Hyperparams { c: 1.0, c_star: 0.5, delta: 0.1 };
        let p = augment(&train, &universum, &params).unwrap();
        // Row 2 is universum copy with artificial label 0.
        assert_eq!(p.margin(2, 0), 0.0);
        assert_eq!(p.margin(2, 1), -0.1);
        assert_eq!(p.margin(3, 0), -0.1);
        assert_eq!(p.margin(3, 1), 0.0);
    }

    #[test]
    fn augment_rejects_dimension_mismatch() {
        let train = toy_train();
        let universum = UniversumSet { samples: vec![vec![1.0]] };
        let params = Hyperparams::plain(1.0);
        assert!(augment(&train, &universum, &params).is_err());
    }

    #[test]
    fn augment_rejects_bad_labels() {
        let mut train = toy_train();
        train.labels[1] = 5;
        assert!(augment(&train, &UniversumSet::default(), &Hyperparams::plain(1.0)).is_err());
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams { c: 0.0, c_star: 0.0, delta: 0.0 }.validate().is_err());
        assert!(Hyperparams { c: 1.0, c_star: -0.1, delta: 0.0 }.validate().is_err());
        assert!(Hyperparams { c: 1.0, c_star: 0.0, delta: -0.1 }.validate().is_err());
        assert!(Hyperparams { c: 1.0, c_star: 0.5, delta: 0.1 }.validate().is_ok());
    }

    #[test]
    fn auto_c_star_uses_row_balance() {
        let p = Hyperparams::auto_c_star(2.0, 0.0, 300, 1000, 3);
        assert!((p.c_star - 2.0 * 300.0 / 3000.0).abs() < 1e-15);
        assert_eq!(Hyperparams::auto_c_star(2.0, 0.0, 300, 0, 3).c_star, 0.0);
    }

    #[test]
    fn predict_breaks_ties_toward_smaller_class() {
        assert_eq!(argmax_first(&[1.0, -1.0]), 0);
        assert_eq!(argmax_first(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax_first(&[0.0, 1.0, 1.0]), 1);
    }

    #[test]
    fn decision_values_match_manual_expansion() {
        let model = Model {
            kernel: KernelSpec::Linear,
            params: Hyperparams::plain(1.0),
            n_classes: 2,
            dim: 1,
            label_map: vec![1, 2],
            support_samples: vec![vec![1.0]],
            alpha: vec![vec![0.5, -0.5]],
        };
        let f = model.decision_values(&[2.0]);
        assert_eq!(f, vec![1.0, -1.0]);
        assert_eq!(model.predict(&[2.0]), 0);
        assert_eq!(model.predict_label(&[2.0]), 1);
    }
}
