//! Model selection: stratified cross-validation, the fast span-based
//! leave-one-out estimate, and a two-step grid search over cost, kernel
//! width and contradiction width.
//!
//! Cross-validation never copies the problem: every fold is solved on the
//! shared Gram matrix with the fold's training rows pinned at zero, which
//! is exactly the solution of the fold-complement problem because pinned
//! rows contribute nothing to the dual. The contradiction-width grid in the
//! second stage reuses both the Gram matrix (the width only moves margins,
//! never samples) and warm starts from the previous grid point.

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, GramMatrix, KernelSpec};
use crate::model::{argmax_first, augment, AugmentedProblem, Dataset, Hyperparams, UniversumSet};
use crate::solver::{solve_dual, AlphaMat, SolveOptions};
use crate::span::loo_span_estimate;
use rayon::prelude::*;
use std::time::Instant;

/// How a grid point's error is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    /// Stratified k-fold cross-validation.
    CrossValidation { k: usize },
    /// Span-based leave-one-out estimate from a single solve.
    SpanEstimate,
}

/// Kernel family searched by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Linear,
    Rbf,
}

/// Grid-search plan.
#[derive(Debug, Clone)]
pub struct SelectPlan {
    pub c_grid: Vec<f64>,
    /// Kernel widths; ignored for the linear family.
    pub gamma_grid: Vec<f64>,
    /// Contradiction widths swept in the second stage.
    pub delta_grid: Vec<f64>,
    pub family: KernelFamily,
    pub method: SelectionMethod,
    pub seed: u64,
    /// Solver tolerance for the selection solves.
    pub tol: f64,
}

impl SelectPlan {
    /// Conventional default grids for a kernel family.
    pub fn default_for(family: KernelFamily, method: SelectionMethod) -> Self {
        SelectPlan {
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            gamma_grid: vec![0.0078125, 0.03125, 0.125, 0.5],
            delta_grid: vec![0.0, 0.01, 0.05, 0.1],
            family,
            method,
            seed: 0,
            tol: 1e-3,
        }
    }
}

/// One evaluated grid point.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: Option<f64>,
    pub c_star: f64,
    pub delta: f64,
    pub estimate: f64,
    pub seconds: f64,
}

/// Outcome of the two-step search.
#[derive(Debug, Clone)]
pub struct Selection {
    pub params: Hyperparams,
    pub kernel: KernelSpec,
    /// Estimated error of the chosen point.
    pub estimate: f64,
    pub first_stage: Vec<GridPoint>,
    pub second_stage: Vec<GridPoint>,
    /// Total wall-clock seconds spent evaluating grid points.
    pub seconds: f64,
}

/// Stratified fold assignment: returns `fold_of[i]` for every sample.
///
/// Samples are grouped by class, shuffled with the seed and dealt
/// round-robin with a global cursor so fold sizes stay balanced. Requires
/// `2 <= k <= n`; `k == n` is the leave-one-out split and is always
/// allowed, otherwise every class must have at least `k` members so each
/// fold keeps every class.
pub fn stratified_folds(
    labels: &[usize],
    n_classes: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    use rand::{Rng, SeedableRng};
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::InvalidParam(format!("fold count {k} outside 2..={n}")));
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        if l >= n_classes {
            return Err(Error::InvalidParam(format!("label {l} outside 0..{n_classes}")));
        }
        counts[l] += 1;
    }
    if let Some((c, &cnt)) = counts.iter().enumerate().find(|(_, &cnt)| cnt < k) {
        return Err(Error::Stratification(format!(
            "class {c} has {cnt} samples, fewer than {k} folds"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; n];
    let mut cursor = 0usize;
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        for i in (1..idx.len()).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        for (pos, &i) in idx.iter().enumerate() {
            fold_of[i] = (cursor + pos) % k;
        }
        cursor = (cursor + idx.len()) % k;
    }
    Ok(fold_of)
}

/// Cross-validation settings.
#[derive(Debug, Clone)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { k: 5, seed: 0, tol: 1e-3 }
    }
}

/// Cross-validation outcome.
#[derive(Debug, Clone)]
pub struct CvReport {
    /// Total validation mistakes over total training samples.
    pub error: f64,
    /// Per-fold validation error rates.
    pub fold_errors: Vec<f64>,
    pub k: usize,
}

/// Stratified k-fold validation error for one hyperparameter point.
pub fn kfold_cv_error(
    train: &Dataset,
    universum: &UniversumSet,
    params: &Hyperparams,
    kernel: KernelSpec,
    opts: &CvOptions,
) -> Result<CvReport> {
    let problem = augment(train, universum, params)?;
    let gram = gram_matrix(kernel, &problem.samples)?;
    let fold_of = stratified_folds(&train.labels, train.n_classes, opts.k, opts.seed)?;
    let mut warm: Vec<Option<AlphaMat>> = vec![None; opts.k];
    let (error, fold_errors) =
        cv_error_pinned(&problem, &gram, &fold_of, opts.k, opts.tol, &mut warm)?;
    Ok(CvReport { error, fold_errors, k: opts.k })
}

/// Runs every fold on the shared Gram matrix by pinning the fold's
/// training rows, predicts the pinned rows from their Gram columns, and
/// leaves each fold's solution behind as the next warm start.
fn cv_error_pinned(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    fold_of: &[usize],
    k: usize,
    tol: f64,
    warm: &mut [Option<AlphaMat>],
) -> Result<(f64, Vec<f64>)> {
    let l_classes = problem.n_classes;
    let per_fold: Vec<(usize, usize, AlphaMat)> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let pinned: Vec<usize> =
                (0..problem.n_train).filter(|&i| fold_of[i] == fold).collect();
            let opts = SolveOptions {
                tol,
                pinned: pinned.clone(),
                warm_start: warm[fold].clone(),
                ..Default::default()
            };
            let sol = solve_dual(problem, gram, &opts)?;
            let mut mistakes = 0usize;
            for &t in &pinned {
                let col = gram.row(t);
                let mut f = vec![0.0; l_classes];
                for j in 0..problem.n_rows() {
                    let kjt = col[j];
                    if kjt != 0.0 {
                        let row = sol.alpha.row(j);
                        for c in 0..l_classes {
                            f[c] += row[c] * kjt;
                        }
                    }
                }
                if argmax_first(&f) != problem.labels[t] {
                    mistakes += 1;
                }
            }
            Ok((mistakes, pinned.len(), sol.alpha))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total_mistakes = 0usize;
    let mut fold_errors = Vec::with_capacity(k);
    for (fold, (mistakes, count, alpha)) in per_fold.into_iter().enumerate() {
        total_mistakes += mistakes;
        fold_errors.push(if count == 0 { 0.0 } else { mistakes as f64 / count as f64 });
        warm[fold] = Some(alpha);
    }
    let error = total_mistakes as f64 / problem.n_train.max(1) as f64;
    Ok((error, fold_errors))
}

/// Span-based leave-one-out error estimate for one hyperparameter point:
/// one solve, then the closed-form spans.
pub fn span_estimate_error(
    train: &Dataset,
    universum: &UniversumSet,
    params: &Hyperparams,
    kernel: KernelSpec,
    tol: f64,
) -> Result<f64> {
    let problem = augment(train, universum, params)?;
    let gram = gram_matrix(kernel, &problem.samples)?;
    let sol = solve_dual(&problem, &gram, &SolveOptions::with_tol(tol))?;
    Ok(loo_span_estimate(&problem, &gram, &sol, None)?.estimate)
}

/// Two-step grid search.
///
/// Stage one fixes the universum out of the problem (`C* = 0`) and scans
/// cost against kernel width. Stage two keeps the winning pair, sets
/// `C* = C n / (m L)` and scans the contradiction width, reusing the Gram
/// matrix and warm starts across the width grid. Ties prefer the smaller
/// width, then the smaller cost, then the smaller kernel width, by
/// iteration order with strict improvement.
pub fn two_step_select(
    train: &Dataset,
    universum: &UniversumSet,
    plan: &SelectPlan,
) -> Result<Selection> {
    if plan.c_grid.is_empty() {
        return Err(Error::InvalidParam("empty cost grid".into()));
    }
    if plan.family == KernelFamily::Rbf && plan.gamma_grid.is_empty() {
        return Err(Error::InvalidParam("empty kernel width grid".into()));
    }
    if let SelectionMethod::CrossValidation { k } = plan.method {
        if k < 2 {
            return Err(Error::InvalidParam(format!("fold count {k} below 2")));
        }
    }
    let mut c_grid = plan.c_grid.clone();
    c_grid.sort_by(f64::total_cmp);
    c_grid.dedup();
    let kernels: Vec<(Option<f64>, KernelSpec)> = match plan.family {
        KernelFamily::Linear => vec![(None, KernelSpec::Linear)],
        KernelFamily::Rbf => {
            let mut g = plan.gamma_grid.clone();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g.into_iter().map(|g| (Some(g), KernelSpec::Rbf { gamma: g })).collect()
        }
    };
    let mut delta_grid = plan.delta_grid.clone();
    delta_grid.sort_by(f64::total_cmp);
    delta_grid.dedup();

    let started = Instant::now();
    let no_universum = UniversumSet::default();

    // Stage one: cost and kernel width with the universum switched off.
    let mut first_stage = Vec::new();
    let mut best: Option<usize> = None;
    for &c in &c_grid {
        for (gamma, kernel) in &kernels {
            let t0 = Instant::now();
            let params = Hyperparams::plain(c);
            params.validate()?;
            let estimate = match plan.method {
                SelectionMethod::CrossValidation { k } => {
                    kfold_cv_error(
                        train,
                        &no_universum,
                        &params,
                        *kernel,
                        &CvOptions { k, seed: plan.seed, tol: plan.tol },
                    )?
                    .error
                }
                SelectionMethod::SpanEstimate => {
                    span_estimate_error(train, &no_universum, &params, *kernel, plan.tol)?
                }
            };
            first_stage.push(GridPoint {
                c,
                gamma: *gamma,
                c_star: 0.0,
                delta: 0.0,
                estimate,
                seconds: t0.elapsed().as_secs_f64(),
            });
            if best.map_or(true, |b| estimate < first_stage[b].estimate) {
                best = Some(first_stage.len() - 1);
            }
        }
    }
    let stage1 = first_stage[best.expect("nonempty grid")].clone();
    let kernel = match stage1.gamma {
        Some(g) => KernelSpec::Rbf { gamma: g },
        None => KernelSpec::Linear,
    };

    // Stage two: contradiction width with the universum switched on.
    let m = universum.samples.len();
    if m == 0 || delta_grid.is_empty() {
        let params = Hyperparams::plain(stage1.c);
        return Ok(Selection {
            params,
            kernel,
            estimate: stage1.estimate,
            first_stage,
            second_stage: Vec::new(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    let c_star =
        Hyperparams::auto_c_star(stage1.c, 0.0, train.len(), m, train.n_classes).c_star;
    let mut second_stage = Vec::new();
    let mut best2: Option<usize> = None;
    let mut problem = augment(
        train,
        universum,
        &Hyperparams { c: stage1.c, c_star, delta: delta_grid[0] },
    )?;
    let gram = gram_matrix(kernel, &problem.samples)?;
    match plan.method {
        SelectionMethod::CrossValidation { k } => {
            let fold_of = stratified_folds(&train.labels, train.n_classes, k, plan.seed)?;
            let mut warm: Vec<Option<AlphaMat>> = vec![None; k];
            for &delta in &delta_grid {
                let t0 = Instant::now();
                problem.set_universum_delta(delta);
                let (estimate, _) =
                    cv_error_pinned(&problem, &gram, &fold_of, k, plan.tol, &mut warm)?;
                second_stage.push(GridPoint {
                    c: stage1.c,
                    gamma: stage1.gamma,
                    c_star,
                    delta,
                    estimate,
                    seconds: t0.elapsed().as_secs_f64(),
                });
                if best2.map_or(true, |b| estimate < second_stage[b].estimate) {
                    best2 = Some(second_stage.len() - 1);
                }
            }
        }
        SelectionMethod::SpanEstimate => {
            let mut warm: Option<AlphaMat> = None;
            for &delta in &delta_grid {
                let t0 = Instant::now();
                problem.set_universum_delta(delta);
                let opts = SolveOptions {
                    tol: plan.tol,
                    warm_start: warm.clone(),
                    ..Default::default()
                };
                let sol = solve_dual(&problem, &gram, &opts)?;
                let estimate = loo_span_estimate(&problem, &gram, &sol, None)?.estimate;
                warm = Some(sol.alpha);
                second_stage.push(GridPoint {
                    c: stage1.c,
                    gamma: stage1.gamma,
                    c_star,
                    delta,
                    estimate,
                    seconds: t0.elapsed().as_secs_f64(),
                });
                if best2.map_or(true, |b| estimate < second_stage[b].estimate) {
                    best2 = Some(second_stage.len() - 1);
                }
            }
        }
    }
    let chosen = second_stage[best2.expect("nonempty width grid")].clone();
    Ok(Selection {
        params: Hyperparams { c: chosen.c, c_star: chosen.c_star, delta: chosen.delta },
        kernel,
        estimate: chosen.estimate,
        first_stage,
        second_stage,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Mean fractional rank of each grid point across runs.
///
/// Every run is a vector of error estimates over the same grid. Within a
/// run, points are ranked ascending from 1; exact ties share the mean of
/// the positions they occupy. The returned vector averages the ranks over
/// runs — lower means the point is consistently preferred.
pub fn rank_parameters(runs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let g = match runs.first() {
        Some(r) => r.len(),
        None => return Err(Error::InvalidParam("no runs to rank".into())),
    };
    if g == 0 || runs.iter().any(|r| r.len() != g) {
        return Err(Error::DimensionMismatch(
            "runs must share one nonempty grid".into(),
        ));
    }
    let mut mean = vec![0.0; g];
    for run in runs {
        let mut idx: Vec<usize> = (0..g).collect();
        idx.sort_by(|&a, &b| run[a].total_cmp(&run[b]));
        let mut pos = 0;
        while pos < g {
            let mut end = pos;
            while end + 1 < g && run[idx[end + 1]] == run[idx[pos]] {
                end += 1;
            }
            let rank = (pos + end) as f64 / 2.0 + 1.0;
            for &i in &idx[pos..=end] {
                mean[i] += rank;
            }
            pos = end + 1;
        }
    }
    for v in &mut mean {
        *v /= runs.len() as f64;
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::ClusterSpec;

    #[test]
    fn folds_are_stratified_and_balanced() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let fold_of = stratified_folds(&labels, 3, 5, 1).unwrap();
        // Each fold holds 6 samples, 2 of each class.
        for fold in 0..5 {
            for class in 0..3 {
                let count = labels
                    .iter()
                    .zip(&fold_of)
                    .filter(|(&l, &f)| l == class && f == fold)
                    .count();
                assert_eq!(count, 2, "fold {fold} class {class}");
            }
        }
    }

    #[test]
    fn folds_reject_too_small_classes() {
        let labels = vec![0, 0, 0, 1, 1, 1, 1, 1];
        let e = stratified_folds(&labels, 2, 4, 0).unwrap_err();
        assert!(matches!(e, Error::Stratification(_)), "{e}");
    }

    #[test]
    fn leave_one_out_folds_always_allowed() {
        let labels = vec![0, 1, 1, 2];
        let fold_of = stratified_folds(&labels, 3, 4, 0).unwrap();
        assert_eq!(fold_of, vec![0, 1, 2, 3]);
    }

    #[test]
    fn folds_are_seed_deterministic() {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let a = stratified_folds(&labels, 4, 5, 9).unwrap();
        let b = stratified_folds(&labels, 4, 5, 9).unwrap();
        let c = stratified_folds(&labels, 4, 5, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cv_error_is_low_on_separated_clusters() {
        let spec = ClusterSpec {
            train_per_class: 10,
            test_per_class: 1,
            separation: 6.0,
            spread: 0.3,
            ..Default::default()
        };
        let (train, _) = spec.sample(2);
        let report = kfold_cv_error(
            &train,
            &UniversumSet::default(),
            &Hyperparams::plain(1.0),
            KernelSpec::Linear,
            &CvOptions::default(),
        )
        .unwrap();
        assert!(report.error <= 0.1, "cv error {}", report.error);
        assert_eq!(report.fold_errors.len(), 5);
    }

    #[test]
    fn two_step_select_prefers_working_parameters() {
        let spec = ClusterSpec {
            train_per_class: 8,
            test_per_class: 1,
            separation: 5.0,
            spread: 0.4,
            ..Default::default()
        };
        let (train, _) = spec.sample(11);
        let universum = crate::synth::random_averaging_universum(&train, 12, 3);
        let plan = SelectPlan {
            c_grid: vec![0.1, 1.0],
            gamma_grid: vec![0.125],
            delta_grid: vec![0.0, 0.05],
            family: KernelFamily::Rbf,
            method: SelectionMethod::CrossValidation { k: 4 },
            seed: 0,
            tol: 1e-4,
        };
        let sel = two_step_select(&train, &universum, &plan).unwrap();
        assert_eq!(sel.first_stage.len(), 2);
        assert_eq!(sel.second_stage.len(), 2);
        assert!(sel.estimate <= 0.25, "estimate {}", sel.estimate);
        // The auto rule fixes C* to C n / (m L).
        let expect = sel.params.c * train.len() as f64 / (12.0 * 3.0);
        assert!((sel.params.c_star - expect).abs() < 1e-12);
    }

    #[test]
    fn span_method_runs_the_second_stage_with_warm_starts() {
        let spec = ClusterSpec {
            train_per_class: 6,
            test_per_class: 1,
            separation: 4.0,
            spread: 0.5,
            ..Default::default()
        };
        let (train, _) = spec.sample(21);
        let universum = crate::synth::random_averaging_universum(&train, 9, 4);
        let plan = SelectPlan {
            c_grid: vec![1.0],
            gamma_grid: vec![0.25],
            delta_grid: vec![0.0, 0.01, 0.1],
            family: KernelFamily::Rbf,
            method: SelectionMethod::SpanEstimate,
            seed: 0,
            tol: 1e-5,
        };
        let sel = two_step_select(&train, &universum, &plan).unwrap();
        assert_eq!(sel.second_stage.len(), 3);
        assert!(sel.second_stage.iter().all(|p| (0.0..=1.0).contains(&p.estimate)));
    }

    #[test]
    fn ranks_average_with_ties_sharing_mean_rank() {
        let runs = vec![vec![0.1, 0.3, 0.1, 0.5], vec![0.2, 0.2, 0.4, 0.2]];
        let ranks = rank_parameters(&runs).unwrap();
        // Run 1 ranks: [1.5, 3, 1.5, 4]; run 2 ranks: [2, 2, 4, 2].
        assert_eq!(ranks, vec![1.75, 2.5, 2.75, 3.0]);
    }

    #[test]
    fn pinned_cv_equals_separate_retraining() {
        // The pinning shortcut must give the same fold errors as physically
        // removing the fold and retraining on the remainder.
        let spec = ClusterSpec {
            train_per_class: 6,
            test_per_class: 1,
            separation: 2.0,
            spread: 0.8,
            ..Default::default()
        };
        let (train, _) = spec.sample(33);
        let params = Hyperparams::plain(1.0);
        let kernel = KernelSpec::Rbf { gamma: 0.3 };
        let opts = CvOptions { k: 3, seed: 5, tol: 1e-8 };
        let report = kfold_cv_error(&train, &UniversumSet::default(), &params, kernel, &opts).unwrap();

        let fold_of = stratified_folds(&train.labels, train.n_classes, 3, 5).unwrap();
        for fold in 0..3 {
            let keep: Vec<usize> = (0..train.len()).filter(|&i| fold_of[i] != fold).collect();
            let sub = Dataset {
                samples: keep.iter().map(|&i| train.samples[i].clone()).collect(),
                labels: keep.iter().map(|&i| train.labels[i]).collect(),
                n_classes: train.n_classes,
            };
            let problem = augment(&sub, &UniversumSet::default(), &params).unwrap();
            let gram = gram_matrix(kernel, &problem.samples).unwrap();
            let sol = solve_dual(&problem, &gram, &SolveOptions::with_tol(1e-8)).unwrap();
            let mut mistakes = 0usize;
            let held: Vec<usize> = (0..train.len()).filter(|&i| fold_of[i] == fold).collect();
            for &t in &held {
                let mut f = vec![0.0; train.n_classes];
                for (row, &j) in keep.iter().enumerate() {
                    let k = crate::kernel::kernel_eval(kernel, &train.samples[j], &train.samples[t]);
                    for c in 0..train.n_classes {
                        f[c] += sol.alpha.get(row, c) * k;
                    }
                }
                if argmax_first(&f) != train.labels[t] {
                    mistakes += 1;
                }
            }
            let expect = mistakes as f64 / held.len() as f64;
            assert!(
                (report.fold_errors[fold] - expect).abs() < 1e-12,
                "fold {fold}: pinned {} vs retrained {expect}",
                report.fold_errors[fold]
            );
        }
    }
}
