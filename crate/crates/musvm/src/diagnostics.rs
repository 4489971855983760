//! Histogram-of-projections diagnostics.
//!
//! The projection of a sample onto class `k` is the decision-value margin
//! `f_k(x) - max_{l != k} f_l(x)`: positive when the machine would place
//! the sample in class `k` with room to spare, negative past the boundary.
//! Training samples are projected onto their own class; universum samples
//! are projected onto every class, where values hugging zero are the point
//! of universum training. Histograms are binned symmetrically around zero
//! so plots of different classes and components line up.

use crate::error::{Error, Result};
use crate::model::{Dataset, Model, UniversumSet};

/// Margin of class `k` in a decision-value vector: `f_k - max_{l != k} f_l`.
///
/// With `include_self_in_max` the competing maximum also ranges over `k`
/// itself, clamping the value at zero or below; the excluded form is the
/// default everywhere because it separates correct from incorrect sides.
pub fn decision_margin(f: &[f64], k: usize, include_self_in_max: bool) -> f64 {
    let mut competitor = f64::NEG_INFINITY;
    for (l, &v) in f.iter().enumerate() {
        if (l != k || include_self_in_max) && v > competitor {
            competitor = v;
        }
    }
    if competitor == f64::NEG_INFINITY {
        // Single class: no competitor exists.
        0.0
    } else {
        f[k] - competitor
    }
}

/// Projections of training samples onto their own class, grouped by class:
/// entry `k` holds one value per sample whose label is `k`.
pub fn class_projections(model: &Model, data: &Dataset) -> Result<Vec<Vec<f64>>> {
    if data.n_classes != model.n_classes {
        return Err(Error::DimensionMismatch(format!(
            "dataset has {} classes, model has {}",
            data.n_classes, model.n_classes
        )));
    }
    data.validate()?;
    let mut per_class = vec![Vec::new(); model.n_classes];
    for (x, &y) in data.samples.iter().zip(&data.labels) {
        let f = model.decision_values(x);
        per_class[y].push(decision_margin(&f, y, false));
    }
    Ok(per_class)
}

/// Projections of every universum sample onto every class: entry `k` holds
/// one value per universum sample.
pub fn universum_projections(model: &Model, universum: &UniversumSet) -> Vec<Vec<f64>> {
    let mut per_class = vec![Vec::with_capacity(universum.samples.len()); model.n_classes];
    for x in &universum.samples {
        let f = model.decision_values(x);
        for (k, bucket) in per_class.iter_mut().enumerate() {
            bucket.push(decision_margin(&f, k, false));
        }
    }
    per_class
}

/// How often each class wins the prediction over the universum samples.
/// The counts sum to the number of universum samples.
pub fn universum_predicted_frequencies(model: &Model, universum: &UniversumSet) -> Vec<usize> {
    let mut counts = vec![0usize; model.n_classes];
    for x in &universum.samples {
        counts[model.predict(x)] += 1;
    }
    counts
}

/// A fixed-width histogram over a symmetric range.
#[derive(Debug, Clone)]
pub struct Histogram {
    /// Bin edges, `bins + 1` ascending values from `-M` to `M`.
    pub edges: Vec<f64>,
    /// Bin counts; every bin is left-inclusive, the last also right-inclusive.
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Total count across bins.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bins `values` into `bins` equal-width cells over `[-M, M]` with
/// `M = max |v|`, so zero sits exactly on the midpoint edge. Empty input
/// (or all zeros) falls back to `M = 1` and yields zero counts everywhere
/// except the middle.
pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let m = values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let m = if m > 0.0 { m } else { 1.0 };
    let width = 2.0 * m / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|b| -m + width * b as f64).collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let idx = (((v + m) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    Histogram { edges, counts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{gram_matrix, KernelSpec};
    use crate::model::{augment, classify_support_vectors, Hyperparams, SvCategory};
    use crate::solver::{solve_dual, SolveOptions};
    use crate::synth::ClusterSpec;

    #[test]
    fn margin_excludes_own_class_by_default() {
        let f = [2.0, 1.0, -1.0];
        assert_eq!(decision_margin(&f, 0, false), 1.0);
        assert_eq!(decision_margin(&f, 2, false), -3.0);
        // Including the class itself caps the value at zero.
        assert_eq!(decision_margin(&f, 0, true), 0.0);
        assert_eq!(decision_margin(&f, 1, true), -1.0);
    }

    #[test]
    fn histogram_is_symmetric_and_right_closed() {
        let h = histogram(&[-1.0, -0.4, 0.4, 1.0], 4);
        assert_eq!(h.edges, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        // 1.0 falls into the last bin even though it sits on the edge.
        assert_eq!(h.counts, vec![1, 1, 1, 1]);
        assert_eq!(h.total(), 4);
    }

    #[test]
    fn histogram_of_nothing_is_zeroed_unit_range() {
        let h = histogram(&[], 5);
        assert_eq!(h.counts, vec![0; 5]);
        assert_eq!(h.edges.first(), Some(&-1.0));
        assert_eq!(h.edges.last(), Some(&1.0));
    }

    #[test]
    fn zero_slack_margin_rows_project_to_unit_margin() {
        // On a converged solve, a margin support row with zero slack sits
        // exactly one margin unit ahead of its best competitor.
        let spec = ClusterSpec {
            train_per_class: 8,
            test_per_class: 1,
            separation: 3.0,
            spread: 0.6,
            ..Default::default()
        };
        let (train, _) = spec.sample(17);
        let params = Hyperparams::plain(10.0);
        let problem = augment(&train, &UniversumSet::default(), &params).unwrap();
        let kernel = KernelSpec::Rbf { gamma: 0.4 };
        let gram = gram_matrix(kernel, &problem.samples).unwrap();
        let sol = solve_dual(&problem, &gram, &SolveOptions::with_tol(1e-10)).unwrap();
        assert!(sol.converged);
        let partition = classify_support_vectors(&sol, &problem);
        let model =
            Model::from_solution(&problem, kernel, params, &sol, vec![0, 1, 2]).unwrap();

        let mut checked = 0usize;
        for t in 0..train.len() {
            if partition.category[t] == SvCategory::Margin {
                let f = model.decision_values(&train.samples[t]);
                let margin = decision_margin(&f, train.labels[t], false);
                assert!(
                    (margin - 1.0).abs() < 1e-5,
                    "margin row {t} projects to {margin}"
                );
                checked += 1;
            }
        }
        assert!(checked > 0, "no margin rows to check");
    }

    #[test]
    fn universum_frequencies_sum_to_sample_count() {
        let spec = ClusterSpec { train_per_class: 6, test_per_class: 1, ..Default::default() };
        let (train, _) = spec.sample(4);
        let universum = crate::synth::random_averaging_universum(&train, 11, 8);
        let params = Hyperparams { c: 1.0, c_star: 0.3, delta: 0.05 };
        let problem = augment(&train, &universum, &params).unwrap();
        let gram = gram_matrix(KernelSpec::Linear, &problem.samples).unwrap();
        let sol = solve_dual(&problem, &gram, &SolveOptions::with_tol(1e-6)).unwrap();
        let model =
            Model::from_solution(&problem, KernelSpec::Linear, params, &sol, vec![0, 1, 2])
                .unwrap();
        let freq = universum_predicted_frequencies(&model, &universum);
        assert_eq!(freq.iter().sum::<usize>(), 11);
        let proj = universum_projections(&model, &universum);
        assert_eq!(proj.len(), 3);
        assert!(proj.iter().all(|p| p.len() == 11));
    }
}
