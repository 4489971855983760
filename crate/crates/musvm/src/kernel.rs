//! Kernel functions and dense Gram matrices.
//!
//! Two kernels are supported: the linear kernel `K(x, z) = <x, z>` and the
//! Gaussian RBF kernel `K(x, z) = exp(-gamma * ||x - z||^2)`. Training works
//! on a dense Gram matrix computed once up front; rows are filled in
//! parallel but each entry depends only on its own pair of samples, so the
//! result is identical for any thread count.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Kernel choice together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Plain dot product.
    Linear,
    /// `exp(-gamma * ||x - z||^2)` with `gamma > 0`.
    Rbf { gamma: f64 },
}

impl KernelSpec {
    /// Default RBF width used when the caller does not tune gamma.
    pub const DEFAULT_GAMMA: f64 = 0.0078125; // 2^-7

    /// Validates the parameters (RBF gamma must be positive and finite).
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => {
                if gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParam(format!(
                        "rbf gamma must be positive and finite, got {gamma}"
                    )))
                }
            }
        }
    }
}

/// Evaluates the kernel on a pair of dense vectors.
///
/// Vectors of unequal length are treated as if the shorter one were padded
/// with zeros, matching the sparse input convention where trailing zero
/// features are simply absent.
pub fn kernel_eval(spec: KernelSpec, x: &[f64], z: &[f64]) -> f64 {
    match spec {
        KernelSpec::Linear => dot(x, z),
        KernelSpec::Rbf { gamma } => (-gamma * sq_dist(x, z)).exp(),
    }
}

/// Squared distance between `x` and `z` in the kernel feature space:
/// `K(x,x) + K(z,z) - 2 K(x,z)`, clamped at zero against rounding.
pub fn kernel_distance_sq(spec: KernelSpec, x: &[f64], z: &[f64]) -> f64 {
    let d = kernel_eval(spec, x, x) + kernel_eval(spec, z, z) - 2.0 * kernel_eval(spec, x, z);
    d.max(0.0)
}

fn dot(x: &[f64], z: &[f64]) -> f64 {
    // A zero pad contributes nothing to the product.
    x.iter().zip(z).map(|(a, b)| a * b).sum()
}

fn sq_dist(x: &[f64], z: &[f64]) -> f64 {
    let common: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    let tail: f64 = if x.len() >= z.len() {
        x[z.len()..].iter().map(|a| a * a).sum()
    } else {
        z[x.len()..].iter().map(|a| a * a).sum()
    };
    common + tail
}

/// Dense symmetric Gram matrix over a list of samples.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    values: Vec<f64>,
    n: usize,
}

impl GramMatrix {
    /// Number of samples (the matrix is `n x n`).
    pub fn len(&self) -> usize {
        self.n
    }

    /// True when the matrix is empty.
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Entry `K(x_i, x_j)`.
    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Row `i` as a contiguous slice of length `n`.
    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Diagonal entry `K(x_i, x_i)`.
    #[inline(always)]
    pub fn diag(&self, i: usize) -> f64 {
        self.values[i * self.n + i]
    }

    /// Sum of the diagonal.
    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.diag(i)).sum()
    }
}

/// Computes the dense Gram matrix of `samples` under `spec`.
///
/// All samples must share one dimension. Rows are computed in parallel;
/// symmetry holds exactly because the entry `(i, j)` and `(j, i)` are the
/// same floating-point expression evaluated on the same operands.
pub fn gram_matrix(spec: KernelSpec, samples: &[Vec<f64>]) -> Result<GramMatrix> {
    spec.validate()?;
    let n = samples.len();
    if n > 0 {
        let d = samples[0].len();
        if let Some(bad) = samples.iter().position(|s| s.len() != d) {
            return Err(Error::DimensionMismatch(format!(
                "sample 0 has dimension {d} but sample {bad} has {}",
                samples[bad].len()
            )));
        }
    }
    let mut values = vec![0.0; n * n];
    values
        .par_chunks_mut(n.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            for (j, out) in row.iter_mut().enumerate() {
                *out = kernel_eval(spec, &samples[i], &samples[j]);
            }
        });
    Ok(GramMatrix { values, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_kernel_is_dot_product() {
        assert_eq!(kernel_eval(KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]), 11.0);
    }

    #[test]
    fn unequal_lengths_act_as_zero_padding() {
        let short = [1.0, 2.0];
        let long = [3.0, 4.0, 5.0];
        let padded = [1.0, 2.0, 0.0];
        assert_eq!(
            kernel_eval(KernelSpec::Linear, &short, &long),
            kernel_eval(KernelSpec::Linear, &padded, &long),
        );
        let g = KernelSpec::Rbf { gamma: 0.3 };
        assert_eq!(kernel_eval(g, &short, &long), kernel_eval(g, &padded, &long));
        assert_eq!(kernel_eval(g, &long, &short), kernel_eval(g, &padded, &long));
    }

    #[test]
    fn rbf_kernel_matches_closed_form() {
        // ||x - z||^2 = 128 and gamma = 2^-7 gives exactly exp(-1).
        let gamma = KernelSpec::DEFAULT_GAMMA;
        let x = vec![0.0; 2];
        let z = vec![8.0, 8.0];
        let k = kernel_eval(KernelSpec::Rbf { gamma }, &x, &z);
        assert!((k - (-1.0f64).exp()).abs() < 1e-15, "got {k}");
    }

    #[test]
    fn rbf_diagonal_is_one() {
        let x = vec![3.0, -1.0, 2.5];
        let k = kernel_eval(KernelSpec::Rbf { gamma: 0.3 }, &x, &x);
        assert_eq!(k, 1.0);
    }

    #[test]
    fn distance_is_zero_on_identical_points() {
        let x = vec![1.0, 2.0, 3.0];
        for spec in [KernelSpec::Linear, KernelSpec::Rbf { gamma: 0.5 }] {
            assert_eq!(kernel_distance_sq(spec, &x, &x.clone()), 0.0);
        }
    }

    #[test]
    fn linear_distance_matches_euclidean() {
        let x = vec![1.0, 0.0];
        let z = vec![0.0, 2.0];
        assert!((kernel_distance_sq(KernelSpec::Linear, &x, &z) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn gram_matrix_is_symmetric_and_matches_entries() {
        let samples = vec![vec![1.0, 2.0], vec![-0.5, 1.0], vec![3.0, 0.0]];
        let g = gram_matrix(KernelSpec::Rbf { gamma: 0.2 }, &samples).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g.get(i, j), g.get(j, i));
                assert_eq!(g.get(i, j), kernel_eval(KernelSpec::Rbf { gamma: 0.2 }, &samples[i], &samples[j]));
            }
        }
    }

    #[test]
    fn gram_matrix_rejects_ragged_input() {
        let samples = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(gram_matrix(KernelSpec::Linear, &samples).is_err());
    }

    #[test]
    fn invalid_gamma_is_rejected() {
        assert!(KernelSpec::Rbf { gamma: 0.0 }.validate().is_err());
        assert!(KernelSpec::Rbf { gamma: -1.0 }.validate().is_err());
        assert!(KernelSpec::Rbf { gamma: f64::NAN }.validate().is_err());
    }
}
