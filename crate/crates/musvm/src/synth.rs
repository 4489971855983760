//! Seeded synthetic data generators.
//!
//! Everything here is deterministic in the seed: Gaussian class clusters
//! with optional pure-noise trailing dimensions, universum sets built by
//! randomly averaging training samples from different classes, and small
//! random problem instances for the oracle cross-check suites.

use crate::kernel::KernelSpec;
use crate::model::{Dataset, Hyperparams, UniversumSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A family of Gaussian class clusters.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub n_classes: usize,
    /// Total dimension, including any trailing noise dimensions.
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Distance scale of the class centers from the origin.
    pub separation: f64,
    /// Within-class standard deviation (all dimensions).
    pub spread: f64,
    /// Trailing dimensions that carry noise but no class signal.
    pub noise_dims: usize,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            n_classes: 3,
            dim: 2,
            train_per_class: 50,
            test_per_class: 200,
            separation: 2.0,
            spread: 1.0,
            noise_dims: 0,
        }
    }
}

/// One standard normal draw (Box-Muller).
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl ClusterSpec {
    /// Draws a train/test pair. Class centers are random directions in the
    /// informative subspace scaled to `separation`; samples add isotropic
    /// noise of size `spread` over all dimensions.
    pub fn sample(&self, seed: u64) -> (Dataset, Dataset) {
        assert!(self.n_classes >= 2, "need at least two classes");
        assert!(self.noise_dims < self.dim, "need at least one informative dimension");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let informative = self.dim - self.noise_dims;

        let centers: Vec<Vec<f64>> = (0..self.n_classes)
            .map(|_| {
                let mut dir: Vec<f64> = (0..informative).map(|_| normal(&mut rng)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                dir.iter_mut().for_each(|x| *x *= self.separation / norm);
                dir
            })
            .collect();

        let draw = |per_class: usize, rng: &mut ChaCha8Rng| -> Dataset {
            let mut samples = Vec::with_capacity(per_class * self.n_classes);
            let mut labels = Vec::with_capacity(per_class * self.n_classes);
            for c in 0..self.n_classes {
                for _ in 0..per_class {
                    let mut x = vec![0.0; self.dim];
                    for (d, v) in x.iter_mut().enumerate() {
                        *v = self.spread * normal(rng)
                            + if d < informative { centers[c][d] } else { 0.0 };
                    }
                    samples.push(x);
                    labels.push(c);
                }
            }
            Dataset { samples, labels, n_classes: self.n_classes }
        };

        let train = draw(self.train_per_class, &mut rng);
        let test = draw(self.test_per_class, &mut rng);
        (train, test)
    }
}

/// A family of classes separated along per-class center directions while
/// every sample also moves along a handful of shared high-variance
/// nuisance directions — the regime where contradiction samples built from
/// the data itself carry real information, since they inherit the nuisance
/// variation but sit between classes along the informative directions.
#[derive(Debug, Clone)]
pub struct FactorSpec {
    pub n_classes: usize,
    /// Ambient dimension.
    pub dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Distance of each class center from the origin.
    pub separation: f64,
    /// Number of shared nuisance directions.
    pub factor_rank: usize,
    /// Standard deviation of the movement along each nuisance direction.
    pub factor_sd: f64,
    /// Standard deviation of the isotropic noise on every dimension.
    pub noise_sd: f64,
}

impl FactorSpec {
    /// Draws a train/test pair.
    pub fn sample(&self, seed: u64) -> (Dataset, Dataset) {
        assert!(self.n_classes >= 2, "need at least two classes");
        assert!(self.dim >= 1, "need at least one dimension");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut v: Vec<f64> = (0..self.dim).map(|_| normal(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            v.iter_mut().for_each(|x| *x /= norm);
            v
        };
        let centers: Vec<Vec<f64>> = (0..self.n_classes).map(|_| unit(&mut rng)).collect();
        let factors: Vec<Vec<f64>> = (0..self.factor_rank).map(|_| unit(&mut rng)).collect();
        let draw = |per_class: usize, rng: &mut ChaCha8Rng| -> Dataset {
            let mut samples = Vec::with_capacity(per_class * self.n_classes);
            let mut labels = Vec::with_capacity(per_class * self.n_classes);
            for c in 0..self.n_classes {
                for _ in 0..per_class {
                    let mut x: Vec<f64> =
                        centers[c].iter().map(|&v| self.separation * v).collect();
                    for f in &factors {
                        let a = self.factor_sd * normal(rng);
                        for (xi, fi) in x.iter_mut().zip(f) {
                            *xi += a * fi;
                        }
                    }
                    for xi in x.iter_mut() {
                        *xi += self.noise_sd * normal(rng);
                    }
                    samples.push(x);
                    labels.push(c);
                }
            }
            Dataset { samples, labels, n_classes: self.n_classes }
        };
        let train = draw(self.train_per_class, &mut rng);
        let test = draw(self.test_per_class, &mut rng);
        (train, test)
    }
}

/// Universum built by averaging random training-sample pairs drawn from
/// different classes.
pub fn random_averaging_universum(train: &Dataset, m: usize, seed: u64) -> UniversumSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = train.len();
    let mut samples = Vec::with_capacity(m);
    if n < 2 {
        return UniversumSet { samples };
    }
    while samples.len() < m {
        let i = rng.gen_range(0..n);
        let j = rng.gen_range(0..n);
        if train.labels[i] == train.labels[j] {
            continue;
        }
        let avg: Vec<f64> = train.samples[i]
            .iter()
            .zip(&train.samples[j])
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        samples.push(avg);
    }
    UniversumSet { samples }
}

/// A complete small problem instance for the oracle suites.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub train: Dataset,
    pub universum: UniversumSet,
    pub params: Hyperparams,
    pub kernel: KernelSpec,
}

/// Draws a random small instance: `n <= 15` samples over 2-4 classes with
/// every class populated, up to 5 universum samples, log-uniform cost in
/// `[0.1, 10]`, and a kernel alternating with the seed parity.
pub fn small_instance(seed: u64) -> SmallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rng.gen_range(2..=4usize);
    let n = rng.gen_range(l..=15usize);
    let m = rng.gen_range(0..=5usize);
    let dim = rng.gen_range(1..=4usize);

    // Round-robin labels guarantee every class appears; shuffle the order.
    let mut labels: Vec<usize> = (0..n).map(|i| i % l).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()
    };
    let train = Dataset {
        samples: (0..n).map(|_| point(&mut rng)).collect(),
        labels,
        n_classes: l,
    };
    let universum = UniversumSet { samples: (0..m).map(|_| point(&mut rng)).collect() };

    let c = (rng.gen_range(0.1f64.ln()..10.0f64.ln())).exp();
    let c_star = if m > 0 { rng.gen_range(0.0..1.0) * c } else { 0.0 };
    let delta = rng.gen_range(0.0..0.2);
    let kernel = if seed % 2 == 0 {
        KernelSpec::Linear
    } else {
        KernelSpec::Rbf { gamma: rng.gen_range(0.05..1.5) }
    };
    SmallInstance { train, universum, params: Hyperparams { c, c_star, delta }, kernel }
}

/// Like [`small_instance`] but restricted to two classes, sized for the
/// binary-reduction checks.
pub fn small_binary_instance(seed: u64) -> SmallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0b15);
    let n = rng.gen_range(4..=12usize);
    let m = rng.gen_range(0..=6usize);
    let dim = rng.gen_range(1..=3usize);
    let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()
    };
    let train = Dataset {
        samples: (0..n).map(|_| point(&mut rng)).collect(),
        labels,
        n_classes: 2,
    };
    let universum = UniversumSet { samples: (0..m).map(|_| point(&mut rng)).collect() };
    let c = (rng.gen_range(0.2f64.ln()..5.0f64.ln())).exp();
    let c_star = if m > 0 { rng.gen_range(0.0..1.0) * c } else { 0.0 };
    let delta = rng.gen_range(0.0..0.15);
    let kernel = if seed % 2 == 0 {
        KernelSpec::Linear
    } else {
        KernelSpec::Rbf { gamma: rng.gen_range(0.1..1.0) }
    };
    SmallInstance { train, universum, params: Hyperparams { c, c_star, delta }, kernel }
}

/// A slightly larger instance for the leave-one-out bound checks:
/// up to 20 training samples over 2-3 classes, moderate cost.
pub fn bound_instance(seed: u64) -> SmallInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let l = rng.gen_range(2..=3usize);
    let n = rng.gen_range(2 * l..=20usize);
    let m = rng.gen_range(0..=4usize);
    let dim = rng.gen_range(2..=3usize);
    let mut labels: Vec<usize> = (0..n).map(|i| i % l).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect()
    };
    let train = Dataset {
        samples: (0..n).map(|_| point(&mut rng)).collect(),
        labels,
        n_classes: l,
    };
    let universum = UniversumSet { samples: (0..m).map(|_| point(&mut rng)).collect() };
    let c = (rng.gen_range(0.5f64.ln()..5.0f64.ln())).exp();
    let c_star = if m > 0 { rng.gen_range(0.1..0.8) * c } else { 0.0 };
    let delta = rng.gen_range(0.0..0.1);
    let kernel = KernelSpec::Rbf { gamma: rng.gen_range(0.2..1.0) };
    SmallInstance { train, universum, params: Hyperparams { c, c_star, delta }, kernel }
}
