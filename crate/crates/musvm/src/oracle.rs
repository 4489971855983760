//! Slow, independent reference implementations.
//!
//! Each routine here validates a fast path elsewhere in the crate and is
//! deliberately written with a different algorithm: the dual oracle uses
//! projected gradient ascent with a bisection-based row projection (the
//! production solver uses exact water-filling over sorted breakpoints), the
//! span oracles solve the redistribution problems directly, and the binary
//! oracle trains a two-class universum machine from its own dual. None of
//! them share solver code with the fast paths beyond kernel evaluation and
//! the problem container itself. All are capped at desk scale and should
//! never be reached for by production code.

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, kernel_eval, GramMatrix, KernelSpec};
use crate::model::{argmax_first, augment, AugmentedProblem, Dataset, Hyperparams, UniversumSet};
use crate::solver::{solve_dual, AlphaMat, SolveOptions};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Configuration shared by the iterative oracles.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Fixed gradient step; `None` selects `1 / Lipschitz` from a power
    /// iteration on the relevant Gram block.
    pub step_size: Option<f64>,
    /// Iteration budget.
    pub max_iters: usize,
    /// Stopping threshold on the projected-gradient residual.
    pub tol: f64,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { step_size: None, max_iters: 500_000, tol: 1e-9, seed: 0 }
    }
}

/// Hard caps keeping the oracles at desk scale.
const BRUTE_FORCE_ROW_CAP: usize = 200;
const EXACT_LOO_CAP: usize = 500;
const SPAN_QP_CAP: usize = 100;
const SPAN_KKT_CAP: usize = 250;

/// Result of the projected-gradient dual oracle.
#[derive(Debug, Clone)]
pub struct OracleDual {
    pub alpha: AlphaMat,
    pub objective: f64,
    pub iters: usize,
    /// Final projected-gradient residual (infinity norm of the step,
    /// divided by the step size).
    pub residual: f64,
}

/// Euclidean projection of `z` onto `{ v : sum v = 0, v_l <= U_l }` where
/// `U_l = cost * [l == label]`, by bisection on the shift level.
///
/// The projected point has coordinates `min(U_l, z_l - mu)` with `mu` the
/// root of the (strictly decreasing while any coordinate is interior) sum
/// function; the root is bracketed analytically and bisected to machine
/// precision.
pub fn project_row_to_zero_sum(z: &[f64], cost: f64, label: usize) -> Vec<f64> {
    let upper = |l: usize| if l == label { cost } else { 0.0 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (l, &v) in z.iter().enumerate() {
        lo = lo.min(v - upper(l));
        hi = hi.max(v);
    }
    let mut lo = lo - 1.0;
    let mut hi = hi + 1.0;
    let sum_at = |mu: f64| -> f64 {
        z.iter()
            .enumerate()
            .map(|(l, &v)| (v - mu).min(upper(l)))
            .sum()
    };
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut v: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(l, &zv)| (zv - mu).min(upper(l)))
        .collect();
    // Absorb the bisection residue into the slackest coordinate.
    let sum: f64 = v.iter().sum();
    let (mut best, mut best_slack) = (0usize, f64::NEG_INFINITY);
    for (l, &vv) in v.iter().enumerate() {
        let slack = upper(l) - vv;
        if slack > best_slack {
            best_slack = slack;
            best = l;
        }
    }
    if v[best] - sum <= upper(best) {
        v[best] -= sum;
    }
    v
}

/// Power-iteration estimate of the largest eigenvalue of a symmetric
/// non-negative-definite operator given as a matvec closure.
fn power_iteration<F: Fn(&[f64], &mut [f64])>(dim: usize, seed: u64, matvec: F) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut w = vec![0.0; dim];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        matvec(&v, &mut w);
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        std::mem::swap(&mut v, &mut w);
    }
    lambda.max(0.0)
}

/// Dual objective evaluated from scratch, row-major layout.
fn oracle_objective(problem: &AugmentedProblem, gram: &GramMatrix, alpha: &AlphaMat) -> f64 {
    let n = problem.n_rows();
    let l_classes = problem.n_classes;
    let mut quad = 0.0;
    let mut lin = 0.0;
    for i in 0..n {
        let ai = alpha.row(i);
        let krow = gram.row(i);
        for j in 0..n {
            let aj = alpha.row(j);
            let k = krow[j];
            if k != 0.0 {
                let mut acc = 0.0;
                for l in 0..l_classes {
                    acc += ai[l] * aj[l];
                }
                quad += k * acc;
            }
        }
        for l in 0..l_classes {
            lin += ai[l] * problem.margin(i, l);
        }
    }
    -0.5 * quad - lin
}

/// Projected gradient ascent on the dual, independent of the sweep solver.
///
/// Starts from `init` (or zero), steps along the full gradient with step
/// `1 / lambda_max(K)` (estimated by power iteration unless fixed in the
/// config), and projects every row by bisection. Each iteration also tries
/// an accelerated candidate stepped from a momentum extrapolation of the
/// last two iterates, keeps whichever candidate scores higher, and never
/// accepts a regression beyond rounding (momentum restarts whenever the
/// plain step wins); the step is halved if neither candidate improves.
/// Stops when the gradient-mapping residual at the current iterate drops
/// to `cfg.tol`. The acceleration matters on rank-deficient kernels, where
/// plain projected gradient crawls along nearly flat valleys.
pub fn brute_force_dual(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    cfg: &OracleConfig,
    init: Option<&AlphaMat>,
) -> Result<OracleDual> {
    let n = problem.n_rows();
    let l_classes = problem.n_classes;
    if n > BRUTE_FORCE_ROW_CAP {
        return Err(Error::SizeCap {
            what: "brute-force dual rows".into(),
            got: n,
            cap: BRUTE_FORCE_ROW_CAP,
        });
    }
    if gram.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "gram has {} rows for {n} problem rows",
            gram.len()
        )));
    }

    let lambda = power_iteration(n, cfg.seed, |v, out| {
        for i in 0..n {
            out[i] = gram.row(i).iter().zip(v).map(|(k, x)| k * x).sum();
        }
    });
    let mut step = cfg.step_size.unwrap_or(if lambda > 1e-300 { 1.0 / lambda } else { 1.0 });

    let mut alpha = match init {
        Some(a) => {
            if a.n_rows() != n || a.n_classes() != l_classes {
                return Err(Error::DimensionMismatch("init shape mismatch".into()));
            }
            let mut a = a.clone();
            for i in 0..n {
                let proj = project_row_to_zero_sum(a.row(i), problem.costs[i], problem.labels[i]);
                a.row_mut(i).copy_from_slice(&proj);
            }
            a
        }
        None => AlphaMat::zeros(n, l_classes),
    };

    let mut objective = oracle_objective(problem, gram, &alpha);
    // Monotone guard level: accepted iterates may never fall meaningfully
    // below it, but ties within rounding noise go to the momentum candidate
    // — on nearly flat valleys the two candidates differ by less than the
    // evaluation noise, and restarting momentum on every such tie would
    // degrade the method to plain projected gradient.
    let mut reference = objective;
    let mut alpha_prev = alpha.clone();
    let mut residual = f64::INFINITY;
    let mut iters = 0;
    let mut t_mom = 1.0f64;
    let mut grad = vec![0.0; n * l_classes];

    // Ascent direction at an arbitrary point (the momentum extrapolation
    // may sit outside the feasible set; the smooth gradient is defined
    // everywhere): -G_il = -(sum_j K_ij point_jl + e_il).
    let fill_grad = |point: &AlphaMat, grad: &mut [f64]| {
        for i in 0..n {
            let krow = gram.row(i);
            for l in 0..l_classes {
                grad[i * l_classes + l] = -problem.margin(i, l);
            }
            for j in 0..n {
                let k = krow[j];
                if k != 0.0 {
                    let pj = point.row(j);
                    for l in 0..l_classes {
                        grad[i * l_classes + l] -= k * pj[l];
                    }
                }
            }
        }
    };
    // Projected forward step from `point` along `grad`.
    let forward = |point: &AlphaMat, step: f64, grad: &[f64]| -> AlphaMat {
        let mut out = point.clone();
        for i in 0..n {
            let row = point.row(i);
            let z: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(l, &a)| a + step * grad[i * l_classes + l])
                .collect();
            let proj = project_row_to_zero_sum(&z, problem.costs[i], problem.labels[i]);
            out.row_mut(i).copy_from_slice(&proj);
        }
        out
    };

    while iters < cfg.max_iters {
        iters += 1;

        // Gradient-mapping residual and plain fallback candidate at alpha.
        fill_grad(&alpha, &mut grad);
        let plain = forward(&alpha, step, &grad);
        let mut move_inf = 0.0f64;
        for (p, a) in plain.as_slice().iter().zip(alpha.as_slice()) {
            move_inf = move_inf.max((p - a).abs());
        }
        residual = move_inf / step;
        if residual <= cfg.tol {
            break;
        }
        let plain_objective = oracle_objective(problem, gram, &plain);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_mom * t_mom).sqrt());
        let mom = (t_mom - 1.0) / t_next;
        // The momentum candidate is judged against the guard level only,
        // never against the plain candidate: while acceleration builds it
        // legitimately trails the plain step by tiny margins, and demanding
        // per-iteration superiority would degrade the whole method back to
        // plain projected gradient.
        let mut momentum: Option<(AlphaMat, f64)> = None;
        if mom > 0.0 {
            let y_flat: Vec<f64> = alpha
                .as_slice()
                .iter()
                .zip(alpha_prev.as_slice())
                .map(|(&a, &b)| a + mom * (a - b))
                .collect();
            let y = AlphaMat::from_flat(y_flat, n, l_classes)?;
            fill_grad(&y, &mut grad);
            let cand = forward(&y, step, &grad);
            let cand_objective = oracle_objective(problem, gram, &cand);
            momentum = Some((cand, cand_objective));
        }

        let guard = reference - 1e-12 * (1.0 + reference.abs());
        let momentum_overshot = momentum.is_some();
        match momentum {
            Some((cand, cand_objective)) if cand_objective >= guard => {
                alpha_prev = std::mem::replace(&mut alpha, cand);
                objective = cand_objective;
                reference = reference.max(cand_objective);
                t_mom = t_next;
            }
            _ if plain_objective >= guard => {
                alpha_prev = std::mem::replace(&mut alpha, plain);
                objective = plain_objective;
                reference = reference.max(plain_objective);
                // The counter sequence advances on every acceptance and
                // resets only when an actual momentum candidate regressed
                // past the guard; resetting on the momentum-free start
                // iterations would keep the coefficient at zero forever.
                t_mom = if momentum_overshot { 1.0 } else { t_next };
            }
            _ => {
                // Even the plain step regressed: the step must exceed the
                // inverse curvature (power iteration can under-estimate
                // lambda_max); halve it and restart the momentum.
                step *= 0.5;
                t_mom = 1.0;
                if step < 1e-280 {
                    break;
                }
            }
        }
    }

    Ok(OracleDual { alpha, objective, iters, residual })
}

/// Exact leave-one-out error by re-solving with each training row pinned.
#[derive(Debug, Clone)]
pub struct LooResult {
    /// Fraction of training rows misclassified when left out.
    pub error_rate: f64,
    /// Per-training-row mistake flags.
    pub mistakes: Vec<bool>,
}

/// Re-solves the dual once per training row with that row pinned at zero
/// (universum rows stay in), predicts the held-out sample from the reduced
/// solution and counts mistakes. Runs the rows in parallel; each solve is
/// warm-started from the full solution with the pinned row zeroed, which
/// changes nothing of the result because every solve still runs to the
/// stated tolerance.
pub fn exact_loo_error(
    train: &Dataset,
    universum: &UniversumSet,
    params: &Hyperparams,
    kernel: KernelSpec,
    tol: f64,
) -> Result<LooResult> {
    if train.len() > EXACT_LOO_CAP {
        return Err(Error::SizeCap {
            what: "exact leave-one-out training rows".into(),
            got: train.len(),
            cap: EXACT_LOO_CAP,
        });
    }
    let problem = augment(train, universum, params)?;
    let gram = gram_matrix(kernel, &problem.samples)?;
    let full = solve_dual(&problem, &gram, &SolveOptions::with_tol(tol))?;

    let mistakes: Vec<bool> = (0..train.len())
        .into_par_iter()
        .map(|t| {
            let mut warm = full.alpha.clone();
            warm.row_mut(t).fill(0.0);
            let opts = SolveOptions {
                tol,
                pinned: vec![t],
                warm_start: Some(warm),
                ..Default::default()
            };
            let sol = solve_dual(&problem, &gram, &opts)?;
            let l_classes = problem.n_classes;
            let mut f = vec![0.0; l_classes];
            for j in 0..problem.n_rows() {
                let k = gram.get(j, t);
                let row = sol.alpha.row(j);
                for c in 0..l_classes {
                    f[c] += row[c] * k;
                }
            }
            Ok(argmax_first(&f) != problem.labels[t])
        })
        .collect::<Result<Vec<bool>>>()?;

    let error_rate = mistakes.iter().filter(|&&m| m).count() as f64 / train.len().max(1) as f64;
    Ok(LooResult { error_rate, mistakes })
}

/// Result of the direct equality-constrained span solve.
#[derive(Debug, Clone)]
pub struct SpanKktResult {
    /// Optimal redistribution cost `S_t^2`.
    pub value: f64,
    /// True when the saddle system needed a pseudo-inverse.
    pub used_pseudo_inverse: bool,
}

/// Solves the equality-constrained redistribution problem for row `t`
/// directly: minimize `sum_{i,j} K_ij <beta_i, beta_j>` over rows supported
/// on the margin set plus `t`, with `beta_t = alpha_t` fixed and every free
/// row summing to zero. Assembles the full KKT system and solves it densely
/// with partial pivoting; no block shortcuts, no ridge.
pub fn span_kkt(
    gram: &GramMatrix,
    sv1_rows: &[usize],
    t: usize,
    alpha_t: &[f64],
    n_classes: usize,
) -> Result<SpanKktResult> {
    let l = n_classes;
    if alpha_t.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "alpha row has {} entries for {l} classes",
            alpha_t.len()
        )));
    }
    let free: Vec<usize> = sv1_rows.iter().copied().filter(|&r| r != t).collect();
    if free.len() > SPAN_KKT_CAP {
        return Err(Error::SizeCap { what: "span system rows".into(), got: free.len(), cap: SPAN_KKT_CAP });
    }
    let alpha_norm_sq: f64 = alpha_t.iter().map(|a| a * a).sum();
    let k_tt = gram.diag(t);
    if free.is_empty() {
        return Ok(SpanKktResult { value: k_tt * alpha_norm_sq, used_pseudo_inverse: false });
    }

    let nf = free.len();
    let size = nf * l + nf;
    let mut m = DMatrix::zeros(size, size);
    for a in 0..nf {
        for b in 0..nf {
            let k = gram.get(free[a], free[b]);
            for c in 0..l {
                m[(a * l + c, b * l + c)] = k;
            }
        }
        for c in 0..l {
            m[(nf * l + a, a * l + c)] = 1.0;
            m[(a * l + c, nf * l + a)] = 1.0;
        }
    }
    let mut rhs = DVector::zeros(size);
    for a in 0..nf {
        let k_at = gram.get(free[a], t);
        for c in 0..l {
            rhs[a * l + c] = -k_at * alpha_t[c];
        }
    }

    let lu = m.clone().lu();
    let (solution, used_pseudo_inverse) = match lu.solve(&rhs) {
        Some(s) => (s, false),
        None => {
            let pinv = m
                .clone()
                .pseudo_inverse(1e-12 * (1.0 + m.trace().abs()))
                .map_err(|e| Error::SingularSystem { what: format!("span system: {e}"), cond: f64::INFINITY })?;
            (pinv * &rhs, true)
        }
    };

    // Objective at the optimizer, assembled without shortcuts.
    let beta = |a: usize, c: usize| solution[a * l + c];
    let mut value = k_tt * alpha_norm_sq;
    for a in 0..nf {
        let k_at = gram.get(free[a], t);
        let mut cross = 0.0;
        for c in 0..l {
            cross += beta(a, c) * alpha_t[c];
        }
        value += 2.0 * k_at * cross;
        for b in 0..nf {
            let k_ab = gram.get(free[a], free[b]);
            let mut acc = 0.0;
            for c in 0..l {
                acc += beta(a, c) * beta(b, c);
            }
            value += k_ab * acc;
        }
    }
    Ok(SpanKktResult { value, used_pseudo_inverse })
}

/// Result of the inequality-constrained span problem.
#[derive(Debug, Clone)]
pub struct SpanQpResult {
    /// Optimal redistribution cost `S_t^2`.
    pub value: f64,
    /// True when any inequality constraint is active at the optimum.
    pub any_bound_active: bool,
    pub iters: usize,
    pub residual: f64,
}

/// Lower bound per redistribution coordinate, if constrained.
#[derive(Clone, Copy)]
enum CoordBound {
    Free,
    AtLeast(f64),
}

/// Solves the inequality-constrained redistribution problem for a margin
/// training row `t` by projected gradient descent.
///
/// Free variables are the rows of the margin support set without `t`; the
/// row of `t` is fixed at `alpha_t`. Each free row keeps a zero sum. A
/// coordinate `(i, l)` is bounded below by `alpha_il - C_i` when it is the
/// row's own label with `alpha` strictly inside `(0, C_i)`, and by
/// `alpha_il` when `l != y_i` with `alpha_il < 0`; other coordinates are
/// unconstrained. The per-row projection is exact (bisection on the shift
/// level); the step is `1 / Lipschitz` with halving on regression, so the
/// objective never increases. As in [`brute_force_dual`], every iteration
/// also tries a momentum-extrapolated candidate and keeps the better of
/// the two, which prevents the crawl of plain projected gradient on
/// rank-deficient kernel blocks.
pub fn span_qp(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    alpha: &AlphaMat,
    sv1_rows: &[usize],
    t: usize,
    cfg: &OracleConfig,
) -> Result<SpanQpResult> {
    let l = problem.n_classes;
    if !sv1_rows.contains(&t) {
        return Err(Error::InvalidParam(format!(
            "row {t} is not in the margin support set"
        )));
    }
    if sv1_rows.len() > SPAN_QP_CAP {
        return Err(Error::SizeCap {
            what: "span redistribution rows".into(),
            got: sv1_rows.len(),
            cap: SPAN_QP_CAP,
        });
    }
    let free: Vec<usize> = sv1_rows.iter().copied().filter(|&r| r != t).collect();
    let alpha_t: Vec<f64> = alpha.row(t).to_vec();
    let alpha_norm_sq: f64 = alpha_t.iter().map(|a| a * a).sum();
    let k_tt = gram.diag(t);
    if free.is_empty() {
        return Ok(SpanQpResult {
            value: k_tt * alpha_norm_sq,
            any_bound_active: false,
            iters: 0,
            residual: 0.0,
        });
    }

    let nf = free.len();
    // Bounds per free coordinate.
    let mut bounds = vec![CoordBound::Free; nf * l];
    for (a, &row) in free.iter().enumerate() {
        let cost = problem.costs[row];
        let label = problem.labels[row];
        let tau = 1e-12 * (1.0 + cost);
        for c in 0..l {
            let av = alpha.get(row, c);
            bounds[a * l + c] = if c == label {
                CoordBound::AtLeast(av - cost)
            } else if av < -tau {
                CoordBound::AtLeast(av)
            } else {
                CoordBound::Free
            };
        }
    }

    let lambda = power_iteration(nf, cfg.seed, |v, out| {
        for (a, &ra) in free.iter().enumerate() {
            out[a] = free
                .iter()
                .zip(v)
                .map(|(&rb, x)| gram.get(ra, rb) * x)
                .sum();
        }
    });
    let mut step = cfg.step_size.unwrap_or(if lambda > 1e-300 { 0.5 / lambda } else { 1.0 });

    // Start from the feasible point beta_i = alpha_i.
    let mut beta: Vec<f64> = free
        .iter()
        .flat_map(|&row| alpha.row(row).to_vec())
        .collect();

    let objective = |beta: &[f64]| -> f64 {
        let mut value = k_tt * alpha_norm_sq;
        for a in 0..nf {
            let k_at = gram.get(free[a], t);
            let mut cross = 0.0;
            for c in 0..l {
                cross += beta[a * l + c] * alpha_t[c];
            }
            value += 2.0 * k_at * cross;
            for b in 0..nf {
                let k_ab = gram.get(free[a], free[b]);
                let mut acc = 0.0;
                for c in 0..l {
                    acc += beta[a * l + c] * beta[b * l + c];
                }
                value += k_ab * acc;
            }
        }
        value
    };

    let mut value = objective(&beta);
    // Monotone guard level, mirroring [`brute_force_dual`]: ties within
    // rounding noise go to the momentum candidate so acceleration survives
    // nearly flat valleys, while the level itself never regresses.
    let mut reference = value;
    let mut beta_prev = beta.clone();
    let mut grad = vec![0.0; nf * l];
    let mut iters = 0;
    let mut residual = f64::INFINITY;
    let mut t_mom = 1.0f64;

    // Descent gradient at an arbitrary point (momentum extrapolations may
    // violate the lower bounds; the quadratic's gradient is still defined).
    let fill_grad = |point: &[f64], grad: &mut [f64]| {
        for a in 0..nf {
            let k_at = gram.get(free[a], t);
            for c in 0..l {
                grad[a * l + c] = 2.0 * k_at * alpha_t[c];
            }
            for b in 0..nf {
                let k_ab = gram.get(free[a], free[b]);
                if k_ab != 0.0 {
                    for c in 0..l {
                        grad[a * l + c] += 2.0 * k_ab * point[b * l + c];
                    }
                }
            }
        }
    };
    let forward = |point: &[f64], step: f64, grad: &[f64], bounds: &[CoordBound]| -> Vec<f64> {
        let mut out = vec![0.0; nf * l];
        for a in 0..nf {
            let z: Vec<f64> = (0..l)
                .map(|c| point[a * l + c] - step * grad[a * l + c])
                .collect();
            let proj = project_lower_bounded(&z, &bounds[a * l..(a + 1) * l]);
            out[a * l..(a + 1) * l].copy_from_slice(&proj);
        }
        out
    };

    while iters < cfg.max_iters {
        iters += 1;

        // Gradient-mapping residual and plain fallback candidate.
        fill_grad(&beta, &mut grad);
        let plain = forward(&beta, step, &grad, &bounds);
        let mut move_inf = 0.0f64;
        for (p, b) in plain.iter().zip(&beta) {
            move_inf = move_inf.max((p - b).abs());
        }
        residual = move_inf / step;
        if residual <= cfg.tol {
            break;
        }
        let plain_value = objective(&plain);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_mom * t_mom).sqrt());
        let mom = (t_mom - 1.0) / t_next;
        // Judged against the guard level only, mirroring [`brute_force_dual`]:
        // momentum may trail the plain candidate while acceleration builds.
        let mut momentum: Option<(Vec<f64>, f64)> = None;
        if mom > 0.0 {
            let y: Vec<f64> = beta
                .iter()
                .zip(&beta_prev)
                .map(|(&a, &b)| a + mom * (a - b))
                .collect();
            fill_grad(&y, &mut grad);
            let cand = forward(&y, step, &grad, &bounds);
            let cand_value = objective(&cand);
            momentum = Some((cand, cand_value));
        }

        let guard = reference + 1e-12 * (1.0 + reference.abs());
        let momentum_overshot = momentum.is_some();
        match momentum {
            Some((cand, cand_value)) if cand_value <= guard => {
                beta_prev = std::mem::replace(&mut beta, cand);
                value = cand_value;
                reference = reference.min(cand_value);
                t_mom = t_next;
            }
            _ if plain_value <= guard => {
                beta_prev = std::mem::replace(&mut beta, plain);
                value = plain_value;
                reference = reference.min(plain_value);
                // Advance on every acceptance; reset only after an actual
                // momentum overshoot (see [`brute_force_dual`]).
                t_mom = if momentum_overshot { 1.0 } else { t_next };
            }
            _ => {
                step *= 0.5;
                t_mom = 1.0;
                if step < 1e-280 {
                    break;
                }
            }
        }
    }
    if residual > cfg.tol {
        return Err(Error::NonConvergence {
            what: format!("span redistribution problem for row {t}"),
            residual,
            iters,
        });
    }

    let mut any_bound_active = false;
    for (idx, b) in bounds.iter().enumerate() {
        if let CoordBound::AtLeast(lb) = b {
            if beta[idx] - lb <= 1e-7 * (1.0 + lb.abs()) {
                any_bound_active = true;
                break;
            }
        }
    }
    Ok(SpanQpResult { value, any_bound_active, iters, residual })
}

/// Euclidean projection onto `{ v : sum v = 0, v_l >= lb_l (bounded l) }`
/// by bisection on the shift level.
fn project_lower_bounded(z: &[f64], bounds: &[CoordBound]) -> Vec<f64> {
    let value_at = |nu: f64| -> Vec<f64> {
        z.iter()
            .zip(bounds)
            .map(|(&zv, b)| match b {
                CoordBound::Free => zv - nu,
                CoordBound::AtLeast(lb) => (zv - nu).max(*lb),
            })
            .collect()
    };
    let sum_at = |nu: f64| -> f64 { value_at(nu).iter().sum() };
    let spread = z.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
        + bounds.iter().fold(0.0f64, |m, b| match b {
            CoordBound::Free => m,
            CoordBound::AtLeast(lb) => m.max(lb.abs()),
        })
        + 1.0;
    let mut lo = -spread;
    let mut hi = spread;
    for _ in 0..200 {
        if sum_at(lo) >= 0.0 {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if sum_at(hi) <= 0.0 {
            break;
        }
        hi *= 2.0;
    }
    for _ in 0..128 {
        let mid = 0.5 * (lo + hi);
        if sum_at(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = value_at(0.5 * (lo + hi));
    // Absorb the residue into the slackest coordinate (free ones first).
    let sum: f64 = v.iter().sum();
    let mut best: Option<(usize, f64)> = None;
    for (idx, b) in bounds.iter().enumerate() {
        let slack = match b {
            CoordBound::Free => f64::INFINITY,
            CoordBound::AtLeast(lb) => v[idx] - lb,
        };
        if best.map_or(true, |(_, s)| slack > s) {
            best = Some((idx, slack));
        }
    }
    if let Some((idx, slack)) = best {
        if slack >= sum {
            v[idx] -= sum;
        }
    }
    v
}

/// Feature-space diameter of a point subset by the core-set pull algorithm.
///
/// Maintains a center as a convex combination of the points, repeatedly
/// pulling it toward the farthest point with step `1/(k+1)`. Stops when the
/// radius estimate settles to within `tol` between iterations. The estimate
/// `max_i d(c, x_i)` can only overestimate the true radius, so the returned
/// diameter errs on the conservative side.
pub fn enclosing_ball_diameter(gram: &GramMatrix, rows: &[usize], tol: f64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    // s[i] = <c, phi(rows[i])>, c_sq = <c, c>, with c = phi(rows[0]) first.
    let mut s: Vec<f64> = rows.iter().map(|&r| gram.get(rows[0], r)).collect();
    let mut c_sq = gram.diag(rows[0]);
    let mut prev_radius = f64::INFINITY;
    let mut radius = 0.0;
    let max_iters = 4_000_000usize;
    for k in 1..=max_iters {
        let mut far = 0usize;
        let mut far_d = f64::NEG_INFINITY;
        for (i, &r) in rows.iter().enumerate() {
            let d = gram.diag(r) - 2.0 * s[i] + c_sq;
            if d > far_d {
                far_d = d;
                far = i;
            }
        }
        radius = far_d.max(0.0).sqrt();
        if k >= 32 && (radius - prev_radius).abs() < tol {
            break;
        }
        prev_radius = radius;
        let lam = 1.0 / (k + 1) as f64;
        let s_far = s[far];
        let r_far = rows[far];
        c_sq = (1.0 - lam) * (1.0 - lam) * c_sq
            + 2.0 * lam * (1.0 - lam) * s_far
            + lam * lam * gram.diag(r_far);
        for (i, &r) in rows.iter().enumerate() {
            s[i] = (1.0 - lam) * s[i] + lam * gram.get(r_far, r);
        }
    }
    2.0 * radius
}

/// A trained two-class universum machine (no bias term), used to validate
/// the two-class reduction of the multiclass formulation.
#[derive(Debug, Clone)]
pub struct BinaryOracle {
    kernel: KernelSpec,
    train_samples: Vec<Vec<f64>>,
    universum_samples: Vec<Vec<f64>>,
    y: Vec<f64>,
    /// Margin multipliers, one per training sample.
    pub a: Vec<f64>,
    /// Net tube multipliers `mu_plus - mu_minus`, one per universum sample.
    pub theta: Vec<f64>,
    pub iters: usize,
    pub residual: f64,
}

impl BinaryOracle {
    /// Decision value `f(x) = w . phi(x)` via the dual expansion.
    pub fn decision(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for (xi, (&ai, &yi)) in self.train_samples.iter().zip(self.a.iter().zip(&self.y)) {
            if ai != 0.0 {
                f += ai * yi * kernel_eval(self.kernel, xi, x);
            }
        }
        for (xu, &th) in self.universum_samples.iter().zip(&self.theta) {
            if th != 0.0 {
                f -= th * kernel_eval(self.kernel, xu, x);
            }
        }
        2.0 * f
    }
}

/// Trains the two-class universum machine on `+1`/`-1` labels by projected
/// gradient ascent on its own dual:
/// maximize `-||u||^2 + sum a_i - delta * sum (mu+ + mu-)` over
/// `0 <= a_i <= C`, `mu+, mu- >= 0`, `mu+ + mu- <= C*`, with
/// `u = sum a_i y_i phi(x_i) - sum (mu+ - mu-) phi(x*_j)` and decision
/// `f(x) = 2 <u, phi(x)>`. The primal it solves is
/// `min (1/4)||w||^2 + C sum xi + C* sum zeta` with the usual margin and
/// tube constraints, which is exactly the two-class image of the multiclass
/// problem under `w = w_1 - w_2`.
#[allow(clippy::too_many_arguments)]
pub fn binary_usvm_oracle(
    samples: &[Vec<f64>],
    y: &[f64],
    universum: &[Vec<f64>],
    kernel: KernelSpec,
    c: f64,
    c_star: f64,
    delta: f64,
    cfg: &OracleConfig,
) -> Result<BinaryOracle> {
    let n = samples.len();
    let m = universum.len();
    if n > BRUTE_FORCE_ROW_CAP || m > BRUTE_FORCE_ROW_CAP {
        return Err(Error::SizeCap {
            what: "binary oracle samples".into(),
            got: n.max(m),
            cap: BRUTE_FORCE_ROW_CAP,
        });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{n} samples but {} labels", y.len())));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParam("binary labels must be +1 or -1".into()));
    }
    let all: Vec<Vec<f64>> = samples.iter().chain(universum).cloned().collect();
    let gram = gram_matrix(kernel, &all)?;

    // <phi_i, u> for training block, <phi*_j, u> for universum block.
    let inner = |a: &[f64], theta: &[f64], idx: usize| -> f64 {
        let mut acc = 0.0;
        let krow = gram.row(idx);
        for j in 0..n {
            if a[j] != 0.0 {
                acc += a[j] * y[j] * krow[j];
            }
        }
        for j in 0..m {
            if theta[j] != 0.0 {
                acc -= theta[j] * krow[n + j];
            }
        }
        acc
    };

    let objective = |a: &[f64], mu_p: &[f64], mu_m: &[f64]| -> f64 {
        let theta: Vec<f64> = mu_p.iter().zip(mu_m).map(|(p, q)| p - q).collect();
        let mut u_sq = 0.0;
        for i in 0..n {
            if a[i] != 0.0 {
                u_sq += a[i] * y[i] * inner(a, &theta, i);
            }
        }
        for j in 0..m {
            if theta[j] != 0.0 {
                u_sq -= theta[j] * inner(a, &theta, n + j);
            }
        }
        let lin: f64 = a.iter().sum();
        let tube: f64 = mu_p.iter().chain(mu_m.iter()).sum();
        -u_sq + lin - delta * tube
    };

    // Lipschitz estimate of the gradient via the composite operator.
    let dim = n + 2 * m;
    let lambda = power_iteration(dim, cfg.seed, |v, out| {
        let a = &v[..n];
        let p = &v[n..n + m];
        let q = &v[n + m..];
        let theta: Vec<f64> = p.iter().zip(q).map(|(x, z)| x - z).collect();
        for i in 0..n {
            out[i] = y[i] * inner(a, &theta, i);
        }
        for j in 0..m {
            let val = inner(a, &theta, n + j);
            out[n + j] = -val;
            out[n + m + j] = val;
        }
    });
    let mut step = cfg.step_size.unwrap_or(if lambda > 1e-300 { 0.5 / lambda } else { 1.0 });

    let mut a = vec![0.0; n];
    let mut mu_p = vec![0.0; m];
    let mut mu_m = vec![0.0; m];
    let mut value = objective(&a, &mu_p, &mu_m);
    let mut iters = 0;
    let mut residual = f64::INFINITY;

    while iters < cfg.max_iters {
        iters += 1;
        let theta: Vec<f64> = mu_p.iter().zip(&mu_m).map(|(p, q)| p - q).collect();
        let grad_a: Vec<f64> = (0..n).map(|i| 1.0 - 2.0 * y[i] * inner(&a, &theta, i)).collect();
        let f_star: Vec<f64> = (0..m).map(|j| inner(&a, &theta, n + j)).collect();

        loop {
            let mut cand_a = vec![0.0; n];
            let mut cand_p = vec![0.0; m];
            let mut cand_m = vec![0.0; m];
            let mut move_inf = 0.0f64;
            for i in 0..n {
                let v = (a[i] + step * grad_a[i]).clamp(0.0, c);
                move_inf = move_inf.max((v - a[i]).abs());
                cand_a[i] = v;
            }
            for j in 0..m {
                let gp = 2.0 * f_star[j] - delta;
                let gm = -2.0 * f_star[j] - delta;
                let (vp, vm) = project_to_capped_quadrant(
                    mu_p[j] + step * gp,
                    mu_m[j] + step * gm,
                    c_star,
                );
                move_inf = move_inf.max((vp - mu_p[j]).abs()).max((vm - mu_m[j]).abs());
                cand_p[j] = vp;
                cand_m[j] = vm;
            }
            let cand_value = objective(&cand_a, &cand_p, &cand_m);
            if cand_value >= value - 1e-14 * (1.0 + value.abs()) {
                residual = move_inf / step;
                a = cand_a;
                mu_p = cand_p;
                mu_m = cand_m;
                value = cand_value;
                break;
            }
            step *= 0.5;
            if step < 1e-280 {
                residual = move_inf / 1e-280;
                break;
            }
        }
        if residual <= cfg.tol {
            break;
        }
    }

    let theta: Vec<f64> = mu_p.iter().zip(&mu_m).map(|(p, q)| p - q).collect();
    Ok(BinaryOracle {
        kernel,
        train_samples: samples.to_vec(),
        universum_samples: universum.to_vec(),
        y: y.to_vec(),
        a,
        theta,
        iters,
        residual,
    })
}

/// Exact projection of a point onto `{ (p, q) : p, q >= 0, p + q <= cap }`.
fn project_to_capped_quadrant(p: f64, q: f64, cap: f64) -> (f64, f64) {
    let cap = cap.max(0.0);
    // Quadrant clamp; if the cap is respected it is the projection.
    let (p0, q0) = (p.max(0.0), q.max(0.0));
    if p0 + q0 <= cap {
        return (p0, q0);
    }
    // Otherwise the cap face is active: project onto the line p + q = cap,
    // then clamp to its endpoints.
    let shift = 0.5 * (cap - p - q);
    let (p1, q1) = (p + shift, q + shift);
    if p1 < 0.0 {
        (0.0, cap)
    } else if q1 < 0.0 {
        (cap, 0.0)
    } else {
        (p1, q1)
    }
}
