//! Dual decomposition solver for the augmented problem.
//!
//! The dual maximizes
//! `W(alpha) = -1/2 sum_{i,j,l} alpha_il alpha_jl K_ij - sum_{i,l} alpha_il e_il`
//! subject to, for every row `i`, `sum_l alpha_il = 0` and
//! `alpha_il <= C_i * [l == y_i]`.
//!
//! One row at a time is re-optimized exactly while the others stay fixed;
//! the row subproblem is a quadratic over a shifted simplex face solved in
//! closed form by a water-filling scan over sorted breakpoints. Each epoch
//! runs one cyclic sweep over all rows followed by a re-solve of the row
//! with the largest optimality violation. The gradient matrix
//! `G_il = sum_j alpha_jl K_ij + e_il` is maintained incrementally
//! (`O(N * L)` per row update) and recomputed from scratch every 50 epochs
//! to cap floating-point drift. At every refresh the solver also attempts
//! one exact line-search step along the drift direction accumulated since
//! the previous refresh: on rank-deficient kernels, row-at-a-time ascent
//! can crawl down a nearly flat valley at a constant rate per sweep, and a
//! single extrapolated jump to the one-dimensional optimum (or the first
//! blocking bound) removes that crawl. The whole routine is sequential and
//! deterministic: identical inputs give bit-identical outputs regardless of
//! thread count.

use crate::error::{Error, Result};
use crate::kernel::GramMatrix;
use crate::model::AugmentedProblem;

/// Epochs between full gradient recomputations.
const GRADIENT_REFRESH_PERIOD: usize = 50;

/// Dense row-major `N x L` matrix of dual variables.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMat {
    data: Vec<f64>,
    n_rows: usize,
    n_classes: usize,
}

impl AlphaMat {
    /// All-zero matrix.
    pub fn zeros(n_rows: usize, n_classes: usize) -> Self {
        AlphaMat { data: vec![0.0; n_rows * n_classes], n_rows, n_classes }
    }

    /// Builds from a flat row-major buffer.
    pub fn from_flat(data: Vec<f64>, n_rows: usize, n_classes: usize) -> Result<Self> {
        if data.len() != n_rows * n_classes {
            return Err(Error::DimensionMismatch(format!(
                "flat buffer has {} entries, expected {n_rows} x {n_classes}",
                data.len()
            )));
        }
        Ok(AlphaMat { data, n_rows, n_classes })
    }

    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Number of classes per row.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Entry `alpha[i][l]`.
    #[inline(always)]
    pub fn get(&self, i: usize, l: usize) -> f64 {
        self.data[i * self.n_classes + l]
    }

    /// Row `i` as a slice of length `L`.
    #[inline(always)]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Mutable row `i`.
    #[inline(always)]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_classes..(i + 1) * self.n_classes]
    }

    /// Flat row-major view.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute entry difference against another matrix.
    pub fn max_abs_diff(&self, other: &AlphaMat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Options controlling a dual solve.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once the largest row optimality violation drops to this value.
    pub tol: f64,
    /// Hard cap on epochs; exceeding it returns `converged = false`.
    pub max_epochs: usize,
    /// Rows held at zero and excluded from sweeps and the violation measure
    /// (used by leave-one-out evaluation).
    pub pinned: Vec<usize>,
    /// Starting point; validated and projected row-wise if infeasible.
    pub warm_start: Option<AlphaMat>,
}

impl SolveOptions {
    /// Options with the given stopping tolerance and defaults elsewhere.
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Default::default() }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_epochs: 20_000, pinned: Vec::new(), warm_start: None }
    }
}

/// Result of a dual solve.
#[derive(Debug, Clone)]
pub struct DualSolution {
    /// Dual variables, `N x L`.
    pub alpha: AlphaMat,
    /// Dual objective `W(alpha)` at the returned point.
    pub objective: f64,
    /// Final largest row optimality violation.
    pub kkt_gap: f64,
    /// Epochs actually run.
    pub epochs: usize,
    /// Whether `kkt_gap <= tol` was reached within the epoch budget.
    pub converged: bool,
    /// Rows that were pinned at zero during the solve.
    pub pinned: Vec<usize>,
}

/// Solves the row subproblem exactly:
/// maximize `-(k_ii/2) ||a||^2 - <a, g>` over `sum_l a_l = 0`,
/// `a_l <= cost * [l == label]`.
///
/// `g` is the gradient of the coupling term with the row's own contribution
/// removed: `g_l = G_il - k_ii * alpha_il`. The optimum has the water-filling
/// form `a_l = min(U_l, -(g_l + mu) / k_ii)` with the level `mu` found by a
/// scan over breakpoints sorted in decreasing order.
pub fn subproblem_solve(g: &[f64], k_ii: f64, cost: f64, label: usize) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    let mut scratch = SubproblemScratch::new(g.len());
    solve_row(g, k_ii, cost, label, &mut out, &mut scratch);
    out
}

/// Reusable buffers for the row subproblem.
struct SubproblemScratch {
    breakpoints: Vec<f64>,
    order: Vec<usize>,
}

impl SubproblemScratch {
    fn new(l: usize) -> Self {
        SubproblemScratch { breakpoints: vec![0.0; l], order: (0..l).collect() }
    }
}

/// Water-filling core; writes the optimal row into `out`.
fn solve_row(g: &[f64], k_ii: f64, cost: f64, label: usize, out: &mut [f64], s: &mut SubproblemScratch) {
    let l_classes = g.len();
    debug_assert!(label < l_classes);
    if cost <= 0.0 || k_ii <= 0.0 {
        // Zero cost forces the whole row to zero: a_l <= 0 with zero sum.
        // A non-positive curvature row is skipped by the sweep and never
        // reaches here with k_ii <= 0, but return the safe answer anyway.
        out.fill(0.0);
        return;
    }
    // Upper bound U_l = cost at the row label, 0 elsewhere. Breakpoint
    // b_l = -g_l - k_ii * U_l is the level at which coordinate l switches
    // from interior, a_l = -(g_l + mu)/k_ii, to clamped at U_l.
    for l in 0..l_classes {
        let u = if l == label { cost } else { 0.0 };
        s.breakpoints[l] = -g[l] - k_ii * u;
    }
    for (l, o) in s.order.iter_mut().enumerate() {
        *o = l;
    }
    s.order
        .sort_by(|&a, &b| s.breakpoints[b].partial_cmp(&s.breakpoints[a]).unwrap());

    // Scan splits: the first j sorted coordinates clamped, the rest interior.
    // For each split the level solving the zero-sum equation is
    // mu_j = (k_ii * sum_clamped U - sum_interior g) / (L - j);
    // accept the first split consistent with its own breakpoint.
    let mut clamped_u_sum = 0.0;
    let mut interior_g_sum: f64 = g.iter().sum();
    let mut mu = 0.0;
    for j in 0..l_classes {
        mu = (k_ii * clamped_u_sum - interior_g_sum) / (l_classes - j) as f64;
        if mu > s.breakpoints[s.order[j]] || j == l_classes - 1 {
            break;
        }
        let l = s.order[j];
        let u = if l == label { cost } else { 0.0 };
        clamped_u_sum += u;
        interior_g_sum -= g[l];
    }

    let mut sum = 0.0;
    let mut slack_best = f64::NEG_INFINITY;
    let mut slack_idx = 0;
    for l in 0..l_classes {
        let u = if l == label { cost } else { 0.0 };
        let interior = -(g[l] + mu) / k_ii;
        let v = interior.min(u);
        out[l] = v;
        sum += v;
        if u - v > slack_best {
            slack_best = u - v;
            slack_idx = l;
        }
    }
    // Make the zero-sum constraint exact by absorbing the rounding residue
    // into the coordinate with the most slack below its bound.
    let u = if slack_idx == label { cost } else { 0.0 };
    if out[slack_idx] - sum <= u {
        out[slack_idx] -= sum;
    }
}

/// State shared by the sweep loop.
struct SolverState<'a> {
    problem: &'a AugmentedProblem,
    gram: &'a GramMatrix,
    /// Gradient columns: `grad[l][i] = G_il = sum_j alpha_jl K_ij + e_il`.
    grad: Vec<Vec<f64>>,
    alpha: AlphaMat,
    skip: Vec<bool>,
}

impl<'a> SolverState<'a> {
    fn new(
        problem: &'a AugmentedProblem,
        gram: &'a GramMatrix,
        alpha: AlphaMat,
        skip: Vec<bool>,
    ) -> Self {
        let grad = gradient_columns(problem, gram, &alpha);
        SolverState { problem, gram, grad, alpha, skip }
    }

    fn refresh_gradient(&mut self) {
        self.grad = gradient_columns(self.problem, self.gram, &self.alpha);
    }

    /// Re-solves row `i` exactly; returns the largest coordinate move.
    fn improve_row(&mut self, i: usize, gbuf: &mut [f64], abuf: &mut [f64], s: &mut SubproblemScratch) -> f64 {
        let l_classes = self.problem.n_classes;
        let k_ii = self.gram.diag(i);
        let cost = self.problem.costs[i];
        let old = self.alpha.row(i);
        for l in 0..l_classes {
            gbuf[l] = self.grad[l][i] - k_ii * old[l];
        }
        solve_row(gbuf, k_ii, cost, self.problem.labels[i], abuf, s);
        let mut moved = 0.0f64;
        for l in 0..l_classes {
            let delta = abuf[l] - old[l];
            moved = moved.max(delta.abs());
            if delta != 0.0 {
                let krow = self.gram.row(i);
                for (gj, &kj) in self.grad[l].iter_mut().zip(krow) {
                    *gj += delta * kj;
                }
            }
        }
        self.alpha.row_mut(i).copy_from_slice(abuf);
        moved
    }

    /// One exact line-search step along the drift direction `alpha - snap`.
    ///
    /// The direction inherits the zero row sums of its endpoints, so the
    /// only constraints that can block it are the upper bounds; the step is
    /// the exact maximizer of the one-dimensional quadratic restriction of
    /// the objective, capped at the first bound hit. Requires fresh gradient
    /// columns; patches them exactly for the move. Returns whether a step
    /// was taken. Monotone: only strictly improving steps are applied.
    fn extrapolate(&mut self, snap: &AlphaMat) -> bool {
        let n = self.problem.n_rows();
        let l_classes = self.problem.n_classes;
        let mut dir = vec![0.0f64; n * l_classes];
        let mut d_max = 0.0f64;
        for i in 0..n {
            if self.skip[i] {
                continue;
            }
            for l in 0..l_classes {
                let d = self.alpha.get(i, l) - snap.get(i, l);
                dir[i * l_classes + l] = d;
                d_max = d_max.max(d.abs());
            }
        }
        if d_max <= 0.0 {
            return false;
        }
        // Drop floating-point dust, then restore each row's exact zero sum
        // over the surviving coordinates. Rows left with fewer than two live
        // coordinates cannot move without breaking the equality and are
        // zeroed out entirely.
        let dust = 1e-12 * d_max;
        let mut rows: Vec<usize> = Vec::new();
        for i in 0..n {
            let row = &mut dir[i * l_classes..(i + 1) * l_classes];
            let mut support = 0usize;
            for d in row.iter_mut() {
                if d.abs() <= dust {
                    *d = 0.0;
                } else {
                    support += 1;
                }
            }
            if support < 2 {
                row.fill(0.0);
                continue;
            }
            let shift = row.iter().sum::<f64>() / support as f64;
            for d in row.iter_mut() {
                if *d != 0.0 {
                    *d -= shift;
                }
            }
            rows.push(i);
        }
        if rows.is_empty() {
            return false;
        }

        // First blocking upper bound along the direction.
        let mut s_max = f64::INFINITY;
        for &i in &rows {
            let cost = self.problem.costs[i];
            let label = self.problem.labels[i];
            for l in 0..l_classes {
                let d = dir[i * l_classes + l];
                if d > 0.0 {
                    let u = if l == label { cost } else { 0.0 };
                    let headroom = (u - self.alpha.get(i, l)).max(0.0);
                    s_max = s_max.min(headroom / d);
                }
            }
        }
        if !(s_max > 0.0) {
            return false;
        }

        // W(alpha + s dir) = W(alpha) + s <grad W, dir> - s^2/2 dir' (I x K) dir.
        let mut kd: Vec<Vec<f64>> = vec![vec![0.0; n]; l_classes];
        for &j in &rows {
            let krow = self.gram.row(j);
            for (l, kd_l) in kd.iter_mut().enumerate() {
                let dj = dir[j * l_classes + l];
                if dj != 0.0 {
                    for (out, &k) in kd_l.iter_mut().zip(krow) {
                        *out += dj * k;
                    }
                }
            }
        }
        let mut gain = 0.0f64;
        let mut curv = 0.0f64;
        for &i in &rows {
            for l in 0..l_classes {
                let d = dir[i * l_classes + l];
                if d != 0.0 {
                    gain -= self.grad[l][i] * d;
                    curv += d * kd[l][i];
                }
            }
        }
        if gain <= 0.0 {
            return false;
        }
        let curv = curv.max(0.0);
        let step = if curv > 1e-300 { (gain / curv).min(s_max) } else { s_max };
        if !(step > 0.0 && step.is_finite()) {
            return false;
        }

        // Apply; the bound clamp only absorbs rounding noise because s_max
        // already respects every bound exactly.
        for &i in &rows {
            let cost = self.problem.costs[i];
            let label = self.problem.labels[i];
            let arow = self.alpha.row_mut(i);
            for l in 0..l_classes {
                let d = dir[i * l_classes + l];
                if d != 0.0 {
                    let u = if l == label { cost } else { 0.0 };
                    arow[l] = (arow[l] + step * d).min(u);
                }
            }
        }
        for (l, kd_l) in kd.iter().enumerate() {
            for (g, &k) in self.grad[l].iter_mut().zip(kd_l) {
                *g += step * k;
            }
        }
        true
    }

    /// Largest per-row optimality violation and its argmax row.
    fn max_violation(&self) -> (f64, usize) {
        let mut worst = 0.0;
        let mut worst_row = usize::MAX;
        for i in 0..self.problem.n_rows() {
            if self.skip[i] {
                continue;
            }
            let v = row_violation_cols(self.problem, &self.grad, &self.alpha, i);
            if v > worst {
                worst = v;
                worst_row = i;
            }
        }
        (worst, worst_row)
    }
}

/// Optimality violation of one row from gradient columns.
#[inline]
fn row_violation_cols(
    problem: &AugmentedProblem,
    grad: &[Vec<f64>],
    alpha: &AlphaMat,
    i: usize,
) -> f64 {
    let cost = problem.costs[i];
    let tau = 1e-12 * (1.0 + cost);
    let label = problem.labels[i];
    let row = alpha.row(i);
    let mut g_max = f64::NEG_INFINITY;
    let mut g_min_free = f64::INFINITY;
    for (l, col) in grad.iter().enumerate() {
        let g = col[i];
        g_max = g_max.max(g);
        let u = if l == label { cost } else { 0.0 };
        if row[l] < u - tau {
            g_min_free = g_min_free.min(g);
        }
    }
    if g_min_free.is_finite() {
        g_max - g_min_free
    } else {
        0.0
    }
}

/// Gradient columns `G_il` from scratch: margins plus kernel expansion.
fn gradient_columns(problem: &AugmentedProblem, gram: &GramMatrix, alpha: &AlphaMat) -> Vec<Vec<f64>> {
    let n = problem.n_rows();
    let l_classes = problem.n_classes;
    let mut grad: Vec<Vec<f64>> = (0..l_classes)
        .map(|l| (0..n).map(|i| problem.margin(i, l)).collect())
        .collect();
    for j in 0..n {
        let row = alpha.row(j);
        let krow = gram.row(j);
        for (l, &a) in row.iter().enumerate() {
            if a != 0.0 {
                for (gi, &kj) in grad[l].iter_mut().zip(krow) {
                    *gi += a * kj;
                }
            }
        }
    }
    grad
}

/// Solves the dual to the requested tolerance.
///
/// Pinned rows are zeroed, skipped by every sweep and excluded from the
/// stopping measure. Rows with zero cost or non-positive diagonal kernel
/// entry are likewise held at zero and excluded (a zero-cost row can only
/// be zero; a zero-curvature row has no well-posed subproblem).
pub fn solve_dual(
    problem: &AugmentedProblem,
    gram: &GramMatrix,
    opts: &SolveOptions,
) -> Result<DualSolution> {
    let n = problem.n_rows();
    let l_classes = problem.n_classes;
    if gram.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "gram matrix is {} x {} but the problem has {n} rows",
            gram.len(),
            gram.len()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParam(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut skip = vec![false; n];
    for &p in &opts.pinned {
        if p >= n {
            return Err(Error::InvalidParam(format!("pinned row {p} out of range 0..{n}")));
        }
        skip[p] = true;
    }
    for i in 0..n {
        if problem.costs[i] <= 0.0 || gram.diag(i) <= 0.0 {
            skip[i] = true;
        }
    }

    let alpha = match &opts.warm_start {
        Some(w) => {
            if w.n_rows() != n || w.n_classes() != l_classes {
                return Err(Error::DimensionMismatch(format!(
                    "warm start is {} x {}, expected {n} x {l_classes}",
                    w.n_rows(),
                    w.n_classes()
                )));
            }
            let mut w = w.clone();
            for (i, &s) in skip.iter().enumerate() {
                if s {
                    w.row_mut(i).fill(0.0);
                }
            }
            w
        }
        None => AlphaMat::zeros(n, l_classes),
    };

    let mut state = SolverState::new(problem, gram, alpha, skip);
    let mut gbuf = vec![0.0; l_classes];
    let mut abuf = vec![0.0; l_classes];
    let mut scratch = SubproblemScratch::new(l_classes);

    // Project any infeasible warm-start rows onto their constraint sets by
    // an exact re-solve at the current gradients.
    if opts.warm_start.is_some() {
        for i in 0..n {
            if !state.skip[i] && !row_feasible(problem, &state.alpha, i) {
                state.improve_row(i, &mut gbuf, &mut abuf, &mut scratch);
            }
        }
    }

    let mut epochs = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;
    let mut snap = state.alpha.clone();
    while epochs < opts.max_epochs {
        epochs += 1;
        if epochs % GRADIENT_REFRESH_PERIOD == 0 {
            state.refresh_gradient();
            state.extrapolate(&snap);
            snap = state.alpha.clone();
        }
        for i in 0..n {
            if !state.skip[i] {
                state.improve_row(i, &mut gbuf, &mut abuf, &mut scratch);
            }
        }
        let (v, worst) = state.max_violation();
        gap = v;
        if v <= opts.tol {
            converged = true;
            break;
        }
        state.improve_row(worst, &mut gbuf, &mut abuf, &mut scratch);
    }

    // Report the final state against a freshly computed gradient.
    state.refresh_gradient();
    let (final_gap, _) = state.max_violation();
    gap = if converged { final_gap.min(gap) } else { final_gap };
    let objective = objective_from_gradient(problem, &state.grad, &state.alpha);

    Ok(DualSolution {
        alpha: state.alpha,
        objective,
        kkt_gap: gap,
        epochs,
        converged,
        pinned: opts.pinned.clone(),
    })
}

/// Feasibility of one row: zero sum and within bounds, to tight tolerance.
fn row_feasible(problem: &AugmentedProblem, alpha: &AlphaMat, i: usize) -> bool {
    let cost = problem.costs[i];
    let label = problem.labels[i];
    let tau = 1e-12 * (1.0 + cost);
    let row = alpha.row(i);
    let sum: f64 = row.iter().sum();
    if sum.abs() > tau {
        return false;
    }
    row.iter().enumerate().all(|(l, &a)| {
        let u = if l == label { cost } else { 0.0 };
        a <= u + tau
    })
}

/// `W(alpha) = -1/2 sum alpha (G - e) - sum alpha e = -1/2 sum alpha (G + e)`.
fn objective_from_gradient(problem: &AugmentedProblem, grad: &[Vec<f64>], alpha: &AlphaMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..problem.n_rows() {
        let row = alpha.row(i);
        for (l, col) in grad.iter().enumerate() {
            acc += row[l] * (col[i] + problem.margin(i, l));
        }
    }
    -0.5 * acc
}

/// Dual objective at an arbitrary point (recomputed from scratch).
pub fn dual_objective(problem: &AugmentedProblem, gram: &GramMatrix, alpha: &AlphaMat) -> f64 {
    let grad = gradient_columns(problem, gram, alpha);
    objective_from_gradient(problem, &grad, alpha)
}

/// Largest row optimality violation of a solution, recomputed from scratch.
///
/// For each row not pinned, not zero-cost and with positive diagonal kernel
/// entry, the violation is `max_l G_il - min over l with alpha_il below its
/// bound of G_il`; rows with no coordinate below bound score zero. The
/// result is zero exactly at a dual optimum.
pub fn kkt_violation(problem: &AugmentedProblem, gram: &GramMatrix, solution: &DualSolution) -> f64 {
    let grad = gradient_columns(problem, gram, &solution.alpha);
    let mut skip = vec![false; problem.n_rows()];
    for &p in &solution.pinned {
        skip[p] = true;
    }
    let mut worst = 0.0f64;
    for i in 0..problem.n_rows() {
        if skip[i] || problem.costs[i] <= 0.0 || gram.diag(i) <= 0.0 {
            continue;
        }
        worst = worst.max(row_violation_cols(problem, &grad, &solution.alpha, i));
    }
    worst
}

/// Largest feasibility defect of a solution: row-sum residue and bound
/// overshoot, both as absolute values.
pub fn feasibility_violation(problem: &AugmentedProblem, alpha: &AlphaMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..problem.n_rows() {
        let row = alpha.row(i);
        let sum: f64 = row.iter().sum();
        worst = worst.max(sum.abs());
        for (l, &a) in row.iter().enumerate() {
            let u = if l == problem.labels[i] { problem.costs[i] } else { 0.0 };
            worst = worst.max(a - u);
        }
    }
    worst
}
