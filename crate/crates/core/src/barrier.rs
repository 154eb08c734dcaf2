//! Logarithmic-barrier path following with damped Newton centering.
//!
//! The solver maximizes a concave objective `f0` over the open region
//! `{x : g_i(x) < 0}`. For a barrier parameter `tau` it minimizes
//!
//! ```text
//! F(x) = -tau * f0(x) - sum_i log(-g_i(x))
//! ```
//!
//! by Newton's method with a backtracking line search, then multiplies `tau`
//! by `mu` and re-centers until `n / tau <= eps`. Infeasible trial points and
//! points outside the domain of `f0` score `F = +inf`, so every accepted
//! iterate is strictly feasible.

use log::{debug, trace, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A twice-differentiable function of the solver variables.
///
/// Implementations accumulate into caller-provided buffers so the Newton loop
/// does not allocate per constraint.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;

    /// Function value. Points outside the natural domain return a
    /// non-finite value (`-inf` for a log objective).
    fn value(&self, x: &DVector<f64>) -> f64;

    /// `out += scale * grad(x)`.
    fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>);

    /// `out += scale * hess(x)`.
    fn add_hessian(&self, x: &DVector<f64>, scale: f64, out: &mut DMatrix<f64>);

    /// True when the Hessian is identically zero.
    fn is_affine(&self) -> bool {
        false
    }

    /// Coefficients when the function is an [`AffineFn`], letting the solver
    /// batch such constraints into one dense block.
    fn as_affine(&self) -> Option<&AffineFn> {
        None
    }
}

/// `a.x + b`.
#[derive(Debug, Clone)]
pub struct AffineFn {
    pub a: DVector<f64>,
    pub b: f64,
}

impl AffineFn {
    pub fn new(a: DVector<f64>, b: f64) -> Self {
        Self { a, b }
    }
}

impl SmoothFunction for AffineFn {
    fn dim(&self) -> usize {
        self.a.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.a.dot(x) + self.b
    }

    fn add_gradient(&self, _x: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
        out.axpy(scale, &self.a, 1.0);
    }

    fn add_hessian(&self, _x: &DVector<f64>, _scale: f64, _out: &mut DMatrix<f64>) {}

    fn is_affine(&self) -> bool {
        true
    }

    fn as_affine(&self) -> Option<&AffineFn> {
        Some(self)
    }
}

/// `x'Qx + r.x + c` with `Q` symmetric.
#[derive(Debug, Clone)]
pub struct QuadraticFn {
    pub q: DMatrix<f64>,
    pub r: DVector<f64>,
    pub c: f64,
}

impl QuadraticFn {
    pub fn new(q: DMatrix<f64>, r: DVector<f64>, c: f64) -> Self {
        Self { q, r, c }
    }
}

impl SmoothFunction for QuadraticFn {
    fn dim(&self) -> usize {
        self.r.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        (&self.q * x).dot(x) + self.r.dot(x) + self.c
    }

    fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
        out.gemv(2.0 * scale, &self.q, x, 1.0);
        out.axpy(scale, &self.r, 1.0);
    }

    fn add_hessian(&self, _x: &DVector<f64>, scale: f64, out: &mut DMatrix<f64>) {
        *out += &self.q * (2.0 * scale);
    }
}

/// `sum_j log(a_j.x + b_j)`, the log-volume objective of box and rectangle
/// models. Returns `-inf` when any argument is non-positive.
#[derive(Debug, Clone)]
pub struct LogSumFn {
    dim: usize,
    terms: Vec<AffineFn>,
}

impl LogSumFn {
    pub fn new(dim: usize, terms: Vec<AffineFn>) -> Self {
        debug_assert!(terms.iter().all(|t| t.a.len() == dim));
        Self { dim, terms }
    }

    pub fn terms(&self) -> &[AffineFn] {
        &self.terms
    }
}

impl SmoothFunction for LogSumFn {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let s = t.value(x);
            if s <= 0.0 || !s.is_finite() {
                return f64::NEG_INFINITY;
            }
            total += s.ln();
        }
        total
    }

    fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
        for t in &self.terms {
            out.axpy(scale / t.value(x), &t.a, 1.0);
        }
    }

    fn add_hessian(&self, x: &DVector<f64>, scale: f64, out: &mut DMatrix<f64>) {
        for t in &self.terms {
            let s = t.value(x);
            out.ger(-scale / (s * s), &t.a, &t.a, 1.0);
        }
    }
}

/// Concave objective to maximize plus convex constraints `g_i(x) < 0`.
pub struct BarrierProblem {
    dim: usize,
    objective: Box<dyn SmoothFunction>,
    constraints: Vec<Box<dyn SmoothFunction>>,
    /// Affine constraints as row-major `(a_i, b_i)` rows of length `dim + 1`.
    affine_rows: Vec<f64>,
    /// Indices of the remaining constraints.
    curved: Vec<usize>,
}

impl std::fmt::Debug for BarrierProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BarrierProblem")
            .field("dim", &self.dim)
            .field("n_barrier", &self.constraints.len())
            .finish()
    }
}

impl BarrierProblem {
    pub fn new(
        dim: usize,
        objective: Box<dyn SmoothFunction>,
        constraints: Vec<Box<dyn SmoothFunction>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("barrier problem needs at least one variable".into()));
        }
        if objective.dim() != dim {
            return Err(Error::Input(format!(
                "objective has dimension {}, expected {dim}",
                objective.dim()
            )));
        }
        if let Some((i, c)) = constraints.iter().enumerate().find(|(_, c)| c.dim() != dim) {
            return Err(Error::Input(format!(
                "constraint {i} has dimension {}, expected {dim}",
                c.dim()
            )));
        }
        let mut affine_rows = Vec::new();
        let mut curved = Vec::new();
        for (i, c) in constraints.iter().enumerate() {
            match c.as_affine() {
                Some(f) => {
                    affine_rows.extend(f.a.iter());
                    affine_rows.push(f.b);
                }
                None => curved.push(i),
            }
        }
        Ok(Self { dim, objective, constraints, affine_rows, curved })
    }



    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_barrier(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.objective.value(x)
    }

    pub fn constraint_values(&self, x: &DVector<f64>) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    /// Index and value of the first constraint with `g_i(x) >= 0`, if any.
    pub fn first_violation(&self, x: &DVector<f64>) -> Option<(usize, f64)> {
        self.constraints
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.value(x)))
            .find(|(_, g)| !(*g < 0.0))
    }

    pub fn is_strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.objective.value(x).is_finite() && self.first_violation(x).is_none()
    }

    /// `F(x) = -tau f0(x) - sum log(-g_i(x))`, or `+inf` outside the open
    /// feasible region.
    pub fn barrier_value(&self, x: &DVector<f64>, tau: f64) -> f64 {
        let f0 = self.objective.value(x);
        if !f0.is_finite() {
            return f64::INFINITY;
        }
        let Some(mut phi) = affine_log_sum(&self.affine_rows, x.as_slice()) else {
            return f64::INFINITY;
        };
        for &i in &self.curved {
            let g = self.constraints[i].value(x);
            if !(g < 0.0) {
                return f64::INFINITY;
            }
            phi += (-g).ln();
        }
        -tau * f0 - phi
    }

    /// Value, gradient and Hessian of `F` at a strictly feasible `x`, plus
    /// the sum of the absolute gradients of its terms, which bounds how much
    /// rounding `x` moves `F`.
    fn barrier_derivatives(
        &self,
        x: &DVector<f64>,
        tau: f64,
        scratch: &mut DVector<f64>,
    ) -> (f64, DVector<f64>, DMatrix<f64>, f64) {
        let n = self.dim;
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        self.objective.add_gradient(x, -tau, &mut grad);
        self.objective.add_hessian(x, -tau, &mut hess);
        let mut sensitivity = grad.lp_norm(1);
        let mut value = -tau * self.objective.value(x);
        let mut h = vec![0.0; n * n];
        let mut gsum = vec![0.0; n];
        let (log_sum, sens) = affine_derivatives(&self.affine_rows, x.as_slice(), &mut gsum, &mut h);
        value -= log_sum;
        sensitivity += sens;
        for k in 0..n {
            grad[k] += gsum[k];
            for j in k..n {
                let v = h[k * n + j];
                hess[(j, k)] += v;
                if j != k {
                    hess[(k, j)] += v;
                }
            }
        }
        for c in self.curved.iter().map(|&i| &self.constraints[i]) {
            let g = c.value(x);
            let w = -1.0 / g;
            value -= (-g).ln();
            scratch.fill(0.0);
            c.add_gradient(x, 1.0, scratch);
            sensitivity += w * scratch.lp_norm(1);
            grad.axpy(w, scratch, 1.0);
            hess.ger(w * w, scratch, scratch, 1.0);
            if !c.is_affine() {
                c.add_hessian(x, w, &mut hess);
            }
        }
        (value, grad, hess, sensitivity)
    }

    /// Spot-check concavity of the objective and convexity of the
    /// constraints through Hessian diagonals at `x`.
    fn curvature_spot_check(&self, x: &DVector<f64>) -> bool {
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        self.objective.add_hessian(x, 1.0, &mut h);
        let tol = 1e-9 * (1.0 + h.amax());
        if h.diagonal().iter().any(|&d| d > tol) {
            return false;
        }
        self.constraints.iter().all(|c| {
            let mut h = DMatrix::zeros(n, n);
            c.add_hessian(x, 1.0, &mut h);
            let tol = 1e-9 * (1.0 + h.amax());
            h.diagonal().iter().all(|&d| d >= -tol)
        })
    }
}

/// Running `sum log(v_i)` that takes one logarithm per batch of factors.
struct LogSum {
    sum: f64,
    prod: f64,
    count: u32,
}

impl LogSum {
    fn new() -> Self {
        Self { sum: 0.0, prod: 1.0, count: 0 }
    }

    #[inline]
    fn push(&mut self, v: f64) {
        if !(v > 1e-100 && v < 1e100) {
            self.sum += v.ln();
            return;
        }
        self.prod *= v;
        self.count += 1;
        if self.count == 8 || !(self.prod > 1e-150 && self.prod < 1e150) {
            self.flush();
        }
    }

    fn flush(&mut self) {
        self.sum += self.prod.ln();
        self.prod = 1.0;
        self.count = 0;
    }

    fn finish(mut self) -> f64 {
        self.flush();
        self.sum
    }
}

/// `sum log(-g_i)` over affine rows `(a_i, b_i)` with `g_i = a_i.x + b_i`,
/// or `None` if some `g_i >= 0`.
fn affine_log_sum(rows: &[f64], x: &[f64]) -> Option<f64> {
    let n = x.len();
    let mut acc = LogSum::new();
    for row in rows.chunks_exact(n + 1) {
        let (a, b) = row.split_at(n);
        let g = a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b[0];
        if !(g < 0.0) {
            return None;
        }
        acc.push(-g);
    }
    Some(acc.finish())
}

/// Barrier terms of the affine rows at a strictly feasible `x`: adds the
/// gradient to `grad` and the lower triangle of the Hessian, column-major,
/// to `h`. Returns `sum log(-g_i)` and the absolute-gradient sum.
fn affine_derivatives(rows: &[f64], x: &[f64], grad: &mut [f64], h: &mut [f64]) -> (f64, f64) {
    macro_rules! fixed {
        ($($n:literal)*) => {
            match x.len() {
                $($n => affine_derivatives_fixed::<$n>(rows, x, grad, h),)*
                _ => affine_derivatives_dyn(rows, x, grad, h),
            }
        };
    }
    fixed!(1 2 3 4 5 6 7 8 10 12)
}

fn affine_derivatives_fixed<const N: usize>(
    rows: &[f64],
    x: &[f64],
    grad: &mut [f64],
    h: &mut [f64],
) -> (f64, f64) {
    let x: &[f64; N] = x.try_into().expect("dimension mismatch");
    let mut gs = [0.0; N];
    let mut hs = [[0.0; N]; N];
    let mut logs = LogSum::new();
    let mut sensitivity = 0.0;
    for row in rows.chunks_exact(N + 1) {
        let a: &[f64; N] = row[..N].try_into().expect("row length");
        let mut g = row[N];
        let mut abs = 0.0;
        for j in 0..N {
            g += a[j] * x[j];
            abs += a[j].abs();
        }
        let w = -1.0 / g;
        logs.push(-g);
        sensitivity += w * abs;
        let w2 = w * w;
        for k in 0..N {
            gs[k] += w * a[k];
            let wa = w2 * a[k];
            for j in k..N {
                hs[k][j] += wa * a[j];
            }
        }
    }
    for k in 0..N {
        grad[k] += gs[k];
        for j in k..N {
            h[k * N + j] += hs[k][j];
        }
    }
    (logs.finish(), sensitivity)
}

fn affine_derivatives_dyn(rows: &[f64], x: &[f64], grad: &mut [f64], h: &mut [f64]) -> (f64, f64) {
    let n = x.len();
    let mut logs = LogSum::new();
    let mut sensitivity = 0.0;
    for row in rows.chunks_exact(n + 1) {
        let (a, b) = row.split_at(n);
        let g = a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + b[0];
        let w = -1.0 / g;
        logs.push(-g);
        sensitivity += w * a.iter().map(|v| v.abs()).sum::<f64>();
        let w2 = w * w;
        for (k, col) in h.chunks_exact_mut(n).enumerate() {
            grad[k] += w * a[k];
            let wa = w2 * a[k];
            for (hj, aj) in col[k..].iter_mut().zip(&a[k..]) {
                *hj += wa * aj;
            }
        }
    }
    (logs.finish(), sensitivity)
}

/// Barrier increment factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mu {
    /// `1 + 1/sqrt(n_barrier)`, the short-step rule behind the `sqrt(n)`
    /// iteration bound.
    Auto,
    Fixed(f64),
}

impl Mu {
    pub fn value(self, n_barrier: usize) -> f64 {
        match self {
            Mu::Auto => 1.0 + 1.0 / (n_barrier.max(1) as f64).sqrt(),
            Mu::Fixed(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tau0: f64,
    pub mu: Mu,
    /// Target for the duality-gap bound `n_barrier / tau`.
    pub eps: f64,
    /// Sufficient-decrease fraction of the backtracking line search.
    pub alpha: f64,
    /// Step shrink factor of the backtracking line search.
    pub beta: f64,
    /// Centering stops once `lambda^2 / 2 <= kappa`.
    pub kappa: f64,
    /// Newton step budget for a whole solve.
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            mu: Mu::Auto,
            eps: 1e-8,
            alpha: 0.2,
            beta: 0.9,
            kappa: 1e-10,
            max_newton: 5000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Input(format!("solver config: {what}")));
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad("tau0 must be positive");
        }
        if let Mu::Fixed(m) = self.mu {
            if !(m > 1.0 && m.is_finite()) {
                return bad("mu must exceed 1");
            }
        }
        if !(self.eps > 0.0) {
            return bad("eps must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return bad("alpha must lie in (0, 0.5)");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive");
        }
        if self.max_newton == 0 {
            return bad("max_newton must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Converged,
    StepBudget,
    LineSearchStall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub x_star: Vec<f64>,
    pub f0_star: f64,
    /// `n_barrier / tau` at the last completed centering.
    pub gap: f64,
    pub outer_iters: usize,
    pub newton_steps: usize,
    pub termination: Termination,
}

/// Outcome of one centering run.
#[derive(Debug, Clone)]
pub struct Centering {
    pub x: DVector<f64>,
    pub steps: usize,
    /// Newton decrement at the returned point.
    pub lambda: f64,
    pub status: CenterStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterStatus {
    Centered,
    StepBudget,
    LineSearchStall,
}

/// Iterates with a norm beyond this are treated as divergence.
const DIVERGENCE_NORM: f64 = 1e9;

/// Dense Cholesky factorization in place (lower triangle). Fails on a
/// non-positive diagonal or a pivot that is negative beyond rounding.
fn cholesky_in_place(a: &mut DMatrix<f64>) -> std::result::Result<(), f64> {
    let n = a.nrows();
    for j in 0..n {
        let diag0 = a[(j, j)];
        let mut d = diag0;
        for k in 0..j {
            d -= a[(j, k)] * a[(j, k)];
        }
        // `d` carries a rounding error of a few ulps of `diag0`. A pivot
        // inside that band is numerically zero: the barrier Hessian is
        // positive definite, so lift it to the band edge instead of failing.
        let floor = 64.0 * f64::EPSILON * diag0;
        if !(diag0 > 0.0 && diag0.is_finite()) || !(d > -floor) {
            return Err(d);
        }
        let l = d.max(floor).sqrt();
        a[(j, j)] = l;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = s / l;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut y = rhs.clone();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

/// Newton step `H step = -g` and decrement `lambda = sqrt(-g.step)`.
pub fn newton_decrement(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    if h.nrows() != g.len() || h.ncols() != g.len() {
        return Err(Error::Input(format!(
            "Hessian is {}x{} but gradient has length {}",
            h.nrows(),
            h.ncols(),
            g.len()
        )));
    }
    let mut l = h.clone();
    cholesky_in_place(&mut l).map_err(|pivot| Error::Conditioning { pivot, iterate: Vec::new() })?;
    let step = -cholesky_solve(&l, g);
    let lambda = (-g.dot(&step)).max(0.0).sqrt();
    Ok((lambda, step))
}

/// Lower bound on the per-step decrease of `F` in the damped Newton phase.
pub fn gamma_bound(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Input(format!("alpha = {alpha} outside (0, 0.5)")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Input(format!("beta = {beta} outside (0, 1)")));
    }
    Ok(alpha * beta * (1.0 - 2.0 * alpha).powi(2) / (20.0 - 8.0 * alpha))
}

fn check_start(problem: &BarrierProblem, x0: &DVector<f64>) -> Result<()> {
    if x0.len() != problem.dim() {
        return Err(Error::Input(format!(
            "starting point has length {}, expected {}",
            x0.len(),
            problem.dim()
        )));
    }
    if let Some((index, value)) = problem.first_violation(x0) {
        return Err(Error::InfeasibleStart { index, value });
    }
    if !problem.objective(x0).is_finite() {
        return Err(Error::ObjectiveDomain);
    }
    Ok(())
}

/// Minimize `F` at fixed `tau` from a strictly feasible `x0`.
pub fn center(
    problem: &BarrierProblem,
    x0: &DVector<f64>,
    tau: f64,
    cfg: &SolverConfig,
) -> Result<Centering> {
    cfg.validate()?;
    if !(tau > 0.0) {
        return Err(Error::Input(format!("tau = {tau} must be positive")));
    }
    check_start(problem, x0)?;
    center_unchecked(problem, x0.clone(), tau, cfg, cfg.max_newton, &mut |_, _| {})
}

/// Centering loop. `on_step` sees every accepted iterate and its `F`.
fn center_unchecked(
    problem: &BarrierProblem,
    mut x: DVector<f64>,
    tau: f64,
    cfg: &SolverConfig,
    budget: usize,
    on_step: &mut dyn FnMut(&DVector<f64>, f64),
) -> Result<Centering> {
    let mut scratch = DVector::zeros(problem.dim());
    let mut steps = 0;
    let mut noisy_steps = 0;
    let mut last_noisy_lambda = f64::INFINITY;
    loop {
        let (fx, grad, hess, sensitivity) = problem.barrier_derivatives(&x, tau, &mut scratch);
        let (lambda, step) = newton_decrement(&grad, &hess).map_err(|e| match e {
            Error::Conditioning { pivot, .. } => {
                Error::Conditioning { pivot, iterate: x.iter().copied().collect() }
            }
            other => other,
        })?;
        let lambda_sq = lambda * lambda;
        trace!("center tau={tau:.3e} lambda={lambda:.3e} F={fx:.12e}");
        if lambda_sq / 2.0 <= cfg.kappa {
            return Ok(Centering { x, steps, lambda, status: CenterStatus::Centered });
        }
        if steps >= budget {
            return Ok(Centering { x, steps, lambda, status: CenterStatus::StepBudget });
        }
        // Rounding `x` alone moves `F` by about this much, so a predicted
        // decrease below it cannot be checked. The gradient is still
        // accurate, so keep taking full Newton steps while they shrink the
        // decrement, for a few steps at most.
        let noise = 16.0 * f64::EPSILON * (1.0 + fx.abs() + x.amax() * sensitivity);
        if lambda_sq <= noise {
            let candidate = &x + &step;
            if noisy_steps >= 4 || lambda >= last_noisy_lambda || !problem.barrier_value(&candidate, tau).is_finite() {
                return Ok(Centering { x, steps, lambda, status: CenterStatus::Centered });
            }
            noisy_steps += 1;
            last_noisy_lambda = lambda;
            x = candidate;
            steps += 1;
            on_step(&x, problem.barrier_value(&x, tau));
            continue;
        }

        let mut s = 1.0;
        let accepted = loop {
            let candidate = &x + &step * s;
            let fc = problem.barrier_value(&candidate, tau);
            if fc <= fx - cfg.alpha * s * lambda_sq {
                break Some((candidate, fc));
            }
            // Close to the minimizer the Armijo test can fail on rounding
            // alone. Full Newton steps are still reliable there, so take them
            // as long as F does not visibly increase; if that keeps
            // happening, the point is centered as far as double precision
            // can tell.
            if s == 1.0 && lambda < 0.1 && fc.is_finite() && fc <= fx + noise {
                noisy_steps += 1;
                if noisy_steps > 8 {
                    return Ok(Centering { x, steps, lambda, status: CenterStatus::Centered });
                }
                break Some((candidate, fc));
            }
            s *= cfg.beta;
            if s < 1e-16 {
                break None;
            }
        };
        let Some((next, fnext)) = accepted else {
            warn!("line search stalled at tau={tau:.3e}, lambda={lambda:.3e}");
            return Ok(Centering { x, steps, lambda, status: CenterStatus::LineSearchStall });
        };
        x = next;
        steps += 1;
        on_step(&x, fnext);
        if x.amax() > DIVERGENCE_NORM {
            return Err(Error::Unbounded(format!(
                "iterate norm exceeded {DIVERGENCE_NORM:e} during centering"
            )));
        }
    }
}

/// Path following from a strictly feasible start until `n_barrier / tau <= eps`.
pub fn path_follow(
    problem: &BarrierProblem,
    x_init: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverReport> {
    path_follow_traced(problem, x_init, cfg, &mut |_, _, _| {})
}

/// [`path_follow`] with a hook that observes every accepted Newton iterate as
/// `(tau, x, F)`.
pub fn path_follow_traced(
    problem: &BarrierProblem,
    x_init: &DVector<f64>,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(f64, &DVector<f64>, f64),
) -> Result<SolverReport> {
    cfg.validate()?;
    check_start(problem, x_init)?;
    debug_assert!(
        problem.curvature_spot_check(x_init),
        "objective not concave or a constraint not convex at the start point"
    );

    let n = problem.n_barrier() as f64;
    let mu = cfg.mu.value(problem.n_barrier());
    let mut tau = cfg.tau0;
    let mut x = x_init.clone();
    let mut newton_steps = 0;
    let mut outer_iters = 0;

    let termination = loop {
        let budget = cfg.max_newton.saturating_sub(newton_steps);
        let c = center_unchecked(problem, x, tau, cfg, budget, &mut |x, f| observer(tau, x, f))?;
        x = c.x;
        newton_steps += c.steps;
        outer_iters += 1;
        debug!(
            "outer {outer_iters}: tau={tau:.4e} lambda={:.3e} steps={} gap={:.3e}",
            c.lambda,
            c.steps,
            n / tau
        );
        match c.status {
            CenterStatus::StepBudget => break Termination::StepBudget,
            CenterStatus::LineSearchStall => break Termination::LineSearchStall,
            CenterStatus::Centered => {}
        }
        if n / tau <= cfg.eps {
            break Termination::Converged;
        }
        tau *= mu;
    };

    Ok(SolverReport {
        f0_star: problem.objective(&x),
        x_star: x.iter().copied().collect(),
        gap: n / tau,
        outer_iters,
        newton_steps,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Box problem on an interval [0, 1]: variables (u, l), maximize log(u - l)
    /// subject to u - 1 < 0 and -l < 0.
    fn interval_problem() -> BarrierProblem {
        let obj = LogSumFn::new(2, vec![AffineFn::new(DVector::from_vec(vec![1.0, -1.0]), 0.0)]);
        let cons: Vec<Box<dyn SmoothFunction>> = vec![
            Box::new(AffineFn::new(DVector::from_vec(vec![1.0, 0.0]), -1.0)),
            Box::new(AffineFn::new(DVector::from_vec(vec![0.0, -1.0]), 0.0)),
        ];
        BarrierProblem::new(2, Box::new(obj), cons).unwrap()
    }

    #[test]
    fn decrement_at_stationary_point_is_zero() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (lambda, step) = newton_decrement(&DVector::zeros(2), &h).unwrap();
        assert_eq!(lambda, 0.0);
        assert!(step.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn decrement_identity_hessian() {
        let (lambda, step) =
            newton_decrement(&DVector::from_vec(vec![3.0, 4.0]), &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(lambda, 5.0, epsilon = 1e-14);
        assert_relative_eq!(step[0], -3.0, epsilon = 1e-14);
        assert_relative_eq!(step[1], -4.0, epsilon = 1e-14);
    }

    #[test]
    fn decrement_diagonal_hessian() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let (lambda, step) = newton_decrement(&DVector::from_vec(vec![4.0, 1.0]), &h).unwrap();
        assert_relative_eq!(step[0], -1.0, epsilon = 1e-14);
        assert_relative_eq!(step[1], -1.0, epsilon = 1e-14);
        assert_relative_eq!(lambda, 5f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn decrement_rejects_indefinite_hessian() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = newton_decrement(&DVector::from_vec(vec![1.0, 0.0]), &h).unwrap_err();
        assert!(matches!(err, Error::Conditioning { .. }));
    }

    #[test]
    fn centering_matches_closed_form_path() {
        // Stationarity of tau*log(u-l) + log(1-u) + log(l) with l = 1-u gives
        // l = 1/(tau+2), u = (tau+1)/(tau+2).
        // The default kappa only bounds the error in the local norm by about
        // lambda; a tiny kappa runs into the rounding floor instead, which
        // must still report a centered point.
        let p = interval_problem();
        for (kappa, tol) in [(1e-10, 1e-5), (1e-30, 1e-12)] {
            let cfg = SolverConfig { kappa, ..SolverConfig::default() };
            for tau in [1.0, 3.0, 10.0, 250.0] {
                let c = center(&p, &DVector::from_vec(vec![0.9, 0.05]), tau, &cfg).unwrap();
                assert_eq!(c.status, CenterStatus::Centered);
                assert_relative_eq!(c.x[1], 1.0 / (tau + 2.0), epsilon = tol);
                assert_relative_eq!(c.x[0], (tau + 1.0) / (tau + 2.0), epsilon = tol);
            }
        }
    }

    #[test]
    fn centering_from_near_boundary_stays_feasible() {
        let p = interval_problem();
        let x0 = DVector::from_vec(vec![1.0 - 1e-12, 0.5]);
        let mut seen = Vec::new();
        let cfg = SolverConfig::default();
        let c = center_unchecked(&p, x0, 1.0, &cfg, 1000, &mut |x, _| seen.push(x.clone())).unwrap();
        assert!(!seen.is_empty());
        for x in &seen {
            assert!(p.is_strictly_feasible(x));
        }
        assert_relative_eq!(c.x[1], 1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn path_follow_interval_limit() {
        let p = interval_problem();
        let r = path_follow(&p, &DVector::from_vec(vec![0.6, 0.4]), &SolverConfig::default()).unwrap();
        assert_eq!(r.termination, Termination::Converged);
        assert!(r.gap <= 1e-8);
        assert!(r.f0_star.abs() <= 1e-7, "f0* = {}", r.f0_star);
        assert!(r.x_star[1].abs() < 1e-7 && (r.x_star[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn path_follow_rejects_infeasible_start() {
        let p = interval_problem();
        let err = path_follow(&p, &DVector::from_vec(vec![1.5, 0.2]), &SolverConfig::default())
            .unwrap_err();
        assert_eq!(err, Error::InfeasibleStart { index: 0, value: 0.5 });
        let err = path_follow(&p, &DVector::from_vec(vec![0.2, 0.5]), &SolverConfig::default())
            .unwrap_err();
        assert_eq!(err, Error::ObjectiveDomain);
    }

    #[test]
    fn step_budget_is_reported() {
        let p = interval_problem();
        let cfg = SolverConfig { max_newton: 3, ..SolverConfig::default() };
        let r = path_follow(&p, &DVector::from_vec(vec![0.6, 0.4]), &cfg).unwrap();
        assert_eq!(r.termination, Termination::StepBudget);
        assert!(r.newton_steps <= 3);
    }

    #[test]
    fn gamma_values() {
        let g = gamma_bound(0.2, 0.9).unwrap();
        assert_relative_eq!(g, 0.0648 / 18.4, epsilon = 1e-15);
        assert!(1.0 / (2.0 * g) < 142.0);
        assert_relative_eq!(gamma_bound(0.25, 0.5).unwrap(), 0.25 * 0.5 * 0.25 / 18.0, epsilon = 1e-15);
        assert!(gamma_bound(1e-9, 0.5).unwrap() < 1e-10);
        assert!(gamma_bound(0.5, 0.5).is_err());
        assert!(gamma_bound(0.2, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig { mu: Mu::Fixed(1.0), ..Default::default() }.validate().is_err());
        assert!(SolverConfig { alpha: 0.6, ..Default::default() }.validate().is_err());
        assert!(SolverConfig { eps: 0.0, ..Default::default() }.validate().is_err());
    }
}
