//! Numerical minimization of `I_p(G)` subject to `t(H, G) >= (1+δ) p^{e(H)}`,
//! plus the exhaustive grid oracle used to check it on tiny instances.
//!
//! The solver works on the upper triangle restricted to the box `[p, 1]`
//! (lowering a weight below `p` raises the entropy and lowers every density,
//! so nothing is lost). Each start runs an augmented-Lagrangian penalty
//! continuation on the relative violation `c = 1 - t/threshold`; every stage
//! is minimized by projected descent whose metric is the entropy's diagonal
//! Hessian plus the rank-one Gauss–Newton term of the penalty, inverted on
//! the free variables with Sherman–Morrison. Steps are Armijo backtracked
//! from 1. A final bisection along `x + s(1 - x)` restores exact
//! feasibility, and the best feasible iterate seen is kept, so a feasible
//! start is never made worse.
//!
//! The result is an upper bound on `φ(n,p,δ)`, not a certified minimum.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constructions::{discrete_construction, ConstructionKind};
use crate::contraction;
use crate::entropy::{self, check_p, entropy};
use crate::error::{domain, Error, Result};
use crate::graphs::{matrix_square, WeightedGraph};
use crate::patterns::SubgraphPattern;

/// Which density the constraint is stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintForm {
    /// `t(H, G)` over all `n^k` maps (canonical).
    #[default]
    Labeled,
    /// Homomorphism sum divided by `n(n-1)…(n-k+1)` instead of `n^k`.
    Injective,
}

/// One instance of `φ_H(n,p,δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct VariationalInstance {
    n: usize,
    p: f64,
    delta: f64,
    pattern: SubgraphPattern,
    constraint: ConstraintForm,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    p: f64,
    delta: f64,
    #[serde(default = "SubgraphPattern::triangle")]
    pattern: SubgraphPattern,
    #[serde(default)]
    constraint: ConstraintForm,
}

impl TryFrom<RawInstance> for VariationalInstance {
    type Error = Error;
    fn try_from(r: RawInstance) -> Result<Self> {
        Ok(VariationalInstance::new(r.n, r.p, r.delta, r.pattern)?.with_constraint(r.constraint))
    }
}

impl From<VariationalInstance> for RawInstance {
    fn from(v: VariationalInstance) -> Self {
        RawInstance { n: v.n, p: v.p, delta: v.delta, pattern: v.pattern, constraint: v.constraint }
    }
}

fn falling_ratio(n: usize, k: usize) -> f64 {
    (0..k).map(|i| (n as f64 - i as f64).max(0.0) / n as f64).product()
}

impl VariationalInstance {
    /// Validates `0 < p < 1`, `δ >= 0` and `(1+δ)p^{e(H)} <= 1`. `n < k` is
    /// admitted and surfaces as an infeasible instance when solved.
    pub fn new(n: usize, p: f64, delta: f64, pattern: SubgraphPattern) -> Result<Self> {
        check_p(p)?;
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(domain!("delta must be a nonnegative real, got {delta}"));
        }
        if n == 0 {
            return Err(domain!("n must be positive"));
        }
        if pattern.edge_count() == 0 {
            return Err(domain!("the pattern needs at least one edge"));
        }
        let inst = VariationalInstance { n, p, delta, pattern, constraint: ConstraintForm::Labeled };
        if inst.threshold() > 1.0 {
            return Err(domain!("threshold {} exceeds 1", inst.threshold()));
        }
        Ok(inst)
    }

    pub fn triangle(n: usize, p: f64, delta: f64) -> Result<Self> {
        Self::new(n, p, delta, SubgraphPattern::triangle())
    }

    pub fn with_constraint(mut self, form: ConstraintForm) -> Self {
        self.constraint = form;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn pattern(&self) -> &SubgraphPattern {
        &self.pattern
    }
    pub fn constraint(&self) -> ConstraintForm {
        self.constraint
    }

    /// `(1+δ) p^{e(H)}`.
    pub fn threshold(&self) -> f64 {
        (1.0 + self.delta) * self.p.powi(self.pattern.edge_count() as i32)
    }

    fn injective_factor(&self) -> f64 {
        falling_ratio(self.n, self.pattern.vertex_count())
    }

    /// Converts a labeled density into the instance's constraint form.
    fn form_value(&self, labeled: f64) -> f64 {
        match self.constraint {
            ConstraintForm::Labeled => labeled,
            ConstraintForm::Injective => {
                let f = self.injective_factor();
                if f == 0.0 {
                    0.0
                } else {
                    labeled / f
                }
            }
        }
    }

    /// The constraint density of `g` in this instance's form.
    pub fn constraint_value(&self, g: &WeightedGraph) -> Result<f64> {
        if g.n() != self.n {
            return Err(Error::Dimension(format!("graph has {} vertices, expected {}", g.n(), self.n)));
        }
        let labeled = if is_triangle(&self.pattern) {
            g.triangle_density()
        } else {
            g.hom_density(&self.pattern)?
        };
        Ok(self.form_value(labeled))
    }

    /// `Δ(H)`, the power of `p` in the rate scale (`k - 1` for cliques).
    fn rate_scale(&self) -> f64 {
        let nf = self.n as f64;
        nf * nf * self.p.powi(self.pattern.max_degree() as i32) * entropy(1.0, self.p)
    }
}

fn is_triangle(h: &SubgraphPattern) -> bool {
    h.vertex_count() == 3 && h.edge_count() == 3
}

/// Solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Number of seeded random starts (on top of the two constructions and
    /// the constant-`p` start).
    pub random_starts: usize,
    pub max_iters_per_stage: usize,
    pub stages: usize,
    pub mu_growth: f64,
    /// Initial penalty weight; defaults to `10 max(1, I_p(uniform lift))`.
    pub mu0: Option<f64>,
    /// Relative violation `1 - t/threshold` accepted before restoration
    /// counts as converged.
    pub feasibility_tol: f64,
    pub seed: u64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            random_starts: 8,
            max_iters_per_stage: 500,
            stages: 6,
            mu_growth: 10.0,
            mu0: None,
            feasibility_tol: 1e-9,
            seed: 0,
            record_trace: false,
        }
    }
}

/// One accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub start: usize,
    pub stage: usize,
    pub iteration: usize,
    pub objective: f64,
    /// `max(0, threshold - t)` in labeled units.
    pub violation: f64,
    pub mu: f64,
}

/// Per-start outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub label: String,
    pub initial_objective: f64,
    pub initial_feasible: bool,
    pub objective: f64,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Solver output. `objective` is an upper bound on `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: VariationalInstance,
    pub minimizer: WeightedGraph,
    pub objective: f64,
    pub constraint_value: f64,
    pub threshold: f64,
    /// `objective / (n^2 p^Δ log(1/p))`.
    pub normalized_rate: f64,
    /// `s(G)/p^2`.
    pub cherry_ratio: f64,
    pub starts: usize,
    pub best_start: String,
    pub converged: bool,
    pub start_summaries: Vec<StartSummary>,
    pub trace: Vec<TraceRow>,
}

/// Feasibility check result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// `threshold - t`; nonpositive when the constraint holds.
    pub violation: f64,
}

/// Recomputes the constraint of `g` and compares against the threshold.
pub fn verify_feasibility(
    g: &WeightedGraph,
    instance: &VariationalInstance,
    tol: f64,
) -> Result<Feasibility> {
    let value = instance.constraint_value(g)?;
    let violation = instance.threshold() - value;
    Ok(Feasibility { feasible: violation <= tol, violation })
}

/// `s(minimizer)/p^2`, defined for converged reports.
pub fn cherry_diagnostic(report: &SolveReport, instance: &VariationalInstance) -> Result<f64> {
    if !report.converged {
        return Err(Error::Precondition("the solve report is not converged".into()));
    }
    if report.minimizer.n() != instance.n {
        return Err(Error::Dimension("report and instance sizes differ".into()));
    }
    Ok(report.minimizer.cherry_density() / (instance.p * instance.p))
}

/// Rigorous lower bound on `φ(n,p,δ)`.
///
/// Lift a minimizer to `max(G, p)` and embed it as a step graphon `p + U`
/// with zero-mass diagonal correction: `I_p(G) = n^2 · ½E[I_p(p+U)]`.
/// Expanding `t(H, p+U)` over edge subsets and bounding each term with
/// Hölder gives `t <= (p + E[U^Δ]^{1/Δ})^{e}`, so the constraint forces
/// `E[U^2] >= E[U^Δ] >= c^Δ p^Δ` with `c = (τ/p^e)^{1/e} - 1` for the
/// labeled threshold `τ`. With `c_p = inf I_p(p+x)/x^2` the entropy is at
/// least `½ n^2 c_p c^Δ p^Δ`.
pub fn phi_lower_bound(instance: &VariationalInstance) -> Result<f64> {
    let e = instance.pattern.edge_count() as i32;
    let max_deg = instance.pattern.max_degree().max(2) as i32;
    let p = instance.p;
    let labeled = instance.threshold()
        * match instance.constraint {
            ConstraintForm::Labeled => 1.0,
            ConstraintForm::Injective => instance.injective_factor(),
        };
    let c = (labeled / p.powi(e)).powf(1.0 / e as f64) - 1.0;
    if c <= 0.0 {
        return Ok(0.0);
    }
    let cp = entropy::quadratic_entropy_constant(p)?;
    let nf = instance.n as f64;
    Ok(0.5 * nf * nf * cp * (c * p).powi(max_deg))
}

/// Exhaustive grid search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracleReport {
    /// Smallest objective found; an upper bound on `φ`.
    pub value: f64,
    /// `value - error_band <= φ <= value`.
    pub error_band: f64,
    pub resolution: f64,
    pub grid_points: u64,
    pub argmin: WeightedGraph,
}

/// Largest number of grid cells the oracle will visit.
pub const GRID_BUDGET: f64 = 2e8;

/// Exhaustive minimization for `n <= 4`.
///
/// All but the last pair range over `{p, p+r, p+2r, …} ∪ {1}`; since every
/// density is nondecreasing in each weight and `I_p` is increasing on
/// `[p, 1]`, the last pair is set to the smallest feasible value by
/// bisection. Rounding any feasible point up to the grid keeps it feasible
/// and costs at most `I_p(1) - I_p(1-r)` per rounded coordinate, which gives
/// the error band.
pub fn grid_oracle(instance: &VariationalInstance, resolution: f64) -> Result<GridOracleReport> {
    let n = instance.n;
    let m = n * n.saturating_sub(1) / 2;
    if m > 6 {
        return Err(domain!("the grid oracle handles at most 6 pairs (n <= 4), got n = {n}"));
    }
    if !(resolution > 0.0 && resolution <= 0.1) {
        return Err(domain!("resolution must lie in (0, 0.1], got {resolution}"));
    }
    let p = instance.p;
    let mut grid = Vec::new();
    let mut i = 0u64;
    loop {
        let v = p + i as f64 * resolution;
        if v >= 1.0 {
            break;
        }
        grid.push(v);
        i += 1;
    }
    grid.push(1.0);
    let free = m.saturating_sub(1);
    let cells = (grid.len() as f64).powi(free as i32);
    if cells > GRID_BUDGET {
        return Err(Error::Resource(format!(
            "{cells:.3e} grid cells exceed the budget of {GRID_BUDGET:e}"
        )));
    }
    let pairs = upper_pairs(n);
    let eval = Evaluator::new(instance)?;
    let excess = |w: &[f64]| instance.form_value(eval.density(w)) - instance.threshold();
    let feasible = |w: &[f64]| excess(w) >= 0.0;
    let mut w = vec![0.0; n * n];
    let set = |w: &mut [f64], e: usize, v: f64| {
        let (a, b) = pairs[e];
        w[a * n + b] = v;
        w[b * n + a] = v;
    };
    // Smallest feasible value of the last pair, by Illinois regula falsi on
    // a bracket whose upper end stays feasible.
    let last_pair_root = |w: &mut [f64], (mut lo, mut f_lo): (f64, f64), (mut hi, mut f_hi): (f64, f64)| {
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= 1e-14 {
                break;
            }
            let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            if !(x > lo && x < hi) {
                x = 0.5 * (lo + hi);
            }
            set(w, m - 1, x);
            let f = excess(w);
            if f >= 0.0 {
                hi = x;
                f_hi = f;
                if side == 1 {
                    f_lo *= 0.5;
                }
                side = 1;
            } else {
                lo = x;
                f_lo = f;
                if side == -1 {
                    f_hi *= 0.5;
                }
                side = -1;
            }
        }
        hi
    };
    for e in 0..m {
        set(&mut w, e, 1.0);
    }
    if m == 0 || !feasible(&w) {
        return Err(Error::Infeasible("no graph on this vertex set meets the threshold".into()));
    }
    // The slowest-varying free coordinate is split across threads; slices
    // are merged in order with a strict comparison, so the result matches a
    // serial scan exactly.
    let scan = |outer: Option<usize>| -> (f64, Vec<f64>) {
        let mut w = w.clone();
        let mut best = f64::INFINITY;
        let mut best_w = w.clone();
        let inner = if outer.is_some() { free - 1 } else { free };
        if let Some(g) = outer {
            set(&mut w, free - 1, grid[g]);
        }
        let mut idx = vec![0usize; inner];
        loop {
            for (e, &g) in idx.iter().enumerate() {
                set(&mut w, e, grid[g]);
            }
            set(&mut w, m - 1, 1.0);
            let f_hi = excess(&w);
            if f_hi >= 0.0 {
                set(&mut w, m - 1, p);
                let f_lo = excess(&w);
                let hi = if f_lo >= 0.0 { p } else { last_pair_root(&mut w, (p, f_lo), (1.0, f_hi)) };
                set(&mut w, m - 1, hi);
                let obj = eval.objective(&w);
                if obj < best {
                    best = obj;
                    best_w.copy_from_slice(&w);
                }
            }
            let mut pos = 0;
            loop {
                if pos == inner {
                    return (best, best_w);
                }
                idx[pos] += 1;
                if idx[pos] < grid.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    };
    let slices: Vec<(f64, Vec<f64>)> = if free == 0 {
        vec![scan(None)]
    } else {
        (0..grid.len()).into_par_iter().map(|g| scan(Some(g))).collect()
    };
    let mut best = f64::INFINITY;
    let mut best_w = w;
    for (value, arg) in slices {
        if value < best {
            best = value;
            best_w = arg;
        }
    }
    let band = free as f64 * (entropy(1.0, p) - entropy(1.0 - resolution, p));
    Ok(GridOracleReport {
        value: best,
        error_band: band,
        resolution,
        grid_points: cells as u64,
        argmin: WeightedGraph::from_matrix_unchecked(n, best_w),
    })
}

fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Weights closer than this to 1 are evaluated at `1 - EDGE_EPS`, capping
/// the entropy derivative at about `log(1/EDGE_EPS)`.
const EDGE_EPS: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;

/// Density evaluation shared by the solver and the oracle.
struct Evaluator<'a> {
    n: usize,
    p: f64,
    pattern: &'a SubgraphPattern,
    triangle: bool,
    weights: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl<'a> Evaluator<'a> {
    fn new(instance: &'a VariationalInstance) -> Result<Self> {
        let n = instance.n;
        let triangle = is_triangle(&instance.pattern);
        if !triangle {
            contraction::check_budget(&instance.pattern, n, &[])?;
        }
        Ok(Evaluator {
            n,
            p: instance.p,
            pattern: &instance.pattern,
            triangle,
            weights: vec![1.0 / n as f64; n],
            pairs: upper_pairs(n),
        })
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let n = self.n;
        self.pairs.iter().map(|&(i, j)| entropy(w[i * n + j], self.p)).sum()
    }

    fn density(&self, w: &[f64]) -> f64 {
        let n = self.n;
        if self.triangle {
            let sq = matrix_square(n, w);
            let s: f64 = w.iter().zip(&sq).map(|(a, b)| a * b).sum();
            s / (n as f64).powi(3)
        } else {
            contraction::hom_sum(self.pattern, w, &self.weights).unwrap_or(0.0)
        }
    }

    /// Density and its derivative with respect to each pair.
    fn density_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n;
        if self.triangle {
            let sq = matrix_square(n, w);
            let s: f64 = w.iter().zip(&sq).map(|(a, b)| a * b).sum();
            let n3 = (n as f64).powi(3);
            let grad = self.pairs.iter().map(|&(i, j)| 6.0 * sq[i * n + j] / n3).collect();
            (s / n3, grad)
        } else {
            let t = contraction::hom_sum(self.pattern, w, &self.weights).unwrap_or(0.0);
            let full = contraction::hom_sum_gradient(self.pattern, w, &self.weights)
                .unwrap_or_else(|_| vec![0.0; n * n]);
            (t, self.pairs.iter().map(|&(i, j)| full[i * n + j]).collect())
        }
    }
}

/// Augmented-Lagrangian merit `f + (μ/2) max(0, c + λ/μ)^2 - λ^2/(2μ)` with
/// `c = 1 - t/τ`.
fn merit(f: f64, t: f64, tau: f64, mu: f64, lambda: f64) -> (f64, f64) {
    let a = (1.0 - t / tau + lambda / mu).max(0.0);
    (f + 0.5 * mu * a * a - lambda * lambda / (2.0 * mu), a)
}

/// Merit value and its gradient with respect to each upper-triangle pair,
/// for the given penalty weight and multiplier.
pub fn merit_gradient(
    instance: &VariationalInstance,
    g: &WeightedGraph,
    mu: f64,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    if g.n() != instance.n {
        return Err(Error::Dimension("graph size differs from the instance".into()));
    }
    if !(mu > 0.0) {
        return Err(domain!("mu must be positive"));
    }
    let eval = Evaluator::new(instance)?;
    let tau = labeled_threshold(instance);
    let w = g.matrix();
    let (t, gt) = eval.density_and_gradient(w);
    let f = eval.objective(w);
    let (value, a) = merit(f, t, tau, mu, lambda);
    let n = instance.n;
    let grad = eval
        .pairs
        .iter()
        .zip(&gt)
        .map(|(&(i, j), &d)| {
            let x = w[i * n + j].clamp(EDGE_EPS, 1.0 - EDGE_EPS);
            entropy::derivative_unchecked(x, instance.p) - mu * a * d / tau
        })
        .collect();
    Ok((value, grad))
}

fn labeled_threshold(instance: &VariationalInstance) -> f64 {
    match instance.constraint {
        ConstraintForm::Labeled => instance.threshold(),
        ConstraintForm::Injective => instance.threshold() * instance.injective_factor(),
    }
}

struct StartOutcome {
    summary: StartSummary,
    w: Vec<f64>,
    objective: f64,
    trace: Vec<TraceRow>,
}

struct Runner<'a> {
    instance: &'a VariationalInstance,
    eval: Evaluator<'a>,
    tau: f64,
    options: &'a SolverOptions,
    mu0: f64,
}

impl Runner<'_> {
    fn feasible(&self, t: f64) -> bool {
        self.instance.form_value(t) >= self.instance.threshold()
    }

    fn set_pair(&self, w: &mut [f64], e: usize, v: f64) {
        let n = self.eval.n;
        let (i, j) = self.eval.pairs[e];
        w[i * n + j] = v;
        w[j * n + i] = v;
    }

    fn run(&self, index: usize, label: String, mut w: Vec<f64>) -> StartOutcome {
        let p = self.eval.p;
        let n = self.eval.n;
        let pairs = &self.eval.pairs;
        for e in 0..pairs.len() {
            let (i, j) = pairs[e];
            let v = w[i * n + j].clamp(p, 1.0);
            self.set_pair(&mut w, e, v);
        }
        let initial_objective = self.eval.objective(&w);
        let initial_t = self.eval.density(&w);
        let initial_feasible = self.feasible(initial_t);
        let mut best: Option<(f64, Vec<f64>)> =
            initial_feasible.then(|| (initial_objective, w.clone()));

        let mut trace = Vec::new();
        let mut mu = self.mu0;
        let mut lambda = 0.0;
        let mut iterations = 0;
        let mut last_stage_converged = false;
        let m = pairs.len();
        let mut dir = vec![0.0; m];
        let mut trial = w.clone();

        for stage in 0..self.options.stages {
            let (mut t, mut gt) = self.eval.density_and_gradient(&w);
            let mut f = self.eval.objective(&w);
            last_stage_converged = false;
            for iter in 0..self.options.max_iters_per_stage {
                let (l0, a) = merit(f, t, self.tau, mu, lambda);
                // gradient, diagonal curvature, penalty direction
                let mut grad = vec![0.0; m];
                let mut diag = vec![0.0; m];
                let mut width = 0.0f64;
                for e in 0..m {
                    let (i, j) = pairs[e];
                    let x = w[i * n + j];
                    let xc = x.min(1.0 - EDGE_EPS);
                    grad[e] = entropy::derivative_unchecked(xc, p) - mu * a * gt[e] / self.tau;
                    diag[e] = 1.0 / (xc * (1.0 - xc));
                    width = width.max((x - (x - grad[e]).clamp(p, 1.0)).abs());
                }
                let eps = width.min(1e-3);
                let mut uy = 0.0;
                let mut uz = 0.0;
                let mut free = vec![false; m];
                for e in 0..m {
                    let (i, j) = pairs[e];
                    let x = w[i * n + j];
                    let binding = (x <= p + eps && grad[e] > 0.0) || (x >= 1.0 - eps && grad[e] < 0.0);
                    free[e] = !binding;
                    if !binding && a > 0.0 {
                        let u = gt[e] / self.tau;
                        uy += u * grad[e] / diag[e];
                        uz += u * u / diag[e];
                    }
                }
                let coef = if a > 0.0 { mu * uy / (1.0 + mu * uz) } else { 0.0 };
                for e in 0..m {
                    dir[e] = if free[e] && a > 0.0 {
                        -(grad[e] - coef * gt[e] / self.tau) / diag[e]
                    } else {
                        -grad[e] / diag[e]
                    };
                }

                // Armijo backtracking on the projected path
                let mut step = 1.0;
                let mut accepted = None;
                for _ in 0..MAX_HALVINGS {
                    trial.copy_from_slice(&w);
                    let mut slope = 0.0;
                    let mut moved = 0.0f64;
                    for e in 0..m {
                        let (i, j) = pairs[e];
                        let x = w[i * n + j];
                        let v = (x + step * dir[e]).clamp(p, 1.0);
                        slope += grad[e] * (v - x);
                        moved = moved.max((v - x).abs());
                        trial[i * n + j] = v;
                        trial[j * n + i] = v;
                    }
                    if moved == 0.0 {
                        break;
                    }
                    let ft = self.eval.objective(&trial);
                    let tt = self.eval.density(&trial);
                    let (l1, _) = merit(ft, tt, self.tau, mu, lambda);
                    if l1 <= l0 + ARMIJO * slope {
                        accepted = Some((ft, l1, moved));
                        break;
                    }
                    step *= 0.5;
                }
                let Some((ft, l1, moved)) = accepted else {
                    last_stage_converged = true;
                    break;
                };
                std::mem::swap(&mut w, &mut trial);
                iterations += 1;
                f = ft;
                let (tn, gn) = self.eval.density_and_gradient(&w);
                t = tn;
                gt = gn;
                if self.feasible(t) && best.as_ref().map_or(true, |b| f < b.0) {
                    best = Some((f, w.clone()));
                }
                if self.options.record_trace {
                    trace.push(TraceRow {
                        start: index,
                        stage,
                        iteration: iter,
                        objective: f,
                        violation: (self.tau - t).max(0.0),
                        mu,
                    });
                }
                if moved < 1e-12 || l0 - l1 <= 1e-14 * l0.abs().max(1.0) {
                    last_stage_converged = true;
                    break;
                }
            }
            let c = 1.0 - t / self.tau;
            lambda = (lambda + mu * c).max(0.0);
            mu *= self.options.mu_growth;
        }

        let t = self.eval.density(&w);
        let violation = (1.0 - t / self.tau).max(0.0);
        let converged = last_stage_converged && violation <= self.options.feasibility_tol.max(1e-6);
        self.restore(&mut w);
        let f = self.eval.objective(&w);
        if best.as_ref().map_or(true, |b| f < b.0) {
            best = Some((f, w.clone()));
        }
        let (objective, w) = best.expect("restoration yields a feasible point");
        StartOutcome {
            summary: StartSummary {
                label,
                initial_objective,
                initial_feasible,
                objective,
                feasible: true,
                converged,
                iterations,
            },
            w,
            objective,
            trace,
        }
    }

    /// Smallest `s` with `x + s(1 - x)` feasible (the density is
    /// nondecreasing in `s`).
    fn restore(&self, w: &mut Vec<f64>) {
        if self.feasible(self.eval.density(w)) {
            return;
        }
        let base = w.clone();
        let lift = |s: f64, out: &mut Vec<f64>| {
            for (o, &b) in out.iter_mut().zip(&base) {
                *o = if b == 0.0 { 0.0 } else { (b + s * (1.0 - b)).min(1.0) };
            }
        };
        // diagonal stays zero since base has a zero diagonal
        let n = self.eval.n;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut tmp = base.clone();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            lift(mid, &mut tmp);
            for i in 0..n {
                tmp[i * n + i] = 0.0;
            }
            if self.feasible(self.eval.density(&tmp)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lift(hi, &mut tmp);
        for i in 0..n {
            tmp[i * n + i] = 0.0;
        }
        *w = tmp;
    }
}

/// Minimizes `I_p(G)` under the instance's constraint from a portfolio of
/// starts: both constructions (clique patterns only, when feasible), the
/// constant-`p` graph and `random_starts` seeded perturbations around the
/// uniform lift. Starts run in parallel on independent RNG streams.
pub fn solve_phi(instance: &VariationalInstance, options: &SolverOptions) -> Result<SolveReport> {
    let n = instance.n;
    let p = instance.p;
    let eval = Evaluator::new(instance)?;
    let tau = labeled_threshold(instance);
    let ones = WeightedGraph::constant(n, 1.0)?;
    let t_ones = eval.density(ones.matrix());
    if !(instance.form_value(t_ones) >= instance.threshold()) {
        return Err(Error::Infeasible(format!(
            "even the complete graph misses the threshold ({t_ones:e} < {tau:e})"
        )));
    }
    if !(options.mu_growth >= 1.0) || options.stages == 0 {
        return Err(domain!("need mu_growth >= 1 and at least one stage"));
    }
    let e = instance.pattern.edge_count() as f64;
    // constant q has density q^e t(H, 1)
    let q_lift = (tau / t_ones).powf(1.0 / e).clamp(p, 1.0);
    let lift_objective = (n * (n - 1) / 2) as f64 * entropy(q_lift, p);
    let mu0 = options.mu0.unwrap_or(10.0 * lift_objective.max(1.0));
    if !(mu0 > 0.0) {
        return Err(domain!("mu0 must be positive"));
    }

    let mut starts: Vec<(String, Vec<f64>)> = Vec::new();
    if instance.pattern.is_complete() {
        let k = instance.pattern.vertex_count();
        for kind in [ConstructionKind::Clique, ConstructionKind::Hub] {
            if let Ok(r) = discrete_construction(kind, n as u64, p, instance.delta, k) {
                if let Some(g) = r.graph {
                    starts.push((kind.to_string(), g.matrix().to_vec()));
                }
            }
        }
    }
    starts.push(("constant".into(), WeightedGraph::constant(n, p)?.matrix().to_vec()));
    for s in 0..options.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        rng.set_stream(s as u64);
        let g = WeightedGraph::from_fn_unchecked(n, |_, _| {
            (p + (q_lift - p) * 2.0 * rng.gen::<f64>()).clamp(p, 1.0)
        });
        starts.push((format!("perturbed-{s}"), g.matrix().to_vec()));
    }

    let runner = Runner { instance, eval, tau, options, mu0 };
    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, (label, w))| runner.run(i, label, w))
        .collect();

    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one start");
    let minimizer = WeightedGraph::from_matrix_unchecked(n, outcomes[best].w.clone());
    let objective = minimizer.total_relative_entropy(p)?;
    let constraint_value = instance.constraint_value(&minimizer)?;
    let trace = if options.record_trace { outcomes[best].trace.clone() } else { Vec::new() };
    Ok(SolveReport {
        instance: instance.clone(),
        objective,
        constraint_value,
        threshold: instance.threshold(),
        normalized_rate: objective / instance.rate_scale(),
        cherry_ratio: minimizer.cherry_density() / (p * p),
        starts: outcomes.len(),
        best_start: outcomes[best].summary.label.clone(),
        converged: outcomes[best].summary.converged,
        start_summaries: outcomes.iter().map(|o| o.summary.clone()).collect(),
        trace,
        minimizer,
    })
}

/// Header line of the trace CSV.
pub const TRACE_CSV_HEADER: &str = "# tailvar trace csv v1\nstart,stage,iteration,objective,violation,mu";

/// Streams trace rows as CSV.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.start, r.stage, r.iteration, r.objective, r.violation, r.mu
        )?;
    }
    Ok(())
}
