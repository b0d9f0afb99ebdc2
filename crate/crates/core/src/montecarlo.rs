//! Sampling `G(n,p)`, plain and importance-sampled upper-tail estimates, and
//! an exact enumeration oracle for tiny `n`.
//!
//! Trial `i` of a run with seed `s` draws from `ChaCha8Rng::seed_from_u64(s)`
//! on stream `i`, so results do not depend on the thread count. Trial 0 is the
//! graph returned by [`sample_gnp`] with the same seed. Edges are drawn in
//! upper-triangle order, one uniform per pair, present iff `u < q_ij`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::graphs::WeightedGraph;
use crate::patterns::SubgraphPattern;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Trials per parallel work unit.
const CHUNK: u64 = 1024;

/// Largest `n` accepted by [`exact_tail_probability`].
pub const EXACT_MAX_N: usize = 5;

/// Relative slack on the event threshold, so that `t == threshold` counts as a
/// hit despite rounding in the density evaluation.
const EVENT_SLACK: f64 = 1e-12;

/// Header for CSV batches of [`TailEstimate`] rows.
pub const SAMPLE_CSV_HEADER: &str = "# tailvar sample csv v1\nn,p,delta,trials,estimate,ci_lo,ci_hi,seed";

fn check_prob(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain!("p must lie in [0,1], got {p}"));
    }
    Ok(())
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// One draw of `G(n,p)` as a 0/1 weighted graph.
pub fn sample_gnp(n: usize, p: f64, seed: u64) -> Result<WeightedGraph> {
    check_prob(p)?;
    let mut rng = trial_rng(seed, 0);
    let upper: Vec<f64> = (0..pair_count(n))
        .map(|_| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
        .collect();
    WeightedGraph::from_upper(n, &upper)
}

/// Per-pair sampling probabilities for importance sampling, upper triangle
/// in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltSpec {
    n: usize,
    q: Vec<f64>,
}

impl TiltSpec {
    pub fn new(n: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != pair_count(n) {
            return Err(Error::Dimension(format!(
                "tilt has {} pair probabilities, expected {}",
                q.len(),
                pair_count(n)
            )));
        }
        if let Some(x) = q.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(domain!("tilt probability {x} outside [0,1]"));
        }
        Ok(TiltSpec { n, q })
    }

    /// Every pair drawn with probability `q`; `q = p` is the no-op tilt.
    pub fn uniform(n: usize, q: f64) -> Result<Self> {
        check_prob(q)?;
        Ok(TiltSpec { n, q: vec![q; pair_count(n)] })
    }

    /// Forces a clique on vertices `0..a`, leaves the rest at `p`.
    pub fn planted_clique(n: usize, p: f64, a: usize) -> Result<Self> {
        Self::planted(n, p, a, |i, j| j < a && i < a)
    }

    /// Joins vertices `0..a` to everything, leaves the rest at `p`.
    pub fn hub(n: usize, p: f64, a: usize) -> Result<Self> {
        Self::planted(n, p, a, |i, _| i < a)
    }

    fn planted(n: usize, p: f64, a: usize, inside: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_prob(p)?;
        if a > n {
            return Err(domain!("planted set of size {a} exceeds n = {n}"));
        }
        let mut q = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in i + 1..n {
                q.push(if inside(i, j) { 1.0 } else { p });
            }
        }
        Ok(TiltSpec { n, q })
    }

    /// Uses the weights of `g` as sampling probabilities, e.g. a solver
    /// minimizer.
    pub fn from_graph(g: &WeightedGraph) -> Self {
        TiltSpec { n: g.n(), q: g.upper() }
    }

    /// Mixes every probability towards `p`: `q' = (1-θ) p + θ q`.
    ///
    /// With `θ < 1` and `0 < p < 1` every graph keeps positive probability, which
    /// makes a planted tilt unbiased for the full event.
    pub fn softened(&self, p: f64, theta: f64) -> Result<Self> {
        check_prob(p)?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(domain!("mixing weight must lie in [0,1], got {theta}"));
        }
        let q = self.q.iter().map(|&x| (1.0 - theta) * p + theta * x).collect();
        Ok(TiltSpec { n: self.n, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }
}

/// Whether the event is decided without sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventStatus {
    Random,
    /// Threshold ≤ 0.
    Certain,
    /// Threshold above the density of the complete graph.
    Impossible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Naive,
    Tilted,
}

/// A tail probability estimate with its 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub method: EstimatorKind,
    pub n: usize,
    pub p: f64,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub status: EventStatus,
    /// Trials whose sample lies in the event.
    pub hits: u64,
    pub estimate: f64,
    /// `ln(estimate)`, kept separately because tilted estimates underflow.
    pub log_estimate: f64,
    pub std_error: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// True when the upper end comes from the rule of three (no hits).
    pub rule_of_three: bool,
}

impl TailEstimate {
    /// Fixed-order CSV row matching [`SAMPLE_CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n, self.p, self.delta, self.trials, self.estimate, self.ci_lo, self.ci_hi, self.seed
        )
    }
}

pub fn write_sample_csv<W: Write>(rows: &[TailEstimate], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SAMPLE_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// The tail event `{t(H, G) >= (1+δ) p^{e(H)}}` for fixed `n`.
struct TailEvent {
    pattern: SubgraphPattern,
    threshold: f64,
    status: EventStatus,
    triangle: bool,
}

impl TailEvent {
    fn new(n: usize, p: f64, delta: f64, pattern: &SubgraphPattern) -> Result<Self> {
        check_prob(p)?;
        if !(delta >= -1.0) || !delta.is_finite() {
            return Err(domain!("delta must be a real >= -1, got {delta}"));
        }
        if n == 0 {
            return Err(domain!("n must be positive"));
        }
        if pattern.edge_count() == 0 {
            return Err(domain!("the pattern needs at least one edge"));
        }
        let threshold = (1.0 + delta) * p.powi(pattern.edge_count() as i32);
        let top = WeightedGraph::constant(n, 1.0)?.hom_density(pattern)?;
        let status = if threshold <= 0.0 {
            EventStatus::Certain
        } else if threshold > top * (1.0 + EVENT_SLACK) {
            EventStatus::Impossible
        } else {
            EventStatus::Random
        };
        let triangle = pattern.vertex_count() == 3 && pattern.edge_count() == 3;
        Ok(TailEvent { pattern: pattern.clone(), threshold, status, triangle })
    }

    fn hit(&self, g: &WeightedGraph) -> bool {
        let t = if self.triangle {
            g.triangle_density()
        } else {
            g.hom_density(&self.pattern).expect("pattern size was checked on construction")
        };
        t >= self.threshold * (1.0 - EVENT_SLACK)
    }

    fn decided(&self, method: EstimatorKind, n: usize, p: f64, delta: f64, trials: u64, seed: u64) -> Option<TailEstimate> {
        let value = match self.status {
            EventStatus::Random => return None,
            EventStatus::Certain => 1.0,
            EventStatus::Impossible => 0.0,
        };
        Some(TailEstimate {
            method,
            n,
            p,
            delta,
            trials,
            seed,
            status: self.status,
            hits: if value == 1.0 { trials } else { 0 },
            estimate: value,
            log_estimate: value.ln(),
            std_error: 0.0,
            ci_lo: value,
            ci_hi: value,
            rule_of_three: false,
        })
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(domain!("need at least one trial"));
    }
    Ok(())
}

fn chunks(trials: u64) -> impl ParallelIterator<Item = std::ops::Range<u64>> {
    let count = trials.div_ceil(CHUNK);
    (0..count).into_par_iter().map(move |c| c * CHUNK..((c + 1) * CHUNK).min(trials))
}

/// Wilson score interval for `hits` successes in `trials`.
fn wilson(hits: u64, trials: u64) -> (f64, f64) {
    let nf = trials as f64;
    let ph = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let centre = (ph + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = Z95 * (ph * (1.0 - ph) / nf + z2 / (4.0 * nf * nf)).sqrt() / (1.0 + z2 / nf);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Plain Monte Carlo frequency of the tail event, with a Wilson 95% interval.
/// With no hits the interval is `[0, 3/trials]`.
///
/// `δ = -1` is admitted (the certain event) so the estimator can be tested
/// at both ends.
pub fn naive_tail_estimate(
    n: usize,
    p: f64,
    delta: f64,
    pattern: &SubgraphPattern,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_trials(trials)?;
    let event = TailEvent::new(n, p, delta, pattern)?;
    if let Some(done) = event.decided(EstimatorKind::Naive, n, p, delta, trials, seed) {
        return Ok(done);
    }
    let m = pair_count(n);
    let hits: u64 = chunks(trials)
        .map(|range| {
            let mut upper = vec![0.0; m];
            let mut hits = 0u64;
            for trial in range {
                let mut rng = trial_rng(seed, trial);
                for x in upper.iter_mut() {
                    *x = if rng.gen::<f64>() < p { 1.0 } else { 0.0 };
                }
                let g = WeightedGraph::from_upper(n, &upper).expect("0/1 weights are valid");
                hits += u64::from(event.hit(&g));
            }
            hits
        })
        .sum();
    let nf = trials as f64;
    let estimate = hits as f64 / nf;
    let (ci_lo, ci_hi, rule_of_three) = if hits == 0 {
        (0.0, (3.0 / nf).min(1.0), true)
    } else {
        let (lo, hi) = wilson(hits, trials);
        (lo, hi, false)
    };
    Ok(TailEstimate {
        method: EstimatorKind::Naive,
        n,
        p,
        delta,
        trials,
        seed,
        status: EventStatus::Random,
        hits,
        estimate,
        log_estimate: estimate.ln(),
        std_error: (estimate * (1.0 - estimate) / nf).sqrt(),
        ci_lo,
        ci_hi,
        rule_of_three,
    })
}

/// Kahan-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    fn scale(&mut self, f: f64) {
        self.sum *= f;
        self.c *= f;
    }
}

/// `Σ w` and `Σ w²` over weights given by their logs, stored relative to the
/// largest log weight seen.
#[derive(Debug, Clone, Copy)]
struct LogMoments {
    max: f64,
    s1: Compensated,
    s2: Compensated,
}

impl LogMoments {
    fn new() -> Self {
        LogMoments { max: f64::NEG_INFINITY, s1: Compensated::default(), s2: Compensated::default() }
    }

    fn rebase(&mut self, max: f64) {
        if max > self.max {
            if self.max > f64::NEG_INFINITY {
                let f = (self.max - max).exp();
                self.s1.scale(f);
                self.s2.scale(f * f);
            }
            self.max = max;
        }
    }

    fn add(&mut self, lw: f64) {
        if lw == f64::NEG_INFINITY {
            return;
        }
        self.rebase(lw);
        let e = (lw - self.max).exp();
        self.s1.add(e);
        self.s2.add(e * e);
    }

    fn merge(&mut self, other: &LogMoments) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        self.rebase(other.max);
        let f = (other.max - self.max).exp();
        self.s1.add(other.s1.sum * f);
        self.s2.add(other.s2.sum * f * f);
    }

    fn ln_s1(&self) -> f64 {
        self.max + self.s1.sum.ln()
    }
}

/// Importance-sampled tail estimate: pairs are drawn with probabilities `q`,
/// every hit contributes its likelihood ratio
/// `Π (p/q)^{x} ((1-p)/(1-q))^{1-x}`.
///
/// Unbiased whenever `q_ij < 1` for every pair with `p < 1`. A pair with
/// `q = 1` is never absent, so the estimate then covers only the part of the
/// event containing it, which is a lower bound. The interval is
/// `estimate ± 1.96 se`, clipped to `[0, 1]`. With no hits the upper end is
/// the rule of three times the largest possible weight.
pub fn tilted_tail_estimate(
    n: usize,
    p: f64,
    delta: f64,
    pattern: &SubgraphPattern,
    tilt: &TiltSpec,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_trials(trials)?;
    if tilt.n != n {
        return Err(Error::Dimension(format!("tilt is for n = {}, expected {n}", tilt.n)));
    }
    let event = TailEvent::new(n, p, delta, pattern)?;
    if p > 0.0 && tilt.q.iter().any(|&q| q == 0.0) {
        return Err(Error::Precondition("tilt probabilities must be positive where p > 0".into()));
    }
    if let Some(done) = event.decided(EstimatorKind::Tilted, n, p, delta, trials, seed) {
        return Ok(done);
    }
    // per-pair log weights for presence and absence
    let present: Vec<f64> = tilt.q.iter().map(|&q| p.ln() - q.ln()).collect();
    let absent: Vec<f64> = tilt.q.iter().map(|&q| (1.0 - p).ln() - (1.0 - q).ln()).collect();
    let m = pair_count(n);
    let parts: Vec<(LogMoments, u64)> = chunks(trials)
        .map(|range| {
            let mut upper = vec![0.0; m];
            let mut acc = LogMoments::new();
            let mut hits = 0u64;
            for trial in range {
                let mut rng = trial_rng(seed, trial);
                let mut lw = 0.0;
                for (e, x) in upper.iter_mut().enumerate() {
                    if rng.gen::<f64>() < tilt.q[e] {
                        *x = 1.0;
                        lw += present[e];
                    } else {
                        *x = 0.0;
                        lw += absent[e];
                    }
                }
                let g = WeightedGraph::from_upper(n, &upper).expect("0/1 weights are valid");
                if event.hit(&g) {
                    hits += 1;
                    acc.add(lw);
                }
            }
            (acc, hits)
        })
        .collect();
    let mut acc = LogMoments::new();
    let mut hits = 0;
    for (part, h) in &parts {
        acc.merge(part);
        hits += h;
    }
    let nf = trials as f64;
    if acc.max == f64::NEG_INFINITY {
        // rule of three on the hit rate under q, times the largest weight
        let ln_wmax: f64 = present.iter().zip(&absent).map(|(a, b)| a.max(*b)).sum();
        return Ok(TailEstimate {
            method: EstimatorKind::Tilted,
            n,
            p,
            delta,
            trials,
            seed,
            status: EventStatus::Random,
            hits,
            estimate: 0.0,
            log_estimate: f64::NEG_INFINITY,
            std_error: 0.0,
            ci_lo: 0.0,
            ci_hi: ((3.0 / nf).ln() + ln_wmax).exp().min(1.0),
            rule_of_three: true,
        });
    }
    let log_estimate = acc.ln_s1() - nf.ln();
    let estimate = log_estimate.exp();
    // se / estimate = sqrt((N Σw² / (Σw)² - 1) / (N - 1))
    let rel = if trials > 1 {
        let ratio = acc.s2.sum / (acc.s1.sum * acc.s1.sum);
        ((nf * ratio - 1.0).max(0.0) / (nf - 1.0)).sqrt()
    } else {
        f64::INFINITY
    };
    let std_error = estimate * rel;
    Ok(TailEstimate {
        method: EstimatorKind::Tilted,
        n,
        p,
        delta,
        trials,
        seed,
        status: EventStatus::Random,
        hits,
        estimate,
        log_estimate,
        std_error,
        ci_lo: (estimate - Z95 * std_error).max(0.0),
        ci_hi: (estimate + Z95 * std_error).min(1.0),
        rule_of_three: false,
    })
}

/// Exact tail probability by enumerating all `2^{C(n,2)}` graphs, `n <= 5`.
pub fn exact_tail_probability(n: usize, p: f64, delta: f64, pattern: &SubgraphPattern) -> Result<f64> {
    if n > EXACT_MAX_N {
        return Err(Error::Resource(format!("exact enumeration is limited to n <= {EXACT_MAX_N}")));
    }
    let event = TailEvent::new(n, p, delta, pattern)?;
    match event.status {
        EventStatus::Certain => return Ok(1.0),
        EventStatus::Impossible => return Ok(0.0),
        EventStatus::Random => {}
    }
    let m = pair_count(n);
    let mut total = Compensated::default();
    let mut upper = vec![0.0; m];
    for mask in 0u32..1 << m {
        let mut prob = 1.0;
        for (e, x) in upper.iter_mut().enumerate() {
            if mask >> e & 1 == 1 {
                *x = 1.0;
                prob *= p;
            } else {
                *x = 0.0;
                prob *= 1.0 - p;
            }
        }
        let g = WeightedGraph::from_upper(n, &upper)?;
        if event.hit(&g) {
            total.add(prob);
        }
    }
    Ok(total.sum)
}

/// Side-by-side comparison of an estimated tail with a rate estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateComparison {
    pub n: usize,
    pub p: f64,
    pub delta: f64,
    pub log_estimate: f64,
    pub phi_estimate: f64,
    /// `-ln(estimate) / φ̂`.
    pub ratio_to_phi: f64,
    /// `-ln(estimate) / (n² p² ln(1/p))`.
    pub normalized_rate: f64,
    /// True when the estimate is 1, so the ratio carries no information.
    pub degenerate: bool,
}

/// Compares `-ln(estimate)` with `φ̂` and with the triangle rate scale.
pub fn rate_comparison(n: usize, p: f64, delta: f64, estimate: f64, phi_estimate: f64) -> Result<RateComparison> {
    if !(estimate > 0.0 && estimate <= 1.0) {
        return Err(domain!("estimate must lie in (0,1], got {estimate}"));
    }
    rate_comparison_log(n, p, delta, estimate.ln(), phi_estimate)
}

/// As [`rate_comparison`], from `ln(estimate)`, for estimates that underflow.
pub fn rate_comparison_log(
    n: usize,
    p: f64,
    delta: f64,
    log_estimate: f64,
    phi_estimate: f64,
) -> Result<RateComparison> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain!("p must lie in (0,1), got {p}"));
    }
    if !(log_estimate <= 0.0) || log_estimate == f64::NEG_INFINITY {
        return Err(domain!("log estimate must be finite and <= 0, got {log_estimate}"));
    }
    if !(phi_estimate > 0.0) || !phi_estimate.is_finite() {
        return Err(domain!("phi estimate must be positive, got {phi_estimate}"));
    }
    let nf = n as f64;
    let rate = -log_estimate;
    Ok(RateComparison {
        n,
        p,
        delta,
        log_estimate,
        phi_estimate,
        ratio_to_phi: rate / phi_estimate,
        normalized_rate: rate / (nf * nf * p * p * (1.0 / p).ln()),
        degenerate: log_estimate == 0.0,
    })
}
