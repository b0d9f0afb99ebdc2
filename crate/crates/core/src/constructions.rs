//! The planted-clique and hub constructions, in discrete and graphon form,
//! with exact calibration of their size parameter.
//!
//! Both discrete constructions have two vertex classes (the planted set of
//! size `a` and the rest), so the labeled clique density is a finite sum over
//! how many pattern vertices land in the planted set:
//!
//! ```text
//! n^k t(K_k, G) = Σ_j C(k,j) a^(j) (n-a)^(k-j) p^{e_j}
//! ```
//!
//! with falling factorials `x^(j)` and `e_j = C(k,2) - C(j,2)` for the clique,
//! `e_j = C(k-j,2)` for the hub. Calibration searches this exact expression;
//! when the full graph is materialized its density is recomputed by the
//! graphs module and the size is bumped if rounding disagrees.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::{check_p, entropy};
use crate::error::{domain, Error, Result};
use crate::graphs::{StepGraphon, WeightedGraph};
use crate::patterns::SubgraphPattern;

/// Largest `n` for which reports carry the full weighted graph.
pub const FULL_GRAPH_MAX_N: u64 = 512;

/// Hub sizes whose fractional calibration falls below this are rejected: the
/// smallest integer hub overshoots the target by more than a factor of two,
/// which is the regime where the construction stops being the right one.
pub const HUB_VIABILITY_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstructionKind {
    Clique,
    Hub,
}

impl fmt::Display for ConstructionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstructionKind::Clique => "clique",
            ConstructionKind::Hub => "hub",
        })
    }
}

impl FromStr for ConstructionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clique" => Ok(ConstructionKind::Clique),
            "hub" => Ok(ConstructionKind::Hub),
            _ => Err(Error::Parse(format!("unknown construction kind `{s}`"))),
        }
    }
}

/// Output of a construction.
///
/// `n` is `None` for graphon constructions, whose `objective` is
/// `½ E[I_p(W)]` and whose `normalized_rate` divides by `p^{k-1} log(1/p)`.
/// Discrete reports divide `I_p(G)` by `n^2 p^{k-1} log(1/p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub kind: ConstructionKind,
    pub n: Option<u64>,
    pub p: f64,
    pub delta: f64,
    pub k: usize,
    /// Integer `a` for discrete constructions, block measure for graphons.
    pub size_parameter: f64,
    /// Two-block quotient (blocks of measure `a/n` and `1 - a/n`).
    pub quotient: StepGraphon,
    /// Full graph, present when `n <= FULL_GRAPH_MAX_N`.
    pub graph: Option<WeightedGraph>,
    pub objective: f64,
    pub constraint_value: f64,
    pub threshold: f64,
    pub normalized_rate: f64,
}

fn check_args(p: f64, delta: f64, k: usize) -> Result<f64> {
    check_p(p)?;
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(domain!("delta must be a nonnegative real, got {delta}"));
    }
    if k < 3 {
        return Err(domain!("clique order k must be at least 3, got {k}"));
    }
    if k > crate::contraction::MAX_PATTERN_VERTICES {
        return Err(domain!("clique order k = {k} exceeds the pattern cap"));
    }
    Ok((1.0 + delta) * p.powi(binom2(k) as i32))
}

fn binom2(k: usize) -> usize {
    k * k.saturating_sub(1) / 2
}

fn binom(k: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

/// Exact labeled `t(K_k, G)` for the two-class construction of size `a`.
pub fn discrete_clique_density(kind: ConstructionKind, n: u64, a: u64, p: f64, k: usize) -> f64 {
    let nf = n as f64;
    let af = a as f64;
    let e = binom2(k);
    let mut total = 0.0;
    for j in 0..=k {
        let mut term = binom(k, j);
        for i in 0..j {
            term *= (af - i as f64).max(0.0) / nf;
        }
        for i in 0..(k - j) {
            term *= (nf - af - i as f64).max(0.0) / nf;
        }
        if term == 0.0 {
            continue;
        }
        let exponent = match kind {
            ConstructionKind::Clique => e - binom2(j),
            ConstructionKind::Hub => binom2(k - j),
        };
        total += term * p.powi(exponent as i32);
    }
    total
}

/// `I_p(G)` of the discrete construction: `C(a,2) log(1/p)` or
/// `a (n - (a+1)/2) log(1/p)`.
pub fn discrete_objective(kind: ConstructionKind, n: u64, a: u64, p: f64) -> f64 {
    let (nf, af) = (n as f64, a as f64);
    let i1 = entropy(1.0, p);
    match kind {
        ConstructionKind::Clique => af * (af - 1.0) / 2.0 * i1,
        ConstructionKind::Hub => af * (nf - (af + 1.0) / 2.0) * i1,
    }
}

fn discrete_graph(kind: ConstructionKind, n: usize, a: usize, p: f64) -> WeightedGraph {
    WeightedGraph::from_fn_unchecked(n, |i, j| {
        let planted = match kind {
            ConstructionKind::Clique => i < a && j < a,
            ConstructionKind::Hub => i < a || j < a,
        };
        if planted {
            1.0
        } else {
            p
        }
    })
}

fn quotient(kind: ConstructionKind, a: f64, p: f64) -> StepGraphon {
    let built = match kind {
        ConstructionKind::Clique => StepGraphon::two_block(a, 1.0, p, p),
        ConstructionKind::Hub => StepGraphon::two_block(a, 1.0, 1.0, p),
    };
    built.expect("construction block values lie in [0,1]")
}

fn graph_density(g: &WeightedGraph, k: usize) -> Option<f64> {
    if k == 3 {
        return Some(g.triangle_density());
    }
    let pattern = SubgraphPattern::clique(k).ok()?;
    g.hom_density(&pattern).ok()
}

/// Planted clique on the first `a` vertices, `a` the smallest integer with
/// `t(K_k, G) >= (1+δ) p^{C(k,2)}`.
pub fn clique_construction(n: u64, p: f64, delta: f64, k: usize) -> Result<ConstructionReport> {
    discrete_construction(ConstructionKind::Clique, n, p, delta, k)
}

/// Hub of the first `a` vertices joined to everything, `a` calibrated exactly.
pub fn hub_construction(n: u64, p: f64, delta: f64, k: usize) -> Result<ConstructionReport> {
    discrete_construction(ConstructionKind::Hub, n, p, delta, k)
}

/// Either discrete construction.
pub fn discrete_construction(
    kind: ConstructionKind,
    n: u64,
    p: f64,
    delta: f64,
    k: usize,
) -> Result<ConstructionReport> {
    let threshold = check_args(p, delta, k)?;
    if n < k as u64 {
        return Err(domain!("n = {n} is smaller than the clique order {k}"));
    }
    let density = |a: u64| discrete_clique_density(kind, n, a, p, k);
    if density(n) < threshold {
        return Err(Error::Infeasible(format!(
            "{kind} construction: even a = n misses the threshold {threshold:e}"
        )));
    }
    let (mut lo, mut hi) = (0u64, n);
    if density(0) >= threshold {
        hi = 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if density(mid) >= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut a = hi;

    if kind == ConstructionKind::Hub && a > 0 {
        let (t0, t1) = (density(0), density(1));
        let fractional = (threshold - t0) / (t1 - t0);
        if fractional < HUB_VIABILITY_MIN {
            return Err(Error::Infeasible(format!(
                "hub construction: calibrated hub size {fractional:.3e} is below one vertex"
            )));
        }
    }

    let mut graph = None;
    let mut constraint_value = density(a);
    if n <= FULL_GRAPH_MAX_N {
        loop {
            let g = discrete_graph(kind, n as usize, a as usize, p);
            if let Some(t) = graph_density(&g, k) {
                constraint_value = t;
                if t < threshold && a < n {
                    a += 1;
                    continue;
                }
            }
            graph = Some(g);
            break;
        }
    }
    let objective = discrete_objective(kind, n, a, p);
    let nf = n as f64;
    Ok(ConstructionReport {
        kind,
        n: Some(n),
        p,
        delta,
        k,
        size_parameter: a as f64,
        quotient: quotient(kind, a as f64 / nf, p),
        graph,
        objective,
        constraint_value,
        threshold,
        normalized_rate: objective / (nf * nf * p.powi(k as i32 - 1) * entropy(1.0, p)),
    })
}

fn graphon_density(w: &StepGraphon, k: usize) -> Result<f64> {
    if k == 3 {
        return Ok(w.triangle_density());
    }
    w.hom_density(&SubgraphPattern::clique(k)?)
}

/// Two-block graphon construction with the smallest block measure `a` whose
/// exact clique density reaches the threshold (bisection to machine
/// resolution; the returned `a` is on the feasible side).
pub fn graphon_construction(
    kind: ConstructionKind,
    p: f64,
    delta: f64,
    k: usize,
) -> Result<ConstructionReport> {
    let threshold = check_args(p, delta, k)?;
    let density = |a: f64| graphon_density(&quotient(kind, a, p), k);
    if density(1.0)? < threshold {
        return Err(Error::Infeasible(format!("threshold {threshold} exceeds 1")));
    }
    let a = if density(0.0)? >= threshold {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if density(mid)? >= threshold {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let w = quotient(kind, a, p);
    let i1 = entropy(1.0, p);
    let objective = match kind {
        ConstructionKind::Clique => 0.5 * a * a * i1,
        ConstructionKind::Hub => a * (1.0 - a / 2.0) * i1,
    };
    Ok(ConstructionReport {
        kind,
        n: None,
        p,
        delta,
        k,
        size_parameter: a,
        constraint_value: density(a)?,
        quotient: w,
        graph: None,
        objective,
        threshold,
        normalized_rate: objective / (p.powi(k as i32 - 1) * i1),
    })
}

/// The feasible discrete construction with the smaller objective (ties go to
/// the clique).
pub fn best_construction(n: u64, p: f64, delta: f64, k: usize) -> Result<ConstructionReport> {
    let clique = clique_construction(n, p, delta, k);
    let hub = hub_construction(n, p, delta, k);
    match (clique, hub) {
        (Ok(c), Ok(h)) => Ok(if h.objective < c.objective { h } else { c }),
        (Ok(c), Err(Error::Infeasible(_))) => Ok(c),
        (Err(Error::Infeasible(_)), Ok(h)) => Ok(h),
        (Err(e @ Error::Infeasible(_)), Err(Error::Infeasible(_))) => Err(e),
        (Err(e), _) | (_, Err(e)) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn clique_at_moderate_n() {
        // The cross term 3a^2(n-a)p^2 carries a relative weight of about 3p
        // against the planted a^3, so at p = 0.1 the exact calibration lands
        // about 6% below δ^{1/3}pn and the rate about 13% below 1/2.
        let r = clique_construction(1000, 0.1, 1.0, 3).unwrap();
        assert!((90.0..=100.0).contains(&r.size_parameter), "a = {}", r.size_parameter);
        assert!((r.normalized_rate - 0.5).abs() <= 0.075, "rate {}", r.normalized_rate);
        assert!(r.constraint_value >= r.threshold);
        let big = clique_construction(1_000_000, 0.01, 1.0, 3).unwrap();
        assert!((big.normalized_rate - 0.5).abs() <= 0.05, "rate {}", big.normalized_rate);
    }

    #[test]
    fn small_clique_by_hand() {
        // n = 5, p = 1/2, threshold 0.1375. Enumerating the 125 ordered triples:
        // a = 2 gives (18/4 + 36/8 + 6/8)/125 = 0.078 and a = 3 gives
        // (6 + 36/4 + 18/8)/125 = 0.138.
        let r = clique_construction(5, 0.5, 0.1, 3).unwrap();
        assert_eq!(r.size_parameter, 3.0);
        assert_relative_eq!(r.constraint_value, 0.138, epsilon = 1e-15);
        assert_relative_eq!(r.objective, 3.0 * 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(
            discrete_clique_density(ConstructionKind::Clique, 5, 2, 0.5, 3),
            0.078,
            epsilon = 1e-15
        );
    }

    #[test]
    fn small_hub_by_hand() {
        // n = 6, p = 1/2: a = 0 gives 120/8/216, a = 1 gives (60/8 + 60/2)/216.
        let r = hub_construction(6, 0.5, 0.05, 3).unwrap();
        assert_eq!(r.size_parameter, 1.0);
        assert_relative_eq!(r.constraint_value, 37.5 / 216.0, epsilon = 1e-15);
        assert_relative_eq!(r.objective, 5.0 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn hub_at_large_n() {
        let r = hub_construction(1_000_000, 0.01, 1.0, 3).unwrap();
        assert!((r.size_parameter - 33.3).abs() <= 3.0, "a = {}", r.size_parameter);
        assert!((r.normalized_rate - 1.0 / 3.0).abs() <= 1.0 / 30.0);
        assert!(r.graph.is_none());
    }

    #[test]
    fn hub_is_not_viable_when_p_squared_n_is_small() {
        assert!(matches!(hub_construction(10_000, 0.001, 1.0, 3), Err(Error::Infeasible(_))));
        let best = best_construction(10_000, 0.001, 1.0, 3).unwrap();
        assert_eq!(best.kind, ConstructionKind::Clique);
    }

    #[test]
    fn best_follows_the_crossover() {
        assert_eq!(best_construction(1_000_000, 0.01, 4.0, 3).unwrap().kind, ConstructionKind::Clique);
        assert_eq!(best_construction(1_000_000, 0.01, 1.0, 3).unwrap().kind, ConstructionKind::Hub);
    }

    #[test]
    fn closed_form_objective_matches_graph_entropy() {
        for &(n, p, d) in &[(40u64, 0.3, 1.0), (25, 0.5, 0.3), (60, 0.25, 4.0)] {
            for kind in [ConstructionKind::Clique, ConstructionKind::Hub] {
                let Ok(r) = discrete_construction(kind, n, p, d, 3) else { continue };
                let g = r.graph.as_ref().unwrap();
                assert_relative_eq!(
                    g.total_relative_entropy(p).unwrap(),
                    r.objective,
                    max_relative = 1e-9
                );
                assert!(g.triangle_density() >= r.threshold);
            }
        }
    }

    #[test]
    fn four_clique_formula_matches_hom_density() {
        for kind in [ConstructionKind::Clique, ConstructionKind::Hub] {
            let r = discrete_construction(kind, 30, 0.4, 1.0, 4).unwrap();
            let g = r.graph.as_ref().unwrap();
            let direct = g.hom_density(&SubgraphPattern::clique(4).unwrap()).unwrap();
            let a = r.size_parameter as u64;
            assert_relative_eq!(
                discrete_clique_density(kind, 30, a, 0.4, 4),
                direct,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn graphon_calibration() {
        let p = 0.01;
        let c = graphon_construction(ConstructionKind::Clique, p, 1.0, 3).unwrap();
        assert!((c.size_parameter / p - 1.0).abs() < 0.01);
        assert!((c.normalized_rate - 0.5).abs() < 0.025);
        let h = graphon_construction(ConstructionKind::Hub, p, 1.0, 3).unwrap();
        assert!((h.size_parameter / (p * p / 3.0) - 1.0).abs() < 0.02);
        assert!((h.normalized_rate - 1.0 / 3.0).abs() < 0.01);
        for r in [&c, &h] {
            assert!(r.constraint_value >= r.threshold);
            let half_mean = 0.5 * r.quotient.entropy_mean(p).unwrap();
            assert_relative_eq!(half_mean, r.objective, max_relative = 1e-12);
        }
        let zero = graphon_construction(ConstructionKind::Clique, 0.3, 0.0, 3).unwrap();
        assert_eq!((zero.size_parameter, zero.objective), (0.0, 0.0));
    }

    #[test]
    fn argument_checks() {
        assert!(clique_construction(10, 1.2, 1.0, 3).is_err());
        assert!(clique_construction(10, 0.3, -1.0, 3).is_err());
        assert!(clique_construction(10, 0.3, 1.0, 2).is_err());
        assert!(matches!(clique_construction(3, 0.9, 10.0, 3), Err(Error::Infeasible(_))));
    }
}
