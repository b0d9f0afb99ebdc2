//! Closed-form limits, the clique/hub crossover, regime classification and
//! the union-bound bookkeeping for the regularity argument.
//!
//! Normalized rates are in units of `n^2 p^{k-1} log(1/p)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::check_p;
use crate::error::{domain, Error, Result};
use crate::patterns::SubgraphPattern;

/// Default margin turning the asymptotic `≪` into a finite-n comparison.
pub const DEFAULT_REGIME_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `n^{-1/(k-1)} ≪ p ≪ 1`.
    DenseSide,
    /// `n^{-2/(k-1)} ≪ p ≪ n^{-1/(k-1)}`.
    SparseSide,
    /// Within a factor `C` of `n^{-1/(k-1)}`; no prediction is made here.
    Boundary,
    BelowValidity,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::DenseSide => "dense_side",
            Regime::SparseSide => "sparse_side",
            Regime::Boundary => "boundary",
            Regime::BelowValidity => "below_validity",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" | "dense_side" => Ok(Regime::DenseSide),
            "sparse" | "sparse_side" => Ok(Regime::SparseSide),
            "boundary" => Ok(Regime::Boundary),
            "below_validity" => Ok(Regime::BelowValidity),
            _ => Err(Error::Parse(format!("unknown regime `{s}`"))),
        }
    }
}

/// A regime together with the thresholds it was decided against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeLabel {
    pub label: Regime,
    /// `C n^{-1/(k-1)}`: dense side at or above.
    pub dense_threshold: f64,
    /// `C^{-1} n^{-1/(k-1)}`: sparse side strictly below.
    pub sparse_upper: f64,
    /// `C^{-1} n^{-2/(k-1)}`: below validity strictly below.
    pub sparse_lower: f64,
    pub margin: f64,
}

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return Err(domain!("clique order k must be at least 3, got {k}"));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(domain!("delta must be a positive real, got {delta}"));
    }
    Ok(())
}

/// `min{δ^{2/k}/2, δ/k}` on the dense side, `δ^{2/k}/2` on the sparse side.
pub fn limit_rate(k: usize, delta: f64, regime: Regime) -> Result<f64> {
    check_k(k)?;
    check_delta(delta)?;
    let clique = clique_rate(k, delta);
    match regime {
        Regime::DenseSide => Ok(clique.min(delta / k as f64)),
        Regime::SparseSide => Ok(clique),
        other => Err(domain!("no limit is predicted in the {other} regime")),
    }
}

fn clique_rate(k: usize, delta: f64) -> f64 {
    0.5 * delta.powf(2.0 / k as f64)
}

/// `δ* = (k/2)^{k/(k-2)}`, where `δ^{2/k}/2 = δ/k`.
pub fn crossover_delta(k: usize) -> Result<f64> {
    check_k(k)?;
    let base = k as f64 / 2.0;
    Ok(if k % (k - 2) == 0 {
        base.powi((k / (k - 2)) as i32)
    } else {
        base.powf(k as f64 / (k - 2) as f64)
    })
}

/// Classifies `p` against `n^{-1/(k-1)}` and `n^{-2/(k-1)}` with margin 3.
pub fn regime_classify(n: u64, p: f64, k: usize) -> Result<RegimeLabel> {
    regime_classify_with_margin(n, p, k, DEFAULT_REGIME_MARGIN)
}

pub fn regime_classify_with_margin(n: u64, p: f64, k: usize, margin: f64) -> Result<RegimeLabel> {
    check_p(p)?;
    check_k(k)?;
    if n < 2 {
        return Err(domain!("n must be at least 2, got {n}"));
    }
    if !(margin >= 1.0) {
        return Err(domain!("margin must be at least 1, got {margin}"));
    }
    let ln_n = (n as f64).ln();
    let base = (-ln_n / (k - 1) as f64).exp();
    let low = (-2.0 * ln_n / (k - 1) as f64).exp();
    let (dense_threshold, sparse_upper, sparse_lower) = (margin * base, base / margin, low / margin);
    let label = if p >= dense_threshold {
        Regime::DenseSide
    } else if p >= sparse_upper {
        Regime::Boundary
    } else if p >= sparse_lower {
        Regime::SparseSide
    } else {
        Regime::BelowValidity
    };
    Ok(RegimeLabel { label, dense_threshold, sparse_upper, sparse_lower, margin })
}

/// Minimizer of `δ1^{2/3}/2 + δ2` over the two extreme splits of
/// `δ1 + 3δ2 = δ`; the clique split `(δ, 0)` wins ties.
pub fn optimal_split(delta: f64) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let clique = phi_prime_limit(delta, 0.0)?;
    let hub = phi_prime_limit(0.0, delta / 3.0)?;
    Ok(if clique <= hub { (delta, 0.0) } else { (0.0, delta / 3.0) })
}

/// `δ1^{2/3}/2 + δ2`.
pub fn phi_prime_limit(delta1: f64, delta2: f64) -> Result<f64> {
    if !(delta1 >= 0.0 && delta2 >= 0.0) {
        return Err(domain!("split components must be nonnegative"));
    }
    Ok(0.5 * delta1.powf(2.0 / 3.0) + delta2)
}

/// Limit of `s(G_n)/p^2` along minimizing sequences: `1 + δ/3` on the dense
/// side below the crossover, `1` otherwise. Undefined exactly at `27/8`.
pub fn cherry_diagnostic_limit(delta: f64, regime: Regime) -> Result<f64> {
    check_delta(delta)?;
    let star = crossover_delta(3)?;
    match regime {
        Regime::DenseSide if delta == star => {
            Err(domain!("the cherry limit is not determined at δ = 27/8"))
        }
        Regime::DenseSide if delta < star => Ok(1.0 + delta / 3.0),
        Regime::DenseSide | Regime::SparseSide => Ok(1.0),
        other => Err(domain!("no cherry limit is predicted in the {other} regime")),
    }
}

/// Order of `φ_F(n,p,δ)`: `n^2 p^Δ log(1/p)` up to constants depending on δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub n_exponent: u32,
    /// `Δ(F)`.
    pub p_exponent: u32,
    pub log_factor: bool,
    pub edges: usize,
    /// `n^2 p^Δ log(1/p)`.
    pub scale: f64,
}

impl OrderEstimate {
    /// `(lower, upper)` coefficients of the scale.
    ///
    /// Upper: a hub of `δ n p^Δ` vertices. Lower: writing `W = p + U`,
    /// Hölder gives `t(F, W) <= (p + ||U||_Δ)^{e}`, so the constraint forces
    /// `E[U^Δ] >= c^Δ p^Δ` with `c = (1+δ)^{1/e} - 1`; since `U^Δ <= U^2` and
    /// `I_p(p+x) >= (1+o(1)) x^2 log(1/p)`, the entropy is at least
    /// `½ c^Δ` times the scale.
    pub fn coefficients(&self, delta: f64) -> Result<(f64, f64)> {
        check_delta(delta)?;
        let c = (1.0 + delta).powf(1.0 / self.edges as f64) - 1.0;
        Ok((0.5 * c.powi(self.p_exponent as i32), delta))
    }
}

/// Order skeleton for a pattern with `Δ(F) >= 2`, valid for `p >= n^{-1/Δ}`.
pub fn general_h_order(f: &SubgraphPattern, n: u64, p: f64) -> Result<OrderEstimate> {
    check_p(p)?;
    let delta_f = f.max_degree();
    if delta_f < 2 {
        return Err(domain!(
            "patterns with maximum degree {delta_f} have a rate of a different order"
        ));
    }
    if n < 2 {
        return Err(domain!("n must be at least 2"));
    }
    let floor = (-(n as f64).ln() / delta_f as f64).exp();
    if p < floor {
        return Err(domain!("p = {p} is below the validity floor n^(-1/Δ) = {floor:e}"));
    }
    let nf = n as f64;
    Ok(OrderEstimate {
        n_exponent: 2,
        p_exponent: delta_f as u32,
        log_factor: true,
        edges: f.edge_count(),
        scale: nf * nf * p.powi(delta_f as i32) * (1.0 / p).ln(),
    })
}

/// `log R` for `R = M^n ε^{-M^2}`, `ε = ηp^3/6`, `M = 4^{1/ε^2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnionBound {
    pub ln_epsilon: f64,
    /// `log M = ε^{-2} log 4`.
    pub log_m: f64,
    /// `log log R`, always finite.
    pub ln_log_r: f64,
    /// `log R`; `+∞` once it leaves the f64 range.
    pub log_r: f64,
    /// `log(log R / (n^2 p^2 log(1/p)))`.
    pub ln_ratio: f64,
}

fn logaddexp(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// `log R` for an integer `n`.
pub fn union_bound_log_r(n: u64, p: f64, eta: f64) -> Result<UnionBound> {
    if n < 1 {
        return Err(domain!("n must be positive"));
    }
    union_bound_from_log_n((n as f64).ln(), p, eta)
}

/// `log R` with `n` given through `ln n`, so astronomically large `n` are
/// representable. Every intermediate lives in log or log-log space.
pub fn union_bound_from_log_n(ln_n: f64, p: f64, eta: f64) -> Result<UnionBound> {
    check_p(p)?;
    if !(eta > 0.0) || !(ln_n >= 0.0) {
        return Err(domain!("need η > 0 and n >= 1"));
    }
    let ln_epsilon = eta.ln() + 3.0 * p.ln() - 6f64.ln();
    if ln_epsilon >= 0.0 {
        return Err(domain!("ε = ηp³/6 must be below 1, got exp({ln_epsilon})"));
    }
    let ln4 = 4f64.ln();
    let log_m = (-2.0 * ln_epsilon).exp() * ln4;
    let ln_log_m = -2.0 * ln_epsilon + ln4.ln();
    // log R = n log M + M^2 log(1/ε)
    let ln_first = ln_n + ln_log_m;
    let ln_second = 2.0 * log_m + (-ln_epsilon).ln();
    let ln_log_r = logaddexp(ln_first, ln_second);
    let log_r = if ln_log_r < 700.0 {
        ln_n.exp() * log_m + (2.0 * log_m).exp() * -ln_epsilon
    } else {
        f64::INFINITY
    };
    let ln_scale = 2.0 * ln_n + 2.0 * p.ln() + (-p.ln()).ln();
    Ok(UnionBound { ln_epsilon, log_m, ln_log_r, log_r, ln_ratio: ln_log_r - ln_scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn limit_examples() {
        assert_relative_eq!(limit_rate(3, 1.0, Regime::DenseSide).unwrap(), 1.0 / 3.0);
        assert_relative_eq!(limit_rate(3, 1.0, Regime::SparseSide).unwrap(), 0.5);
        assert_relative_eq!(
            limit_rate(3, 7.0, Regime::DenseSide).unwrap(),
            0.5 * 49f64.cbrt(),
            epsilon = 1e-14
        );
        assert!(limit_rate(3, 1.0, Regime::Boundary).is_err());
        assert!(limit_rate(3, 0.0, Regime::DenseSide).is_err());
    }

    #[test]
    fn crossover_values() {
        assert_eq!(crossover_delta(3).unwrap(), 27.0 / 8.0);
        assert_eq!(crossover_delta(4).unwrap(), 4.0);
        for k in 3..=8 {
            let d = crossover_delta(k).unwrap();
            assert_relative_eq!(clique_rate(k, d), d / k as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn regime_examples() {
        assert_eq!(regime_classify(1_000_000, 0.01, 3).unwrap().label, Regime::DenseSide);
        assert_eq!(regime_classify(1_000_000, 1e-3, 3).unwrap().label, Regime::Boundary);
        // 5e-4 sits inside the default band (upper edge 3.3e-4); a narrower
        // margin puts it on the sparse side.
        assert_eq!(regime_classify(1_000_000, 5e-4, 3).unwrap().label, Regime::Boundary);
        assert_eq!(
            regime_classify_with_margin(1_000_000, 5e-4, 3, 1.5).unwrap().label,
            Regime::SparseSide
        );
        assert_eq!(regime_classify(1_000_000, 1e-4, 3).unwrap().label, Regime::SparseSide);
        assert_eq!(regime_classify(1_000_000, 1e-7, 3).unwrap().label, Regime::BelowValidity);
    }

    #[test]
    fn split_and_diagnostic() {
        assert_eq!(optimal_split(1.0).unwrap(), (0.0, 1.0 / 3.0));
        assert_eq!(optimal_split(8.0).unwrap(), (8.0, 0.0));
        assert_eq!(optimal_split(27.0 / 8.0).unwrap(), (27.0 / 8.0, 0.0));
        assert_eq!(phi_prime_limit(1.0, 0.0).unwrap(), 0.5);
        assert_relative_eq!(cherry_diagnostic_limit(1.0, Regime::DenseSide).unwrap(), 4.0 / 3.0);
        assert_eq!(cherry_diagnostic_limit(1.0, Regime::SparseSide).unwrap(), 1.0);
        assert_eq!(cherry_diagnostic_limit(8.0, Regime::DenseSide).unwrap(), 1.0);
        assert!(cherry_diagnostic_limit(27.0 / 8.0, Regime::DenseSide).is_err());
    }

    #[test]
    fn split_composes_to_limit() {
        for i in 1..=40 {
            let d = 0.25 * i as f64;
            let (d1, d2) = optimal_split(d).unwrap();
            assert_relative_eq!(
                phi_prime_limit(d1, d2).unwrap(),
                limit_rate(3, d, Regime::DenseSide).unwrap(),
                max_relative = 1e-12
            );
            let expected = if d2 > 0.0 { 1.0 + d / 3.0 } else { 1.0 };
            if d != 27.0 / 8.0 {
                assert_eq!(cherry_diagnostic_limit(d, Regime::DenseSide).unwrap(), expected);
            }
        }
    }

    #[test]
    fn order_examples() {
        let tri = general_h_order(&SubgraphPattern::triangle(), 1000, 0.1).unwrap();
        assert_eq!((tri.n_exponent, tri.p_exponent, tri.log_factor), (2, 2, true));
        let c4 = general_h_order(&SubgraphPattern::cycle(4).unwrap(), 1000, 0.1).unwrap();
        assert_eq!(c4.p_exponent, 2);
        let star = general_h_order(&SubgraphPattern::star(6).unwrap(), 1000, 0.5).unwrap();
        assert_eq!(star.p_exponent, 5);
        assert!(general_h_order(&SubgraphPattern::star(6).unwrap(), 1000, 0.1).is_err());
        assert!(general_h_order(&SubgraphPattern::edge(), 1000, 0.1).is_err());
        for d in [0.1, 1.0, 10.0, 1000.0] {
            let (lo, hi) = tri.coefficients(d).unwrap();
            assert!(0.0 < lo && lo <= hi);
        }
    }

    #[test]
    fn union_bound_by_hand() {
        // ε = 1/2 needs ηp³ = 3; take p = 1/2, η = 24.
        let u = union_bound_log_r(2, 0.5, 24.0).unwrap();
        let expected = 2.0 * 256f64.ln() + 65536.0 * 2f64.ln();
        assert_relative_eq!(u.log_r, expected, max_relative = 1e-12);
        assert_relative_eq!(u.ln_log_r, expected.ln(), max_relative = 1e-12);
        assert!(union_bound_log_r(2, 0.5, 48.0).is_err());
        // ε → 1⁻: M → 4 and log R → n log 4
        let near = union_bound_log_r(5, 0.5, 47.999_999).unwrap();
        assert!((near.log_r - 5.0 * 4f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn union_bound_monotonicity() {
        for eta in [4.0, 40.0] {
            let base = union_bound_log_r(100, 0.5, eta).unwrap().log_r;
            assert!(union_bound_log_r(100, 0.5, eta * 1.1).unwrap().log_r < base);
        }
        // n only shows once the M^2 term stops dominating, i.e. for ε near 1
        let base = union_bound_log_r(100, 0.5, 40.0).unwrap().log_r;
        assert!(union_bound_log_r(1000, 0.5, 40.0).unwrap().log_r > base);
    }

    #[test]
    fn union_bound_is_negligible_for_huge_n() {
        let mut last = f64::INFINITY;
        for ln_n in [1e20f64, 1e30, 1e40, 1e60] {
            let p = ln_n.powf(-1.0 / 7.0);
            let eta = ln_n.powf(-0.01);
            let u = union_bound_from_log_n(ln_n, p, eta).unwrap();
            assert!(u.ln_ratio < last && u.ln_ratio < -10.0, "ln ratio {}", u.ln_ratio);
            last = u.ln_ratio;
        }
        // n = 10^400 is still far too small for the bound to be negligible
        let ln_n = 400.0 * 10f64.ln();
        let u = union_bound_from_log_n(ln_n, ln_n.powf(-1.0 / 7.0), ln_n.powf(-0.01)).unwrap();
        assert!(u.ln_ratio > 0.0);
    }
}
