//! Bernoulli relative entropy `I_p(x)` and the bounds on it used throughout
//! the crate.
//!
//! All values are in nats. `I_p(x) = x log(x/p) + (1-x) log((1-x)/(1-p))`
//! with `0 log 0 = 0`, so `I_p(1) = log(1/p)` and `I_p(0) = log(1/(1-p))`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Largest `p` for which the small-`p` lower bounds ([`chord_lower_bound`],
/// [`quadratic_lower_bound`]) are accepted.
///
/// The chord bound holds as soon as `g(x_p) <= 0` with
/// `x_p = 1 - p - 1/log(1/p)`; at `p = 1e-2` one has `g(x_p) ≈ -1.33`.
pub const SMALL_P_THRESHOLD: f64 = 1e-2;

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain!("p must lie in (0,1), got {p}"));
    }
    Ok(())
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain!("{name} must lie in [0,1], got {x}"));
    }
    Ok(())
}

/// `log(a/b)` given `d = a - b` computed without cancellation. `ln_1p` is
/// only accurate near the ratio 1; far from it the quotient `d/b` can round
/// below -1 (x within an ulp of 1), so the plain ratio is used instead.
#[inline]
fn log_ratio(a: f64, b: f64, d: f64) -> f64 {
    if d.abs() <= 0.5 * b {
        (d / b).ln_1p()
    } else {
        (a / b).ln()
    }
}

/// `I_p(x)` without argument validation. Callers guarantee `x ∈ [0,1]`,
/// `p ∈ (0,1)`.
#[inline]
pub fn entropy(x: f64, p: f64) -> f64 {
    if x <= 0.0 {
        -(-p).ln_1p()
    } else if x >= 1.0 {
        -p.ln()
    } else {
        let v = x * log_ratio(x, p, x - p) + (1.0 - x) * log_ratio(1.0 - x, 1.0 - p, p - x);
        v.max(0.0)
    }
}

/// `I_p(x)`, the relative entropy of Bernoulli(x) with respect to Bernoulli(p).
pub fn relative_entropy(x: f64, p: f64) -> Result<f64> {
    check_unit(x, "x")?;
    check_p(p)?;
    Ok(entropy(x, p))
}

/// `I_p'(x) = log(x(1-p) / (p(1-x)))` on the open interval.
pub fn entropy_derivative(x: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(domain!(
            "derivative of I_p diverges at the endpoints; x must lie in (0,1), got {x}"
        ));
    }
    Ok(derivative_unchecked(x, p))
}

#[inline]
pub(crate) fn derivative_unchecked(x: f64, p: f64) -> f64 {
    log_ratio(x, p, x - p) - log_ratio(1.0 - x, 1.0 - p, p - x)
}

/// `I_p^>(x) = I_p(max{x, p})`.
pub fn clipped_entropy(x: f64, p: f64) -> Result<f64> {
    check_unit(x, "x")?;
    check_p(p)?;
    Ok(clipped_unchecked(x, p))
}

#[inline]
pub(crate) fn clipped_unchecked(x: f64, p: f64) -> f64 {
    if x <= p {
        0.0
    } else {
        entropy(x, p)
    }
}

fn check_small_p(p: f64) -> Result<()> {
    check_p(p)?;
    if p > SMALL_P_THRESHOLD {
        return Err(domain!(
            "small-p bound requested at p = {p} > p0 = {SMALL_P_THRESHOLD}"
        ));
    }
    Ok(())
}

/// Upper end `1 - p - 1/log(1/p)` of the interval on which the chord bound holds.
pub fn chord_domain_limit(p: f64) -> f64 {
    1.0 - p - 1.0 / (1.0 / p).ln()
}

/// `(x/b)^2 · I_p(p+b)`, a lower bound on `I_p(p+x)` for `0 <= x <= b <= 1-p-1/log(1/p)`
/// and `p <= p0`.
pub fn chord_lower_bound(x: f64, b: f64, p: f64) -> Result<f64> {
    check_small_p(p)?;
    let limit = chord_domain_limit(p);
    if !(b >= 0.0 && b <= limit) {
        return Err(domain!("b = {b} outside [0, 1-p-1/log(1/p)] = [0, {limit}]"));
    }
    if !(x >= 0.0 && x <= b) {
        return Err(domain!("x = {x} outside [0, b] = [0, {b}]"));
    }
    if b == 0.0 {
        return Ok(0.0);
    }
    let r = x / b;
    Ok(r * r * entropy(p + b, p))
}

/// `x^2 · I_p(1 - 1/log(1/p))`, a lower bound on `I_p(p+x)` for `0 <= x <= 1-p`
/// and `p <= p0`.
pub fn quadratic_lower_bound(x: f64, p: f64) -> Result<f64> {
    check_small_p(p)?;
    if !(x >= 0.0 && x <= 1.0 - p) {
        return Err(domain!("x = {x} outside [0, 1-p]"));
    }
    Ok(x * x * entropy(1.0 - 1.0 / (1.0 / p).ln(), p))
}

/// Sharp constant `c_p = inf_{0 < x <= 1-p} I_p(p+x) / x^2`, valid for every `p`.
///
/// `x ↦ I_p(p+x)/x^2` is decreasing then increasing on `(0, 1-p]` (the
/// numerator of its derivative, `x I_p'(p+x) - 2 I_p(p+x)`, vanishes at 0 and
/// is concave then convex), so a golden-section search brackets the minimum.
/// The returned value is shaded down by a relative `1e-9`.
pub fn quadratic_entropy_constant(p: f64) -> Result<f64> {
    check_p(p)?;
    let h = |x: f64| entropy(p + x, p) / (x * x);
    let small = 1.0 / (2.0 * p * (1.0 - p));
    let (mut lo, mut hi) = (0.0_f64, 1.0 - p);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (h(a), h(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = h(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = h(b);
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    let best = fa.min(fb).min(h(1.0 - p)).min(small);
    Ok(best * (1.0 - 1e-9))
}

/// Which asymptote of `I_p(p+x)` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsymptoticRegime {
    /// `x < p`: `I_p(p+x) ~ x^2/(2p)`.
    Quadratic,
    /// `x > p`: `I_p(p+x) ~ x log(x/p)`.
    Linearithmic,
}

/// Ratio of `I_p(p+x)` to its asymptote in the regime selected by `x` vs `p`.
pub fn asymptotic_ratio(x: f64, p: f64) -> Result<(AsymptoticRegime, f64)> {
    check_p(p)?;
    if !(x > 0.0 && x <= 1.0 - p) {
        return Err(domain!("x = {x} outside (0, 1-p]"));
    }
    if x == p {
        return Err(domain!("x = p: both asymptotes degenerate"));
    }
    let value = entropy(p + x, p);
    if x < p {
        Ok((AsymptoticRegime::Quadratic, value / (x * x / (2.0 * p))))
    } else {
        Ok((AsymptoticRegime::Linearithmic, value / (x * (x / p).ln())))
    }
}

/// Chernoff exponent for `P(Bin(N,p) >= threshold·N)`: returns
/// `-N · I_p^>(threshold)`, the log of the bound `exp(-N I_p^>(threshold))`.
pub fn binomial_tail_bound(trials: u64, p: f64, threshold: f64) -> Result<f64> {
    if trials == 0 {
        return Err(domain!("N must be positive"));
    }
    check_p(p)?;
    check_unit(threshold, "threshold")?;
    Ok(-(trials as f64) * clipped_unchecked(threshold, p))
}
