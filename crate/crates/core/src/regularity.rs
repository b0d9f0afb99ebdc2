//! Frieze–Kannan weak regularity partitions, the triangle counting check on
//! the reduced graph, and the union-bound tail certificate.
//!
//! Densities include the zero diagonal: `d(A, A) = Σ_{i,j∈A} g_ij / |A|^2`.
//! The cut deviation of a partition is `max_{S,T} |Σ_{S×T} (g - d)| / n^2`,
//! with `d` spread back over vertex pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{check_p, clipped_unchecked};
use crate::error::{domain, Error, Result};
use crate::graphs::WeightedGraph;
use crate::theory::{self, UnionBound};

/// Smallest ε accepted by [`weak_regular_partition`]; below it the part
/// bound `4^{1/ε^2}` exceeds `4^16`.
pub const MIN_EPSILON: f64 = 0.25;

/// Largest `n` for which the cut-norm violator search is exhaustive.
pub const EXACT_CUT_MAX_N: usize = 20;

/// A partition of `0..n` with the relative densities between its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct VertexPartition {
    parts: Vec<Vec<usize>>,
    densities: Vec<f64>,
}

/// Wire form: membership vector plus density matrix.
#[derive(Serialize, Deserialize)]
struct RawPartition {
    membership: Vec<usize>,
    densities: Vec<Vec<f64>>,
}

impl TryFrom<RawPartition> for VertexPartition {
    type Error = Error;
    fn try_from(raw: RawPartition) -> Result<Self> {
        let m = raw.densities.len();
        let mut parts = vec![Vec::new(); m];
        for (v, &part) in raw.membership.iter().enumerate() {
            if part >= m {
                return Err(Error::Dimension(format!("vertex {v} assigned to missing part {part}")));
            }
            parts[part].push(v);
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(domain!("every part must be nonempty"));
        }
        if raw.densities.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        let densities = raw.densities.concat();
        check_density_matrix(&densities, m)?;
        Ok(VertexPartition { parts, densities })
    }
}

impl From<VertexPartition> for RawPartition {
    fn from(p: VertexPartition) -> Self {
        let m = p.parts.len();
        RawPartition {
            membership: p.membership(),
            densities: p.densities.chunks(m).map(|r| r.to_vec()).collect(),
        }
    }
}

fn check_density_matrix(d: &[f64], m: usize) -> Result<()> {
    for i in 0..m {
        for j in 0..m {
            let x = d[i * m + j];
            if !(0.0..=1.0).contains(&x) {
                return Err(domain!("density {x} outside [0,1]"));
            }
            if x != d[j * m + i] {
                return Err(domain!("density matrix is not symmetric at ({i},{j})"));
            }
        }
    }
    Ok(())
}

impl VertexPartition {
    /// Builds the partition of `g` into `parts` and computes its densities.
    pub fn new(g: &WeightedGraph, parts: Vec<Vec<usize>>) -> Result<Self> {
        let n = g.n();
        let mut seen = vec![false; n];
        for part in &parts {
            if part.is_empty() {
                return Err(domain!("every part must be nonempty"));
            }
            for &v in part {
                if v >= n || seen[v] {
                    return Err(domain!("parts must be a disjoint cover of 0..{n}"));
                }
                seen[v] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(domain!("parts must cover every vertex"));
        }
        let densities = block_densities(g, &parts);
        Ok(VertexPartition { parts, densities })
    }

    /// One part holding every vertex.
    pub fn trivial(g: &WeightedGraph) -> Self {
        Self::new(g, vec![(0..g.n()).collect()]).expect("a single part covers everything")
    }

    /// Every vertex in its own part, in vertex order.
    pub fn discrete(g: &WeightedGraph) -> Self {
        Self::new(g, (0..g.n()).map(|v| vec![v]).collect()).expect("singletons cover everything")
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Vec<usize>] {
        &self.parts
    }

    pub fn vertex_count(&self) -> usize {
        self.parts.iter().map(Vec::len).sum()
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.densities[i * self.parts.len() + j]
    }

    /// Row-major `m × m` density matrix.
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn membership(&self) -> Vec<usize> {
        let mut out = vec![0; self.vertex_count()];
        for (i, part) in self.parts.iter().enumerate() {
            for &v in part {
                out[v] = i;
            }
        }
        out
    }

    /// Same parts with every density floored to a multiple of `eps`.
    pub fn rounded(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(domain!("rounding step must lie in (0,1]"));
        }
        Ok(VertexPartition {
            parts: self.parts.clone(),
            densities: self.densities.iter().map(|&d| (d / eps).floor() * eps).collect(),
        })
    }

    /// `n^{-3} Σ_{i,j,k} |A_i||A_j||A_k| d_ij d_ik d_jk`.
    ///
    /// Evaluated with the same loop order as [`WeightedGraph::triangle_density`],
    /// so the discrete partition reproduces `t(G)` bit for bit.
    pub fn reduced_triangle_density(&self) -> f64 {
        let m = self.parts.len();
        let n = self.vertex_count() as f64;
        let s: Vec<f64> = self.parts.iter().map(|p| p.len() as f64).collect();
        let d = &self.densities;
        let mut q = vec![0.0; m * m];
        for i in 0..m {
            let row = &mut q[i * m..(i + 1) * m];
            for k in 0..m {
                let a = d[i * m + k] * s[k];
                if a == 0.0 {
                    continue;
                }
                for (o, &x) in row.iter_mut().zip(&d[k * m..(k + 1) * m]) {
                    *o += a * x;
                }
            }
        }
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                total += s[i] * s[j] * d[i * m + j] * q[i * m + j];
            }
        }
        total / (n * n * n)
    }
}

fn block_densities(g: &WeightedGraph, parts: &[Vec<usize>]) -> Vec<f64> {
    let m = parts.len();
    let mut d = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let mut sum = 0.0;
            for &i in &parts[a] {
                for &j in &parts[b] {
                    sum += g.weight(i, j);
                }
            }
            let v = (sum / (parts[a].len() * parts[b].len()) as f64).clamp(0.0, 1.0);
            d[a * m + b] = v;
            d[b * m + a] = v;
        }
    }
    d
}

/// A pair `(S, T)` witnessing the cut deviation of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutWitness {
    /// `|Σ_{S×T} (g - d)| / n^2`.
    pub deviation: f64,
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    /// True when the search was exhaustive.
    pub exact: bool,
}

/// `g - d` over all ordered vertex pairs, diagonal included.
fn residual(g: &WeightedGraph, p: &VertexPartition) -> Vec<f64> {
    let n = g.n();
    let member = p.membership();
    let m = p.part_count();
    let mut r = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            r[i * n + j] = g.weight(i, j) - p.densities[member[i] * m + member[j]];
        }
    }
    r
}

/// Largest `|Σ_{S×T}(g - d)|`: exhaustive (Gray code over `S`, best `T` read
/// off the column sums) for `n <= 20`, otherwise alternating improvement
/// from spectral sign vectors and seeded random starts.
pub fn cut_deviation(g: &WeightedGraph, partition: &VertexPartition) -> Result<CutWitness> {
    let n = g.n();
    if partition.vertex_count() != n {
        return Err(Error::Dimension("partition and graph sizes differ".into()));
    }
    let r = residual(g, partition);
    let n2 = (n * n) as f64;
    if n == 0 {
        return Ok(CutWitness { deviation: 0.0, s: vec![], t: vec![], exact: true });
    }
    let (value, s, t, exact) = if n <= EXACT_CUT_MAX_N {
        let (v, s, t) = exact_cut(&r, n);
        (v, s, t, true)
    } else {
        let (v, s, t) = heuristic_cut(&r, n);
        (v, s, t, false)
    };
    Ok(CutWitness { deviation: value / n2, s, t, exact })
}

fn best_t(col: &[f64], sign: f64) -> (f64, Vec<usize>) {
    let mut v = 0.0;
    let mut t = Vec::new();
    for (j, &c) in col.iter().enumerate() {
        if sign * c > 0.0 {
            v += sign * c;
            t.push(j);
        }
    }
    (v, t)
}

fn exact_cut(r: &[f64], n: usize) -> (f64, Vec<usize>, Vec<usize>) {
    let mut col = vec![0.0; n];
    let mut mask = 0u32;
    let mut best = (0.0f64, 0u32, 1.0f64);
    for step in 1u32..(1u32 << n) {
        let bit = step.trailing_zeros() as usize;
        mask ^= 1 << bit;
        let sign = if mask & (1 << bit) != 0 { 1.0 } else { -1.0 };
        for (c, &x) in col.iter_mut().zip(&r[bit * n..(bit + 1) * n]) {
            *c += sign * x;
        }
        let pos: f64 = col.iter().filter(|&&c| c > 0.0).sum();
        let neg: f64 = -col.iter().filter(|&&c| c < 0.0).sum::<f64>();
        if pos > best.0 {
            best = (pos, mask, 1.0);
        }
        if neg > best.0 {
            best = (neg, mask, -1.0);
        }
    }
    let (_, mask, sign) = best;
    let s: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
    let mut colsum = vec![0.0; n];
    for &i in &s {
        for j in 0..n {
            colsum[j] += r[i * n + j];
        }
    }
    let (v, t) = best_t(&colsum, sign);
    (v, s, t)
}

fn improve(r: &[f64], n: usize, mut s: Vec<bool>, sign: f64) -> (f64, Vec<usize>, Vec<usize>) {
    let mut best = -1.0;
    let mut out = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let mut col = vec![0.0; n];
        for i in (0..n).filter(|&i| s[i]) {
            for j in 0..n {
                col[j] += r[i * n + j];
            }
        }
        let (v, t) = best_t(&col, sign);
        if v <= best {
            break;
        }
        best = v;
        let s_list: Vec<usize> = (0..n).filter(|&i| s[i]).collect();
        out = (s_list, t.clone());
        // best S for this T (the residual is symmetric)
        let mut row = vec![0.0; n];
        for &j in &t {
            for i in 0..n {
                row[i] += r[i * n + j];
            }
        }
        s = row.iter().map(|&x| sign * x > 0.0).collect();
    }
    (best.max(0.0), out.0, out.1)
}

fn heuristic_cut(r: &[f64], n: usize) -> (f64, Vec<usize>, Vec<usize>) {
    let mut starts: Vec<Vec<bool>> = Vec::new();
    let v = top_eigenvector(r, n);
    starts.push(v.iter().map(|&x| x > 0.0).collect());
    starts.push(v.iter().map(|&x| x < 0.0).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..8 {
        starts.push((0..n).map(|_| rng.gen::<bool>()).collect());
    }
    let mut best = (0.0, Vec::new(), Vec::new());
    for s in starts {
        for sign in [1.0, -1.0] {
            let cand = improve(r, n, s.clone(), sign);
            if cand.0 > best.0 {
                best = cand;
            }
        }
    }
    best
}

/// Power iteration for the eigenvector of largest |λ| of a symmetric matrix.
fn top_eigenvector(r: &[f64], n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_7).fract()).collect();
    for _ in 0..200 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[i] = (0..n).map(|j| r[i * n + j] * v[j]).sum();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return v;
        }
        v = w.into_iter().map(|x| x / norm).collect();
    }
    v
}

/// Refines by violating pairs until the cut deviation is at most `ε`.
///
/// Each refinement raises the index `Σ |A_i||A_j| d_ij^2 / n^2 <= 1` by more
/// than `ε^2`, so there are at most `⌊1/ε^2⌋` rounds and at most
/// `4^{⌊1/ε^2⌋}` parts. For `n > 20` the violator search is heuristic; the
/// emitted partition is then validated through [`reduced_density_error`].
pub fn weak_regular_partition(g: &WeightedGraph, eps: f64) -> Result<VertexPartition> {
    if !(eps >= MIN_EPSILON && eps < 1.0) {
        return Err(domain!("ε must lie in [{MIN_EPSILON}, 1), got {eps}"));
    }
    let ln_bound = 4f64.ln() / (eps * eps);
    let max_rounds = (1.0 / (eps * eps)).floor() as usize;
    let mut partition = VertexPartition::trivial(g);
    for _ in 0..=max_rounds {
        let witness = cut_deviation(g, &partition)?;
        if witness.deviation <= eps {
            return Ok(partition);
        }
        let mut in_s = vec![false; g.n()];
        let mut in_t = vec![false; g.n()];
        witness.s.iter().for_each(|&v| in_s[v] = true);
        witness.t.iter().for_each(|&v| in_t[v] = true);
        let mut parts = Vec::new();
        for part in partition.parts() {
            let mut pieces: [Vec<usize>; 4] = Default::default();
            for &v in part {
                pieces[(in_s[v] as usize) * 2 + in_t[v] as usize].push(v);
            }
            parts.extend(pieces.into_iter().filter(|p| !p.is_empty()));
        }
        if (parts.len() as f64).ln() > ln_bound {
            return Err(Error::Resource(format!(
                "{} parts exceed the bound 4^(1/ε²)",
                parts.len()
            )));
        }
        partition = VertexPartition::new(g, parts)?;
    }
    Err(Error::Resource(format!(
        "refinement did not settle within {max_rounds} rounds (violator search false positive)"
    )))
}

/// `|t(G) - reduced triangle density|`.
pub fn reduced_density_error(g: &WeightedGraph, partition: &VertexPartition) -> Result<f64> {
    if partition.vertex_count() != g.n() {
        return Err(Error::Dimension("partition and graph sizes differ".into()));
    }
    Ok((g.triangle_density() - partition.reduced_triangle_density()).abs())
}

/// Result of [`partition_event_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventBound {
    /// `-I_p^>(A, d)`, an upper bound on the log-probability of the event.
    pub exponent: f64,
    /// `I_p(G')` of the blow-up with weights `max(d, p)`; equals `-exponent`.
    pub blowup_entropy: Option<f64>,
    /// `t(G')`.
    pub blowup_triangle_density: Option<f64>,
}

/// Largest `n` for which the blow-up graph is materialized.
pub const BLOWUP_MAX_N: usize = 4096;

/// Log-probability bound for "every pair of parts reaches its target
/// density": `-(Σ_{i<j}|A_i||A_j| I_p^>(d_ij) + Σ_i C(|A_i|,2) I_p^>(d_ii))`.
pub fn partition_event_bound(
    partition: &VertexPartition,
    targets: &[f64],
    p: f64,
    n: usize,
) -> Result<EventBound> {
    check_p(p)?;
    let m = partition.part_count();
    if targets.len() != m * m {
        return Err(Error::Dimension(format!("expected an {m} x {m} target matrix")));
    }
    if partition.vertex_count() != n {
        return Err(Error::Dimension("partition does not cover n vertices".into()));
    }
    check_density_matrix(targets, m)?;
    let sizes: Vec<f64> = partition.parts.iter().map(|p| p.len() as f64).collect();
    let mut total = 0.0;
    for i in 0..m {
        total += sizes[i] * (sizes[i] - 1.0) / 2.0 * clipped_unchecked(targets[i * m + i], p);
        for j in (i + 1)..m {
            total += sizes[i] * sizes[j] * clipped_unchecked(targets[i * m + j], p);
        }
    }
    let (blowup_entropy, blowup_triangle_density) = if n <= BLOWUP_MAX_N {
        let member = partition.membership();
        let g = WeightedGraph::from_fn(n, |u, v| targets[member[u] * m + member[v]].max(p))?;
        (Some(g.total_relative_entropy(p)?), Some(g.triangle_density()))
    } else {
        (None, None)
    };
    Ok(EventBound { exponent: -total, blowup_entropy, blowup_triangle_density })
}

/// `log P(t >= (1+δ)p^3) <= log R - φ(n,p,δ-η)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCertificate {
    pub union_bound: UnionBound,
    /// `log R - phi_lower`; `+∞` when `log R` overflows.
    pub log_bound: f64,
    /// True when the bound is `>= 0`, i.e. says nothing.
    pub vacuous: bool,
}

/// Tail certificate from a certified lower bound on `φ(n,p,δ-η)`.
pub fn tail_certificate(n: u64, p: f64, delta: f64, eta: f64, phi_lower: f64) -> Result<TailCertificate> {
    if !(eta > 0.0 && eta < delta) {
        return Err(domain!("need 0 < η < δ, got η = {eta}, δ = {delta}"));
    }
    if !(phi_lower >= 0.0) {
        return Err(domain!("phi_lower must be nonnegative"));
    }
    let union_bound = theory::union_bound_log_r(n, p, eta)?;
    let log_bound = union_bound.log_r - phi_lower;
    Ok(TailCertificate { union_bound, log_bound, vacuous: log_bound >= 0.0 })
}

/// `(log R - φ) / (-φ)` for `φ = c n^2 p^2 log(1/p)` and `n = e^{ln_n}`;
/// tends to 1 exactly when the union bound is negligible.
pub fn certificate_exponent_ratio(ln_n: f64, p: f64, eta: f64, rate_coefficient: f64) -> Result<f64> {
    if !(rate_coefficient > 0.0) {
        return Err(domain!("rate coefficient must be positive"));
    }
    let u = theory::union_bound_from_log_n(ln_n, p, eta)?;
    let ln_phi = rate_coefficient.ln() + 2.0 * ln_n + 2.0 * p.ln() + (-p.ln()).ln();
    Ok(1.0 - (u.ln_log_r - ln_phi).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_cliques(half: usize) -> WeightedGraph {
        WeightedGraph::from_fn(2 * half, |i, j| ((i < half) == (j < half)) as u8 as f64).unwrap()
    }

    #[test]
    fn constant_graph_needs_no_refinement() {
        let g = WeightedGraph::constant(12, 0.4).unwrap();
        let p = weak_regular_partition(&g, 0.3).unwrap();
        assert_eq!(p.part_count(), 1);
        // d includes the diagonal, so d = 0.4 (n-1)/n and the error is p^3 (n-1)/n^3
        let expected = 0.4f64.powi(3) * 11.0 / 1728.0;
        assert_relative_eq!(reduced_density_error(&g, &p).unwrap(), expected, max_relative = 1e-9);
    }

    #[test]
    fn discrete_partition_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = WeightedGraph::from_fn(15, |_, _| rng.gen::<f64>()).unwrap();
        let p = VertexPartition::discrete(&g);
        assert_eq!(reduced_density_error(&g, &p).unwrap(), 0.0);
    }

    #[test]
    fn exact_cut_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = WeightedGraph::from_fn(7, |_, _| rng.gen::<f64>()).unwrap();
        let p = VertexPartition::trivial(&g);
        let w = cut_deviation(&g, &p).unwrap();
        let r = residual(&g, &p);
        let mut best = 0.0f64;
        for s in 0u32..128 {
            for t in 0u32..128 {
                let mut sum = 0.0;
                for i in 0..7 {
                    for j in 0..7 {
                        if s & (1 << i) != 0 && t & (1 << j) != 0 {
                            sum += r[i * 7 + j];
                        }
                    }
                }
                best = best.max(sum.abs());
            }
        }
        assert_relative_eq!(w.deviation * 49.0, best, max_relative = 1e-12);
    }

    #[test]
    fn two_cliques_meet_the_deviation_bound() {
        let g = two_cliques(8);
        let p = weak_regular_partition(&g, 0.3).unwrap();
        assert!(cut_deviation(&g, &p).unwrap().deviation <= 0.3);
        assert!(reduced_density_error(&g, &p).unwrap() <= 0.9);
    }

    #[test]
    fn rounding_moves_the_reduced_density_by_at_most_three_eps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = WeightedGraph::from_fn(30, |_, _| rng.gen::<f64>()).unwrap();
        let p = weak_regular_partition(&g, 0.3).unwrap();
        let r = p.rounded(0.3).unwrap();
        let diff = (p.reduced_triangle_density() - r.reduced_triangle_density()).abs();
        assert!(diff <= 0.9);
        assert!(r.densities().iter().all(|&d| ((d / 0.3) - (d / 0.3).round()).abs() < 1e-9));
    }

    #[test]
    fn event_bound_examples() {
        let n = 20;
        let p = 0.2;
        let g = WeightedGraph::constant(n, p).unwrap();
        let part = VertexPartition::new(&g, vec![(0..5).collect(), (5..20).collect()]).unwrap();
        let low = partition_event_bound(&part, &[0.1, 0.2, 0.2, 0.05], p, n).unwrap();
        assert_eq!(low.exponent, 0.0);
        let clique = partition_event_bound(&part, &[1.0, p, p, p], p, n).unwrap();
        assert_relative_eq!(clique.exponent, -10.0 * 5f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(clique.blowup_entropy.unwrap(), -clique.exponent, max_relative = 1e-9);
        assert!(partition_event_bound(&part, &[1.0, p, p], p, n).is_err());
    }

    #[test]
    fn certificate_examples() {
        let weak = tail_certificate(10, 0.5, 30.0, 24.0, 100.0).unwrap();
        let weaker = tail_certificate(10, 0.5, 30.0, 24.0, 50.0).unwrap();
        assert!(weaker.log_bound > weak.log_bound);
        let zero = tail_certificate(10, 0.5, 30.0, 24.0, 0.0).unwrap();
        assert!(zero.vacuous && zero.log_bound >= 0.0);
        assert!(tail_certificate(10, 0.5, 1.0, 2.0, 1.0).is_err());
        let ratio = |ln_n: f64| {
            certificate_exponent_ratio(ln_n, ln_n.powf(-1.0 / 7.0), ln_n.powf(-0.01), 1.0 / 3.0)
                .unwrap()
        };
        // the union bound swamps φ at ln n = 1000 and is invisible from 1e14 on
        assert!(ratio(1e3) < -1e3);
        for ln_n in [1e14f64, 1e20, 1e40] {
            assert!((ratio(ln_n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        let g = two_cliques(3);
        let p = VertexPartition::new(&g, vec![vec![0, 2, 1], vec![3, 4, 5]]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let back: VertexPartition = serde_json::from_str(&s).unwrap();
        assert_eq!(back.membership(), p.membership());
        assert_eq!(back.densities(), p.densities());
    }
}
