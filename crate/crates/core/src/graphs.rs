//! Weighted graphs on `n` vertices and step graphons, with the densities and
//! entropy functionals evaluated on them.
//!
//! Densities are labeled (ordered-map) densities: `t(G) = n^{-3} Σ_{i,j,k}
//! g_ij g_jk g_ik` over all ordered triples. The zero diagonal kills every
//! term with a repeated index, so `t(G)` equals the injective sum divided by
//! `n^3`; [`WeightedGraph::injective_triangle_density`] divides by
//! `n(n-1)(n-2)` instead.

use serde::{Deserialize, Serialize};

use crate::contraction;
use crate::entropy::{self, entropy};
use crate::error::{domain, Error, Result};
use crate::patterns::SubgraphPattern;

/// Symmetric `n × n` matrix of weights in `[0,1]` with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct WeightedGraph {
    n: usize,
    w: Vec<f64>,
}

/// Wire form: `{"n": .., "weights": [upper triangle, row-major]}`.
#[derive(Serialize, Deserialize)]
struct RawGraph {
    n: usize,
    weights: Vec<f64>,
}

impl TryFrom<RawGraph> for WeightedGraph {
    type Error = Error;
    fn try_from(raw: RawGraph) -> Result<Self> {
        WeightedGraph::from_upper(raw.n, &raw.weights)
    }
}

impl From<WeightedGraph> for RawGraph {
    fn from(g: WeightedGraph) -> Self {
        RawGraph { n: g.n, weights: g.upper() }
    }
}

fn check_weight(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain!("edge weight {x} outside [0,1]"));
    }
    Ok(())
}

impl WeightedGraph {
    /// Builds from the upper triangle listed row by row (`(0,1), (0,2), …, (n-2,n-1)`).
    pub fn from_upper(n: usize, upper: &[f64]) -> Result<Self> {
        let expected = n * n.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} upper-triangle weights for n = {n}, got {}",
                upper.len()
            )));
        }
        let mut w = vec![0.0; n * n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let x = *it.next().expect("length checked");
                check_weight(x)?;
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        Ok(WeightedGraph { n, w })
    }

    /// Builds from a full row-major matrix, checking symmetry and the zero diagonal.
    pub fn from_matrix(n: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::Dimension(format!("expected {} entries, got {}", n * n, w.len())));
        }
        for i in 0..n {
            if w[i * n + i] != 0.0 {
                return Err(domain!("nonzero diagonal entry at {i}"));
            }
            for j in (i + 1)..n {
                check_weight(w[i * n + j])?;
                if w[i * n + j] != w[j * n + i] {
                    return Err(domain!("asymmetric weights at ({i},{j})"));
                }
            }
        }
        Ok(WeightedGraph { n, w })
    }

    /// Every off-diagonal weight equal to `c`.
    pub fn constant(n: usize, c: f64) -> Result<Self> {
        check_weight(c)?;
        Ok(Self::from_fn_unchecked(n, |_, _| c))
    }

    /// Weights `f(i, j)` for `i < j`.
    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let g = Self::from_fn_unchecked(n, f);
        for &x in &g.w {
            check_weight(x)?;
        }
        Ok(g)
    }

    pub(crate) fn from_fn_unchecked(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let x = f(i, j);
                w[i * n + j] = x;
                w[j * n + i] = x;
            }
        }
        WeightedGraph { n, w }
    }

    /// Trusted constructor for matrices produced inside the crate.
    pub(crate) fn from_matrix_unchecked(n: usize, w: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), n * n);
        WeightedGraph { n, w }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// Row-major `n × n` weights.
    pub fn matrix(&self) -> &[f64] {
        &self.w
    }

    pub fn upper(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(self.w[i * n + j]);
            }
        }
        out
    }

    /// Returns a copy with `g_ij = g_ji = x`.
    pub fn with_weight(&self, i: usize, j: usize, x: f64) -> Result<Self> {
        if i == j || i >= self.n || j >= self.n {
            return Err(domain!("invalid pair ({i},{j})"));
        }
        check_weight(x)?;
        let mut g = self.clone();
        g.w[i * self.n + j] = x;
        g.w[j * self.n + i] = x;
        Ok(g)
    }

    /// `t(G) = n^{-3} Σ_{i,j,k} g_ij g_jk g_ik`, via `tr(G^3)`.
    pub fn triangle_density(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let sq = matrix_square(n, &self.w);
        let s: f64 = self.w.iter().zip(&sq).map(|(a, b)| a * b).sum();
        s / (n as f64).powi(3)
    }

    /// Triangle density over injective triples, `Σ / (n(n-1)(n-2))`.
    pub fn injective_triangle_density(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 3 {
            return 0.0;
        }
        self.triangle_density() * n.powi(3) / (n * (n - 1.0) * (n - 2.0))
    }

    /// `s(G) = n^{-3} Σ_i (Σ_j g_ij)^2`.
    pub fn cherry_density(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 0.0;
        }
        let s: f64 = self
            .w
            .chunks_exact(n)
            .map(|row| {
                let r: f64 = row.iter().sum();
                r * r
            })
            .sum();
        s / (n as f64).powi(3)
    }

    /// `n^{-2} Σ_{i,j} g_ij`.
    pub fn edge_density(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.w.iter().sum::<f64>() / (self.n * self.n) as f64
    }

    /// `t(H, G)` by contraction along a greedy elimination order.
    pub fn hom_density(&self, pattern: &SubgraphPattern) -> Result<f64> {
        if self.n == 0 {
            return Ok(0.0);
        }
        let weights = vec![1.0 / self.n as f64; self.n];
        contraction::hom_sum(pattern, &self.w, &weights)
    }

    /// `∂ t(H, G) / ∂ g_ij` for each unordered pair, as a symmetric matrix.
    pub fn hom_density_gradient(&self, pattern: &SubgraphPattern) -> Result<Vec<f64>> {
        let weights = vec![1.0 / self.n as f64; self.n];
        contraction::hom_sum_gradient(pattern, &self.w, &weights)
    }

    /// `t(H, G)` by direct enumeration of all `n^k` maps; feasible only for
    /// small `n^k` (capped at `1e9`).
    pub fn hom_density_direct(&self, pattern: &SubgraphPattern) -> Result<f64> {
        let (n, k) = (self.n, pattern.vertex_count());
        let total = (n as f64).powi(k as i32);
        if total > contraction::OPERATION_BUDGET {
            return Err(Error::Resource(format!("{total:.3e} maps exceed the budget")));
        }
        let mut assign = vec![0usize; k];
        let mut sum = 0.0;
        'outer: loop {
            let mut prod = 1.0;
            for &(u, v) in pattern.edges() {
                prod *= self.w[assign[u] * n + assign[v]];
                if prod == 0.0 {
                    break;
                }
            }
            sum += prod;
            for a in assign.iter_mut().rev() {
                *a += 1;
                if *a < n {
                    continue 'outer;
                }
                *a = 0;
            }
            break;
        }
        Ok(sum / total)
    }

    /// `I_p(G) = Σ_{i<j} I_p(g_ij)`.
    pub fn total_relative_entropy(&self, p: f64) -> Result<f64> {
        entropy::relative_entropy(p, p)?;
        Ok(self.upper().into_iter().map(|x| entropy(x, p)).sum())
    }

    /// Step graphon with `n` equal blocks and block values `g_ij`.
    pub fn embed_step_graphon(&self) -> StepGraphon {
        let n = self.n.max(1);
        if self.n == 0 {
            return StepGraphon::constant(0.0).expect("valid");
        }
        StepGraphon { measures: vec![1.0 / n as f64; n], values: self.w.clone() }
    }
}

/// `A^2` for a row-major `n × n` matrix.
pub(crate) fn matrix_square(n: usize, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let row_out = &mut out[i * n..(i + 1) * n];
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let row_k = &a[k * n..(k + 1) * n];
            for (o, &x) in row_out.iter_mut().zip(row_k) {
                *o += aik * x;
            }
        }
    }
    out
}

/// A step function on `[0,1]^2`: blocks of positive measure summing to one
/// and a symmetric matrix of block values in `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraphon", into = "RawGraphon")]
pub struct StepGraphon {
    measures: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGraphon {
    measures: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawGraphon> for StepGraphon {
    type Error = Error;
    fn try_from(raw: RawGraphon) -> Result<Self> {
        let m = raw.measures.len();
        if raw.values.len() != m || raw.values.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension(format!("block value matrix must be {m} x {m}")));
        }
        StepGraphon::new(raw.measures, raw.values.concat())
    }
}

impl From<StepGraphon> for RawGraphon {
    fn from(w: StepGraphon) -> Self {
        let m = w.measures.len();
        RawGraphon { values: w.values.chunks(m).map(|r| r.to_vec()).collect(), measures: w.measures }
    }
}

/// Densities of a step graphon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    /// `t(W)`.
    pub triangle: f64,
    /// `s(W) = ∫ (∫ W(x,y) dy)^2 dx`.
    pub cherry: f64,
    /// `E W`.
    pub mean: f64,
    /// `E[I_p(W)]`.
    pub entropy_mean: f64,
}

/// `(δ1, δ2, δ3) = (t(U)/p^3, s(U)/p^2, E U/p)` for `U = W - p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessDecomposition {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl ExcessDecomposition {
    /// `δ1 + 3δ2 + 3δ3`, which equals `(t(W) - p^3)/p^3`.
    pub fn total(&self) -> f64 {
        self.delta1 + 3.0 * self.delta2 + 3.0 * self.delta3
    }
}

impl StepGraphon {
    pub fn new(measures: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let m = measures.len();
        if m == 0 {
            return Err(domain!("a step graphon needs at least one block"));
        }
        if values.len() != m * m {
            return Err(Error::Dimension(format!("expected {} block values", m * m)));
        }
        if measures.iter().any(|&x| !(x > 0.0)) {
            return Err(domain!("block measures must be positive"));
        }
        let total: f64 = measures.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain!("block measures sum to {total}, not 1"));
        }
        for i in 0..m {
            for j in 0..m {
                check_weight(values[i * m + j])?;
                if values[i * m + j] != values[j * m + i] {
                    return Err(domain!("asymmetric block values at ({i},{j})"));
                }
            }
        }
        Ok(StepGraphon { measures, values })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![c])
    }

    /// Two blocks `[0,a)` and `[a,1]` with values `inner`, `cross`, `outer`.
    pub fn two_block(a: f64, inner: f64, cross: f64, outer: f64) -> Result<Self> {
        if a <= 0.0 {
            return Self::constant(outer);
        }
        if a >= 1.0 {
            return Self::constant(inner);
        }
        Self::new(vec![a, 1.0 - a], vec![inner, cross, cross, outer])
    }

    pub fn block_count(&self) -> usize {
        self.measures.len()
    }

    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.measures.len() + j]
    }

    /// Row-major block values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `t(W) = ∫ W(x,y) W(x,z) W(y,z)`.
    pub fn triangle_density(&self) -> f64 {
        let m = self.measures.len();
        let mu = &self.measures;
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                let wij = self.values[i * m + j];
                if wij == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for k in 0..m {
                    inner += mu[k] * self.values[i * m + k] * self.values[j * m + k];
                }
                total += mu[i] * mu[j] * wij * inner;
            }
        }
        total
    }

    /// `s(W) = ∫ (∫ W(x,y) dy)^2 dx`.
    pub fn cherry_density(&self) -> f64 {
        let m = self.measures.len();
        (0..m)
            .map(|i| {
                let deg: f64 = (0..m).map(|j| self.measures[j] * self.values[i * m + j]).sum();
                self.measures[i] * deg * deg
            })
            .sum()
    }

    /// `E[W^d]`.
    pub fn moment(&self, d: u32) -> f64 {
        let m = self.measures.len();
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                total += self.measures[i] * self.measures[j] * self.values[i * m + j].powi(d as i32);
            }
        }
        total
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    /// `E[I_p(W)]`.
    pub fn entropy_mean(&self, p: f64) -> Result<f64> {
        entropy::relative_entropy(p, p)?;
        let m = self.measures.len();
        let mut total = 0.0;
        for i in 0..m {
            for j in 0..m {
                total += self.measures[i] * self.measures[j] * entropy(self.values[i * m + j], p);
            }
        }
        Ok(total)
    }

    /// `t(H, W)` by block contraction.
    pub fn hom_density(&self, pattern: &SubgraphPattern) -> Result<f64> {
        contraction::hom_sum(pattern, &self.values, &self.measures)
    }

    /// All four densities at once.
    pub fn stats(&self, p: f64) -> Result<DensityReport> {
        Ok(DensityReport {
            triangle: self.triangle_density(),
            cherry: self.cherry_density(),
            mean: self.mean(),
            entropy_mean: self.entropy_mean(p)?,
        })
    }

    /// `U = W - p`, defined when every block value is at least `p`.
    pub fn shifted(&self, p: f64) -> Result<StepGraphon> {
        if let Some(&x) = self.values.iter().find(|&&x| x < p) {
            return Err(domain!("block value {x} is below p = {p}"));
        }
        Ok(StepGraphon {
            measures: self.measures.clone(),
            values: self.values.iter().map(|&x| x - p).collect(),
        })
    }

    /// `(t(U)/p^3, s(U)/p^2, E U/p)` for `U = W - p`; requires `W >= p`.
    pub fn decompose_excess(&self, p: f64) -> Result<ExcessDecomposition> {
        entropy::relative_entropy(p, p)?;
        let u = self.shifted(p)?;
        Ok(ExcessDecomposition {
            delta1: u.triangle_density() / p.powi(3),
            delta2: u.cherry_density() / (p * p),
            delta3: u.mean() / p,
        })
    }
}

/// Free-function form of [`WeightedGraph::embed_step_graphon`].
pub fn embed_step_graphon(g: &WeightedGraph) -> StepGraphon {
    g.embed_step_graphon()
}

/// Free-function form of [`StepGraphon::stats`].
pub fn step_graphon_stats(w: &StepGraphon, p: f64) -> Result<DensityReport> {
    w.stats(p)
}

/// Free-function form of [`StepGraphon::decompose_excess`].
pub fn decompose_excess(w: &StepGraphon, p: f64) -> Result<ExcessDecomposition> {
    w.decompose_excess(p)
}
