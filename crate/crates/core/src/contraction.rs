//! Variable-elimination evaluation of weighted homomorphism sums
//!
//! `Σ_{x: V(H) -> [m]} Π_v w[x_v] Π_{uv ∈ E(H)} M[x_u][x_v]`
//!
//! for a symmetric `m × m` matrix `M` and vertex weights `w`. Weighted graphs
//! use `w ≡ 1/n`; step graphons use the block measures.

use crate::error::{Error, Result};
use crate::patterns::SubgraphPattern;

/// Largest pattern handled by the contraction engine.
pub const MAX_PATTERN_VERTICES: usize = 8;
/// Operation budget for one contraction (sum of `m^{width+1}` over eliminations).
pub const OPERATION_BUDGET: f64 = 1e9;

#[derive(Debug, Clone)]
struct Factor {
    scope: Vec<usize>,
    data: Vec<f64>,
}

/// Result of contracting with some vertices kept free.
#[derive(Debug, Clone)]
pub(crate) struct Marginal {
    /// Free pattern vertices, sorted; a subset of the requested keep set.
    pub scope: Vec<usize>,
    pub data: Vec<f64>,
}

impl Marginal {
    /// Value at an assignment of the requested keep set (`keep[i] ↦ values[i]`).
    pub fn at(&self, keep: &[usize], values: &[usize], m: usize) -> f64 {
        let mut idx = 0;
        for &v in &self.scope {
            let pos = keep.iter().position(|&k| k == v).expect("scope ⊆ keep");
            idx = idx * m + values[pos];
        }
        self.data[idx]
    }
}

fn greedy_order(k: usize, edges: &[(usize, usize)], keep: &[usize]) -> (Vec<usize>, usize) {
    let mut nbr = vec![0u64; k];
    for &(u, v) in edges {
        nbr[u] |= 1 << v;
        nbr[v] |= 1 << u;
    }
    let mut remaining: Vec<usize> = (0..k).filter(|v| !keep.contains(v)).collect();
    let mut order = Vec::with_capacity(remaining.len());
    let mut width = 0;
    while !remaining.is_empty() {
        let (pos, &v) = remaining
            .iter()
            .enumerate()
            .min_by_key(|&(_, &v)| (nbr[v].count_ones(), v))
            .expect("nonempty");
        let nb = nbr[v];
        width = width.max(nb.count_ones() as usize);
        let mut bits = nb;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            nbr[u] |= nb & !(1 << u);
            nbr[u] &= !(1 << v);
        }
        nbr[v] = 0;
        order.push(v);
        remaining.remove(pos);
    }
    (order, width)
}

fn cost_estimate(k: usize, edges: &[(usize, usize)], keep: &[usize], m: usize) -> f64 {
    let mut nbr = vec![0u64; k];
    for &(u, v) in edges {
        nbr[u] |= 1 << v;
        nbr[v] |= 1 << u;
    }
    let (order, _) = greedy_order(k, edges, keep);
    let mut cost = 0.0;
    for v in order {
        let nb = nbr[v];
        cost += (m as f64).powi(nb.count_ones() as i32 + 1);
        let mut bits = nb;
        while bits != 0 {
            let u = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            nbr[u] |= nb & !(1 << u);
            nbr[u] &= !(1 << v);
        }
        nbr[v] = 0;
    }
    cost + (m as f64).powi(keep.len() as i32)
}

/// Checks the vertex cap and operation budget for contracting `pattern` over
/// an `m`-point space.
pub(crate) fn check_budget(pattern: &SubgraphPattern, m: usize, keep: &[usize]) -> Result<()> {
    let k = pattern.vertex_count();
    if k > MAX_PATTERN_VERTICES {
        return Err(Error::Resource(format!(
            "pattern has {k} vertices, cap is {MAX_PATTERN_VERTICES}"
        )));
    }
    let cost = cost_estimate(k, pattern.edges(), keep, m);
    if cost > OPERATION_BUDGET {
        return Err(Error::Resource(format!(
            "contraction cost {cost:.3e} exceeds budget {OPERATION_BUDGET:.0e}"
        )));
    }
    Ok(())
}

/// Contracts all pattern vertices except `keep`. Vertex weights are applied
/// to eliminated vertices only. `matrix` is row-major `m × m` and symmetric.
pub(crate) fn contract(
    k: usize,
    edges: &[(usize, usize)],
    matrix: &[f64],
    weights: &[f64],
    keep: &[usize],
) -> Marginal {
    let m = weights.len();
    debug_assert_eq!(matrix.len(), m * m);
    let mut factors: Vec<Factor> = edges
        .iter()
        .map(|&(u, v)| Factor { scope: vec![u.min(v), u.max(v)], data: matrix.to_vec() })
        .collect();
    let mut scalar = 1.0;
    let (order, _) = greedy_order(k, edges, keep);
    let weight_sum: f64 = weights.iter().sum();

    for v in order {
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.scope.contains(&v));
        factors = rest;
        if touching.is_empty() {
            scalar *= weight_sum;
            continue;
        }
        let mut scope: Vec<usize> = touching
            .iter()
            .flat_map(|f| f.scope.iter().copied())
            .filter(|&u| u != v)
            .collect();
        scope.sort_unstable();
        scope.dedup();
        factors.push(eliminate(&touching, v, &scope, weights));
    }

    // combine the remaining factors (scopes ⊆ keep) into one
    let mut scope: Vec<usize> =
        factors.iter().flat_map(|f| f.scope.iter().copied()).collect();
    scope.sort_unstable();
    scope.dedup();
    let size = m.pow(scope.len() as u32);
    let mut data = vec![scalar; size];
    let mut assign = vec![0usize; scope.len()];
    for slot in data.iter_mut() {
        for f in &factors {
            let mut idx = 0;
            for &u in &f.scope {
                let pos = scope.binary_search(&u).expect("subset");
                idx = idx * m + assign[pos];
            }
            *slot *= f.data[idx];
        }
        advance(&mut assign, m);
    }
    Marginal { scope, data }
}

fn advance(assign: &mut [usize], m: usize) {
    for a in assign.iter_mut().rev() {
        *a += 1;
        if *a < m {
            return;
        }
        *a = 0;
    }
}

fn eliminate(touching: &[Factor], v: usize, scope: &[usize], weights: &[f64]) -> Factor {
    let m = weights.len();
    // per factor: stride of v and strides of scope vertices
    struct Plan {
        v_stride: usize,
        strides: Vec<usize>,
    }
    let plans: Vec<Plan> = touching
        .iter()
        .map(|f| {
            let len = f.scope.len();
            let stride_of = |pos: usize| m.pow((len - 1 - pos) as u32);
            let v_pos = f.scope.iter().position(|&u| u == v).expect("touching");
            let strides = scope
                .iter()
                .map(|u| f.scope.iter().position(|w| w == u).map_or(0, stride_of))
                .collect();
            Plan { v_stride: stride_of(v_pos), strides }
        })
        .collect();
    let size = m.pow(scope.len() as u32);
    let mut data = vec![0.0; size];
    let mut assign = vec![0usize; scope.len()];
    let mut bases = vec![0usize; touching.len()];
    for slot in data.iter_mut() {
        for (b, plan) in bases.iter_mut().zip(&plans) {
            *b = plan.strides.iter().zip(&assign).map(|(s, a)| s * a).sum();
        }
        let mut acc = 0.0;
        for (x, &w) in weights.iter().enumerate() {
            let mut prod = w;
            for ((f, plan), &b) in touching.iter().zip(&plans).zip(&bases) {
                prod *= f.data[b + x * plan.v_stride];
                if prod == 0.0 {
                    break;
                }
            }
            acc += prod;
        }
        *slot = acc;
        advance(&mut assign, m);
    }
    Factor { scope: scope.to_vec(), data }
}

/// Full homomorphism sum.
pub(crate) fn hom_sum(pattern: &SubgraphPattern, matrix: &[f64], weights: &[f64]) -> Result<f64> {
    check_budget(pattern, weights.len(), &[])?;
    let out = contract(pattern.vertex_count(), pattern.edges(), matrix, weights, &[]);
    Ok(out.data[0])
}

/// Gradient of the homomorphism sum with respect to each unordered entry
/// `M[a][b] = M[b][a]`, returned as a symmetric `m × m` matrix (zero diagonal).
pub(crate) fn hom_sum_gradient(
    pattern: &SubgraphPattern,
    matrix: &[f64],
    weights: &[f64],
) -> Result<Vec<f64>> {
    let m = weights.len();
    let k = pattern.vertex_count();
    let edges = pattern.edges();
    let mut grad = vec![0.0; m * m];
    for (i, &(u, v)) in edges.iter().enumerate() {
        let others: Vec<(usize, usize)> =
            edges.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &e)| e).collect();
        let reduced = SubgraphPattern::new(k, others.iter().copied())?;
        check_budget(&reduced, m, &[u, v])?;
        let keep = [u, v];
        let marg = contract(k, &others, matrix, weights, &keep);
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                // edge uv mapped onto (a,b); the transposed placement is
                // picked up when the loop visits (b,a)
                let r = marg.at(&keep, &[a, b], m);
                let val = weights[a] * weights[b] * r;
                grad[a * m + b] += val;
                grad[b * m + a] += val;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(pattern: &SubgraphPattern, matrix: &[f64], weights: &[f64]) -> f64 {
        let m = weights.len();
        let k = pattern.vertex_count();
        let mut assign = vec![0usize; k];
        let mut total = 0.0;
        for _ in 0..m.pow(k as u32) {
            let mut prod: f64 = assign.iter().map(|&x| weights[x]).product();
            for &(u, v) in pattern.edges() {
                prod *= matrix[assign[u] * m + assign[v]];
            }
            total += prod;
            advance(&mut assign, m);
        }
        total
    }

    fn sample_matrix(m: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut a = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let x = next();
                a[i * m + j] = x;
                a[j * m + i] = x;
            }
        }
        a
    }

    #[test]
    fn matches_brute_force() {
        let patterns = [
            SubgraphPattern::triangle(),
            SubgraphPattern::cycle(4).unwrap(),
            SubgraphPattern::star(4).unwrap(),
            SubgraphPattern::clique(4).unwrap(),
            SubgraphPattern::new(5, [(0, 1), (1, 2), (3, 4)]).unwrap(),
            SubgraphPattern::new(4, []).unwrap(),
        ];
        for (s, pat) in patterns.iter().enumerate() {
            let m = 5;
            let a = sample_matrix(m, s as u64 + 1);
            let w: Vec<f64> = (1..=m).map(|i| i as f64 / 15.0).collect();
            let fast = hom_sum(pat, &a, &w).unwrap();
            let slow = brute(pat, &a, &w);
            assert!((fast - slow).abs() < 1e-13, "{pat}: {fast} vs {slow}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pat = SubgraphPattern::new(4, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let m = 4;
        let a = sample_matrix(m, 9);
        let w = vec![0.25; m];
        let g = hom_sum_gradient(&pat, &a, &w).unwrap();
        let h = 1e-6;
        for i in 0..m {
            for j in (i + 1)..m {
                let mut up = a.clone();
                up[i * m + j] += h;
                up[j * m + i] += h;
                let mut dn = a.clone();
                dn[i * m + j] -= h;
                dn[j * m + i] -= h;
                let fd = (hom_sum(&pat, &up, &w).unwrap() - hom_sum(&pat, &dn, &w).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i * m + j]).abs() < 1e-8, "({i},{j}) {fd} vs {}", g[i * m + j]);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let k8 = SubgraphPattern::clique(8).unwrap();
        assert!(matches!(check_budget(&k8, 100, &[]), Err(Error::Resource(_))));
        let k9 = SubgraphPattern::clique(9).unwrap();
        assert!(matches!(check_budget(&k9, 2, &[]), Err(Error::Resource(_))));
    }
}
