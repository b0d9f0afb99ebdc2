//! Property and inequality suites run by the `check` subcommand.
//!
//! Every suite draws its random inputs from a seeded ChaCha stream, so a
//! report is a pure function of [`CheckOptions`]. Oracles here are written
//! independently of the code they check where that is possible (direct
//! formulas, exact binomial sums, a subset DP for bounded-degree subgraphs).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{self, entropy};
use crate::error::{domain, Result};
use crate::graphs::{StepGraphon, WeightedGraph};
use crate::montecarlo::{exact_tail_probability, tilted_tail_estimate, TiltSpec};
use crate::patterns::{cauchy_schwarz_slack, holder_slack, spanning_bounded_degree, SubgraphPattern};
use crate::regularity::{reduced_density_error, weak_regular_partition, VertexPartition};
use crate::theory::{self, Regime};

/// Absolute tolerance for identities and slacks.
pub const TOL: f64 = 1e-12;

/// Number of failure messages kept per suite.
const KEEP_FAILURES: usize = 5;

/// Knobs for [`run_checks`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckOptions {
    pub seed: u64,
    /// Random step graphons per slack or identity suite.
    pub cases: usize,
    /// Random graphs for the embedding and regularity suites.
    pub graphs: usize,
    /// Largest `k` for the exhaustive spanning-subgraph suite.
    pub max_spanning_k: usize,
    /// Samples for the importance-sampling check.
    pub samples: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { seed: 0, cases: 200, graphs: 50, max_spanning_k: 7, samples: 100_000 }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: u64,
    pub total: u64,
    /// The first few failures, for diagnosis.
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport { name: name.into(), passed: 0, total: 0, failures: Vec::new() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.total += 1;
        if ok {
            self.passed += 1;
        } else if self.failures.len() < KEEP_FAILURES {
            self.failures.push(what());
        }
    }

    fn absorb(&mut self, other: SuiteReport) {
        self.passed += other.passed;
        self.total += other.total;
        for f in other.failures {
            if self.failures.len() < KEEP_FAILURES {
                self.failures.push(f);
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub suites: Vec<SuiteReport>,
    pub passed: u64,
    pub total: u64,
}

impl CheckReport {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A random step graphon with `1..=max_blocks` blocks and values in `[lo, 1]`.
pub fn random_step_graphon(rng: &mut impl Rng, max_blocks: usize, lo: f64) -> StepGraphon {
    let m = rng.gen_range(1..=max_blocks);
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut measures: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let head: f64 = measures[..m - 1].iter().sum();
    measures[m - 1] = 1.0 - head;
    let mut values = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let v = rng.gen_range(lo..=1.0);
            values[i * m + j] = v;
            values[j * m + i] = v;
        }
    }
    StepGraphon::new(measures, values).expect("generated graphon is valid")
}

/// A random weighted graph on `n` vertices; a third of them are 0/1.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> WeightedGraph {
    let binary = rng.gen_bool(1.0 / 3.0);
    let p = rng.gen_range(0.1..0.9);
    WeightedGraph::from_fn(n, |_, _| {
        if binary {
            f64::from(u8::from(rng.gen_bool(p)))
        } else {
            rng.gen_range(0.0..=1.0)
        }
    })
    .expect("generated weights are valid")
}

/// `min{δ^{2/k}/2, δ/k}` against [`theory::limit_rate`] on a 20-point grid,
/// plus the crossover values.
pub fn closed_forms_suite() -> SuiteReport {
    let mut r = SuiteReport::new("closed_forms");
    for k in 3..=6usize {
        let kf = k as f64;
        for i in 0..20 {
            let delta = 0.05 * 2000f64.powf(i as f64 / 19.0);
            let clique = 0.5 * delta.powf(2.0 / kf);
            let dense = theory::limit_rate(k, delta, Regime::DenseSide);
            let sparse = theory::limit_rate(k, delta, Regime::SparseSide);
            let want = clique.min(delta / kf);
            r.record(dense.as_ref().is_ok_and(|v| (v - want).abs() <= TOL), || {
                format!("dense k={k} δ={delta}: {dense:?} vs {want}")
            });
            r.record(sparse.as_ref().is_ok_and(|v| (v - clique).abs() <= TOL), || {
                format!("sparse k={k} δ={delta}: {sparse:?} vs {clique}")
            });
        }
        let star = theory::crossover_delta(k).unwrap_or(f64::NAN);
        let gap = 0.5 * star.powf(2.0 / kf) - star / kf;
        r.record(gap.abs() <= TOL * star.max(1.0), || format!("branches differ by {gap} at δ* for k={k}"));
    }
    let c3 = theory::crossover_delta(3);
    r.record(c3 == Ok(27.0 / 8.0), || format!("crossover_delta(3) = {c3:?}"));
    r
}

/// `t(W^G) = t(G)` and `½E[I_p(W^G)] = n^{-2} I_p(G) + (2n)^{-1} I_p(0)`.
pub fn embedding_suite(opts: &CheckOptions) -> SuiteReport {
    let mut r = SuiteReport::new("embedding_identities");
    let mut rng = rng_for(opts.seed, 1);
    for _ in 0..opts.graphs {
        let n = rng.gen_range(1..=20);
        let p = rng.gen_range(0.01..0.99);
        let g = random_graph(&mut rng, n);
        let w = g.embed_step_graphon();
        let (tw, tg) = (w.triangle_density(), g.triangle_density());
        r.record((tw - tg).abs() <= TOL, || format!("n={n}: t(W)={tw} vs t(G)={tg}"));
        let lhs = 0.5 * w.entropy_mean(p).unwrap_or(f64::NAN);
        let nf = n as f64;
        let rhs = g.total_relative_entropy(p).unwrap_or(f64::NAN) / (nf * nf) + entropy(0.0, p) / (2.0 * nf);
        r.record((lhs - rhs).abs() <= TOL * rhs.max(1.0), || format!("n={n} p={p}: {lhs} vs {rhs}"));
    }
    r
}

/// `t(W) - p^3 = p^3 (δ1 + 3δ2 + 3δ3)` for random `W >= p`.
pub fn excess_suite(opts: &CheckOptions) -> SuiteReport {
    let mut r = SuiteReport::new("excess_decomposition");
    let mut rng = rng_for(opts.seed, 2);
    for _ in 0..opts.cases {
        let p = rng.gen_range(0.05..0.95);
        let w = random_step_graphon(&mut rng, 10, p);
        let lhs = w.triangle_density() - p.powi(3);
        let rhs = w.decompose_excess(p).map(|d| p.powi(3) * d.total());
        r.record(rhs.as_ref().is_ok_and(|v| (lhs - v).abs() <= TOL), || {
            format!("{} blocks, p={p}: {lhs} vs {rhs:?}", w.block_count())
        });
    }
    r
}

/// The chord and quadratic lower bounds stay below `I_p(p+x)` on grids.
pub fn entropy_bounds_suite() -> SuiteReport {
    let mut r = SuiteReport::new("entropy_bounds");
    for p in [1e-2, 1e-3, 1e-4] {
        let below = |bound: f64, x: f64| bound <= entropy(p + x, p) * (1.0 + TOL) + TOL * 1e-6;
        for i in 0..=2000 {
            let x = (1.0 - p) * i as f64 / 2000.0;
            let q = entropy::quadratic_lower_bound(x, p);
            r.record(q.as_ref().is_ok_and(|&v| below(v, x)), || format!("quadratic p={p} x={x}: {q:?}"));
        }
        let limit = entropy::chord_domain_limit(p);
        for j in 1..=50 {
            let b = if j == 50 { limit } else { limit * j as f64 / 50.0 };
            for i in 0..=100 {
                let x = (b * i as f64 / 100.0).min(b);
                let c = entropy::chord_lower_bound(x, b, p);
                r.record(c.as_ref().is_ok_and(|&v| below(v, x)), || format!("chord p={p} b={b} x={x}: {c:?}"));
            }
        }
        // the sharp constant is a lower bound too
        let cp = entropy::quadratic_entropy_constant(p).unwrap_or(f64::NAN);
        for i in 1..=2000 {
            let x = (1.0 - p) * i as f64 / 2000.0;
            r.record(cp * x * x <= entropy(p + x, p) * (1.0 + TOL), || format!("c_p p={p} x={x}"));
        }
    }
    r
}

/// Cauchy–Schwarz slack on random graphons, plus the equality cases.
pub fn cauchy_schwarz_suite(opts: &CheckOptions) -> SuiteReport {
    let mut r = SuiteReport::new("cauchy_schwarz");
    let mut rng = rng_for(opts.seed, 3);
    for _ in 0..opts.cases {
        let u = random_step_graphon(&mut rng, 10, 0.0);
        let s = cauchy_schwarz_slack(&u);
        r.record(s >= -TOL, || format!("slack {s} on {} blocks", u.block_count()));
    }
    for c in [0.0, 0.3, 1.0] {
        let s = cauchy_schwarz_slack(&StepGraphon::constant(c).expect("valid"));
        r.record(s.abs() <= TOL, || format!("constant {c}: slack {s}"));
    }
    r
}

/// A random pattern with maximum degree at most 2 on `3..=6` vertices.
fn random_degree_two_pattern(rng: &mut impl Rng) -> SubgraphPattern {
    let k = rng.gen_range(3..=6);
    match rng.gen_range(0..3) {
        0 => SubgraphPattern::cycle(k).expect("k >= 3"),
        1 => SubgraphPattern::path(k).expect("k >= 2"),
        _ => {
            let mut deg = vec![0; k];
            let mut edges = Vec::new();
            for a in 0..k {
                for b in a + 1..k {
                    if deg[a] < 2 && deg[b] < 2 && rng.gen_bool(0.5) {
                        deg[a] += 1;
                        deg[b] += 1;
                        edges.push((a, b));
                    }
                }
            }
            if edges.is_empty() {
                edges.push((0, 1));
            }
            SubgraphPattern::new(k, edges).expect("edges are simple")
        }
    }
}

/// Generalized Hölder slack for random `F` with `Δ(F) <= d`.
pub fn holder_suite(opts: &CheckOptions) -> SuiteReport {
    let mut r = SuiteReport::new("holder");
    let mut rng = rng_for(opts.seed, 4);
    for _ in 0..opts.cases {
        let f = random_degree_two_pattern(&mut rng);
        let d = rng.gen_range(f.max_degree().max(1)..=4) as u32;
        let u = random_step_graphon(&mut rng, 10, 0.0);
        let s = holder_slack(&f, &u, d);
        r.record(s.as_ref().is_ok_and(|&v| v >= -TOL), || format!("{f:?}, d={d}: {s:?}"));
    }
    let u = random_step_graphon(&mut rng, 10, 0.0);
    let edge = holder_slack(&SubgraphPattern::edge(), &u, 1);
    r.record(edge.as_ref().is_ok_and(|v| v.abs() <= TOL), || format!("edge, d=1: {edge:?}"));
    let c = StepGraphon::constant(0.37).expect("valid");
    let tri = holder_slack(&SubgraphPattern::triangle(), &c, 2);
    r.record(tri.as_ref().is_ok_and(|v| v.abs() <= TOL), || format!("triangle on a constant: {tri:?}"));
    r
}

fn ln_binomial_upper_tail(trials: u64, p: f64, j: u64) -> f64 {
    // Σ_{i >= j} C(N,i) p^i (1-p)^{N-i}, summed directly
    let mut total = 0.0;
    for i in j..=trials {
        let mut c = 1.0;
        for t in 0..i {
            c = c * (trials - t) as f64 / (t + 1) as f64;
        }
        total += c * p.powi(i as i32) * (1.0 - p).powi((trials - i) as i32);
    }
    total.ln()
}

/// `exp(-N I_p^>(j/N))` dominates `P(Bin(N,p) >= j)` for every `N <= 25`.
pub fn chernoff_suite() -> SuiteReport {
    let mut r = SuiteReport::new("chernoff");
    for trials in 1..=25u64 {
        for p in [0.01, 0.1, 0.25, 0.5, 0.75, 0.9] {
            for j in 0..=trials {
                let threshold = j as f64 / trials as f64;
                let bound = entropy::binomial_tail_bound(trials, p, threshold);
                let exact = ln_binomial_upper_tail(trials, p, j);
                r.record(bound.as_ref().is_ok_and(|&b| b >= exact - TOL), || {
                    format!("N={trials} p={p} j={j}: ln bound {bound:?} < ln exact {exact}")
                });
            }
        }
    }
    r
}

/// Largest number of edges in a subgraph of maximum degree at most 2, for
/// every edge subset of `K_k` (indexed by the edge order of [`complete_edges`]).
pub fn max_degree_two_table(k: usize) -> Vec<u8> {
    let edges = complete_edges(k);
    let m = edges.len();
    let incident: Vec<u32> = (0..k)
        .map(|v| {
            edges
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| a == v || b == v)
                .fold(0u32, |acc, (e, _)| acc | 1 << e)
        })
        .collect();
    let mut best = vec![0u8; 1 << m];
    for mask in 1u32..1 << m {
        // a vertex of degree > 2 loses at least one of its edges
        match incident.iter().find(|&&inc| (mask & inc).count_ones() > 2) {
            None => best[mask as usize] = mask.count_ones() as u8,
            Some(&inc) => {
                let mut rest = mask & inc;
                let mut top = 0;
                while rest != 0 {
                    let e = rest.trailing_zeros();
                    top = top.max(best[(mask ^ 1 << e) as usize]);
                    rest &= rest - 1;
                }
                best[mask as usize] = top;
            }
        }
    }
    best
}

/// Edges of `K_k` in lexicographic order.
pub fn complete_edges(k: usize) -> Vec<(usize, usize)> {
    (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect()
}

/// Runs [`spanning_bounded_degree`] on every labeled graph on `k` vertices
/// and validates each answer against [`max_degree_two_table`].
pub fn spanning_suite_for(k: usize) -> SuiteReport {
    let edges = complete_edges(k);
    let m = edges.len();
    let best = max_degree_two_table(k);
    let index = |a: usize, b: usize| edges.iter().position(|&e| e == (a.min(b), a.max(b)));
    let full = (1u32 << m) - 1;
    let parts: Vec<SuiteReport> = (1u32..=full)
        .into_par_iter()
        .fold(
            || SuiteReport::new(""),
            |mut r, mask| {
                let chosen: Vec<(usize, usize)> =
                    (0..m).filter(|e| mask >> e & 1 == 1).map(|e| edges[e]).collect();
                let e_h = chosen.len();
                let mut deg = vec![0usize; k];
                for &(a, b) in &chosen {
                    deg[a] += 1;
                    deg[b] += 1;
                }
                let star = e_h == k - 1 && deg.contains(&(k - 1));
                let h = SubgraphPattern::new(k, chosen).expect("edges of K_k are simple");
                let out = spanning_bounded_degree(&h);
                if mask == full || star {
                    r.record(out.is_err(), || format!("k={k} mask={mask:#x}: excluded pattern was accepted"));
                    return r;
                }
                let need = 2.0 * e_h as f64 / (k - 1) as f64;
                let ok = match &out {
                    Ok(sub) => {
                        let mut sub_mask = 0u32;
                        let mut d = vec![0usize; k];
                        let mut inside = sub.vertex_count() == k;
                        for &(a, b) in sub.edges() {
                            match index(a, b) {
                                Some(e) if mask >> e & 1 == 1 => sub_mask |= 1 << e,
                                _ => inside = false,
                            }
                            d[a] += 1;
                            d[b] += 1;
                        }
                        let count = sub.edges().len();
                        inside
                            && sub_mask.count_ones() as usize == count
                            && d.iter().all(|&x| x <= 2)
                            && count as f64 > need
                            && count <= best[mask as usize] as usize
                    }
                    Err(_) => false,
                };
                // the claim itself, checked on the table alone
                let claim = best[mask as usize] as f64 > need;
                r.record(ok && claim, || format!("k={k} mask={mask:#x}: {out:?}, table {}", best[mask as usize]));
                r
            },
        )
        .collect();
    let mut r = SuiteReport::new(&format!("spanning_bounded_degree_k{k}"));
    for part in parts {
        r.absorb(part);
    }
    r
}

/// Weak regularity on random graphs: the part bound, the `3ε` counting
/// bound, and exactness of the discrete partition.
pub fn regularity_suite(opts: &CheckOptions) -> SuiteReport {
    let mut rng = rng_for(opts.seed, 5);
    let inputs: Vec<(WeightedGraph, f64)> = (0..opts.graphs)
        .map(|i| {
            let n = rng.gen_range(2..=60);
            (random_graph(&mut rng, n), if i % 2 == 0 { 0.3 } else { 0.4 })
        })
        .collect();
    let parts: Vec<SuiteReport> = inputs
        .par_iter()
        .map(|(g, eps)| {
            let mut r = SuiteReport::new("");
            match weak_regular_partition(g, *eps) {
                Ok(part) => {
                    let bound = (1.0 / (eps * eps)) * 4f64.ln();
                    r.record((part.part_count() as f64).ln() <= bound, || {
                        format!("n={} ε={eps}: {} parts", g.n(), part.part_count())
                    });
                    let err = reduced_density_error(g, &part);
                    r.record(err.as_ref().is_ok_and(|&e| e <= 3.0 * eps), || {
                        format!("n={} ε={eps}: error {err:?}", g.n())
                    });
                }
                Err(e) => r.record(false, || format!("n={} ε={eps}: {e}", g.n())),
            }
            let discrete = reduced_density_error(g, &VertexPartition::discrete(g));
            r.record(discrete == Ok(0.0), || format!("n={}: discrete error {discrete:?}", g.n()));
            r
        })
        .collect();
    let mut r = SuiteReport::new("regularity");
    for part in parts {
        r.absorb(part);
    }
    r
}

/// The union bound by hand at `ε = 1/2, n = 2`, and its negligibility in
/// log-log space along `p = (log n)^{-1/7}`.
pub fn union_bound_suite() -> SuiteReport {
    let mut r = SuiteReport::new("union_bound");
    // ε = ηp³/6 = 1/2 at p = 1/2, η = 24; M = 4^4 = 256; log R = 2 log 256 + 256² log 2
    let hand = 2.0 * 256f64.ln() + 65536.0 * 2f64.ln();
    let u = theory::union_bound_log_r(2, 0.5, 24.0);
    r.record(u.as_ref().is_ok_and(|u| (u.log_r - hand).abs() <= 1e-9 * hand), || {
        format!("{u:?} vs {hand}")
    });
    let mut last = f64::INFINITY;
    for ln_n in [1e20f64, 1e30, 1e40, 1e60] {
        let u = theory::union_bound_from_log_n(ln_n, ln_n.powf(-1.0 / 7.0), ln_n.powf(-0.01));
        let ok = u.as_ref().is_ok_and(|u| u.ln_ratio < last && u.ln_ratio < -10.0);
        r.record(ok, || format!("ln n = {ln_n}: {u:?}"));
        if let Ok(u) = u {
            last = u.ln_ratio;
        }
    }
    r
}

/// Importance sampling against exact enumeration at `n = 4`.
pub fn monte_carlo_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let mut r = SuiteReport::new("monte_carlo");
    let tri = SubgraphPattern::triangle();
    let exact = exact_tail_probability(4, 0.5, 0.5, &tri)?;
    r.record((exact - 7.0 / 64.0).abs() <= TOL, || format!("exact tail {exact}"));
    let tilt = TiltSpec::planted_clique(4, 0.5, 3)?.softened(0.5, 0.7)?;
    let est = tilted_tail_estimate(4, 0.5, 0.5, &tri, &tilt, opts.samples, opts.seed)?;
    r.record((est.estimate - exact).abs() <= 5.0 * est.std_error, || {
        format!("tilted {} ± {} vs exact {exact}", est.estimate, est.std_error)
    });
    let again = tilted_tail_estimate(4, 0.5, 0.5, &tri, &tilt, opts.samples, opts.seed)?;
    r.record(again == est, || "tilted estimate is not reproducible".into());
    Ok(r)
}

/// Runs every suite.
pub fn run_checks(opts: &CheckOptions) -> Result<CheckReport> {
    if opts.max_spanning_k > 7 {
        return Err(domain!("the exhaustive spanning suite is limited to k <= 7"));
    }
    let mut suites = vec![
        closed_forms_suite(),
        embedding_suite(opts),
        excess_suite(opts),
        entropy_bounds_suite(),
        cauchy_schwarz_suite(opts),
        holder_suite(opts),
        chernoff_suite(),
    ];
    for k in 4..=opts.max_spanning_k {
        suites.push(spanning_suite_for(k));
    }
    suites.push(regularity_suite(opts));
    suites.push(union_bound_suite());
    suites.push(monte_carlo_suite(opts)?);
    let passed = suites.iter().map(|s| s.passed).sum();
    let total = suites.iter().map(|s| s.total).sum();
    Ok(CheckReport { suites, passed, total })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_two_table_small_cases() {
        // K_4 has a Hamiltonian 4-cycle; K_{1,3} keeps two of its edges
        let t = max_degree_two_table(4);
        assert_eq!(t[0b111111], 4);
        assert_eq!(t[0b000111], 2);
        assert_eq!(t[0], 0);
        let t5 = max_degree_two_table(5);
        assert_eq!(t5[(1 << 10) - 1], 5);
    }

    #[test]
    fn quick_suites_pass() {
        let opts = CheckOptions { cases: 30, graphs: 6, max_spanning_k: 5, samples: 20_000, ..Default::default() };
        let report = run_checks(&opts).unwrap();
        for s in &report.suites {
            assert!(s.ok(), "{}: {:?}", s.name, s.failures);
        }
        assert!(report.total > 1000);
    }

    #[test]
    fn reports_are_deterministic() {
        let opts = CheckOptions { cases: 10, graphs: 3, max_spanning_k: 4, samples: 1000, seed: 4 };
        assert_eq!(run_checks(&opts).unwrap(), run_checks(&opts).unwrap());
    }
}
