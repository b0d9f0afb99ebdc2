//! Acceptance suite: one PASS/FAIL line per criterion, with wall-clock time
//! checked against each criterion's budget.
//!
//! Oracles are written here from scratch wherever the check compares against
//! a closed form or an enumeration, so a shared bug cannot pass silently.
//! Criterion 9 is known not to hold at desk scale; its failure is reported
//! but does not fail the process (see README).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailvar::checks;
use tailvar::cli;
use tailvar::constructions::{best_construction, clique_construction, hub_construction};
use tailvar::graphs::WeightedGraph;
use tailvar::montecarlo::{rate_comparison_log, tilted_tail_estimate, TiltSpec};
use tailvar::patterns::{spanning_bounded_degree, SubgraphPattern};
use tailvar::regularity::{reduced_density_error, weak_regular_partition, VertexPartition};
use tailvar::solver::{grid_oracle, merit_gradient, phi_lower_bound, solve_phi, SolverOptions, VariationalInstance};
use tailvar::theory;

type Outcome = Result<String, String>;

/// Criteria whose failure is expected and documented.
const KNOWN_UNATTAINABLE: &[usize] = &[9];

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `x log(x/p) + (1-x) log((1-x)/(1-p))`, written out again for the oracles.
fn kl(x: f64, p: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(x, p) + term(1.0 - x, 1.0 - p)
}

fn random_weighted(rng: &mut ChaCha8Rng, n: usize) -> WeightedGraph {
    let binary = rng.gen_bool(0.3);
    WeightedGraph::from_fn(n, |_, _| if binary { f64::from(u8::from(rng.gen_bool(0.5))) } else { rng.gen() }).unwrap()
}

fn run_cli(args: &[&str]) -> Result<serde_json::Value, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("tailvar").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(format!("exit {code}: {}", String::from_utf8_lossy(&err)));
    }
    serde_json::from_slice(&out).map_err(|e| e.to_string())
}

fn closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 3..=6usize {
        for i in 0..20 {
            let delta = 0.1 * 1000f64.powf(i as f64 / 19.0);
            let kf = k as f64;
            let clique = 0.5 * delta.powf(2.0 / kf);
            for (regime, want) in [("dense", clique.min(delta / kf)), ("sparse", clique)] {
                let v = run_cli(&["limit", "--k", &k.to_string(), "--delta", &delta.to_string(), "--regime", regime])?;
                let got = v["rate"].as_f64().ok_or("missing rate")?;
                worst = worst.max((got - want).abs());
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let c = theory::crossover_delta(3).map_err(|e| e.to_string())?;
    ensure(c == 27.0 / 8.0, || format!("crossover_delta(3) = {c}"))?;
    Ok(format!("160 limit evaluations, max deviation {worst:e}; crossover 27/8 exact"))
}

fn construction_convergence() -> Outcome {
    let mut log = Vec::new();
    let mut last = (f64::NAN, f64::NAN);
    for n in [1_000u64, 10_000, 100_000, 1_000_000] {
        let p = (n as f64).powf(-0.3);
        let hub = hub_construction(n, p, 1.0, 3).map(|r| r.normalized_rate);
        let clique = clique_construction(n, p, 1.0, 3).map(|r| r.normalized_rate);
        log.push(format!("n={n}: hub {hub:.4?} clique {clique:.4?}"));
        last = (hub.unwrap_or(f64::NAN), clique.unwrap_or(f64::NAN));
    }
    let (hub, clique) = last;
    ensure((hub - 1.0 / 3.0).abs() <= 0.1 / 3.0 && (clique - 0.5).abs() <= 0.05, || log.join("; "))?;
    Ok(log.join("; "))
}

fn embedding_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=20);
        let p: f64 = rng.gen_range(0.02..0.98);
        let g = random_weighted(&mut rng, n);
        let w = g.embed_step_graphon();
        // direct triple sum
        let mut t = 0.0;
        let mut ip = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i < j {
                    ip += kl(g.weight(i, j), p);
                }
                for k in 0..n {
                    t += g.weight(i, j) * g.weight(j, k) * g.weight(i, k);
                }
            }
        }
        let nf = n as f64;
        t /= nf * nf * nf;
        worst = worst.max((w.triangle_density() - t).abs());
        let lhs = 0.5 * w.entropy_mean(p).map_err(|e| e.to_string())?;
        let rhs = ip / (nf * nf) + kl(0.0, p) / (2.0 * nf);
        worst = worst.max((lhs - rhs).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("50 graphs, max deviation {worst:e}"))
}

fn excess_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let p = rng.gen_range(0.05..0.95);
        let w = checks::random_step_graphon(&mut rng, 10, p);
        let m = w.block_count();
        let a = w.measures();
        let mut t = 0.0;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    t += a[i] * a[j] * a[k] * w.value(i, j) * w.value(j, k) * w.value(i, k);
                }
            }
        }
        let d = w.decompose_excess(p).map_err(|e| e.to_string())?;
        worst = worst.max((t - p.powi(3) * (1.0 + d.total())).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("200 step graphons, max deviation {worst:e}"))
}

fn inequality_suites() -> Outcome {
    let opts = checks::CheckOptions::default();
    let suites = [
        checks::entropy_bounds_suite(),
        checks::cauchy_schwarz_suite(&opts),
        checks::holder_suite(&opts),
        checks::chernoff_suite(),
    ];
    let summary: Vec<String> = suites.iter().map(|s| format!("{} {}/{}", s.name, s.passed, s.total)).collect();
    for s in &suites {
        ensure(s.ok() && s.total > 0, || format!("{}: {:?}", s.name, s.failures))?;
    }
    Ok(summary.join(", "))
}

/// Max edges in a subgraph of maximum degree 2, for every subset of `K_k`:
/// list all degree-2 subsets, then take the max over sub-masks by a
/// sum-over-subsets sweep.
fn degree_two_oracle(k: usize, edges: &[(usize, usize)]) -> Vec<u8> {
    let m = edges.len();
    let mut f = vec![0u8; 1 << m];
    for mask in 0u32..1 << m {
        let mut deg = [0u8; 8];
        let mut ok = true;
        for (e, &(a, b)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                deg[a] += 1;
                deg[b] += 1;
                ok &= deg[a] <= 2 && deg[b] <= 2;
            }
        }
        if ok {
            f[mask as usize] = mask.count_ones() as u8;
        }
    }
    debug_assert!(k <= 8);
    for bit in 0..m {
        for mask in 0usize..1 << m {
            if mask >> bit & 1 == 1 {
                f[mask] = f[mask].max(f[mask ^ 1 << bit]);
            }
        }
    }
    f
}

fn spanning_exhaustive() -> Outcome {
    let mut counts = Vec::new();
    for k in 4..=7usize {
        let edges: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
        let m = edges.len();
        let oracle = degree_two_oracle(k, &edges);
        let full = (1u32 << m) - 1;
        let failures: Vec<String> = {
            use rayon::prelude::*;
            (1..full)
                .into_par_iter()
                .filter_map(|mask| {
                    let chosen: Vec<(usize, usize)> =
                        (0..m).filter(|e| mask >> e & 1 == 1).map(|e| edges[e]).collect();
                    let mut deg = vec![0usize; k];
                    for &(a, b) in &chosen {
                        deg[a] += 1;
                        deg[b] += 1;
                    }
                    if chosen.len() == k - 1 && deg.contains(&(k - 1)) {
                        return None;
                    }
                    let e_h = chosen.len();
                    let h = SubgraphPattern::new(k, chosen).unwrap();
                    let sub = match spanning_bounded_degree(&h) {
                        Ok(s) => s,
                        Err(e) => return Some(format!("k={k} mask={mask:#x}: {e}")),
                    };
                    let mut d = vec![0usize; k];
                    let mut inside = sub.vertex_count() == k;
                    for &(a, b) in sub.edges() {
                        let e = edges.iter().position(|&x| x == (a.min(b), a.max(b)));
                        inside &= e.is_some_and(|e| mask >> e & 1 == 1);
                        d[a] += 1;
                        d[b] += 1;
                    }
                    let count = sub.edges().len();
                    let need = 2 * e_h; // compare count (k-1) > 2 e(H) in integers
                    let good = inside
                        && d.iter().all(|&x| x <= 2)
                        && count * (k - 1) > need
                        && count <= oracle[mask as usize] as usize
                        && oracle[mask as usize] as usize * (k - 1) > need;
                    (!good).then(|| format!("k={k} mask={mask:#x}: {count} edges, oracle {}", oracle[mask as usize]))
                })
                .collect()
        };
        ensure(failures.is_empty(), || format!("{} failures, first {:?}", failures.len(), &failures[..failures.len().min(3)]))?;
        // the excluded patterns must be refused
        let kk = SubgraphPattern::clique(k).unwrap();
        let star = SubgraphPattern::star(k).unwrap();
        ensure(spanning_bounded_degree(&kk).is_err() && spanning_bounded_degree(&star).is_err(), || {
            format!("k={k}: excluded pattern accepted")
        })?;
        counts.push(format!("k={k}: {} graphs", full - 1));
    }
    Ok(counts.join(", "))
}

fn solver_vs_oracle() -> Outcome {
    let cases = [
        (3, 0.5, 0.2),
        (3, 0.3, 0.5),
        (3, 0.2, 1.0),
        (3, 0.5, 0.6),
        (3, 0.4, 0.1),
        (4, 0.5, 0.2),
        (4, 0.3, 0.5),
        (4, 0.4, 1.0),
        (4, 0.5, 0.6),
        (4, 0.25, 0.3),
    ];
    let mut log = Vec::new();
    for (n, p, delta) in cases {
        let inst = VariationalInstance::triangle(n, p, delta).map_err(|e| e.to_string())?;
        let r = if n == 3 { 1e-3 } else { 0.02 };
        let grid = grid_oracle(&inst, r).map_err(|e| e.to_string())?;
        let solved = solve_phi(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
        let gap = solved.objective - grid.value;
        ensure(gap.abs() <= grid.error_band, || {
            format!("n={n} p={p} δ={delta}: solver {} grid {} band {}", solved.objective, grid.value, grid.error_band)
        })?;
        log.push(format!("{gap:+.1e}/{:.1e}", grid.error_band));
    }
    Ok(format!("gap/band: {}", log.join(" ")))
}

fn solver_sandwich() -> Outcome {
    let mut log = Vec::new();
    for delta in [1.0, 4.0] {
        let inst = VariationalInstance::triangle(60, 0.25, delta).map_err(|e| e.to_string())?;
        let lower = phi_lower_bound(&inst).map_err(|e| e.to_string())?;
        let upper = best_construction(60, 0.25, delta, 3).map_err(|e| e.to_string())?.objective;
        let solved = solve_phi(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
        ensure(lower <= solved.objective && solved.objective <= upper, || {
            format!("δ={delta}: {lower} <= {} <= {upper} fails", solved.objective)
        })?;
        log.push(format!("δ={delta}: {lower:.3} <= {:.3} <= {upper:.3}", solved.objective));
        // central differences on the merit at a random interior point
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = WeightedGraph::from_fn(60, |_, _| rng.gen_range(0.3..0.9)).unwrap();
        let (mu, lambda) = (50.0, 2.0);
        let (_, grad) = merit_gradient(&inst, &g, mu, lambda).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let (i, j) = loop {
                let (i, j) = (rng.gen_range(0..60), rng.gen_range(0..60));
                if i < j {
                    break (i, j);
                }
            };
            let idx = i * 60 - i * (i + 1) / 2 + (j - i - 1);
            let h = 1e-6;
            let w = g.weight(i, j);
            let f = |x: f64| merit_gradient(&inst, &g.with_weight(i, j, x).unwrap(), mu, lambda).unwrap().0;
            let fd = (f(w + h) - f(w - h)) / (2.0 * h);
            worst = worst.max((fd - grad[idx]).abs() / grad[idx].abs().max(1e-8));
        }
        ensure(worst <= 1e-5, || format!("δ={delta}: gradient relative error {worst:e}"))?;
        log.push(format!("gradient rel err {worst:.1e}"));
    }
    Ok(log.join("; "))
}

fn cherry_trend() -> Outcome {
    let mut log = Vec::new();
    let mut verdicts = Vec::new();
    for (delta, target) in [(1.0, 1.0 + 1.0 / 3.0), (8.0, 1.0)] {
        let mut dist = Vec::new();
        let mut last = f64::NAN;
        for p in [0.25, 0.15, 0.10] {
            let inst = VariationalInstance::triangle(120, p, delta).map_err(|e| e.to_string())?;
            let r = solve_phi(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
            dist.push((r.cherry_ratio - target).abs());
            last = r.cherry_ratio;
            log.push(format!("δ={delta} p={p}: s/p²={:.4}", r.cherry_ratio));
        }
        let trending = dist.windows(2).all(|w| w[1] < w[0]);
        let close = (last - target).abs() <= 0.25 * target;
        verdicts.push((delta, trending, close));
    }
    let ok = verdicts.iter().all(|&(_, t, c)| t && c);
    let detail = format!("{}; trend/final-within-25%: {:?}", log.join(", "), verdicts);
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn regularity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_ratio: f64 = 0.0;
    let mut max_parts = 0;
    for i in 0..50 {
        let n = rng.gen_range(2..=60);
        let eps: f64 = if i % 2 == 0 { 0.3 } else { 0.4 };
        // half the graphs carry a planted block structure so refinement has
        // something to find
        let g = if i % 4 < 2 {
            random_weighted(&mut rng, n)
        } else {
            let blocks = rng.gen_range(2..=4);
            let label: Vec<usize> = (0..n).map(|_| rng.gen_range(0..blocks)).collect();
            let dens: Vec<f64> = (0..blocks * blocks).map(|_| rng.gen()).collect();
            let dens = |a: usize, b: usize| dens[a.min(b) * blocks + a.max(b)];
            WeightedGraph::from_fn(n, |u, v| f64::from(u8::from(rng.gen::<f64>() < dens(label[u], label[v])))).unwrap()
        };
        let part = weak_regular_partition(&g, eps).map_err(|e| e.to_string())?;
        let bound = 4f64.powf(1.0 / (eps * eps));
        ensure((part.part_count() as f64) <= bound, || format!("n={n}: {} parts > {bound}", part.part_count()))?;
        max_parts = max_parts.max(part.part_count());
        let err = reduced_density_error(&g, &part).map_err(|e| e.to_string())?;
        ensure(err <= 3.0 * eps, || format!("n={n} ε={eps}: error {err}"))?;
        worst_ratio = worst_ratio.max(err / (3.0 * eps));
        let discrete = reduced_density_error(&g, &VertexPartition::discrete(&g)).map_err(|e| e.to_string())?;
        ensure(discrete == 0.0, || format!("n={n}: discrete error {discrete:e}"))?;
    }
    Ok(format!("50 graphs, max parts {max_parts}, max error/(3ε) {worst_ratio:.3}, discrete error 0"))
}

fn monte_carlo() -> Outcome {
    // exact tail by enumerating the 64 graphs on 4 vertices
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut exact = 0.0;
    for mask in 0u32..64 {
        let has = |a: usize, b: usize| {
            let e = pairs.iter().position(|&x| x == (a, b)).unwrap();
            mask >> e & 1 == 1
        };
        let triangles = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
            .iter()
            .filter(|&&(a, b, c)| has(a, b) && has(a, c) && has(b, c))
            .count();
        // labeled density 6T/64 against 1.5 * 0.5^3
        if 6.0 * triangles as f64 / 64.0 >= 1.5 * 0.125 {
            exact += 0.5f64.powi(6);
        }
    }
    ensure((exact - 7.0 / 64.0).abs() < 1e-15, || format!("enumeration gave {exact}"))?;
    let tri = SubgraphPattern::triangle();
    let tilt = TiltSpec::planted_clique(4, 0.5, 3).unwrap().softened(0.5, 0.7).unwrap();
    let est = tilted_tail_estimate(4, 0.5, 0.5, &tri, &tilt, 1_000_000, 11).map_err(|e| e.to_string())?;
    let z = (est.estimate - exact) / est.std_error;
    ensure(z.abs() <= 5.0, || format!("tilted {} ± {} vs exact {exact}", est.estimate, est.std_error))?;
    let inst = VariationalInstance::triangle(30, 0.3, 1.0).map_err(|e| e.to_string())?;
    let solved = solve_phi(&inst, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let tilt = TiltSpec::from_graph(&solved.minimizer);
    let far = tilted_tail_estimate(30, 0.3, 1.0, &tri, &tilt, 100_000, 12).map_err(|e| e.to_string())?;
    let cmp = rate_comparison_log(30, 0.3, 1.0, far.log_estimate, solved.objective).map_err(|e| e.to_string())?;
    ensure((1.0 / 3.0..=3.0).contains(&cmp.ratio_to_phi), || format!("ratio {}", cmp.ratio_to_phi))?;
    Ok(format!(
        "n=4: {:.6} vs exact 7/64 (z = {z:+.2}); n=30: -log(est)/φ̂ = {:.3}",
        est.estimate, cmp.ratio_to_phi
    ))
}

fn union_bound() -> Outcome {
    // ε = ηp³/6 = 1/2 with p = 1/2, η = 24; M = 4^{1/ε²} = 256; R = M^n ε^{-M²}
    let hand = 2.0 * 256f64.ln() + 256f64 * 256.0 * 2f64.ln();
    let u = theory::union_bound_log_r(2, 0.5, 24.0).map_err(|e| e.to_string())?;
    ensure((u.log_r - hand).abs() <= 1e-9 * hand, || format!("log R = {} vs {hand}", u.log_r))?;
    let mut ratios = Vec::new();
    for ln_n in [1e20f64, 1e30, 1e40, 1e60] {
        let p = ln_n.powf(-1.0 / 7.0);
        let v = theory::union_bound_from_log_n(ln_n, p, ln_n.powf(-0.01)).map_err(|e| e.to_string())?;
        ratios.push(v.ln_ratio);
    }
    ensure(ratios.windows(2).all(|w| w[1] < w[0]) && ratios[0] < -10.0, || format!("ln ratios {ratios:?}"))?;
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3e}")).collect();
    Ok(format!("log R = {:.6} (hand {hand:.6}); ln(log R / scale) = [{}]", u.log_r, shown.join(", ")))
}

fn reproducibility() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_tailvar");
    let runs: [&[&str]; 9] = [
        &["limit", "--k", "4", "--delta", "2.5"],
        &["construct", "--kind", "best", "--n", "500", "--p", "0.1", "--delta", "2"],
        &["solve", "--n", "12", "--p", "0.3", "--delta", "1", "--seed", "7", "--trace"],
        &["solve", "--n", "12", "--p", "0.3", "--delta", "1", "--seed", "7", "--trace", "--format", "csv"],
        &["sweep", "--n", "10,14", "--p", "0.3,0.5", "--delta", "1", "--starts", "2", "--seed", "5", "--format", "csv"],
        &["regularity", "--n", "40", "--p", "0.3", "--eps", "0.3", "--seed", "9", "--delta", "1", "--eta", "0.2"],
        &["sample", "--n", "10", "--p", "0.4", "--delta", "0.5", "--trials", "20000", "--seed", "3", "--tilt", "solver"],
        &["sample", "--n", "10", "--p", "0.4", "--delta", "0.5", "--trials", "20000", "--seed", "3", "--format", "csv"],
        &["check", "--cases", "20", "--graphs", "4", "--max-k", "5", "--samples", "2000", "--seed", "1"],
    ];
    for args in runs {
        let once = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        let twice = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        ensure(once.status.success(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&once.stderr)))?;
        ensure(!once.stdout.is_empty() && once.stdout == twice.stdout, || format!("{args:?} output differs"))?;
    }
    Ok(format!("{} commands byte-identical across two runs", runs.len()))
}

fn main() {
    let criteria: [(usize, &str, u64, fn() -> Outcome); 13] = [
        (1, "closed-form fidelity", 1, closed_forms),
        (2, "construction convergence", 1, construction_convergence),
        (3, "embedding identities", 1, embedding_identities),
        (4, "excess decomposition identity", 1, excess_identity),
        (5, "inequality suites", 30, inequality_suites),
        (6, "bounded-degree spanning subgraphs, exhaustive", 600, spanning_exhaustive),
        (7, "solver vs grid oracle", 300, solver_vs_oracle),
        (8, "solver sandwich and gradient", 600, solver_sandwich),
        (9, "cherry ratio trend", 1800, cherry_trend),
        (10, "weak regularity", 300, regularity),
        (11, "Monte Carlo unbiasedness and rate order", 600, monte_carlo),
        (12, "union bound arithmetic", 1, union_bound),
        (13, "CLI reproducibility", 600, reproducibility),
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| Err(format!("panic: {}", e.downcast_ref::<String>().cloned().unwrap_or_else(|| {
                e.downcast_ref::<&str>().map(|s| s.to_string()).unwrap_or_default()
            }))));
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over the {budget} s budget; {d}")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        println!("criterion {id:>2} {status} [{name}] ({:.2} s): {detail}", elapsed.as_secs_f64());
        if status == "PASS" {
            passed += 1;
        } else if KNOWN_UNATTAINABLE.contains(&id) {
            println!("             expected failure at desk scale, see README");
        } else {
            unexpected += 1;
        }
    }
    println!("acceptance: {passed}/13 passed, {unexpected} unexpected failures");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
