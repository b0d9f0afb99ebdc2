use tailvar::cli;
use tailvar::constructions::{clique_construction, hub_construction, ConstructionReport};
use tailvar::montecarlo::{naive_tail_estimate, sample_gnp, tilted_tail_estimate, TailEstimate, TiltSpec};
use tailvar::patterns::SubgraphPattern;
use tailvar::regularity::{partition_event_bound, weak_regular_partition, VertexPartition};
use tailvar::solver::{grid_oracle, solve_phi, SolveReport, SolverOptions, VariationalInstance};

fn run_json(args: &[&str]) -> serde_json::Value {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("tailvar").chain(args.iter().copied()), &mut out, &mut err);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
    serde_json::from_slice(&out).unwrap()
}

#[test]
fn cli_solve_matches_grid_oracle() {
    let v = run_json(&["solve", "--n", "3", "--p", "0.5", "--delta", "0.2", "--seed", "7"]);
    let report: SolveReport = serde_json::from_value(v).unwrap();
    let inst = VariationalInstance::triangle(3, 0.5, 0.2).unwrap();
    let grid = grid_oracle(&inst, 2e-3).unwrap();
    assert!((report.objective - grid.value).abs() <= grid.error_band, "{} vs {grid:?}", report.objective);
}

#[test]
fn cli_hub_construction_at_scale() {
    let v = run_json(&["construct", "--kind", "hub", "--n", "1000000", "--p", "0.01", "--delta", "1"]);
    let report: ConstructionReport = serde_json::from_value(v).unwrap();
    assert!((report.normalized_rate - 1.0 / 3.0).abs() < 0.1 / 3.0, "{}", report.normalized_rate);
}

#[test]
fn cli_outputs_reparse() {
    let v = run_json(&["sample", "--n", "5", "--p", "0.4", "--delta", "0.5", "--trials", "500", "--tilt", "clique", "--soften", "0.8"]);
    let est: TailEstimate = serde_json::from_value(v["estimate"].clone()).unwrap();
    assert_eq!(est.trials, 500);
    let v = run_json(&["regularity", "--n", "20", "--p", "0.3", "--eps", "0.3", "--delta", "1", "--eta", "0.2"]);
    let part: VertexPartition = serde_json::from_value(v["partition"].clone()).unwrap();
    assert_eq!(part.vertex_count(), 20);
    assert!(v["certificate"]["vacuous"].as_bool().unwrap());
}

#[test]
fn event_bound_matches_blowup_entropy() {
    for seed in 0..5 {
        let g = sample_gnp(24, 0.4, seed).unwrap();
        let part = weak_regular_partition(&g, 0.4).unwrap();
        let targets = part.densities().to_vec();
        let bound = partition_event_bound(&part, &targets, 0.3, 24).unwrap();
        let blowup = bound.blowup_entropy.unwrap();
        assert!((bound.exponent + blowup).abs() <= 1e-9 * blowup.max(1.0), "{bound:?}");
    }
}

#[test]
fn naive_and_tilted_agree() {
    let tri = SubgraphPattern::triangle();
    let naive = naive_tail_estimate(30, 0.3, 0.5, &tri, 100_000, 1).unwrap();
    let inst = VariationalInstance::triangle(30, 0.3, 0.5).unwrap();
    let report = solve_phi(&inst, &SolverOptions::default()).unwrap();
    let tilt = TiltSpec::from_graph(&report.minimizer);
    let tilted = tilted_tail_estimate(30, 0.3, 0.5, &tri, &tilt, 100_000, 2).unwrap();
    assert!(naive.ci_lo <= tilted.ci_hi && tilted.ci_lo <= naive.ci_hi, "{naive:?} vs {tilted:?}");
}

#[test]
fn tilting_reduces_variance() {
    let tri = SubgraphPattern::triangle();
    let trials = 100_000;
    let naive = naive_tail_estimate(25, 0.3, 1.0, &tri, trials, 3).unwrap();
    let inst = VariationalInstance::triangle(25, 0.3, 1.0).unwrap();
    let report = solve_phi(&inst, &SolverOptions::default()).unwrap();
    let tilt = TiltSpec::from_graph(&report.minimizer);
    let tilted = tilted_tail_estimate(25, 0.3, 1.0, &tri, &tilt, trials, 4).unwrap();
    assert!(naive.hits > 0, "naive run saw no hits");
    assert!(naive.ci_lo <= tilted.ci_hi && tilted.ci_lo <= naive.ci_hi, "{naive:?} vs {tilted:?}");
    let rel = |e: &TailEstimate| (e.std_error / e.estimate).powi(2);
    assert!(rel(&naive) >= 10.0 * rel(&tilted), "{} vs {}", rel(&naive), rel(&tilted));
}

#[test]
fn planted_clique_floor() {
    let (n, p, delta) = (30, 0.3, 1.0);
    let a = clique_construction(n as u64, p, delta, 3).unwrap().size_parameter as usize;
    let tilt = TiltSpec::planted_clique(n, p, a).unwrap();
    let est = tilted_tail_estimate(n, p, delta, &SubgraphPattern::triangle(), &tilt, 20_000, 5).unwrap();
    let floor = (a * (a - 1) / 2) as f64 * p.ln();
    // the estimate is p^{C(a,2)} times the conditional hit rate
    assert!(est.log_estimate <= floor + 1e-9);
    assert!(est.log_estimate >= floor - 20f64.ln(), "{} vs floor {floor}", est.log_estimate);
}

#[test]
fn hub_and_clique_meet_near_the_crossover() {
    // below 27/8 the hub is cheaper, above it the clique
    let n = 100_000u64;
    let p = (n as f64).powf(-0.3);
    let low = (clique_construction(n, p, 1.0, 3).unwrap(), hub_construction(n, p, 1.0, 3).unwrap());
    assert!(low.0.normalized_rate > low.1.normalized_rate);
    let high = (clique_construction(n, p, 8.0, 3).unwrap(), hub_construction(n, p, 8.0, 3).unwrap());
    assert!(high.0.normalized_rate < high.1.normalized_rate);
}
