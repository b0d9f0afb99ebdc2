//! Command-line front end.
//!
//! Every subcommand writes one JSON document (or a CSV table with a versioned
//! header comment) to stdout or `--output`. Failures print
//! `{"error": {"kind": ..., "message": ...}}` on stderr and exit with 2 for
//! usage errors, 3 for domain, precondition and infeasibility errors, and 4
//! for resource budgets and I/O. `check` exits with 1 when a suite fails.
//!
//! `--config FILE` reads `key = value` lines (`#` starts a comment); each
//! line acts as `--key value` placed before the command-line flags, so
//! flags given explicitly win.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::checks::{run_checks, CheckOptions};
use crate::constructions::{self, ConstructionKind, ConstructionReport};
use crate::error::{Error, Result};
use crate::graphs::WeightedGraph;
use crate::montecarlo::{
    self, exact_tail_probability, naive_tail_estimate, rate_comparison_log, sample_gnp,
    tilted_tail_estimate, RateComparison, TailEstimate, TiltSpec,
};
use crate::patterns::{pattern_catalog, PatternName, SubgraphPattern};
use crate::regularity::{
    cut_deviation, reduced_density_error, tail_certificate, weak_regular_partition, CutWitness,
    TailCertificate, VertexPartition,
};
use crate::solver::{self, ConstraintForm, SolveReport, SolverOptions, VariationalInstance};
use crate::theory::{self, Regime};

#[derive(Debug, Parser)]
#[command(name = "tailvar", version, about = "Upper-tail rate functions for subgraph counts in G(n,p)")]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form limit of the normalized rate
    Limit(LimitArgs),
    /// Clique or hub construction
    Construct(ConstructArgs),
    /// Numerical minimization of the entropy under the density constraint
    Solve(SolveArgs),
    /// Grid of solver runs
    Sweep(SweepArgs),
    /// Weak regularity partition and tail certificate
    Regularity(RegularityArgs),
    /// Monte Carlo tail estimate
    Sample(SampleArgs),
    /// Property and inequality suites
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Dense,
    Sparse,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Dense => Regime::DenseSide,
            RegimeArg::Sparse => Regime::SparseSide,
        }
    }
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = RegimeArg::Dense)]
    regime: RegimeArg,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Clique,
    Hub,
    Best,
}

#[derive(Debug, Args)]
struct ConstructArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Best)]
    kind: KindArg,
    /// Vertex count; omit for the graphon construction
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstraintArg {
    Labeled,
    Injective,
}

impl From<ConstraintArg> for ConstraintForm {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Labeled => ConstraintForm::Labeled,
            ConstraintArg::Injective => ConstraintForm::Injective,
        }
    }
}

#[derive(Debug, Args)]
struct SolverFlags {
    /// Pattern such as triangle, clique:4, cycle:5
    #[arg(long, default_value = "triangle")]
    pattern: PatternName,
    #[arg(long, value_enum, default_value_t = ConstraintArg::Labeled)]
    constraint: ConstraintArg,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    #[arg(long, default_value_t = 6)]
    stages: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SolverFlags {
    fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            random_starts: self.starts,
            max_iters_per_stage: self.iters,
            stages: self.stages,
            seed,
            ..SolverOptions::default()
        }
    }

    fn instance(&self, n: usize, p: f64, delta: f64) -> Result<VariationalInstance> {
        let pattern = pattern_catalog(self.pattern)?;
        Ok(VariationalInstance::new(n, p, delta, pattern)?.with_constraint(self.constraint.into()))
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    delta: f64,
    /// Record every accepted iteration; the CSV format then emits the trace
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    trace: bool,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<f64>,
    #[command(flatten)]
    solver: SolverFlags,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct RegularityArgs {
    /// JSON graph `{n, weights}`; otherwise a G(n,p) sample is used
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.4)]
    eps: f64,
    /// With --delta, also report the tail certificate for excess δ
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TiltArg {
    None,
    Clique,
    Hub,
    Solver,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, default_value = "triangle")]
    pattern: PatternName,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = TiltArg::None)]
    tilt: TiltArg,
    /// Planted set size for the clique and hub tilts; defaults to the
    /// calibrated construction
    #[arg(long)]
    tilt_size: Option<usize>,
    /// Weight on the tilt when mixing it with p; 1 keeps the tilt as is
    #[arg(long, default_value_t = 1.0)]
    soften: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = 50)]
    graphs: usize,
    #[arg(long, default_value_t = 7)]
    max_k: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[command(flatten)]
    common: Common,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Limit(a) => &a.common,
            Command::Construct(a) => &a.common,
            Command::Solve(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::Regularity(a) => &a.common,
            Command::Sample(a) => &a.common,
            Command::Check(a) => &a.common,
        }
    }
}

/// What a failed run reports.
enum Failure {
    Usage(String),
    Lib(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Lib(Error::Parse(_)) => 2,
            Failure::Lib(Error::Resource(_)) | Failure::Io(_) => 4,
            Failure::Lib(_) => 3,
        }
    }

    fn object(&self) -> serde_json::Value {
        let (kind, message) = match self {
            Failure::Usage(m) => ("usage", m.clone()),
            Failure::Io(m) => ("io", m.clone()),
            Failure::Lib(e) => (e.kind(), e.to_string()),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

/// Reads `key = value` lines into `--key=value` arguments.
fn config_args(path: &PathBuf) -> std::result::Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("config line {}: expected key = value", no + 1)))?;
        let key = key.trim().replace('_', "-");
        if key == "config" {
            return Err(Failure::Usage("config files cannot include other config files".into()));
        }
        out.push(format!("--{key}={}", value.trim()));
    }
    Ok(out)
}

/// Locates `--config` among raw arguments.
fn find_config(args: &[String]) -> Option<PathBuf> {
    let mut found = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(v) = a.strip_prefix("--config=") {
            found = Some(PathBuf::from(v));
        }
    }
    found
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    match dispatch(&args, stdout) {
        Ok(code) => code,
        Err(Failure::Usage(m)) if m.is_empty() => 0,
        Err(f) => {
            // nothing sensible is left to do if stderr is gone
            let _ = writeln!(stderr, "{}", f.object());
            f.exit_code()
        }
    }
}

fn dispatch(args: &[String], stdout: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let mut full = args.to_vec();
    if let Some(path) = find_config(args) {
        if args.len() >= 2 {
            let extra = config_args(&path)?;
            full.splice(2..2, extra);
        }
    }
    let cli = match Cli::try_parse_from(&full) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(stdout, "{e}").map_err(|e| Failure::Io(e.to_string()))?;
                return Err(Failure::Usage(String::new()));
            }
            return Err(Failure::Usage(e.to_string().trim().to_string()));
        }
    };
    let common = cli.command.common();
    let format = common.format;
    let mut buf = Vec::new();
    let code = execute(&cli.command, format, &mut buf)?;
    match &common.output {
        Some(path) => fs::write(path, &buf).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?,
        None => stdout.write_all(&buf).map_err(|e| Failure::Io(e.to_string()))?,
    }
    Ok(code)
}

fn emit_json<T: Serialize>(value: &T, out: &mut Vec<u8>) -> std::result::Result<(), Failure> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Failure::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(())
}

fn emit_csv(name: &str, columns: &str, rows: &[String], out: &mut Vec<u8>) {
    out.extend_from_slice(format!("# tailvar {name} csv v1\n{columns}\n").as_bytes());
    for r in rows {
        out.extend_from_slice(r.as_bytes());
        out.push(b'\n');
    }
}

#[derive(Serialize)]
struct LimitOutput {
    k: usize,
    delta: f64,
    regime: Regime,
    rate: f64,
    clique_branch: f64,
    hub_branch: f64,
    crossover_delta: f64,
}

#[derive(Serialize)]
struct SampleOutput {
    estimate: TailEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<RateComparison>,
}

#[derive(Serialize)]
struct RegularityOutput {
    n: usize,
    eps: f64,
    parts: usize,
    partition: VertexPartition,
    reduced_density_error: f64,
    cut: CutWitness,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<TailCertificate>,
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    p: f64,
    delta: f64,
    seed: u64,
    objective: f64,
    normalized_rate: f64,
    cherry_ratio: f64,
    cherry_limit: Option<f64>,
    lower_bound: f64,
    construction_objective: Option<f64>,
    converged: bool,
}

const SWEEP_COLUMNS: &str =
    "n,p,delta,seed,objective,normalized_rate,cherry_ratio,cherry_limit,lower_bound,construction_objective,converged";

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn execute(cmd: &Command, format: Format, out: &mut Vec<u8>) -> std::result::Result<i32, Failure> {
    match cmd {
        Command::Limit(a) => {
            let regime = Regime::from(a.regime);
            let rate = theory::limit_rate(a.k, a.delta, regime)?;
            let res = LimitOutput {
                k: a.k,
                delta: a.delta,
                regime,
                rate,
                clique_branch: 0.5 * a.delta.powf(2.0 / a.k as f64),
                hub_branch: a.delta / a.k as f64,
                crossover_delta: theory::crossover_delta(a.k)?,
            };
            match format {
                Format::Json => emit_json(&res, out)?,
                Format::Csv => emit_csv(
                    "limit",
                    "k,delta,regime,rate,clique_branch,hub_branch,crossover_delta",
                    &[format!(
                        "{},{},{},{},{},{},{}",
                        res.k, res.delta, res.regime, res.rate, res.clique_branch, res.hub_branch, res.crossover_delta
                    )],
                    out,
                ),
            }
        }
        Command::Construct(a) => {
            let report = construct(a)?;
            match format {
                Format::Json => emit_json(&report, out)?,
                Format::Csv => emit_csv(
                    "construct",
                    "kind,n,p,delta,k,size_parameter,objective,constraint_value,threshold,normalized_rate",
                    &[format!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        report.kind,
                        report.n.map(|n| n.to_string()).unwrap_or_default(),
                        report.p,
                        report.delta,
                        report.k,
                        report.size_parameter,
                        report.objective,
                        report.constraint_value,
                        report.threshold,
                        report.normalized_rate
                    )],
                    out,
                ),
            }
        }
        Command::Solve(a) => {
            let inst = a.solver.instance(a.n, a.p, a.delta)?;
            let mut opts = a.solver.options(a.solver.seed);
            opts.record_trace = a.trace;
            let report = solver::solve_phi(&inst, &opts)?;
            match format {
                Format::Json => emit_json(&report, out)?,
                Format::Csv if a.trace => {
                    solver::write_trace_csv(&report.trace, &mut *out).map_err(|e| Failure::Io(e.to_string()))?
                }
                Format::Csv => emit_csv(
                    "solve",
                    "n,p,delta,objective,constraint_value,threshold,normalized_rate,cherry_ratio,converged,best_start",
                    &[solve_row(&report)],
                    out,
                ),
            }
        }
        Command::Sweep(a) => {
            let rows = sweep(a)?;
            match format {
                Format::Json => emit_json(&rows, out)?,
                Format::Csv => {
                    let lines: Vec<String> = rows
                        .iter()
                        .map(|r| {
                            format!(
                                "{},{},{},{},{},{},{},{},{},{},{}",
                                r.n,
                                r.p,
                                r.delta,
                                r.seed,
                                r.objective,
                                r.normalized_rate,
                                r.cherry_ratio,
                                opt(r.cherry_limit),
                                r.lower_bound,
                                opt(r.construction_objective),
                                r.converged
                            )
                        })
                        .collect();
                    emit_csv("sweep", SWEEP_COLUMNS, &lines, out);
                }
            }
        }
        Command::Regularity(a) => {
            let res = regularity(a)?;
            match format {
                Format::Json => emit_json(&res, out)?,
                Format::Csv => emit_csv(
                    "regularity",
                    "n,eps,parts,reduced_density_error,cut_deviation,cut_exact,certificate_log_bound",
                    &[format!(
                        "{},{},{},{},{},{},{}",
                        res.n,
                        res.eps,
                        res.parts,
                        res.reduced_density_error,
                        res.cut.deviation,
                        res.cut.exact,
                        opt(res.certificate.as_ref().map(|c| c.log_bound))
                    )],
                    out,
                ),
            }
        }
        Command::Sample(a) => {
            let res = sample(a)?;
            match format {
                Format::Json => emit_json(&res, out)?,
                Format::Csv => {
                    montecarlo::write_sample_csv(std::slice::from_ref(&res.estimate), &mut *out)
                        .map_err(|e| Failure::Io(e.to_string()))?;
                }
            }
        }
        Command::Check(a) => {
            let opts = CheckOptions {
                seed: a.seed,
                cases: a.cases,
                graphs: a.graphs,
                max_spanning_k: a.max_k,
                samples: a.samples,
            };
            let report = run_checks(&opts)?;
            match format {
                Format::Json => emit_json(&report, out)?,
                Format::Csv => {
                    let rows: Vec<String> = report
                        .suites
                        .iter()
                        .map(|s| format!("{},{},{}", s.name, s.passed, s.total))
                        .collect();
                    emit_csv("check", "suite,passed,total", &rows, out);
                }
            }
            return Ok(if report.ok() { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn solve_row(r: &SolveReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.instance.n(),
        r.instance.p(),
        r.instance.delta(),
        r.objective,
        r.constraint_value,
        r.threshold,
        r.normalized_rate,
        r.cherry_ratio,
        r.converged,
        r.best_start
    )
}

fn construct(a: &ConstructArgs) -> Result<ConstructionReport> {
    match (a.kind, a.n) {
        (KindArg::Clique, Some(n)) => constructions::clique_construction(n, a.p, a.delta, a.k),
        (KindArg::Hub, Some(n)) => constructions::hub_construction(n, a.p, a.delta, a.k),
        (KindArg::Best, Some(n)) => constructions::best_construction(n, a.p, a.delta, a.k),
        (KindArg::Clique, None) => {
            constructions::graphon_construction(ConstructionKind::Clique, a.p, a.delta, a.k)
        }
        (KindArg::Hub, None) => constructions::graphon_construction(ConstructionKind::Hub, a.p, a.delta, a.k),
        (KindArg::Best, None) => {
            let clique = constructions::graphon_construction(ConstructionKind::Clique, a.p, a.delta, a.k)?;
            match constructions::graphon_construction(ConstructionKind::Hub, a.p, a.delta, a.k) {
                Ok(hub) if hub.objective < clique.objective => Ok(hub),
                _ => Ok(clique),
            }
        }
    }
}

fn sweep(a: &SweepArgs) -> Result<Vec<SweepRow>> {
    let mut grid = Vec::new();
    for &n in &a.n {
        for &p in &a.p {
            for &delta in &a.delta {
                grid.push((n, p, delta));
            }
        }
    }
    // instance i always gets seed + i, whatever the scheduling
    let results: Vec<Result<SweepRow>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(n, p, delta))| {
            let seed = a.solver.seed.wrapping_add(i as u64);
            let inst = a.solver.instance(n, p, delta)?;
            let report = solver::solve_phi(&inst, &a.solver.options(seed))?;
            let complete = inst.pattern().is_complete();
            let construction = if complete {
                constructions::best_construction(n as u64, p, delta, inst.pattern().vertex_count())
                    .ok()
                    .map(|c| c.objective)
            } else {
                None
            };
            let triangle = complete && inst.pattern().vertex_count() == 3;
            Ok(SweepRow {
                n,
                p,
                delta,
                seed,
                objective: report.objective,
                normalized_rate: report.normalized_rate,
                cherry_ratio: report.cherry_ratio,
                cherry_limit: if triangle && delta > 0.0 {
                    theory::cherry_diagnostic_limit(delta, Regime::DenseSide).ok()
                } else {
                    None
                },
                lower_bound: solver::phi_lower_bound(&inst)?,
                construction_objective: construction,
                converged: report.converged,
            })
        })
        .collect();
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    rows.sort_by(|x, y| {
        (x.n, x.p, x.delta).partial_cmp(&(y.n, y.p, y.delta)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(rows)
}

fn regularity(a: &RegularityArgs) -> Result<RegularityOutput> {
    let g = match (&a.graph, a.n, a.p) {
        (Some(path), _, _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<WeightedGraph>(&text).map_err(|e| Error::Parse(e.to_string()))?
        }
        (None, Some(n), Some(p)) => sample_gnp(n, p, a.seed)?,
        _ => return Err(Error::Parse("give --graph FILE or both --n and --p".into())),
    };
    let partition = weak_regular_partition(&g, a.eps)?;
    let error = reduced_density_error(&g, &partition)?;
    let cut = cut_deviation(&g, &partition)?;
    let certificate = match (a.delta, a.p) {
        (Some(delta), Some(p)) => {
            let inst = VariationalInstance::triangle(g.n(), p, delta - a.eta)?;
            let lower = solver::phi_lower_bound(&inst)?;
            Some(tail_certificate(g.n() as u64, p, delta, a.eta, lower)?)
        }
        (Some(_), None) => return Err(Error::Parse("the certificate needs --p".into())),
        _ => None,
    };
    Ok(RegularityOutput {
        n: g.n(),
        eps: a.eps,
        parts: partition.part_count(),
        partition,
        reduced_density_error: error,
        cut,
        certificate,
    })
}

fn planted_size(a: &SampleArgs, kind: ConstructionKind) -> Result<usize> {
    if let Some(s) = a.tilt_size {
        return Ok(s);
    }
    let k = a.resolved_pattern()?.vertex_count();
    let report = constructions::discrete_construction(kind, a.n as u64, a.p, a.delta, k)?;
    Ok(report.size_parameter.round() as usize)
}

impl SampleArgs {
    fn resolved_pattern(&self) -> Result<SubgraphPattern> {
        pattern_catalog(self.pattern)
    }
}

fn sample(a: &SampleArgs) -> Result<SampleOutput> {
    let pattern = a.resolved_pattern()?;
    let mut phi = None;
    let tilt = match a.tilt {
        TiltArg::None => None,
        TiltArg::Clique => Some(TiltSpec::planted_clique(a.n, a.p, planted_size(a, ConstructionKind::Clique)?)?),
        TiltArg::Hub => Some(TiltSpec::hub(a.n, a.p, planted_size(a, ConstructionKind::Hub)?)?),
        TiltArg::Solver => {
            let inst = VariationalInstance::new(a.n, a.p, a.delta, pattern.clone())?;
            let report = solver::solve_phi(&inst, &SolverOptions { seed: a.seed, ..Default::default() })?;
            phi = Some(report.objective);
            Some(TiltSpec::from_graph(&report.minimizer))
        }
    };
    let estimate = match tilt {
        None => naive_tail_estimate(a.n, a.p, a.delta, &pattern, a.trials, a.seed)?,
        Some(t) => {
            let t = if a.soften < 1.0 { t.softened(a.p, a.soften)? } else { t };
            tilted_tail_estimate(a.n, a.p, a.delta, &pattern, &t, a.trials, a.seed)?
        }
    };
    let exact = if a.n <= montecarlo::EXACT_MAX_N {
        Some(exact_tail_probability(a.n, a.p, a.delta, &pattern)?)
    } else {
        None
    };
    let comparison = match phi {
        Some(phi) if estimate.log_estimate.is_finite() && phi > 0.0 => {
            Some(rate_comparison_log(a.n, a.p, a.delta, estimate.log_estimate, phi)?)
        }
        _ => None,
    };
    Ok(SampleOutput { estimate, exact, comparison })
}
