use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use trajmetric::admm::{admm_metric, AdmmConfig};
use trajmetric::harness::{
    benchmark_scaling, generate_scenario, rfs_metric_mc, write_bench_csv, BenchGrid, MetricSpec,
    PairModel, ScenarioConfig, ScenarioPairSampler,
};
use trajmetric::lp::build_lp;
use trajmetric::trajcore::ParamsEcho;
use trajmetric::{compute_metric, MetricError, MetricParams, MetricResult, Result, Solver, TrajectorySet};

#[derive(Parser)]
#[command(name = "trajmetric", version, about = "Distances between sets of trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Metric between two trajectory-set files.
    Compute(ComputeArgs),
    /// Brute-force enumeration of the exact metric, for small inputs.
    Oracle(OracleArgs),
    /// Draw a random trajectory set.
    Simulate(SimulateArgs),
    /// Monte Carlo estimate of the metric between random sets.
    Mc(McArgs),
    /// Time solvers over a grid of window lengths and set sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    c: f64,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
}

impl MetricArgs {
    fn params(&self) -> Result<MetricParams> {
        MetricParams::new(self.c, self.gamma, self.p)
    }
}

#[derive(Args)]
struct InputArgs {
    #[arg(long, value_name = "FILE")]
    a: PathBuf,
    #[arg(long, value_name = "FILE")]
    b: PathBuf,
}

#[derive(Args)]
#[group(multiple = false)]
struct FormatArgs {
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverName {
    Viterbi,
    Lp,
    Admm,
}

#[derive(Args)]
struct AdmmArgs {
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    qp_iters: Option<usize>,
    #[arg(long)]
    residual_factor: Option<f64>,
}

impl AdmmArgs {
    fn config(&self) -> AdmmConfig {
        let d = AdmmConfig::default();
        AdmmConfig {
            rho: self.rho.unwrap_or(d.rho),
            max_admm_iters: self.max_iters.unwrap_or(d.max_admm_iters),
            max_qp_iters: self.qp_iters.unwrap_or(d.max_qp_iters),
            residual_factor: self.residual_factor.unwrap_or(d.residual_factor),
        }
    }
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, value_enum, default_value = "viterbi")]
    solver: SolverName,
    #[command(flatten)]
    admm: AdmmArgs,
    /// Report localization, missed, false and switching costs.
    #[arg(long)]
    decompose: bool,
    #[command(flatten)]
    format: FormatArgs,
    /// Write the LP in CPLEX LP format.
    #[arg(long, value_name = "FILE")]
    dump_lp: Option<PathBuf>,
    /// Write the ADMM residual trace as CSV.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    decompose: bool,
    #[command(flatten)]
    format: FormatArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario configuration (JSON); defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, value_enum, default_value = "viterbi")]
    solver: SolverName,
    #[command(flatten)]
    admm: AdmmArgs,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_name = "FILE")]
    grid: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Configuration file of the `mc` command.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McConfig {
    #[serde(default)]
    scenario: ScenarioConfig,
    /// Scenario for `Y` when it differs from the one for `X`.
    #[serde(default)]
    scenario_y: Option<ScenarioConfig>,
    #[serde(default)]
    metric: MetricSpec,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    pair_model: PairModel,
}

fn solver_from(name: SolverName, admm: &AdmmArgs) -> Solver {
    match name {
        SolverName::Viterbi => Solver::Viterbi,
        SolverName::Lp => Solver::Lp,
        SolverName::Admm => Solver::Admm(admm.config()),
    }
}

fn read_sets(input: &InputArgs) -> Result<(TrajectorySet, TrajectorySet)> {
    Ok((TrajectorySet::read_json(&input.a)?, TrajectorySet::read_json(&input.b)?))
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

#[derive(Serialize)]
struct Report<'a> {
    params: ParamsEcho,
    #[serde(flatten)]
    result: &'a MetricResult,
}

fn print_result(result: &MetricResult, params: &MetricParams, decompose: bool, format: &FormatArgs) -> Result<()> {
    let mut out = output(None)?;
    let mut shown = result.clone();
    if !decompose {
        shown.decomposition = Default::default();
    }
    if format.json {
        let mut value = serde_json::to_value(Report { params: params.echo(), result: &shown })?;
        if !decompose {
            value.as_object_mut().expect("object").remove("decomposition");
        }
        serde_json::to_writer_pretty(&mut out, &value)?;
        writeln!(out)?;
    } else if format.csv {
        let e = params.echo();
        let mut header = vec!["solver", "c", "gamma", "p", "value", "raw_cost"];
        let mut row = vec![
            result.solver.clone(),
            e.c.to_string(),
            e.gamma.to_string(),
            e.p.to_string(),
            result.value.to_string(),
            result.raw_cost.to_string(),
        ];
        if decompose {
            let d = &result.decomposition;
            header.extend(["localization", "missed", "false", "switching"]);
            row.extend([d.localization, d.missed, d.false_, d.switching].map(|v| v.to_string()));
        }
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(&header)?;
        wtr.write_record(&row)?;
        wtr.flush()?;
    } else {
        let e = params.echo();
        writeln!(out, "solver {}  c {}  gamma {}  p {}  base {}", result.solver, e.c, e.gamma, e.p, e.base)?;
        writeln!(out, "value {}", result.value)?;
        writeln!(out, "raw_cost {}", result.raw_cost)?;
        if let (Some(it), Some(conv)) = (result.iterations, result.converged) {
            writeln!(out, "iterations {it}  converged {conv}")?;
        }
        if decompose {
            let d = &result.decomposition;
            writeln!(out, "localization {}", d.localization)?;
            writeln!(out, "missed {}", d.missed)?;
            writeln!(out, "false {}", d.false_)?;
            writeln!(out, "switching {}", d.switching)?;
        }
        if let Some(a) = &result.assignments {
            for (k, pi) in a.iter().enumerate() {
                writeln!(out, "k={} pi={:?}", k + 1, pi)?;
            }
        }
        out.flush()?;
    }
    Ok(())
}

fn run_compute(args: &ComputeArgs) -> Result<()> {
    let params = args.metric.params()?;
    let (x, y) = read_sets(&args.input)?;
    if let Some(path) = &args.dump_lp {
        build_lp(&x, &y, &params)?.write_lp(path)?;
    }
    let solver = solver_from(args.solver, &args.admm);
    let result = match (&solver, &args.trace) {
        (Solver::Admm(cfg), Some(path)) => {
            let r = admm_metric(&x, &y, &params, cfg)?;
            r.write_trace_csv(path)?;
            MetricResult {
                solver: solver.name().to_string(),
                value: r.value,
                raw_cost: r.raw_cost,
                decomposition: r.decomposition,
                assignments: None,
                iterations: Some(r.iterations),
                converged: Some(r.converged),
            }
        }
        _ => compute_metric(&x, &y, &params, &solver)?,
    };
    print_result(&result, &params, args.decompose, &args.format)
}

fn run_oracle(args: &OracleArgs) -> Result<()> {
    let params = args.metric.params()?;
    let (x, y) = read_sets(&args.input)?;
    let result = compute_metric(&x, &y, &params, &Solver::BruteForce)?;
    print_result(&result, &params, args.decompose, &args.format)
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let mut config: ScenarioConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let set = generate_scenario(&config)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", set.to_json_string()?)?;
    out.flush()?;
    Ok(())
}

fn run_mc(args: &McArgs) -> Result<()> {
    if args.samples == 0 {
        return Err(MetricError::InvalidParams("samples must be positive".into()));
    }
    let config: McConfig = read_config(&args.config)?;
    let params = config.metric.params()?;
    let sampler = ScenarioPairSampler {
        y: config.scenario_y.clone().unwrap_or_else(|| config.scenario.clone()),
        x: config.scenario.clone(),
        model: config.pair_model,
        seed: config.seed,
    };
    let solver = solver_from(args.solver, &args.admm);
    let est = rfs_metric_mc(&sampler, &params, args.samples, &solver)?;
    let report = json!({
        "params": params.echo(),
        "solver": solver.name(),
        "seed": config.seed,
        "pair_model": config.pair_model,
        "estimate": est,
    });
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn run_bench(args: &BenchArgs) -> Result<()> {
    let mut grid: BenchGrid = read_config(&args.grid)?;
    if let Some(reps) = args.reps {
        grid.reps = reps;
    }
    let rows = benchmark_scaling(&grid)?;
    let out = output(args.out.as_deref())?;
    write_bench_csv(&rows, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Compute(a) => run_compute(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Mc(a) => run_mc(a),
        Command::Bench(a) => run_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
