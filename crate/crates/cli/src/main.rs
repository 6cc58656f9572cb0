//! `rankinfer`: simulate designs, estimate counterfactual revenue from bids,
//! optimize rank-based auctions and compare revenues.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or input error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use rankinfer::alloc::{AllocationRule, PositionWeights};
use rankinfer::equilibrium::{BidFormat, DistSpec};
use rankinfer::estimator::{compare_revenues, estimate_revenue, BidSample, EstimatorConfig, ZFunction};
use rankinfer::io::{read_bids, read_numbers, read_weights};
use rankinfer::optimize::{
    concave_hull, decompose_to_weights_sampler, optimal_rank_based, optimal_strict, revenue_of_weights,
    MultiUnitRevenueCurve,
};
use rankinfer::simulate::{
    builtin_design, classifier_error_rate, epsilon_sweep, run_design, write_csv, AuctionSpec, ClassifierSpec,
    DesignSpec, Sampling,
};
use rankinfer::Error;

#[derive(Parser)]
#[command(name = "rankinfer", version, about = "Counterfactual inference and design for rank-based auctions")]
struct Cli {
    /// Worker threads for Monte Carlo replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo design and write a CSV row plus a JSON result.
    Simulate(SimulateArgs),
    /// Estimate counterfactual revenue from a bid file.
    Estimate(EstimateArgs),
    /// Compute revenue-optimal weights from a multi-unit revenue curve.
    Optimize(OptimizeArgs),
    /// Run a design over several mixture weights and write a CSV table.
    Sweep(SweepArgs),
    /// Test whether one auction out-earns a multiple of another.
    Compare(CompareArgs),
}

#[derive(Args)]
struct DesignArgs {
    /// `builtin:K` (K in 1..4 or a built-in label) or a JSON design file.
    #[arg(long)]
    design: String,
    /// Number of agents.
    #[arg(long)]
    n: Option<usize>,
    /// Bid sample size.
    #[arg(long = "N")]
    big_n: Option<usize>,
    /// Monte Carlo replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Master seed.
    #[arg(long, env = "RANKINFER_SEED")]
    seed: Option<u64>,
    /// Quantile grid size for equilibrium bids and true revenues.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Use the truncated estimator.
    #[arg(long, conflicts_with = "no_truncate")]
    truncate: bool,
    /// Use the untruncated estimator.
    #[arg(long)]
    no_truncate: bool,
    /// Bid format: all-pay or first-price.
    #[arg(long)]
    format: Option<BidFormat>,
    /// Draw bids by resampling grid bids (default) or by exact quantiles.
    #[arg(long, value_parser = parse_sampling)]
    sampling: Option<Sampling>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Mixture weight of auction B in the incumbent.
    #[arg(long)]
    eps: Option<f64>,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON result path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    design: DesignArgs,
    /// Comma-separated mixture weights.
    #[arg(long, value_delimiter = ',', required = true)]
    eps: Vec<f64>,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Bid file: one bid per line, a single-column CSV, or a JSON array.
    #[arg(long)]
    bids: PathBuf,
    /// Incumbent weights: `unit:K`, `stair`, `universal-b` or a weight file.
    #[arg(long)]
    incumbent: String,
    /// Counterfactual weights, same forms as `--incumbent`.
    #[arg(long)]
    counterfactual: String,
    /// Number of agents, required when no weight file fixes it.
    #[arg(long)]
    n: Option<usize>,
    /// Bid format: all-pay or first-price.
    #[arg(long, default_value = "all-pay")]
    format: BidFormat,
    /// Use the untruncated estimator.
    #[arg(long)]
    no_truncate: bool,
    /// Fixed truncation fraction instead of the default rule.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// File with the multi-unit revenues `P_0..=P_n`.
    #[arg(long)]
    revenues: PathBuf,
    /// Environment weights: `unit:K`, `stair`, `universal-b` or a weight file.
    #[arg(long)]
    env: String,
    /// Strictness weights `eps w`; enables the strictly monotone optimum.
    #[arg(long)]
    strict: Option<String>,
    /// Sample one decomposition into rank operations and include its log.
    #[arg(long)]
    sample_ops: bool,
    /// Seed for sampling the decomposition.
    #[arg(long, env = "RANKINFER_SEED", default_value_t = 0)]
    seed: u64,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Incumbent weights: `unit:K`, `stair`, `universal-b` or a weight file.
    #[arg(long)]
    incumbent: String,
    /// Candidate auction whose revenue is tested.
    #[arg(long)]
    b1: String,
    /// Reference auction, scaled by `--alpha`.
    #[arg(long)]
    b2: String,
    /// Multiple of the reference revenue that B1 must beat.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Number of agents, required when no weight file fixes it.
    #[arg(long)]
    n: Option<usize>,
    /// Observed bids; when given, the verdict on these bids is reported.
    #[arg(long)]
    bids: Option<PathBuf>,
    /// Value distribution for the error-rate simulation: `beta:A,B`, `uniform` or `table:PATH`.
    #[arg(long, default_value = "beta:2,2")]
    dist: String,
    /// Sample size for the error-rate simulation (default: bid count or 1000).
    #[arg(long = "N")]
    big_n: Option<usize>,
    /// Replications for the error-rate simulation.
    #[arg(long, default_value_t = 1000)]
    replications: usize,
    /// Seed for the error-rate simulation.
    #[arg(long, env = "RANKINFER_SEED", default_value_t = 0)]
    seed: u64,
    /// Bid format: all-pay or first-price.
    #[arg(long, default_value = "all-pay")]
    format: BidFormat,
    /// Use the untruncated estimator.
    #[arg(long)]
    no_truncate: bool,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Numeric(anyhow::Error),
}

fn is_numeric(e: &Error) -> bool {
    match e {
        Error::Singular { .. } | Error::SampleTooSmall { .. } | Error::DegenerateIncumbent(_) | Error::Unsupported(_) => {
            true
        }
        Error::Design { source, .. } => is_numeric(source),
        _ => false,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if is_numeric(&e) {
            Failure::Numeric(e.into())
        } else {
            Failure::Usage(e.into())
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_sampling(s: &str) -> Result<Sampling, String> {
    match s {
        "grid-resample" | "grid" => Ok(Sampling::GridResample),
        "quantile" => Ok(Sampling::Quantile),
        other => Err(format!("unknown sampling mode {other:?}; use grid-resample or quantile")),
    }
}

fn parse_dist(s: &str) -> CliResult<DistSpec> {
    if s == "uniform" {
        return Ok(DistSpec::Uniform([]));
    }
    if let Some(rest) = s.strip_prefix("beta:") {
        let ab: Vec<f64> = rest
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| usage(format!("bad beta parameters {rest:?}")))?;
        if ab.len() != 2 {
            return Err(usage("beta needs two parameters, e.g. beta:2,2"));
        }
        return Ok(DistSpec::Beta([ab[0], ab[1]]));
    }
    if let Some(path) = s.strip_prefix("table:") {
        require_file(Path::new(path))?;
        return Ok(DistSpec::Table(path.into()));
    }
    Err(usage(format!("unknown distribution {s:?}; use beta:A,B, uniform or table:PATH")))
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

/// A weight argument before `n` is known.
enum WeightArg {
    Spec(AuctionSpec),
    File(PositionWeights),
}

impl WeightArg {
    fn parse(s: &str) -> CliResult<Self> {
        if let Some(k) = s.strip_prefix("unit:") {
            let k = k.parse().map_err(|_| usage(format!("bad unit count in {s:?}")))?;
            return Ok(WeightArg::Spec(AuctionSpec::Units(k)));
        }
        match s {
            "stair" | "uniform-stair" => Ok(WeightArg::Spec(AuctionSpec::UniformStair)),
            "universal-b" => Ok(WeightArg::Spec(AuctionSpec::UniversalB)),
            path => {
                require_file(Path::new(path))?;
                Ok(WeightArg::File(read_weights(Path::new(path))?))
            }
        }
    }

    fn file_n(&self) -> Option<usize> {
        match self {
            WeightArg::File(w) => Some(w.n()),
            WeightArg::Spec(_) => None,
        }
    }

    fn spec(&self) -> AuctionSpec {
        match self {
            WeightArg::Spec(s) => s.clone(),
            WeightArg::File(w) => AuctionSpec::Weights(w.as_slice().to_vec()),
        }
    }

    fn weights(&self, n: usize) -> CliResult<PositionWeights> {
        let w = match self {
            WeightArg::Spec(s) => s.weights(n)?,
            WeightArg::File(w) => w.clone(),
        };
        if w.n() != n {
            return Err(usage(format!("weights have n = {} but n = {n} is in use", w.n())));
        }
        Ok(w)
    }
}

/// The agent count implied by weight files, checked against `--n`.
fn resolve_n(flag: Option<usize>, args: &[&WeightArg]) -> CliResult<usize> {
    let mut n = flag;
    for a in args {
        if let Some(m) = a.file_n() {
            match n {
                Some(k) if k != m => return Err(usage(format!("weight file has n = {m} but n = {k} is in use"))),
                _ => n = Some(m),
            }
        }
    }
    n.ok_or_else(|| usage("--n is required when no weight file is given"))
}

fn load_design(args: &DesignArgs) -> CliResult<DesignSpec> {
    let mut spec = if let Some(name) = args.design.strip_prefix("builtin:") {
        builtin_design(name).ok_or_else(|| usage(format!("unknown built-in design {name:?}")))?
    } else {
        let path = Path::new(&args.design);
        require_file(path)?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(Failure::Usage)?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing design {}", path.display()))
            .map_err(Failure::Usage)?
    };
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(big_n) = args.big_n {
        spec.big_n = big_n;
    }
    if let Some(r) = args.replications {
        spec.replications = r;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(g) = args.grid_size {
        spec.grid_size = g;
    }
    if args.truncate {
        spec.truncate = true;
    }
    if args.no_truncate {
        spec.truncate = false;
    }
    if let Some(f) = args.format {
        spec.format = f;
    }
    if let Some(s) = args.sampling {
        spec.sampling = s;
    }
    spec.validate()?;
    Ok(spec)
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display())).map_err(Failure::Usage)?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> CliResult<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure::Numeric(e.into()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Failure::Usage(e.into()))
}

fn cmd_simulate(args: SimulateArgs) -> CliResult<()> {
    let mut spec = load_design(&args.design)?;
    if args.eps.is_some() {
        spec.eps = args.eps;
        spec.validate()?;
    }
    let result = run_design(&spec)?;
    write_csv(std::slice::from_ref(&result), output(args.out.as_deref())?)?;
    if let Some(path) = &args.json {
        let value = json!({ "spec": spec, "result": result });
        write_json(Some(path), &value)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let spec = load_design(&args.design)?;
    if let Some(e) = args.eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        return Err(usage(format!("eps must lie in [0, 1], got {e}")));
    }
    let rows = epsilon_sweep(&spec, &args.eps)?;
    write_csv(&rows, output(args.out.as_deref())?)?;
    Ok(())
}

fn estimator_config(no_truncate: bool, delta: Option<f64>) -> CliResult<EstimatorConfig> {
    if let Some(d) = delta {
        if !(0.0..=0.5).contains(&d) {
            return Err(usage(format!("--delta must lie in [0, 1/2], got {d}")));
        }
        if no_truncate {
            return Err(usage("--delta conflicts with --no-truncate"));
        }
    }
    let mut cfg = if no_truncate { EstimatorConfig::untruncated() } else { EstimatorConfig::default() };
    cfg.delta_override = delta;
    Ok(cfg)
}

fn load_bids(path: &Path, format: BidFormat) -> CliResult<BidSample> {
    require_file(path)?;
    let bids = read_bids(path)?;
    if bids.len() < 2 {
        return Err(usage(format!("{} holds {} bids; at least 2 are needed", path.display(), bids.len())));
    }
    Ok(BidSample::new(bids, format)?)
}

fn cmd_estimate(args: EstimateArgs) -> CliResult<()> {
    require_file(&args.bids)?;
    let x = WeightArg::parse(&args.incumbent)?;
    let y = WeightArg::parse(&args.counterfactual)?;
    let n = resolve_n(args.n, &[&x, &y])?;
    let cfg = estimator_config(args.no_truncate, args.delta)?;
    let sample = load_bids(&args.bids, args.format)?;
    let xr = AllocationRule::from_weights(&x.weights(n)?, args.incumbent.clone());
    let yr = AllocationRule::from_weights(&y.weights(n)?, args.counterfactual.clone());
    let result = estimate_revenue(&sample, &ZFunction::revenue(&xr, &yr)?, &cfg)?;
    let value = json!({
        "value": result.value,
        "delta_used": result.delta,
        "l_index": result.l_index,
        "upper_index": result.upper_index,
        "N": sample.len(),
        "n": n,
        "format": args.format,
        "bounds": result.bounds,
    });
    write_json(None, &value)
}

fn cmd_optimize(args: OptimizeArgs) -> CliResult<()> {
    require_file(&args.revenues)?;
    let env = WeightArg::parse(&args.env)?;
    let strict = args.strict.as_deref().map(WeightArg::parse).transpose()?;
    let p = MultiUnitRevenueCurve::new(read_numbers(&args.revenues)?)?;
    let n = p.n();
    let env = env.weights(n)?;
    let weights = match &strict {
        Some(s) => {
            let floor = s.weights(n)?;
            if !floor.is_feasible_for(&env)? {
                return Err(usage("strictness weights are not feasible for the environment"));
            }
            optimal_strict(&env, &floor, &p)?
        }
        None => optimal_rank_based(&env, &p)?,
    };
    let hull = concave_hull(&p);
    let mut value = json!({
        "weights": weights.as_slice(),
        "revenue": revenue_of_weights(&weights, &p)?,
        "ironed_revenues": hull.pbar,
        "ironed_intervals": hull.intervals,
    });
    if args.sample_ops {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let d = decompose_to_weights_sampler(&env, &weights, &mut rng)?;
        value["operations"] = json!(d.operations);
        value["realized_weights"] = json!(d.weights.as_slice());
    }
    write_json(args.out.as_deref(), &value)
}

fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    if let Some(b) = &args.bids {
        require_file(b)?;
    }
    let x = WeightArg::parse(&args.incumbent)?;
    let b1 = WeightArg::parse(&args.b1)?;
    let b2 = WeightArg::parse(&args.b2)?;
    let n = resolve_n(args.n, &[&x, &b1, &b2])?;
    let (w1, w2) = (b1.weights(n)?, b2.weights(n)?);
    if w1 == w2 && args.alpha == 1.0 {
        return Err(usage("b1 and b2 coincide with alpha = 1: the revenue gap is zero"));
    }
    let dist = parse_dist(&args.dist)?;
    let cfg = estimator_config(args.no_truncate, None)?;
    let sample = args.bids.as_deref().map(|p| load_bids(p, args.format)).transpose()?;
    let verdict = match &sample {
        Some(s) => {
            let xr = AllocationRule::from_weights(&x.weights(n)?, "incumbent");
            let y1 = AllocationRule::from_weights(&w1, "b1");
            let y2 = AllocationRule::from_weights(&w2, "b2");
            Some(compare_revenues(s, &xr, &y1, &y2, args.alpha, &cfg)?)
        }
        None => None,
    };
    let spec = ClassifierSpec {
        n,
        big_n: args.big_n.or(sample.as_ref().map(BidSample::len)).unwrap_or(1000),
        dist,
        incumbent: x.spec(),
        b1: b1.spec(),
        b2: b2.spec(),
        alpha: args.alpha,
        format: args.format,
        truncate: !args.no_truncate,
        replications: args.replications,
        seed: args.seed,
        grid_size: rankinfer::equilibrium::DEFAULT_GRID,
        sampling: Sampling::GridResample,
    };
    let rate = classifier_error_rate(&spec)?;
    let value = json!({
        "verdict": verdict,
        "true_gap": rate.gap,
        "true_verdict": rate.truth,
        "error_rate": rate.error_rate,
        "replications": rate.replications,
        "N": spec.big_n,
    });
    write_json(None, &value)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::Usage(e.into()))?;
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(1)
        }
    }
}
