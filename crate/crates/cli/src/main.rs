use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hubo_portfolio::optim::{OptimizerConfig, OptimizerKind};
use hubo_portfolio::pipeline::{self, ResultsFile, RunManifest, SolveMethod, SolveSettings};
use hubo_portfolio::problem::{GeneratorConfig, PortfolioProblem, ProblemOrder, DEFAULT_LAMBDA, LAMBDA_SWEEP};

#[derive(Parser)]
#[command(name = "hopo", version, about = "Higher-order portfolio optimization pipeline")]
struct Cli {
    /// Worker threads for per-problem parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a problem suite from a price CSV.
    Generate(GenerateArgs),
    /// Solve every problem with one method.
    Solve(SolveArgs),
    /// Score results files against each other.
    Compare(CompareArgs),
    /// Write the energy spectrum of one problem.
    Spectrum(SpectrumArgs),
    /// QUBO versus HUBO circuit size, allocation spread and spectra.
    CircuitMetrics(CircuitArgs),
    /// Run generate, solve and compare from a manifest.
    Run(RunArgs),
    /// Regenerate the bundled synthetic price fixtures.
    Fixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Classical,
    ClassicalPenalty,
    Exact,
    Qaoa,
}

impl From<MethodArg> for SolveMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Classical => SolveMethod::Classical,
            MethodArg::ClassicalPenalty => SolveMethod::ClassicalPenalty,
            MethodArg::Exact => SolveMethod::Exact,
            MethodArg::Qaoa => SolveMethod::Qaoa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Cmaes,
    NelderMead,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Qubo,
    Hubo,
}

impl From<OrderArg> for ProblemOrder {
    fn from(o: OrderArg) -> Self {
        match o {
            OrderArg::Qubo => ProblemOrder::Qubo,
            OrderArg::Hubo => ProblemOrder::Hubo,
        }
    }
}

#[derive(clap::Args)]
struct GenerateArgs {
    /// Long-format price CSV with a `date,ticker,close` header.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for problems.json and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    min_qubits: usize,
    #[arg(long, default_value_t = 15)]
    max_qubits: usize,
    /// Problems per qubit count.
    #[arg(long, default_value_t = 10)]
    per_qubits: usize,
    #[arg(long, default_value_t = 6000)]
    max_budget: u64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = OrderArg::Hubo)]
    order: OrderArg,
}

#[derive(clap::Args)]
struct QaoaArgs {
    /// QAOA layers.
    #[arg(long = "p", default_value_t = 1)]
    layers: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Cmaes)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.1)]
    sigma0: f64,
    #[arg(long, default_value_t = 500)]
    max_evals: usize,
    /// Estimate expectations from this many samples (0 = exact).
    #[arg(long, default_value_t = 0)]
    shots: usize,
    /// Mixed into every per-problem seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl QaoaArgs {
    fn settings(&self, lambdas: Vec<f64>) -> SolveSettings {
        SolveSettings {
            lambdas,
            layers: self.layers,
            shots: self.shots,
            optimizer: OptimizerConfig {
                kind: match self.optimizer {
                    OptimizerArg::Cmaes => OptimizerKind::Cmaes,
                    OptimizerArg::NelderMead => OptimizerKind::NelderMead,
                },
                sigma0: self.sigma0,
                max_evals: self.max_evals,
                ..OptimizerConfig::default()
            },
            seed: self.seed,
        }
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    #[arg(long)]
    problems: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Results JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Solve at this penalty weight instead of each problem's own.
    #[arg(long, conflicts_with = "lambda_sweep")]
    lambda: Option<f64>,
    /// Solve at every weight of the standard sweep.
    #[arg(long)]
    lambda_sweep: bool,
    /// Optimizer trace CSV (qaoa only).
    #[arg(long)]
    traces: Option<PathBuf>,
    #[command(flatten)]
    qaoa: QaoaArgs,
}

#[derive(clap::Args)]
struct CompareArgs {
    #[arg(long)]
    problems: PathBuf,
    /// Output directory for report.json, summary.csv and records.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    results: Vec<PathBuf>,
}

#[derive(clap::Args)]
struct SpectrumArgs {
    #[arg(long)]
    problems: PathBuf,
    #[arg(long)]
    id: usize,
    /// Keep only the k lowest energies.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    order: Option<OrderArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CircuitArgs {
    #[arg(long)]
    problems: PathBuf,
    /// Output directory for circuit_metrics.csv, gates.csv and kl.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long = "p", default_value_t = 1)]
    layers: usize,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Manifest JSON; written with defaults first if it does not exist.
    #[arg(long)]
    manifest: PathBuf,
    /// Price CSV used when creating a new manifest.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory used when creating a new manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_problems(path: &Path) -> Result<Vec<PortfolioProblem>> {
    pipeline::read_json(path).with_context(|| format!("reading problems from {}", path.display()))
}

fn generate(args: GenerateArgs) -> Result<()> {
    if args.min_qubits > args.max_qubits {
        bail!("--min-qubits exceeds --max-qubits");
    }
    let cfg = GeneratorConfig {
        seed: args.seed,
        counts: (args.min_qubits..=args.max_qubits)
            .map(|q| (q, args.per_qubits))
            .collect::<BTreeMap<_, _>>(),
        max_budget: args.max_budget,
        lambda: args.lambda,
        order: args.order.into(),
        ..GeneratorConfig::default()
    };
    let problems = pipeline::generate(&args.data, &cfg)?;
    fs::create_dir_all(&args.out)?;
    let mut manifest = RunManifest::new(&args.data, &args.out, args.seed);
    manifest.generator = cfg;
    pipeline::write_json(args.out.join("manifest.json"), &manifest)?;
    pipeline::write_json(args.out.join("problems.json"), &problems)?;
    log::info!("wrote {} problems to {}", problems.len(), args.out.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<()> {
    let problems = load_problems(&args.problems)?;
    let lambdas = match (args.lambda, args.lambda_sweep) {
        (Some(l), _) => vec![l],
        (None, true) => LAMBDA_SWEEP.to_vec(),
        (None, false) => Vec::new(),
    };
    let method = SolveMethod::from(args.method);
    let (results, traces) = pipeline::solve(&problems, method, &args.qaoa.settings(lambdas))?;
    let skipped = results.records.iter().filter(|r| r.message.is_some()).count();
    if skipped > 0 {
        log::warn!("{skipped} records skipped");
    }
    pipeline::write_json(&args.out, &results)?;
    if let Some(path) = args.traces {
        pipeline::write_traces_csv(path, &traces)?;
    }
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let problems = load_problems(&args.problems)?;
    let results = args
        .results
        .iter()
        .map(|p| pipeline::read_json::<ResultsFile>(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let report = pipeline::compare(&problems, &results)?;
    fs::create_dir_all(&args.out)?;
    pipeline::write_report(&args.out, &report)?;
    for s in &report.summary {
        println!(
            "{:<22} problems {:>3}  budget_window {:>3}  normalized>=0.95 {:>3}  both {:>3}",
            s.method.name(),
            s.problems,
            s.budget_window,
            s.near_best,
            s.both
        );
    }
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> Result<()> {
    let problems = load_problems(&args.problems)?;
    let mut problem = problems
        .into_iter()
        .find(|p| p.id == args.id)
        .with_context(|| format!("no problem with id {}", args.id))?;
    if let Some(l) = args.lambda {
        problem = problem.with_lambda(l);
    }
    if let Some(o) = args.order {
        problem = problem.with_order(o.into());
    }
    let s = pipeline::spectrum(&problem, args.k)?;
    s.write_csv(fs::File::create(&args.out)?)?;
    Ok(())
}

fn circuit_metrics(args: CircuitArgs) -> Result<()> {
    let mut problems = load_problems(&args.problems)?;
    if let Some(l) = args.lambda {
        problems = problems.iter().map(|p| p.with_lambda(l)).collect();
    }
    let rows = pipeline::order_comparison(&problems, args.layers)?;
    fs::create_dir_all(&args.out)?;
    pipeline::write_order_comparison(&args.out, &rows)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let manifest: RunManifest = if args.manifest.exists() {
        pipeline::read_json(&args.manifest)?
    } else {
        let (Some(data), Some(out)) = (args.data, args.out) else {
            bail!(
                "{} does not exist; pass --data and --out to create it",
                args.manifest.display()
            );
        };
        let m = RunManifest::new(data, out, args.seed);
        pipeline::write_json(&args.manifest, &m)?;
        m
    };
    let report = pipeline::run(&manifest)?;
    for s in &report.summary {
        println!("{:<22} problems {:>3}  both {:>3}", s.method.name(), s.problems, s.both);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Compare(a) => compare(a),
        Command::Spectrum(a) => spectrum(a),
        Command::CircuitMetrics(a) => circuit_metrics(a),
        Command::Run(a) => run(a),
        Command::Fixtures { out } => Ok(pipeline::write_fixtures(out)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
