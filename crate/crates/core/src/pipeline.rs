//! End-to-end stages: generate problems, solve them with each method,
//! compare the results, and emit the QUBO-versus-HUBO circuit report.
//!
//! Every stage is a pure function of its inputs and the manifest seed, and
//! per-problem work runs in parallel with results kept in problem-id order,
//! so reruns write byte-identical files regardless of thread count.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baseline::{solve_classical, BaselineMode};
use crate::error::{Error, Result};
use crate::eval_report::{
    compare_suite, difference_variance, kl_vs_uniform, write_gates_csv, write_kl_csv, Method, MethodResult,
    OrderComparison, SuiteReport,
};
use crate::exact::{energies, full_spectrum, k_smallest, solve_exact, Spectrum};
use crate::market_data::{load_price_csv, write_price_csv};
use crate::optim::{run_qaoa, OptimizerConfig};
use crate::problem::{
    compile, generate_problems, Allocation, CompiledProblem, GeneratorConfig, PortfolioProblem, ProblemOrder,
    LAMBDA_SWEEP,
};
use crate::qaoa::{synthesize_circuit, QaoaConfig, QaoaResult};
use crate::seed::substream;
use crate::synthetic::{synthetic_universe, two_asset_universe, UniverseConfig, TWO_ASSET_DAYS, TWO_ASSET_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Classical,
    ClassicalPenalty,
    Exact,
    Qaoa,
}

impl SolveMethod {
    pub const ALL: [SolveMethod; 4] = [
        SolveMethod::Classical,
        SolveMethod::ClassicalPenalty,
        SolveMethod::Exact,
        SolveMethod::Qaoa,
    ];

    pub fn method(self) -> Method {
        match self {
            SolveMethod::Classical => Method::ClassicalConstrained,
            SolveMethod::ClassicalPenalty => Method::ClassicalPenalty,
            SolveMethod::Exact => Method::HuboExact,
            SolveMethod::Qaoa => Method::Qaoa,
        }
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            SolveMethod::Classical => "classical",
            SolveMethod::ClassicalPenalty => "classical_penalty",
            SolveMethod::Exact => "exact",
            SolveMethod::Qaoa => "qaoa",
        }
    }

    fn uses_lambda(self) -> bool {
        matches!(self, SolveMethod::Exact | SolveMethod::Qaoa)
    }
}

/// Settings shared by the penalized solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    /// Penalty weights to solve at; empty means each problem's own lambda.
    pub lambdas: Vec<f64>,
    pub layers: usize,
    pub shots: usize,
    pub optimizer: OptimizerConfig,
    /// Mixed into every per-problem seed.
    pub seed: u64,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self {
            lambdas: LAMBDA_SWEEP.to_vec(),
            layers: 1,
            shots: 0,
            optimizer: OptimizerConfig::default(),
            seed: 0,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub data: PathBuf,
    pub output: PathBuf,
    pub generator: GeneratorConfig,
    pub solve: SolveSettings,
    pub methods: Vec<SolveMethod>,
}

impl RunManifest {
    pub fn new(data: impl Into<PathBuf>, output: impl Into<PathBuf>, seed: u64) -> Self {
        Self {
            seed,
            data: data.into(),
            output: output.into(),
            generator: GeneratorConfig {
                seed,
                ..Default::default()
            },
            solve: SolveSettings {
                seed,
                ..Default::default()
            },
            methods: SolveMethod::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Ok,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub problem_id: usize,
    pub lambda: Option<f64>,
    pub status: SolveStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub allocation: Option<Allocation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bitstring: Option<String>,
    /// Cost including the budget penalty at this record's lambda (or the
    /// problem's lambda for classical records).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub penalized_cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub qaoa: Option<QaoaResult>,
}

impl SolveRecord {
    fn skipped(problem_id: usize, lambda: Option<f64>, message: String) -> Self {
        Self {
            problem_id,
            lambda,
            status: SolveStatus::Skipped,
            message: Some(message),
            allocation: None,
            bitstring: None,
            penalized_cost: None,
            weights: None,
            converged: None,
            qaoa: None,
        }
    }

    fn ok(problem_id: usize, lambda: Option<f64>, allocation: Allocation) -> Self {
        Self {
            status: SolveStatus::Ok,
            message: None,
            allocation: Some(allocation),
            ..Self::skipped(problem_id, lambda, String::new())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub method: SolveMethod,
    pub records: Vec<SolveRecord>,
}

/// One optimizer evaluation for the trace CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub problem_id: usize,
    pub lambda: f64,
    pub eval_index: usize,
    pub value: f64,
    pub best_so_far: f64,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads the price data and samples the problem suite.
pub fn generate(data: impl AsRef<Path>, cfg: &GeneratorConfig) -> Result<Vec<PortfolioProblem>> {
    let universe = load_price_csv(data)?;
    generate_problems(&universe, cfg)
}

fn penalty_cost(problem: &PortfolioProblem, a: &Allocation) -> f64 {
    -a.objective + problem.lambda * (a.budget_used - problem.capital).powi(2)
}

/// Solves every problem with `method`. Problems beyond a solver's resource
/// guard are recorded as skipped.
pub fn solve(
    problems: &[PortfolioProblem],
    method: SolveMethod,
    settings: &SolveSettings,
) -> Result<(ResultsFile, Vec<TraceRow>)> {
    let per_problem: Vec<(Vec<SolveRecord>, Vec<TraceRow>)> = problems
        .par_iter()
        .map(|p| solve_one(p, method, settings))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut traces = Vec::new();
    for (r, t) in per_problem {
        records.extend(r);
        traces.extend(t);
    }
    Ok((ResultsFile { method, records }, traces))
}

fn solve_one(
    problem: &PortfolioProblem,
    method: SolveMethod,
    settings: &SolveSettings,
) -> Result<(Vec<SolveRecord>, Vec<TraceRow>)> {
    let seed = substream(problem.seed ^ settings.seed, method.file_stem());
    if !method.uses_lambda() {
        let mode = match method {
            SolveMethod::Classical => BaselineMode::Constrained,
            _ => BaselineMode::Penalty,
        };
        let sol = solve_classical(problem, mode, substream(seed, "baseline"))?;
        let mut rec = SolveRecord::ok(problem.id, None, sol.allocation.clone());
        rec.penalized_cost = Some(penalty_cost(problem, &sol.allocation));
        rec.weights = Some(sol.continuous.weights);
        rec.converged = Some(sol.continuous.converged);
        return Ok((vec![rec], Vec::new()));
    }

    let lambdas = if settings.lambdas.is_empty() {
        vec![problem.lambda]
    } else {
        settings.lambdas.clone()
    };
    let mut records = Vec::with_capacity(lambdas.len());
    let mut traces = Vec::new();
    for lambda in lambdas {
        let cp = compile(&problem.with_lambda(lambda))?;
        let outcome = match method {
            SolveMethod::Exact => solve_exact_record(&cp, lambda),
            _ => solve_qaoa_record(&cp, lambda, settings, seed, &mut traces),
        };
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e @ Error::ResourceLimit { .. }) => {
                records.push(SolveRecord::skipped(problem.id, Some(lambda), e.to_string()))
            }
            Err(e) => return Err(e),
        }
    }
    Ok((records, traces))
}

fn solve_exact_record(cp: &CompiledProblem, lambda: f64) -> Result<SolveRecord> {
    let sol = solve_exact(cp)?;
    let mut rec = SolveRecord::ok(cp.problem.id, Some(lambda), sol.allocation);
    rec.bitstring = Some(sol.bitstring);
    rec.penalized_cost = Some(sol.energy);
    Ok(rec)
}

fn solve_qaoa_record(
    cp: &CompiledProblem,
    lambda: f64,
    settings: &SolveSettings,
    seed: u64,
    traces: &mut Vec<TraceRow>,
) -> Result<SolveRecord> {
    let qcfg = QaoaConfig {
        layers: settings.layers,
        initial_params: None,
        seed: substream(seed, "initializer"),
        shots: settings.shots,
    };
    let ocfg = OptimizerConfig {
        seed: substream(seed, "optimizer"),
        ..settings.optimizer.clone()
    };
    let (result, trace) = run_qaoa(cp, &qcfg, &ocfg)?;
    let index = result.best_index();
    let mut rec = SolveRecord::ok(cp.problem.id, Some(lambda), cp.decode_index(index)?);
    rec.bitstring = Some(result.best_bitstring.clone());
    rec.penalized_cost = Some(cp.energy(index));
    rec.qaoa = Some(result);
    for (i, (e, best)) in trace.evaluations.iter().zip(trace.best_so_far()).enumerate() {
        traces.push(TraceRow {
            problem_id: cp.problem.id,
            lambda,
            eval_index: i,
            value: e.value,
            best_so_far: best,
        });
    }
    Ok(rec)
}

pub fn write_traces_csv(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["problem_id", "lambda", "eval_index", "value", "best_so_far"])?;
    for r in rows {
        w.write_record([
            r.problem_id.to_string(),
            r.lambda.to_string(),
            r.eval_index.to_string(),
            r.value.to_string(),
            r.best_so_far.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Joins results files with their problems and scores them.
pub fn compare(problems: &[PortfolioProblem], results: &[ResultsFile]) -> Result<SuiteReport> {
    if results.is_empty() {
        return Err(Error::Join("no results to compare".into()));
    }
    let by_id: BTreeMap<usize, &PortfolioProblem> = problems.iter().map(|p| (p.id, p)).collect();
    let mut covered: Option<(SolveMethod, BTreeSet<usize>)> = None;
    let mut rows = Vec::new();
    for file in results {
        if file.records.is_empty() {
            return Err(Error::Join(format!("{} results are empty", file.method.file_stem())));
        }
        let ids: BTreeSet<usize> = file.records.iter().map(|r| r.problem_id).collect();
        if let Some((m, first)) = &covered {
            if *first != ids {
                return Err(Error::Join(format!(
                    "{} and {} results cover different problems",
                    m.file_stem(),
                    file.method.file_stem()
                )));
            }
        } else {
            covered = Some((file.method, ids));
        }
        for r in &file.records {
            let p = by_id
                .get(&r.problem_id)
                .ok_or_else(|| Error::Join(format!("unknown problem id {}", r.problem_id)))?;
            let Some(allocation) = r.allocation.clone() else {
                continue;
            };
            rows.push(MethodResult {
                problem_id: r.problem_id,
                n_qubits: p.n_qubits(),
                capital: p.capital,
                method: file.method.method(),
                lambda: r.lambda,
                allocation,
                enhancement_factor: r.qaoa.as_ref().map(|q| q.enhancement_factor),
                penalized_cost: r.penalized_cost,
            });
        }
    }
    Ok(compare_suite(&rows))
}

/// QUBO versus HUBO: exact allocations (KL from uniform), circuit size and
/// the variance of the spectrum difference, per problem.
pub fn order_comparison(problems: &[PortfolioProblem], layers: usize) -> Result<Vec<OrderComparison>> {
    problems
        .par_iter()
        .map(|p| {
            let hubo = compile(&p.with_order(ProblemOrder::Hubo))?;
            let qubo = compile(&p.with_order(ProblemOrder::Qubo))?;
            let params = vec![0.1; 2 * layers];
            let ch = synthesize_circuit(&hubo, &params)?;
            let cq = synthesize_circuit(&qubo, &params)?;
            let kl = |cp: &CompiledProblem| -> Result<f64> {
                let z = solve_exact(cp)?.allocation.z;
                match kl_vs_uniform(&z, &p.prices) {
                    Err(Error::DegenerateAllocation) => Ok(0.0),
                    other => other,
                }
            };
            Ok(OrderComparison {
                problem_id: p.id,
                n_qubits: hubo.n_qubits,
                kl_qubo: kl(&qubo)?,
                kl_hubo: kl(&hubo)?,
                gates_qubo: cq.metrics.total,
                gates_hubo: ch.metrics.total,
                depth_qubo: cq.metrics.depth,
                depth_hubo: ch.metrics.depth,
                spectra_difference_variance: difference_variance(
                    &energies(&hubo.binary_poly, hubo.n_qubits)?,
                    &energies(&qubo.binary_poly, qubo.n_qubits)?,
                )?,
            })
        })
        .collect()
}

pub fn write_order_comparison(dir: impl AsRef<Path>, rows: &[OrderComparison]) -> Result<()> {
    let dir = dir.as_ref();
    let mut w = csv::Writer::from_path(dir.join("circuit_metrics.csv"))?;
    w.write_record([
        "problem_id",
        "n_qubits",
        "gates_qubo",
        "gates_hubo",
        "depth_qubo",
        "depth_hubo",
        "kl_qubo",
        "kl_hubo",
        "spectra_difference_variance",
    ])?;
    for r in rows {
        w.write_record([
            r.problem_id.to_string(),
            r.n_qubits.to_string(),
            r.gates_qubo.to_string(),
            r.gates_hubo.to_string(),
            r.depth_qubo.to_string(),
            r.depth_hubo.to_string(),
            r.kl_qubo.to_string(),
            r.kl_hubo.to_string(),
            r.spectra_difference_variance.to_string(),
        ])?;
    }
    w.flush()?;
    write_gates_csv(rows, fs::File::create(dir.join("gates.csv"))?)?;
    write_kl_csv(rows, fs::File::create(dir.join("kl.csv"))?)?;
    Ok(())
}

/// Full or truncated spectrum of one problem.
pub fn spectrum(problem: &PortfolioProblem, k: Option<usize>) -> Result<Spectrum> {
    let cp = compile(problem)?;
    match k {
        Some(k) => k_smallest(&cp, k),
        None => full_spectrum(&cp),
    }
}

pub fn write_report(dir: impl AsRef<Path>, report: &SuiteReport) -> Result<()> {
    let dir = dir.as_ref();
    write_json(dir.join("report.json"), report)?;
    report.write_summary_csv(fs::File::create(dir.join("summary.csv"))?)?;
    report.write_records_csv(fs::File::create(dir.join("records.csv"))?)?;
    Ok(())
}

pub fn results_path(dir: impl AsRef<Path>, method: SolveMethod) -> PathBuf {
    dir.as_ref().join(format!("results_{}.json", method.file_stem()))
}

/// Runs every stage of `manifest` and writes all outputs to its output
/// directory.
pub fn run(manifest: &RunManifest) -> Result<SuiteReport> {
    let out = &manifest.output;
    fs::create_dir_all(out)?;
    write_json(out.join("manifest.json"), manifest)?;
    let problems = generate(&manifest.data, &manifest.generator)?;
    write_json(out.join("problems.json"), &problems)?;
    let mut results = Vec::new();
    for &method in &manifest.methods {
        let (file, traces) = solve(&problems, method, &manifest.solve)?;
        write_json(results_path(out, method), &file)?;
        if method == SolveMethod::Qaoa {
            write_traces_csv(out.join("qaoa_traces.csv"), &traces)?;
        }
        results.push(file);
    }
    let report = compare(&problems, &results)?;
    write_report(out, &report)?;
    Ok(report)
}

/// File names of the bundled fixtures, in [`write_fixtures`] order.
pub const FIXTURE_FILES: [&str; 2] = ["djia_synthetic.csv", "two_asset.csv"];

/// Regenerates the bundled price fixtures into `dir`.
pub fn write_fixtures(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let universe = synthetic_universe(&UniverseConfig::default())?;
    write_price_csv(fs::File::create(dir.join(FIXTURE_FILES[0]))?, &universe)?;
    let pair = two_asset_universe(TWO_ASSET_SEED, TWO_ASSET_DAYS)?;
    write_price_csv(fs::File::create(dir.join(FIXTURE_FILES[1]))?, &pair)?;
    Ok(())
}
