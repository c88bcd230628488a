//! Scoring of allocations across methods and the suite summary.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::problem::{Allocation, RiskWeights};

/// Budget utilization window counted as "on budget".
pub const BUDGET_WINDOW: (f64, f64) = (0.95, 1.05);
/// Normalized objective counted as "near best".
pub const NORMALIZED_THRESHOLD: f64 = 0.95;
pub const KL_EPSILON: f64 = 1e-12;

/// `mu'z - q0 z'cz + q1 S(z) - q2 K(z)`; larger is better.
pub fn objective_value(z: &[f64], moments: &MomentSet, weights: RiskWeights) -> Result<f64> {
    let n = moments.n;
    if z.len() != n {
        return Err(Error::Shape(format!("{} entries for {n} assets", z.len())));
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    let mut skew = 0.0;
    let mut kurt = 0.0;
    for i in 0..n {
        mean += moments.mu[i] * z[i];
        for j in 0..n {
            let zij = z[i] * z[j];
            var += moments.cov[i][j] * zij;
            for k in 0..n {
                let zijk = zij * z[k];
                skew += moments.coskew[i][j][k] * zijk;
                for l in 0..n {
                    kurt += moments.cokurt[i][j][k][l] * zijk * z[l];
                }
            }
        }
    }
    Ok(mean - weights.q0 * var + weights.q1 * skew - weights.q2 * kurt)
}

/// `(v - min) / (max - min)`, or all ones when every value is equal.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        values.iter().map(|v| (v - min) / (max - min)).collect()
    } else {
        vec![1.0; values.len()]
    }
}

/// KL divergence of the capital fractions `z_i p_i / z'p` from uniform.
pub fn kl_vs_uniform(z: &[u64], prices: &[f64]) -> Result<f64> {
    if z.len() != prices.len() || z.is_empty() {
        return Err(Error::Shape(format!("{} counts for {} prices", z.len(), prices.len())));
    }
    let spend: Vec<f64> = z.iter().zip(prices).map(|(&k, p)| k as f64 * p).collect();
    let total: f64 = spend.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateAllocation);
    }
    let n = z.len() as f64;
    let smoothed: Vec<f64> = spend.iter().map(|s| s / total + KL_EPSILON).collect();
    let norm: f64 = smoothed.iter().sum();
    Ok(smoothed.iter().map(|q| q / norm).map(|q| q * (q * n).ln()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClassicalConstrained,
    ClassicalPenalty,
    Qaoa,
    HuboExact,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::ClassicalConstrained,
        Method::ClassicalPenalty,
        Method::Qaoa,
        Method::HuboExact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::ClassicalConstrained => "classical_constrained",
            Method::ClassicalPenalty => "classical_penalty",
            Method::Qaoa => "qaoa",
            Method::HuboExact => "hubo_exact",
        }
    }
}

/// One solved allocation before selection and normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub problem_id: usize,
    pub n_qubits: usize,
    pub capital: f64,
    pub method: Method,
    pub lambda: Option<f64>,
    pub allocation: Allocation,
    pub enhancement_factor: Option<f64>,
    /// Value of the compiled cost polynomial, for the penalized methods.
    pub penalized_cost: Option<f64>,
}

impl MethodResult {
    pub fn budget_utilization(&self) -> f64 {
        self.allocation.budget_used / self.capital
    }

    pub fn in_budget_window(&self) -> bool {
        in_window(self.budget_utilization())
    }
}

pub fn in_window(utilization: f64) -> bool {
    (BUDGET_WINDOW.0..=BUDGET_WINDOW.1).contains(&utilization)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub problem_id: usize,
    pub n_qubits: usize,
    pub method: Method,
    pub allocation: Allocation,
    pub objective: f64,
    pub normalized_objective: f64,
    pub budget_utilization: f64,
    pub lambda_used: Option<f64>,
    pub enhancement_factor: Option<f64>,
}

/// Counts for one method over the suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub problems: usize,
    pub budget_window: usize,
    pub near_best: usize,
    pub both: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub records: Vec<EvaluationRecord>,
    pub summary: Vec<MethodSummary>,
}

/// Selection key: in-window first, then larger objective. Earlier entries
/// win exact ties, so callers list lambdas in ascending order.
fn preferred(a: &MethodResult, b: &MethodResult) -> bool {
    match (a.in_budget_window(), b.in_budget_window()) {
        (true, false) => true,
        (false, true) => false,
        _ => a.allocation.objective > b.allocation.objective,
    }
}

/// Picks each method's best lambda per problem, normalizes objectives across
/// the methods present for that problem, and counts the summary rows.
pub fn compare_suite(results: &[MethodResult]) -> SuiteReport {
    let mut chosen: BTreeMap<usize, BTreeMap<Method, &MethodResult>> = BTreeMap::new();
    for r in results {
        let slot = chosen.entry(r.problem_id).or_default();
        match slot.get(&r.method) {
            Some(current) if !preferred(r, current) => {}
            _ => {
                slot.insert(r.method, r);
            }
        }
    }

    let mut records = Vec::new();
    for (problem_id, by_method) in &chosen {
        let values: Vec<f64> = by_method.values().map(|r| r.allocation.objective).collect();
        let normalized = min_max_normalize(&values);
        for ((method, r), norm) in by_method.iter().zip(normalized) {
            records.push(EvaluationRecord {
                problem_id: *problem_id,
                n_qubits: r.n_qubits,
                method: *method,
                allocation: r.allocation.clone(),
                objective: r.allocation.objective,
                normalized_objective: norm,
                budget_utilization: r.budget_utilization(),
                lambda_used: r.lambda,
                enhancement_factor: r.enhancement_factor,
            });
        }
    }

    let summary = Method::ALL
        .iter()
        .map(|&method| {
            let mine: Vec<&EvaluationRecord> = records.iter().filter(|r| r.method == method).collect();
            let window = |r: &&&EvaluationRecord| in_window(r.budget_utilization);
            let near = |r: &&&EvaluationRecord| r.normalized_objective >= NORMALIZED_THRESHOLD;
            MethodSummary {
                method,
                problems: mine.len(),
                budget_window: mine.iter().filter(window).count(),
                near_best: mine.iter().filter(near).count(),
                both: mine.iter().filter(|r| window(r) && near(r)).count(),
            }
        })
        .collect();
    SuiteReport { records, summary }
}

impl SuiteReport {
    /// Table with one column per method and rows `problems`,
    /// `budget_window`, `normalized_objective`, `both`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["row"];
        header.extend(self.summary.iter().map(|s| s.method.name()));
        w.write_record(&header)?;
        let rows: [(&str, fn(&MethodSummary) -> usize); 4] = [
            ("problems", |s| s.problems),
            ("budget_window", |s| s.budget_window),
            ("normalized_objective", |s| s.near_best),
            ("both", |s| s.both),
        ];
        for (name, get) in rows {
            let mut rec = vec![name.to_string()];
            rec.extend(self.summary.iter().map(|s| get(s).to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "problem_id",
            "n_qubits",
            "method",
            "z",
            "budget_used",
            "leftover",
            "objective",
            "normalized_objective",
            "budget_utilization",
            "lambda",
            "enhancement_factor",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            let z: Vec<String> = r.allocation.z.iter().map(u64::to_string).collect();
            w.write_record([
                r.problem_id.to_string(),
                r.n_qubits.to_string(),
                r.method.name().to_string(),
                z.join(" "),
                r.allocation.budget_used.to_string(),
                r.allocation.leftover.to_string(),
                r.objective.to_string(),
                r.normalized_objective.to_string(),
                r.budget_utilization.to_string(),
                opt(r.lambda_used),
                opt(r.enhancement_factor),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Population variance of the pointwise difference of two spectra.
pub fn difference_variance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("spectra of length {} and {}", a.len(), b.len())));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    Ok(d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64)
}

/// One problem's QUBO-versus-HUBO comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderComparison {
    pub problem_id: usize,
    pub n_qubits: usize,
    pub kl_qubo: f64,
    pub kl_hubo: f64,
    pub gates_qubo: usize,
    pub gates_hubo: usize,
    pub depth_qubo: usize,
    pub depth_hubo: usize,
    pub spectra_difference_variance: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn by_qubits(rows: &[OrderComparison]) -> BTreeMap<usize, Vec<&OrderComparison>> {
    let mut m: BTreeMap<usize, Vec<&OrderComparison>> = BTreeMap::new();
    for r in rows {
        m.entry(r.n_qubits).or_default().push(r);
    }
    m
}

/// `qubits,avg_kl_qubo,avg_kl_hubo`.
pub fn write_kl_csv<W: Write>(rows: &[OrderComparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["qubits", "avg_kl_qubo", "avg_kl_hubo"])?;
    for (q, group) in by_qubits(rows) {
        w.write_record([
            q.to_string(),
            mean(group.iter().map(|r| r.kl_qubo)).to_string(),
            mean(group.iter().map(|r| r.kl_hubo)).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `qubits,gates_qubo,gates_hubo,depth_qubo,depth_hubo`, averaged.
pub fn write_gates_csv<W: Write>(rows: &[OrderComparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["qubits", "gates_qubo", "gates_hubo", "depth_qubo", "depth_hubo"])?;
    for (q, group) in by_qubits(rows) {
        let avg = |f: fn(&OrderComparison) -> usize| mean(group.iter().map(|r| f(r) as f64)).to_string();
        w.write_record([
            q.to_string(),
            avg(|r| r.gates_qubo),
            avg(|r| r.gates_hubo),
            avg(|r| r.depth_qubo),
            avg(|r| r.depth_hubo),
        ])?;
    }
    w.flush()?;
    Ok(())
}
