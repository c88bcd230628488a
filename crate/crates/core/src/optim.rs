//! Derivative-free minimizers for the QAOA parameter loop.
//!
//! CMA-ES follows the (mu/mu_w, lambda) scheme with the textbook default
//! strategy parameters for dimension `d`:
//!
//! ```text
//! lambda = 4 + floor(3 ln d)            mu = floor(lambda / 2)
//! w_i    ~ ln((lambda + 1) / 2) - ln i  (normalized), mu_eff = 1 / sum w_i^2
//! c_sigma = (mu_eff + 2) / (d + mu_eff + 5)
//! d_sigma = 1 + 2 max(0, sqrt((mu_eff - 1) / (d + 1)) - 1) + c_sigma
//! c_c     = (4 + mu_eff / d) / (d + 4 + 2 mu_eff / d)
//! c_1     = 2 / ((d + 1.3)^2 + mu_eff)
//! c_mu    = min(1 - c_1, 2 (mu_eff - 2 + 1 / mu_eff) / ((d + 2)^2 + mu_eff))
//! ```
//!
//! Both optimizers evaluate the starting point first and stop when the
//! evaluation budget is spent or the best value improved by less than
//! `tolerance` over the last 20 iterations.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{format_bitstring, CompiledProblem};
use crate::qaoa::{enhancement_factor, most_probable, top_states, QaoaConfig, QaoaResult, QaoaSimulator};
use crate::seed::substream;

const STAGNATION_WINDOW: usize = 20;
const TOP_STATES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Cmaes,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    /// Initial CMA-ES step size; also the Nelder-Mead simplex edge.
    pub sigma0: f64,
    pub max_evals: usize,
    pub seed: u64,
    /// Minimum improvement of the best value over the stagnation window.
    /// Zero disables the stagnation test.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Cmaes,
            sigma0: 0.1,
            max_evals: 500,
            seed: 0,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub evaluations: Vec<Evaluation>,
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub eval_count: usize,
}

impl OptimizationTrace {
    /// Running minimum after each evaluation.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.evaluations
            .iter()
            .scan(f64::INFINITY, |best, e| {
                *best = best.min(e.value);
                Some(*best)
            })
            .collect()
    }

    /// Writes `eval_index,value,best_so_far` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["eval_index", "value", "best_so_far"])?;
        for (i, (e, b)) in self.evaluations.iter().zip(self.best_so_far()).enumerate() {
            w.write_record([i.to_string(), e.value.to_string(), b.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Records evaluations and enforces the budget.
struct Recorder<F> {
    f: F,
    max_evals: usize,
    evaluations: Vec<Evaluation>,
    best: Option<usize>,
}

impl<F: FnMut(&[f64]) -> f64> Recorder<F> {
    fn new(f: F, max_evals: usize) -> Self {
        Self {
            f,
            max_evals,
            evaluations: Vec::new(),
            best: None,
        }
    }

    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.evaluations.len() >= self.max_evals {
            return Ok(None);
        }
        let value = (self.f)(x);
        if !value.is_finite() {
            return Err(Error::Objective {
                params: x.to_vec(),
                value,
            });
        }
        self.evaluations.push(Evaluation {
            params: x.to_vec(),
            value,
        });
        if self.best.is_none_or(|b| value < self.evaluations[b].value) {
            self.best = Some(self.evaluations.len() - 1);
        }
        Ok(Some(value))
    }

    fn best_value(&self) -> f64 {
        self.best.map_or(f64::INFINITY, |b| self.evaluations[b].value)
    }

    fn finish(self) -> OptimizationTrace {
        let best = &self.evaluations[self.best.expect("at least one evaluation")];
        OptimizationTrace {
            best_params: best.params.clone(),
            best_value: best.value,
            eval_count: self.evaluations.len(),
            evaluations: self.evaluations,
        }
    }
}

/// Tracks the best value per iteration for the stagnation test.
struct Stagnation {
    tolerance: f64,
    history: Vec<f64>,
}

impl Stagnation {
    fn stalled(&mut self, best: f64) -> bool {
        self.history.push(best);
        let n = self.history.len();
        n > STAGNATION_WINDOW && self.history[n - 1 - STAGNATION_WINDOW] - best < self.tolerance
    }
}

fn check(x0: &[f64], cfg: &OptimizerConfig) -> Result<()> {
    if x0.is_empty() {
        return Err(Error::Domain("nothing to optimize".into()));
    }
    if !(cfg.sigma0 > 0.0) || cfg.max_evals == 0 || !(cfg.tolerance >= 0.0) {
        return Err(Error::Domain(format!(
            "invalid optimizer settings sigma0={} max_evals={} tolerance={}",
            cfg.sigma0, cfg.max_evals, cfg.tolerance
        )));
    }
    Ok(())
}

/// Minimizes `f` from `x0` with the configured optimizer.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptimizationTrace> {
    check(x0, cfg)?;
    match cfg.kind {
        OptimizerKind::Cmaes => cmaes(f, x0, cfg),
        OptimizerKind::NelderMead => nelder_mead(f, x0, cfg),
    }
}

pub fn cmaes<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptimizationTrace> {
    check(x0, cfg)?;
    let mut rec = Recorder::new(f, cfg.max_evals);
    rec.eval(x0)?;

    let d = x0.len();
    let df = d as f64;
    let lambda = 4 + (3.0 * df.ln()).floor() as usize;
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (df + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (df + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / df) / (df + 4.0 + 2.0 * mu_eff / df);
    let c_1 = 2.0 / ((df + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((df + 2.0).powi(2) + mu_eff));
    let chi_n = df.sqrt() * (1.0 - 1.0 / (4.0 * df) + 1.0 / (21.0 * df * df));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = cfg.sigma0;
    let mut cov = DMatrix::<f64>::identity(d, d);
    let mut p_sigma = DVector::<f64>::zeros(d);
    let mut p_c = DVector::<f64>::zeros(d);
    let mut stagnation = Stagnation {
        tolerance: cfg.tolerance,
        history: vec![rec.best_value()],
    };

    for generation in 0.. {
        let eig = SymmetricEigen::new(cov.clone());
        let b = eig.eigenvectors;
        let scales = eig.eigenvalues.map(|e| e.max(1e-300).sqrt());

        let mut samples: Vec<(f64, DVector<f64>)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
            let y = &b * z.component_mul(&scales);
            let x = &mean + sigma * &y;
            match rec.eval(x.as_slice())? {
                Some(v) => samples.push((v, y)),
                None => return Ok(rec.finish()),
            }
        }
        // Stable sort keeps the sampling order among equal values.
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut y_w = DVector::<f64>::zeros(d);
        for (w, (_, y)) in weights.iter().zip(&samples) {
            y_w += *w * y;
        }
        mean += sigma * &y_w;

        let inv_sqrt = &b * DMatrix::from_diagonal(&scales.map(|s| 1.0 / s)) * b.transpose();
        p_sigma = (1.0 - c_sigma) * &p_sigma + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (inv_sqrt * &y_w);
        let ps_norm = p_sigma.norm();
        let decay = 1.0 - (1.0 - c_sigma).powi(2 * (generation + 1));
        let h_sigma = if ps_norm / decay.sqrt() < (1.4 + 2.0 / (df + 1.0)) * chi_n {
            1.0
        } else {
            0.0
        };
        p_c = (1.0 - c_c) * &p_c + h_sigma * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::<f64>::zeros(d, d);
        for (w, (_, y)) in weights.iter().zip(&samples) {
            rank_mu += *w * y * y.transpose();
        }
        let keep = 1.0 - c_1 - c_mu + (1.0 - h_sigma) * c_1 * c_c * (2.0 - c_c);
        cov = keep * cov + c_1 * &p_c * p_c.transpose() + c_mu * rank_mu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();

        if !(sigma.is_finite() && sigma > 0.0) || cov.iter().any(|c| !c.is_finite()) {
            break;
        }
        if stagnation.stalled(rec.best_value()) {
            break;
        }
    }
    Ok(rec.finish())
}

/// Classic simplex rules: reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5. The initial simplex is `x0` plus `sigma0` along each axis.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], cfg: &OptimizerConfig) -> Result<OptimizationTrace> {
    check(x0, cfg)?;
    let mut rec = Recorder::new(f, cfg.max_evals);
    let d = x0.len();
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(d + 1);
    for i in 0..=d {
        let mut x = x0.to_vec();
        if i > 0 {
            x[i - 1] += cfg.sigma0;
        }
        match rec.eval(&x)? {
            Some(v) => simplex.push((v, x)),
            None => return Ok(rec.finish()),
        }
    }
    let mut stagnation = Stagnation {
        tolerance: cfg.tolerance,
        history: vec![rec.best_value()],
    };

    let affine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(a, b)| a + t * (b - a)).collect() };
    loop {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut centroid = vec![0.0; d];
        for (_, x) in &simplex[..d] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / d as f64;
            }
        }
        let (worst_v, worst) = simplex[d].clone();
        let second_v = simplex[d - 1].0;

        let reflected = affine(&centroid, &worst, -1.0);
        let Some(rv) = rec.eval(&reflected)? else { break };
        if rv < simplex[0].0 {
            let expanded = affine(&centroid, &worst, -2.0);
            let Some(ev) = rec.eval(&expanded)? else { break };
            simplex[d] = if ev < rv { (ev, expanded) } else { (rv, reflected) };
        } else if rv < second_v {
            simplex[d] = (rv, reflected);
        } else {
            let (target_v, target) = if rv < worst_v {
                (rv, reflected)
            } else {
                (worst_v, worst)
            };
            let contracted = affine(&centroid, &target, 0.5);
            let Some(cv) = rec.eval(&contracted)? else { break };
            if cv < target_v {
                simplex[d] = (cv, contracted);
            } else {
                let best = simplex[0].1.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = affine(&best, &vertex.1, 0.5);
                    let Some(v) = rec.eval(&x)? else {
                        return Ok(rec.finish());
                    };
                    *vertex = (v, x);
                }
            }
        }
        if stagnation.stalled(rec.best_value()) {
            break;
        }
    }
    Ok(rec.finish())
}

/// Optimizes QAOA angles for `cp` and reports the output distribution at the
/// best parameters.
pub fn run_qaoa(
    cp: &CompiledProblem,
    qcfg: &QaoaConfig,
    ocfg: &OptimizerConfig,
) -> Result<(QaoaResult, OptimizationTrace)> {
    let sim = QaoaSimulator::new(cp)?;
    let x0 = qcfg.initial_params()?;
    let trace = if cp.spin_poly.is_empty() {
        // Constant cost: every parameter choice is optimal.
        let value = sim.expectation(&x0)?;
        OptimizationTrace {
            evaluations: vec![Evaluation {
                params: x0.clone(),
                value,
            }],
            best_params: x0.clone(),
            best_value: value,
            eval_count: 1,
        }
    } else if qcfg.shots == 0 {
        minimize(|x| sim.expectation(x).unwrap_or(f64::NAN), &x0, ocfg)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(substream(qcfg.seed, "sampling"));
        minimize(
            |x| sim.sampled_expectation(x, qcfg.shots, &mut rng).unwrap_or(f64::NAN),
            &x0,
            ocfg,
        )?
    };
    let probs = sim.probabilities(&trace.best_params)?;
    let best = most_probable(&probs);
    let result = QaoaResult {
        n_qubits: cp.n_qubits,
        layers: qcfg.layers,
        initial_params: x0,
        best_params: trace.best_params.clone(),
        expectation: probs.iter().zip(sim.energies()).map(|(p, e)| p * e).sum(),
        best_bitstring: format_bitstring(best as u64, cp.n_qubits),
        best_probability: probs[best],
        enhancement_factor: enhancement_factor(&probs),
        top: top_states(&probs, cp.n_qubits, TOP_STATES),
        evaluations: trace.eval_count,
    };
    Ok((result, trace))
}
