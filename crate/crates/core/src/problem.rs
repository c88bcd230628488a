//! Portfolio problems over integer share counts and their compilation to
//! binary and spin polynomials.
//!
//! The integer objective is
//!
//! ```text
//! q2 K(z) - q1 S(z) + q0 z'cz - mu'z + lambda (z'p - C)^2
//! ```
//!
//! with `z_i` in `0..=floor(C / p_i)`. Each `z_i` is encoded in binary with
//! [`binary_expansion`]; qubits are laid out asset by asset, followed by the
//! slack qubits when the one-sided budget encoding is selected.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval_report::objective_value;
use crate::market_data::{align, compute_returns, MeanEstimator, PriceSeries, DEFAULT_FREQUENCY};
use crate::moments::MomentSet;
use crate::polynomial::{encoding_bits, substitute_integer, IntegerEncoding, IntegerPolynomial, MultilinearPolynomial};
use crate::seed::substream;

/// Budget penalty weights explored per instance.
pub const LAMBDA_SWEEP: [f64; 8] = [0.001, 0.01, 0.1, 0.9, 1.0, 10.0, 100.0, 1000.0];

pub const DEFAULT_RISK_AVERSION: f64 = 3.0;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Whether the third and fourth moments enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemOrder {
    /// Mean-variance only; degree 2.
    Qubo,
    /// Mean, variance, skewness and kurtosis; degree 4.
    #[default]
    Hubo,
}

/// How the capital budget is turned into a penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetEncoding {
    /// `lambda (z'p - C)^2`: over- and under-spending are penalized alike.
    #[default]
    Quadratic,
    /// `lambda (z'p - y)^2` with an integer slack `y` in `0..=round(C)`.
    Slack,
}

/// Moment weights `(q0, q1, q2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
}

impl RiskWeights {
    /// Edgeworth-expansion weights `ra/2, ra/6, ra/24`.
    pub fn from_risk_aversion(ra: f64) -> Self {
        Self {
            q0: ra / 2.0,
            q1: ra / 6.0,
            q2: ra / 24.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioProblem {
    pub id: usize,
    pub tickers: Vec<String>,
    /// Latest closing prices.
    pub prices: Vec<f64>,
    pub capital: f64,
    pub risk_aversion: f64,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub lambda: f64,
    pub order: ProblemOrder,
    #[serde(default)]
    pub budget_encoding: BudgetEncoding,
    pub seed: u64,
    pub moments: MomentSet,
}

impl PortfolioProblem {
    pub fn new(
        tickers: Vec<String>,
        prices: Vec<f64>,
        capital: f64,
        moments: MomentSet,
        risk_aversion: f64,
        lambda: f64,
    ) -> Result<Self> {
        let w = RiskWeights::from_risk_aversion(risk_aversion);
        let problem = Self {
            id: 0,
            tickers,
            prices,
            capital,
            risk_aversion,
            q0: w.q0,
            q1: w.q1,
            q2: w.q2,
            lambda,
            order: ProblemOrder::Hubo,
            budget_encoding: BudgetEncoding::Quadratic,
            seed: 0,
            moments,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.prices.len();
        if self.tickers.len() != n || self.moments.n != n {
            return Err(Error::Shape(format!(
                "{} tickers, {} prices, moments for {} assets",
                self.tickers.len(),
                n,
                self.moments.n
            )));
        }
        self.moments.check_shape()?;
        if let Some(p) = self.prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::Domain(format!("price {p} is not positive")));
        }
        if !(self.capital.is_finite() && self.capital > 0.0) {
            return Err(Error::Domain(format!("capital {} is not positive", self.capital)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Domain(format!("lambda {} is not positive", self.lambda)));
        }
        Ok(())
    }

    pub fn weights(&self) -> RiskWeights {
        RiskWeights {
            q0: self.q0,
            q1: self.q1,
            q2: self.q2,
        }
    }

    /// Weights actually used by the objective for this problem's order.
    pub fn effective_weights(&self) -> RiskWeights {
        match self.order {
            ProblemOrder::Hubo => self.weights(),
            ProblemOrder::Qubo => RiskWeights {
                q1: 0.0,
                q2: 0.0,
                ..self.weights()
            },
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }

    pub fn with_order(&self, order: ProblemOrder) -> Self {
        Self { order, ..self.clone() }
    }

    /// `N_i = floor(C / p_i)`.
    pub fn ranges(&self) -> Vec<u64> {
        self.prices.iter().map(|p| (self.capital / p).floor() as u64).collect()
    }

    pub fn asset_qubits(&self) -> usize {
        self.ranges().into_iter().map(encoding_bits).sum()
    }

    pub fn n_qubits(&self) -> usize {
        let slack = match self.budget_encoding {
            BudgetEncoding::Quadratic => 0,
            BudgetEncoding::Slack => encoding_bits(slack_capital(self.capital)),
        };
        self.asset_qubits() + slack
    }

    /// Builds the allocation record for share counts `z`.
    pub fn allocation(&self, z: Vec<u64>) -> Result<Allocation> {
        Allocation::new(z, &self.prices, self.capital, &self.moments, self.effective_weights())
    }
}

fn slack_capital(capital: f64) -> u64 {
    capital.round().max(1.0) as u64
}

/// Integer share counts with their budget use and objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub z: Vec<u64>,
    pub budget_used: f64,
    pub leftover: f64,
    /// Objective to maximize, without the budget term.
    pub objective: f64,
}

impl Allocation {
    pub fn new(z: Vec<u64>, prices: &[f64], capital: f64, moments: &MomentSet, weights: RiskWeights) -> Result<Self> {
        if z.len() != prices.len() {
            return Err(Error::Shape(format!(
                "{} share counts for {} prices",
                z.len(),
                prices.len()
            )));
        }
        let budget_used: f64 = z.iter().zip(prices).map(|(&k, p)| k as f64 * p).sum();
        let zf: Vec<f64> = z.iter().map(|&k| k as f64).collect();
        let objective = objective_value(&zf, moments, weights)?;
        Ok(Self {
            z,
            budget_used,
            leftover: capital - budget_used,
            objective,
        })
    }

    pub fn budget_utilization(&self, capital: f64) -> f64 {
        self.budget_used / capital
    }
}

/// `q2 K(z) - q1 S(z) + q0 z'cz - mu'z` over integer variables.
pub fn build_objective(moments: &MomentSet, weights: RiskWeights) -> Result<IntegerPolynomial> {
    moments.check_shape()?;
    let n = moments.n;
    let mut poly = IntegerPolynomial::new();
    for i in 0..n {
        poly.add_term([i as u32], -moments.mu[i]);
    }
    if weights.q0 != 0.0 {
        for i in 0..n {
            for j in 0..n {
                poly.add_term([i as u32, j as u32], weights.q0 * moments.cov[i][j]);
            }
        }
    }
    if weights.q1 != 0.0 {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let s = moments.coskew[i][j][k];
                    if s != 0.0 {
                        poly.add_term([i as u32, j as u32, k as u32], -weights.q1 * s);
                    }
                }
            }
        }
    }
    if weights.q2 != 0.0 {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = moments.cokurt[i][j][k][l];
                        if v != 0.0 {
                            poly.add_term([i as u32, j as u32, k as u32, l as u32], weights.q2 * v);
                        }
                    }
                }
            }
        }
    }
    poly.simplify();
    Ok(poly)
}

/// Adds `lambda (z'p - C)^2`.
pub fn add_budget_penalty(poly: &IntegerPolynomial, prices: &[f64], capital: f64, lambda: f64) -> IntegerPolynomial {
    let mut out = poly.clone();
    out.add_assign(&squared_budget_gap(prices, None, capital, lambda));
    out.simplify();
    out
}

/// Adds `lambda (z'p - y)^2` where `y` is an extra integer variable (index
/// `prices.len()`) ranging over `0..=round(C)`. Returns the polynomial, the
/// slack range and the number of slack qubits.
pub fn add_slack_budget_penalty(
    poly: &IntegerPolynomial,
    prices: &[f64],
    capital: f64,
    lambda: f64,
) -> (IntegerPolynomial, u64, usize) {
    let slack_range = slack_capital(capital);
    let mut out = poly.clone();
    out.add_assign(&squared_budget_gap(prices, Some(prices.len() as u32), 0.0, lambda));
    out.simplify();
    (out, slack_range, encoding_bits(slack_range))
}

/// `lambda (sum_i p_i z_i - y - C)^2` with an optional slack variable `y`.
fn squared_budget_gap(prices: &[f64], slack: Option<u32>, capital: f64, lambda: f64) -> IntegerPolynomial {
    let mut linear: Vec<(Option<u32>, f64)> = prices.iter().enumerate().map(|(i, &p)| (Some(i as u32), p)).collect();
    if let Some(y) = slack {
        linear.push((Some(y), -1.0));
    }
    linear.push((None, -capital));

    let mut out = IntegerPolynomial::new();
    for &(a, ca) in &linear {
        for &(b, cb) in &linear {
            out.add_term(a.into_iter().chain(b), lambda * ca * cb);
        }
    }
    out
}

/// Role of one qubit in the compiled problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum QubitSlot {
    Asset { asset: usize, coefficient: u64 },
    Slack { coefficient: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledProblem {
    pub problem: PortfolioProblem,
    pub ranges: Vec<u64>,
    pub binary_poly: MultilinearPolynomial,
    pub spin_poly: MultilinearPolynomial,
    pub layout: Vec<QubitSlot>,
    pub n_qubits: usize,
    pub encoding: IntegerEncoding,
}

/// Compiles a problem into its binary and spin cost polynomials.
pub fn compile(problem: &PortfolioProblem) -> Result<CompiledProblem> {
    problem.validate()?;
    let ranges = problem.ranges();
    if ranges.iter().all(|&n| n == 0) {
        return Err(Error::InfeasibleProblem(format!(
            "no asset is affordable with capital {}",
            problem.capital
        )));
    }
    let objective = build_objective(&problem.moments, problem.effective_weights())?;
    let (integer_poly, encoding) = match problem.budget_encoding {
        BudgetEncoding::Quadratic => (
            add_budget_penalty(&objective, &problem.prices, problem.capital, problem.lambda),
            IntegerEncoding::from_ranges(&ranges, 0),
        ),
        BudgetEncoding::Slack => {
            let (poly, slack_range, _) =
                add_slack_budget_penalty(&objective, &problem.prices, problem.capital, problem.lambda);
            let mut all = ranges.clone();
            all.push(slack_range);
            (poly, IntegerEncoding::from_ranges(&all, 0))
        }
    };
    let binary_poly = substitute_integer(&integer_poly, &encoding)?;
    let spin_poly = binary_poly.to_spin()?;

    let n_assets = problem.prices.len();
    let n_qubits = encoding.num_bits();
    let mut layout = vec![QubitSlot::Slack { coefficient: 0 }; n_qubits];
    for (var, bits) in encoding.bits.iter().enumerate() {
        for &(b, coefficient) in bits {
            layout[b as usize] = if var < n_assets {
                QubitSlot::Asset {
                    asset: var,
                    coefficient,
                }
            } else {
                QubitSlot::Slack { coefficient }
            };
        }
    }
    Ok(CompiledProblem {
        problem: problem.clone(),
        ranges,
        binary_poly,
        spin_poly,
        layout,
        n_qubits,
        encoding,
    })
}

impl CompiledProblem {
    /// Share counts of a basis state; qubit `q` is bit `q` of `index`.
    pub fn share_counts(&self, index: u64) -> Vec<u64> {
        (0..self.problem.prices.len())
            .map(|a| self.encoding.decode_var(a, |b| index >> b & 1 == 1))
            .collect()
    }

    pub fn decode_index(&self, index: u64) -> Result<Allocation> {
        self.problem.allocation(self.share_counts(index))
    }

    /// Decodes a per-qubit bit vector (entry `q` is qubit `q`).
    pub fn decode(&self, bits: &[u8]) -> Result<Allocation> {
        if bits.len() != self.n_qubits {
            return Err(Error::Shape(format!(
                "{} bits for {} qubits",
                bits.len(),
                self.n_qubits
            )));
        }
        if bits.iter().any(|b| *b > 1) {
            return Err(Error::Domain("bits must be 0 or 1".into()));
        }
        let index = bits.iter().enumerate().fold(0u64, |acc, (q, &b)| acc | (b as u64) << q);
        self.decode_index(index)
    }

    /// Basis state encoding the share counts `z` (slack qubits cleared).
    pub fn encode(&self, z: &[u64]) -> Option<u64> {
        if z.len() != self.problem.prices.len() {
            return None;
        }
        let mut index = 0u64;
        for (var, &value) in z.iter().enumerate() {
            for b in self.encoding.encode_var(var, value)? {
                index |= 1 << b;
            }
        }
        Some(index)
    }

    /// Binary polynomial value at a basis state.
    pub fn energy(&self, index: u64) -> f64 {
        let bits = index_to_bits(index, self.n_qubits);
        self.binary_poly.evaluate(&bits).expect("bit vector covers every qubit")
    }
}

pub(crate) fn index_to_bits(index: u64, n: usize) -> Vec<i8> {
    (0..n).map(|q| (index >> q & 1) as i8).collect()
}

/// Renders a basis state with the highest qubit first, so lexicographic and
/// numeric order agree.
pub fn format_bitstring(index: u64, n: usize) -> String {
    (0..n)
        .rev()
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bitstring(s: &str) -> Result<u64> {
    if s.len() > 64 || s.chars().any(|c| c != '0' && c != '1') {
        return Err(Error::Domain(format!("invalid bitstring `{s}`")));
    }
    Ok(s.chars().fold(0u64, |acc, c| acc << 1 | (c == '1') as u64))
}

/// Instance generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Number of instances wanted per qubit count.
    pub counts: BTreeMap<usize, usize>,
    pub min_assets: usize,
    pub max_assets: usize,
    pub max_budget: u64,
    pub max_attempts: usize,
    pub risk_aversion: f64,
    pub lambda: f64,
    pub order: ProblemOrder,
    pub frequency: f64,
    pub estimator: MeanEstimator,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            counts: (6..=15).map(|q| (q, 10)).collect(),
            min_assets: 2,
            max_assets: 10,
            max_budget: 6000,
            max_attempts: 1_000_000,
            risk_aversion: DEFAULT_RISK_AVERSION,
            lambda: DEFAULT_LAMBDA,
            order: ProblemOrder::Hubo,
            frequency: DEFAULT_FREQUENCY,
            estimator: MeanEstimator::Geometric,
        }
    }
}

/// Samples random asset subsets and integer budgets until every requested
/// qubit count holds its quota. Output is sorted by qubit count, then by
/// acceptance order; ids follow that order.
pub fn generate_problems(universe: &[PriceSeries], cfg: &GeneratorConfig) -> Result<Vec<PortfolioProblem>> {
    if universe.len() < cfg.max_assets.max(cfg.min_assets) {
        return Err(Error::Generation(format!(
            "universe has {} tickers, need at least {}",
            universe.len(),
            cfg.max_assets.max(cfg.min_assets)
        )));
    }
    if cfg.min_assets == 0 || cfg.min_assets > cfg.max_assets {
        return Err(Error::Generation(format!(
            "invalid asset count range {}..={}",
            cfg.min_assets, cfg.max_assets
        )));
    }
    let aligned = align(universe)?;
    let returns = aligned.iter().map(compute_returns).collect::<Result<Vec<_>>>()?;
    let all_moments = MomentSet::estimate(&returns, cfg.frequency, cfg.estimator)?;
    let latest: Vec<f64> = aligned.iter().map(PriceSeries::latest).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "generation"));
    let mut remaining = cfg.counts.clone();
    let mut accepted: Vec<(usize, usize, PortfolioProblem)> = Vec::new();
    let mut attempts = 0usize;
    while remaining.values().any(|&c| c > 0) {
        if attempts >= cfg.max_attempts {
            return Err(Error::Generation(format!(
                "gave up after {attempts} attempts; still missing {:?}",
                remaining.iter().filter(|(_, c)| **c > 0).collect::<BTreeMap<_, _>>()
            )));
        }
        attempts += 1;
        let k = rng.random_range(cfg.min_assets..=cfg.max_assets);
        let mut assets = sample(&mut rng, aligned.len(), k).into_vec();
        assets.sort_unstable();
        let prices: Vec<f64> = assets.iter().map(|&i| latest[i]).collect();
        let min_price = prices.iter().cloned().fold(f64::INFINITY, f64::min);
        let lo = min_price.ceil() as u64;
        if lo > cfg.max_budget {
            continue;
        }
        let capital = rng.random_range(lo..=cfg.max_budget) as f64;
        let qubits: usize = prices.iter().map(|p| encoding_bits((capital / p).floor() as u64)).sum();
        let Some(slot) = remaining.get_mut(&qubits).filter(|c| **c > 0) else {
            continue;
        };
        *slot -= 1;

        let tickers = assets.iter().map(|&i| aligned[i].ticker.clone()).collect();
        let mut problem = PortfolioProblem::new(
            tickers,
            prices,
            capital,
            all_moments.select(&assets),
            cfg.risk_aversion,
            cfg.lambda,
        )?;
        problem.order = cfg.order;
        accepted.push((qubits, accepted.len(), problem));
    }
    accepted.sort_by_key(|(q, order, _)| (*q, *order));
    Ok(accepted
        .into_iter()
        .enumerate()
        .map(|(id, (_, _, mut p))| {
            p.id = id;
            p.seed = substream(cfg.seed, &format!("problem-{id}"));
            p
        })
        .collect())
}
