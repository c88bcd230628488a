//! Classical continuous-weight baseline and its integer discretization.
//!
//! The continuous program minimizes
//! `g(w) = q2 K(w) - q1 S(w) + q0 w'cw - mu'w` either on the probability
//! simplex or on the box `[0, 1]^n` with the extra term `(1'w - 1)^2`.
//! Both use projected gradient descent with Armijo backtracking from
//! several Dirichlet-distributed starts. The weights are then turned into
//! share counts by an exact branch-and-bound over the integer box.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::MomentSet;
use crate::problem::{Allocation, PortfolioProblem, RiskWeights};

pub const DEFAULT_STARTS: usize = 16;
pub const MAX_ITERATIONS: usize = 10_000;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const TIE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Fully invested: `1'w = 1`, `w >= 0`.
    Constrained,
    /// `w` in `[0, 1]^n` with the penalty `(1'w - 1)^2`.
    Penalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub weights: Vec<f64>,
    /// Minimized value, including the budget penalty in penalty mode.
    pub objective_value: f64,
    pub budget_penalty: f64,
    pub converged: bool,
    /// Iterations used by the winning start.
    pub iterations: usize,
}

/// The continuous objective with gradient tensors precomputed.
///
/// The gradient sums the tensor over every index position, so it is exact
/// for tensors that are not symmetric as well.
pub struct ContinuousObjective {
    n: usize,
    mu: Vec<f64>,
    cov: Vec<f64>,
    skew: Vec<f64>,
    kurt: Vec<f64>,
    grad_cov: Vec<f64>,
    grad_skew: Vec<f64>,
    grad_kurt: Vec<f64>,
    penalty: bool,
}

impl ContinuousObjective {
    pub fn new(moments: &MomentSet, w: RiskWeights, mode: BaselineMode) -> Result<Self> {
        moments.check_shape()?;
        let n = moments.n;
        let cov: Vec<f64> = moments.cov.iter().flatten().map(|v| w.q0 * v).collect();
        let skew: Vec<f64> = moments.coskew.iter().flatten().flatten().map(|v| -w.q1 * v).collect();
        let kurt: Vec<f64> = moments
            .cokurt
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .map(|v| w.q2 * v)
            .collect();
        Ok(Self {
            n,
            mu: moments.mu.clone(),
            grad_cov: position_sum(&cov, n, 2),
            grad_skew: position_sum(&skew, n, 3),
            grad_kurt: position_sum(&kurt, n, 4),
            cov,
            skew,
            kurt,
            penalty: mode == BaselineMode::Penalty,
        })
    }

    /// `g(w)` without the budget penalty.
    pub fn moment_value(&self, w: &[f64]) -> f64 {
        let n = self.n;
        let mut v = -dot(&self.mu, w);
        v += contract(&self.cov, w, n, 2);
        v += contract(&self.skew, w, n, 3);
        v += contract(&self.kurt, w, n, 4);
        v
    }

    pub fn budget_penalty(&self, w: &[f64]) -> f64 {
        if self.penalty {
            (w.iter().sum::<f64>() - 1.0).powi(2)
        } else {
            0.0
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        self.moment_value(w) + self.budget_penalty(w)
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut g: Vec<f64> = self.mu.iter().map(|m| -m).collect();
        for (t, order) in [(&self.grad_cov, 2), (&self.grad_skew, 3), (&self.grad_kurt, 4)] {
            let block = n.pow(order - 1);
            for (a, ga) in g.iter_mut().enumerate() {
                *ga += contract(&t[a * block..(a + 1) * block], w, n, order - 1);
            }
        }
        if self.penalty {
            let d = 2.0 * (w.iter().sum::<f64>() - 1.0);
            g.iter_mut().for_each(|ga| *ga += d);
        }
        g
    }

    fn project(&self, x: &mut [f64]) {
        if self.penalty {
            x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        } else {
            project_simplex(x);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

/// `sum_{i1..ik} t[i1..ik] w_i1 ... w_ik` for a flattened row-major tensor.
fn contract(t: &[f64], w: &[f64], n: usize, order: u32) -> f64 {
    if order == 0 {
        return t[0];
    }
    let block = n.pow(order - 1);
    w.iter()
        .enumerate()
        .filter(|(_, wi)| **wi != 0.0)
        .map(|(i, wi)| wi * contract(&t[i * block..(i + 1) * block], w, n, order - 1))
        .sum()
}

/// `out[a, rest] = sum over positions p of t with index a inserted at p`.
fn position_sum(t: &[f64], n: usize, order: u32) -> Vec<f64> {
    let len = n.pow(order);
    let mut out = vec![0.0; len];
    let mut idx = vec![0usize; order as usize];
    for (flat, &v) in t.iter().enumerate() {
        let mut r = flat;
        for slot in idx.iter_mut().rev() {
            *slot = r % n;
            r /= n;
        }
        for p in 0..order as usize {
            // Move position p to the front, keep the others in order.
            let mut target = idx[p];
            for (q, &i) in idx.iter().enumerate() {
                if q != p {
                    target = target * n + i;
                }
            }
            out[target] += v;
        }
    }
    out
}

/// Euclidean projection onto `{x >= 0, 1'x = 1}` by the sorting method.
pub fn project_simplex(x: &mut [f64]) {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

struct Descent {
    w: Vec<f64>,
    value: f64,
    converged: bool,
    iterations: usize,
}

fn projected_gradient_norm(obj: &ContinuousObjective, w: &[f64], g: &[f64]) -> f64 {
    let mut y: Vec<f64> = w.iter().zip(g).map(|(w, g)| w - g).collect();
    obj.project(&mut y);
    y.iter().zip(w).map(|(y, w)| (y - w).powi(2)).sum::<f64>().sqrt()
}

fn descend(obj: &ContinuousObjective, start: Vec<f64>) -> Descent {
    let mut w = start;
    obj.project(&mut w);
    let mut value = obj.value(&w);
    let mut step: f64 = 1.0;
    for it in 0..MAX_ITERATIONS {
        let g = obj.gradient(&w);
        if projected_gradient_norm(obj, &w, &g) < GRADIENT_TOLERANCE {
            return Descent {
                w,
                value,
                converged: true,
                iterations: it,
            };
        }
        step = (step * 2.0).min(1e6);
        loop {
            let mut trial: Vec<f64> = w.iter().zip(&g).map(|(w, g)| w - step * g).collect();
            obj.project(&mut trial);
            let decrease: f64 = g.iter().zip(trial.iter().zip(&w)).map(|(g, (t, w))| g * (t - w)).sum();
            let v = obj.value(&trial);
            if v <= value + ARMIJO * decrease {
                w = trial;
                value = v;
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                let g = obj.gradient(&w);
                let converged = projected_gradient_norm(obj, &w, &g) < GRADIENT_TOLERANCE;
                return Descent {
                    w,
                    value,
                    converged,
                    iterations: it + 1,
                };
            }
        }
    }
    let g = obj.gradient(&w);
    let converged = projected_gradient_norm(obj, &w, &g) < GRADIENT_TOLERANCE;
    Descent {
        w,
        value,
        converged,
        iterations: MAX_ITERATIONS,
    }
}

/// `starts` Dirichlet(1) points drawn in sequence from one generator, so a
/// smaller start set is always a prefix of a larger one.
pub fn dirichlet_starts(n: usize, starts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..starts)
        .map(|_| {
            let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect()
}

/// Multi-start projected descent; the best value wins, then the lowest start.
pub fn solve_continuous(
    moments: &MomentSet,
    weights: RiskWeights,
    mode: BaselineMode,
    starts: usize,
    seed: u64,
) -> Result<ContinuousSolution> {
    if moments.n == 0 {
        return Err(Error::Shape("no assets".into()));
    }
    if starts == 0 {
        return Err(Error::Domain("at least one start is required".into()));
    }
    let obj = ContinuousObjective::new(moments, weights, mode)?;
    let runs: Vec<Descent> = dirichlet_starts(moments.n, starts, seed)
        .into_par_iter()
        .map(|s| descend(&obj, s))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");
    let mut w = best.w;
    w.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(ContinuousSolution {
        budget_penalty: obj.budget_penalty(&w),
        objective_value: best.value,
        weights: w,
        converged: best.converged,
        iterations: best.iterations,
    })
}

pub fn solve_constrained(moments: &MomentSet, weights: RiskWeights, seed: u64) -> Result<ContinuousSolution> {
    solve_continuous(moments, weights, BaselineMode::Constrained, DEFAULT_STARTS, seed)
}

pub fn solve_penalty(moments: &MomentSet, weights: RiskWeights, seed: u64) -> Result<ContinuousSolution> {
    solve_continuous(moments, weights, BaselineMode::Penalty, DEFAULT_STARTS, seed)
}

/// Share counts minimizing `C_extra + sum_i |C w_i - z_i p_i|` with
/// `C_extra = C - z'p >= 0`, `0 <= z_i <= floor(C / p_i)`.
///
/// Near-ties (within 1e-9) prefer more capital spent, then the
/// lexicographically smaller `z`.
pub fn discretize(w: &[f64], prices: &[f64], capital: f64) -> Result<Vec<u64>> {
    if w.len() != prices.len() || w.is_empty() {
        return Err(Error::Shape(format!("{} weights for {} prices", w.len(), prices.len())));
    }
    if let Some(p) = prices.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(Error::Domain(format!("price {p} is not positive")));
    }
    if let Some(x) = w.iter().find(|x| !(**x >= -1e-6 && **x <= 1.0 + 1e-6)) {
        return Err(Error::Domain(format!("weight {x} outside [0, 1]")));
    }
    if prices.iter().all(|&p| p > capital) {
        return Err(Error::InfeasibleProblem(format!(
            "every price exceeds capital {capital}"
        )));
    }
    let targets: Vec<f64> = w.iter().map(|x| capital * x.max(0.0)).collect();
    let ranges: Vec<u64> = prices.iter().map(|p| (capital / p).floor() as u64).collect();
    let mut search = Search {
        prices,
        targets: &targets,
        ranges: &ranges,
        capital,
        z: vec![0; w.len()],
        best: None,
        suffix_targets: suffix_sums(&targets),
    };
    search.visit(0, 0.0, 0.0);
    Ok(search.best.expect("zero allocation is feasible").z)
}

fn suffix_sums(v: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; v.len() + 1];
    for i in (0..v.len()).rev() {
        s[i] = s[i + 1] + v[i];
    }
    s
}

struct Incumbent {
    cost: f64,
    spent: f64,
    z: Vec<u64>,
}

struct Search<'a> {
    prices: &'a [f64],
    targets: &'a [f64],
    ranges: &'a [u64],
    capital: f64,
    z: Vec<u64>,
    best: Option<Incumbent>,
    suffix_targets: Vec<f64>,
}

impl Search<'_> {
    /// `h_i(k) = |t_i - k p_i| - k p_i`; the cost is `C + sum_i h_i(z_i)`.
    fn h(&self, i: usize, k: u64) -> f64 {
        let spend = k as f64 * self.prices[i];
        (self.targets[i] - spend).abs() - spend
    }

    /// Lower bound on `sum_{j >= i} h_j` given `remaining` capital.
    fn bound(&self, i: usize, remaining: f64) -> f64 {
        let per_asset: f64 = (i..self.prices.len())
            .map(|j| {
                let kmax = ((remaining / self.prices[j]).floor() as u64).min(self.ranges[j]);
                // h_j decreases until k p_j reaches t_j, then stays at -t_j.
                let k = ((self.targets[j] / self.prices[j]).ceil() as u64).min(kmax);
                self.h(j, k).min(self.h(j, k.saturating_sub(1)))
            })
            .sum();
        per_asset.max(self.suffix_targets[i] - 2.0 * remaining)
    }

    fn better(&self, cost: f64, spent: f64) -> bool {
        let Some(b) = &self.best else { return true };
        if cost < b.cost - TIE {
            return true;
        }
        if cost > b.cost + TIE {
            return false;
        }
        if spent > b.spent + TIE {
            return true;
        }
        if spent < b.spent - TIE {
            return false;
        }
        self.z < b.z
    }

    fn visit(&mut self, i: usize, partial: f64, spent: f64) {
        let n = self.prices.len();
        if i == n {
            let cost = self.capital + partial;
            if self.better(cost, spent) {
                self.best = Some(Incumbent {
                    cost,
                    spent,
                    z: self.z.clone(),
                });
            }
            return;
        }
        let remaining = self.capital - spent;
        if let Some(b) = &self.best {
            if self.capital + partial + self.bound(i, remaining) > b.cost + TIE {
                return;
            }
        }
        // One past the floor guards against rounding in the division; the
        // exact spend check below filters it.
        let kmax = ((remaining / self.prices[i]).floor() as u64 + 1).min(self.ranges[i]);
        let center = ((self.targets[i] / self.prices[i]).floor() as u64).min(kmax);
        // Candidates by distance from the floor of the target count.
        let mut order = Vec::with_capacity(kmax as usize + 1);
        order.push(center);
        for d in 1..=kmax {
            if center + d <= kmax {
                order.push(center + d);
            }
            if d <= center {
                order.push(center - d);
            }
        }
        for k in order {
            let cost = k as f64 * self.prices[i];
            if spent + cost > self.capital {
                continue;
            }
            self.z[i] = k;
            self.visit(i + 1, partial + self.h(i, k), spent + cost);
        }
        self.z[i] = 0;
    }
}

/// Continuous solution and its discretized allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSolution {
    pub mode: BaselineMode,
    pub continuous: ContinuousSolution,
    pub allocation: Allocation,
}

pub fn solve_classical(problem: &PortfolioProblem, mode: BaselineMode, seed: u64) -> Result<ClassicalSolution> {
    let weights = problem.effective_weights();
    let continuous = solve_continuous(&problem.moments, weights, mode, DEFAULT_STARTS, seed)?;
    let z = discretize(&continuous.weights, &problem.prices, problem.capital)?;
    Ok(ClassicalSolution {
        mode,
        allocation: problem.allocation(z)?,
        continuous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    fn random_moments(n: usize, seed: u64) -> MomentSet {
        use crate::market_data::{MeanEstimator, ReturnSeries};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let returns: Vec<ReturnSeries> = (0..n)
            .map(|i| {
                let r = (0..60)
                    .map(|_| rng.random_range(-0.05..0.06) + rng.random_range(0.0..0.02f64).powi(2) * 10.0)
                    .collect();
                ReturnSeries::new(format!("A{i}"), r)
            })
            .collect();
        MomentSet::estimate(&returns, 252.0, MeanEstimator::Geometric).unwrap()
    }

    fn ra3() -> RiskWeights {
        RiskWeights::from_risk_aversion(3.0)
    }

    /// Oracle: direct quadruple-loop evaluation of the moment polynomial.
    fn direct(m: &MomentSet, w: RiskWeights, x: &[f64]) -> f64 {
        -crate::eval_report::objective_value(x, m, w).unwrap()
    }

    #[test]
    fn value_matches_direct_contraction() {
        let m = random_moments(4, 1);
        let obj = ContinuousObjective::new(&m, ra3(), BaselineMode::Constrained).unwrap();
        let x = [0.1, 0.4, 0.3, 0.2];
        assert_relative_eq!(obj.value(&x), direct(&m, ra3(), &x), max_relative = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for (n, seed) in [(2, 3), (4, 5), (5, 8)] {
            let m = random_moments(n, seed);
            for mode in [BaselineMode::Constrained, BaselineMode::Penalty] {
                let obj = ContinuousObjective::new(&m, ra3(), mode).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                let g = obj.gradient(&x);
                let h = 1e-5;
                for i in 0..n {
                    let mut a = x.clone();
                    let mut b = x.clone();
                    a[i] += h;
                    b[i] -= h;
                    let fd = (obj.value(&a) - obj.value(&b)) / (2.0 * h);
                    assert!((g[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{} vs {}", g[i], fd);
                }
            }
        }
    }

    #[test]
    fn gradient_of_asymmetric_tensor() {
        let mut m = MomentSet::zeros(2);
        m.cov[0][1] = 1.0;
        m.coskew[0][0][1] = 1.0;
        m.cokurt[0][1][1][1] = 1.0;
        let w = RiskWeights {
            q0: 1.0,
            q1: -1.0,
            q2: 1.0,
        };
        let obj = ContinuousObjective::new(&m, w, BaselineMode::Constrained).unwrap();
        // x0 x1 + x0^2 x1 + x0 x1^3
        let (a, b) = (0.3, 0.7);
        assert_relative_eq!(obj.value(&[a, b]), a * b + a * a * b + a * b * b * b, epsilon = 1e-15);
        let g = obj.gradient(&[a, b]);
        assert_relative_eq!(g[0], b + 2.0 * a * b + b * b * b, epsilon = 1e-15);
        assert_relative_eq!(g[1], a + a * a + 3.0 * a * b * b, epsilon = 1e-15);
    }

    #[test]
    fn simplex_projection() {
        let mut x = [0.2, 0.3, 0.5];
        project_simplex(&mut x);
        assert_eq!(x, [0.2, 0.3, 0.5]);
        let mut x = [2.0, 0.0];
        project_simplex(&mut x);
        assert_eq!(x, [1.0, 0.0]);
        let mut x = [0.5, 0.5, 0.5, 0.5];
        project_simplex(&mut x);
        for v in x {
            assert_relative_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn symmetric_assets_split_evenly() {
        let one = random_moments(1, 4);
        let mut m = MomentSet::zeros(2);
        let (mu, c, s, k) = (one.mu[0], one.cov[0][0], one.coskew[0][0][0], one.cokurt[0][0][0][0]);
        m.mu = vec![mu; 2];
        m.cov = vec![vec![c, 0.3 * c], vec![0.3 * c, c]];
        for i in 0..2 {
            for j in 0..2 {
                for l in 0..2 {
                    m.coskew[i][j][l] = if i == j && j == l { s } else { 0.2 * s };
                    for q in 0..2 {
                        m.cokurt[i][j][l][q] = if i == j && j == l && l == q { k } else { 0.5 * k };
                    }
                }
            }
        }
        for mode in [BaselineMode::Constrained, BaselineMode::Penalty] {
            let sol = solve_continuous(&m, ra3(), mode, DEFAULT_STARTS, 1).unwrap();
            assert!((sol.weights[0] - sol.weights[1]).abs() < 1e-6, "{:?}", sol.weights);
        }
    }

    #[test]
    fn single_asset_is_fully_invested() {
        let m = random_moments(1, 9);
        let sol = solve_constrained(&m, ra3(), 0).unwrap();
        assert_eq!(sol.weights, vec![1.0]);
        assert!(sol.converged);
    }

    #[test]
    fn zero_moments_penalty() {
        let sol = solve_penalty(&MomentSet::zeros(3), ra3(), 2).unwrap();
        assert_relative_eq!(sol.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-8);
        assert!(sol.objective_value.abs() < 1e-15);
    }

    #[test]
    fn constrained_solution_invariants() {
        for seed in 0..5 {
            let m = random_moments(5, 100 + seed);
            let sol = solve_constrained(&m, ra3(), seed).unwrap();
            assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
            assert!(sol.weights.iter().all(|w| *w >= 0.0));
            assert!(sol.converged);
        }
    }

    #[test]
    fn penalty_form_relaxes_constrained_form() {
        // The penalty program contains every simplex point at zero penalty,
        // so its optimum can only be lower.
        for seed in 0..5 {
            let m = random_moments(4, 200 + seed);
            let c = solve_constrained(&m, ra3(), seed).unwrap();
            let p = solve_penalty(&m, ra3(), seed).unwrap();
            assert!(p.objective_value <= c.objective_value + 1e-9);
            assert!(p.weights.iter().all(|w| (0.0..=1.0).contains(w)));
            assert_relative_eq!(
                p.objective_value,
                p.budget_penalty
                    + ContinuousObjective::new(&m, ra3(), BaselineMode::Penalty)
                        .unwrap()
                        .moment_value(&p.weights),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn more_starts_never_hurt() {
        let m = random_moments(6, 31);
        let mut prev = f64::INFINITY;
        for starts in [1, 2, 4, 8, 16] {
            let v = solve_continuous(&m, ra3(), BaselineMode::Constrained, starts, 7)
                .unwrap()
                .objective_value;
            assert!(v <= prev);
            prev = v;
        }
        assert_eq!(dirichlet_starts(3, 4, 1)[..2], dirichlet_starts(3, 2, 1)[..]);
    }

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(&[0.63, 0.37], &[111.0, 240.0], 723.0).unwrap(), vec![4, 1]);
        assert_eq!(discretize(&[1.0], &[10.0], 95.0).unwrap(), vec![9]);
        assert!(matches!(
            discretize(&[0.5, 0.5], &[100.0, 200.0], 50.0),
            Err(Error::InfeasibleProblem(_))
        ));
        assert!(discretize(&[1.5, 0.0], &[1.0, 1.0], 5.0).is_err());
    }

    /// Oracle: enumerate the whole integer box.
    fn brute_force(w: &[f64], prices: &[f64], capital: f64) -> Vec<u64> {
        let ranges: Vec<u64> = prices.iter().map(|p| (capital / p).floor() as u64).collect();
        let mut best: Option<(f64, f64, Vec<u64>)> = None;
        let mut z = vec![0u64; prices.len()];
        loop {
            let spent: f64 = z.iter().zip(prices).map(|(k, p)| *k as f64 * p).sum();
            if spent <= capital {
                let dev: f64 = z
                    .iter()
                    .zip(prices)
                    .zip(w)
                    .map(|((k, p), w)| (capital * w - *k as f64 * p).abs())
                    .sum();
                let cost = capital - spent + dev;
                let take = match &best {
                    None => true,
                    Some((c, s, bz)) => {
                        cost < c - TIE || (cost <= c + TIE && (spent > s + TIE || (spent >= s - TIE && z < *bz)))
                    }
                };
                if take {
                    best = Some((cost, spent, z.clone()));
                }
            }
            let mut i = 0;
            while i < z.len() {
                if z[i] < ranges[i] {
                    z[i] += 1;
                    break;
                }
                z[i] = 0;
                i += 1;
            }
            if i == z.len() {
                break;
            }
        }
        best.unwrap().2
    }

    #[test]
    fn discretize_never_overspends() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let prices: Vec<f64> = (0..n).map(|_| rng.random_range(5.0..300.0)).collect();
            let capital = rng.random_range(50.0..2000.0);
            let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            project_simplex(&mut w);
            if prices.iter().all(|p| *p > capital) {
                continue;
            }
            let z = discretize(&w, &prices, capital).unwrap();
            let spent: f64 = z.iter().zip(&prices).map(|(k, p)| *k as f64 * p).sum();
            assert!(spent <= capital);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn discretize_matches_brute_force(seed in 0u64..100_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let capital = rng.random_range(100.0..1000.0);
            let prices: Vec<f64> = (0..3).map(|_| capital / rng.random_range(1.0..8.99)).collect();
            let mut w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            project_simplex(&mut w);
            prop_assert!(discretize(&w, &prices, capital).unwrap() == brute_force(&w, &prices, capital));
        }
    }
}
