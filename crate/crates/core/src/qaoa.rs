//! QAOA statevector simulation for diagonal cost Hamiltonians.
//!
//! Two paths produce the same state. The fast path multiplies amplitudes by
//! `exp(-i gamma E(b))` using the precomputed spectrum and applies the
//! x-mixer qubit by qubit. The gate path runs an explicit circuit of `H`,
//! `CNOT`, `Rz` and `Rx` gates and exists to cross-check the first.
//!
//! Conventions: `Rz(t) = exp(-i t Z / 2)`, `Rx(t) = exp(-i t X / 2)`, a term
//! `a Z_S` becomes `Rz(2 gamma a)` between CNOT ladders, and the mixer is
//! `Rx(2 beta)` on every qubit. Qubit `q` is bit `q` of the basis index.
//! Parameters are laid out as `(gamma_1..gamma_p, beta_1..beta_p)`.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{energies, MAX_EXACT_QUBITS};
use crate::polynomial::MultilinearPolynomial;
use crate::problem::{format_bitstring, CompiledProblem};

/// Largest register accepted by the gate-level path.
pub const MAX_GATE_QUBITS: usize = 14;

/// Half-width of the uniform interval for random initial parameters.
pub const INIT_RANGE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaConfig {
    pub layers: usize,
    /// `2p` values; drawn from the seed when absent.
    #[serde(default)]
    pub initial_params: Option<Vec<f64>>,
    pub seed: u64,
    /// Zero means exact probabilities.
    #[serde(default)]
    pub shots: usize,
}

impl Default for QaoaConfig {
    fn default() -> Self {
        Self {
            layers: 1,
            initial_params: None,
            seed: 0,
            shots: 0,
        }
    }
}

impl QaoaConfig {
    pub fn initial_params(&self) -> Result<Vec<f64>> {
        match &self.initial_params {
            Some(p) => {
                check_params(p, self.layers)?;
                Ok(p.clone())
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..2 * self.layers)
                    .map(|_| rng.random_range(-INIT_RANGE..=INIT_RANGE))
                    .collect())
            }
        }
    }
}

fn check_params(params: &[f64], layers: usize) -> Result<()> {
    if params.len() != 2 * layers {
        return Err(Error::Shape(format!("{} parameters for {layers} layers", params.len())));
    }
    Ok(())
}

fn layers_of(params: &[f64]) -> Result<usize> {
    if params.len() % 2 != 0 {
        return Err(Error::Shape(format!("odd parameter count {}", params.len())));
    }
    Ok(params.len() / 2)
}

/// Cost energy of every basis state, the diagonal of the cost Hamiltonian.
pub fn diagonal_phases(cp: &CompiledProblem) -> Result<Vec<f64>> {
    energies(&cp.binary_poly, cp.n_qubits)
}

/// Diagonal-path simulator with the spectrum cached across evaluations.
#[derive(Debug, Clone)]
pub struct QaoaSimulator {
    n: usize,
    energies: Vec<f64>,
}

impl QaoaSimulator {
    pub fn new(cp: &CompiledProblem) -> Result<Self> {
        Ok(Self {
            n: cp.n_qubits,
            energies: diagonal_phases(cp)?,
        })
    }

    pub fn from_energies(energies: Vec<f64>) -> Result<Self> {
        let len = energies.len();
        if !len.is_power_of_two() || len.trailing_zeros() as usize > MAX_EXACT_QUBITS {
            return Err(Error::Shape(format!("{len} energies is not a register size")));
        }
        Ok(Self {
            n: len.trailing_zeros() as usize,
            energies,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn statevector(&self, params: &[f64]) -> Result<Vec<Complex64>> {
        let p = layers_of(params)?;
        let (gammas, betas) = params.split_at(p);
        let amp = (1.0 / (1u64 << self.n) as f64).sqrt();
        let mut psi = vec![Complex64::new(amp, 0.0); 1 << self.n];
        for (&gamma, &beta) in gammas.iter().zip(betas) {
            for (a, &e) in psi.iter_mut().zip(&self.energies) {
                let (s, c) = (gamma * e).sin_cos();
                *a *= Complex64::new(c, -s);
            }
            for q in 0..self.n {
                apply_rx(&mut psi, q, 2.0 * beta);
            }
        }
        Ok(psi)
    }

    pub fn probabilities(&self, params: &[f64]) -> Result<Vec<f64>> {
        Ok(self.statevector(params)?.iter().map(|a| a.norm_sqr()).collect())
    }

    pub fn expectation(&self, params: &[f64]) -> Result<f64> {
        let probs = self.probabilities(params)?;
        Ok(probs.iter().zip(&self.energies).map(|(p, e)| p * e).sum())
    }

    /// Mean energy over `shots` basis states drawn from the output state.
    pub fn sampled_expectation(&self, params: &[f64], shots: usize, rng: &mut impl Rng) -> Result<f64> {
        if shots == 0 {
            return self.expectation(params);
        }
        let probs = self.probabilities(params)?;
        let dist =
            WeightedIndex::new(&probs).map_err(|e| Error::Domain(format!("invalid output distribution: {e}")))?;
        let total: f64 = (0..shots).map(|_| self.energies[dist.sample(rng)]).sum();
        Ok(total / shots as f64)
    }
}

/// Output state of the diagonal path.
pub fn simulate(cp: &CompiledProblem, params: &[f64]) -> Result<Vec<Complex64>> {
    QaoaSimulator::new(cp)?.statevector(params)
}

/// Exact expectation of the cost Hamiltonian.
pub fn expectation(cp: &CompiledProblem, params: &[f64]) -> Result<f64> {
    QaoaSimulator::new(cp)?.expectation(params)
}

/// `max_b P(b) * 2^n`.
pub fn enhancement_factor(probabilities: &[f64]) -> f64 {
    let max = probabilities.iter().cloned().fold(0.0, f64::max);
    max * probabilities.len() as f64
}

/// Index of the most probable basis state; the lowest index wins ties.
pub fn most_probable(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate() {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

fn apply_rx(psi: &mut [Complex64], q: usize, theta: f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    let mis = Complex64::new(0.0, -s);
    let half = 1usize << q;
    for chunk in psi.chunks_mut(half << 1) {
        let (lo, hi) = chunk.split_at_mut(half);
        for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a0, *a1);
            *a0 = x * c + y * mis;
            *a1 = x * mis + y * c;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    Cnot { control: usize, target: usize },
    Rz { qubit: usize, theta: f64 },
    Rx { qubit: usize, theta: f64 },
}

impl Gate {
    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::H(q) | Gate::Rz { qubit: q, .. } | Gate::Rx { qubit: q, .. } => (q, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitMetrics {
    pub h: usize,
    pub cnot: usize,
    pub rz: usize,
    pub rx: usize,
    pub total: usize,
    /// Longest chain of gates sharing a qubit.
    pub depth: usize,
}

impl CircuitMetrics {
    pub fn from_gates(gates: &[Gate], n_qubits: usize) -> Self {
        let mut m = Self::default();
        let mut level = vec![0usize; n_qubits];
        for g in gates {
            match g {
                Gate::H(_) => m.h += 1,
                Gate::Cnot { .. } => m.cnot += 1,
                Gate::Rz { .. } => m.rz += 1,
                Gate::Rx { .. } => m.rx += 1,
            }
            let (a, b) = g.qubits();
            let next = level[a].max(b.map_or(0, |b| level[b])) + 1;
            level[a] = next;
            if let Some(b) = b {
                level[b] = next;
            }
        }
        m.total = gates.len();
        m.depth = level.into_iter().max().unwrap_or(0);
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub metrics: CircuitMetrics,
}

impl Circuit {
    /// One gate per line: `H q`, `CNOT c t`, `RZ q theta`, `RX q theta`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for g in &self.gates {
            let _ = match *g {
                Gate::H(q) => writeln!(out, "H {q}"),
                Gate::Cnot { control, target } => writeln!(out, "CNOT {control} {target}"),
                Gate::Rz { qubit, theta } => writeln!(out, "RZ {qubit} {theta}"),
                Gate::Rx { qubit, theta } => writeln!(out, "RX {qubit} {theta}"),
            };
        }
        out
    }
}

/// QAOA circuit for the spin polynomial of `cp`.
pub fn synthesize_circuit(cp: &CompiledProblem, params: &[f64]) -> Result<Circuit> {
    synthesize_from_spin(&cp.spin_poly, cp.n_qubits, params)
}

pub fn synthesize_from_spin(spin: &MultilinearPolynomial, n_qubits: usize, params: &[f64]) -> Result<Circuit> {
    if spin.num_vars() > n_qubits {
        return Err(Error::Shape(format!(
            "polynomial uses {} variables, register has {n_qubits}",
            spin.num_vars()
        )));
    }
    let p = layers_of(params)?;
    let (gammas, betas) = params.split_at(p);
    let mut gates: Vec<Gate> = (0..n_qubits).map(Gate::H).collect();
    for (&gamma, &beta) in gammas.iter().zip(betas) {
        for (vars, alpha) in spin.terms() {
            let qs: Vec<usize> = vars.iter().map(|&v| v as usize).collect();
            let ladder: Vec<Gate> = qs
                .windows(2)
                .map(|w| Gate::Cnot {
                    control: w[0],
                    target: w[1],
                })
                .collect();
            gates.extend(&ladder);
            gates.push(Gate::Rz {
                qubit: *qs.last().expect("terms have at least one variable"),
                theta: 2.0 * gamma * alpha,
            });
            gates.extend(ladder.iter().rev());
        }
        gates.extend((0..n_qubits).map(|q| Gate::Rx {
            qubit: q,
            theta: 2.0 * beta,
        }));
    }
    let metrics = CircuitMetrics::from_gates(&gates, n_qubits);
    Ok(Circuit {
        n_qubits,
        gates,
        metrics,
    })
}

/// Applies `gates` in order to `|0...0>`.
pub fn simulate_gates(gates: &[Gate], n: usize) -> Result<Vec<Complex64>> {
    if n > MAX_GATE_QUBITS {
        return Err(Error::ResourceLimit {
            n_qubits: n,
            limit: MAX_GATE_QUBITS,
        });
    }
    let mut psi = vec![Complex64::new(0.0, 0.0); 1 << n];
    psi[0] = Complex64::new(1.0, 0.0);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for g in gates {
        let (a, b) = g.qubits();
        if a >= n || b.is_some_and(|b| b >= n) {
            return Err(Error::Shape(format!("{g:?} acts outside {n} qubits")));
        }
        match *g {
            Gate::H(q) => {
                let half = 1usize << q;
                for chunk in psi.chunks_mut(half << 1) {
                    let (lo, hi) = chunk.split_at_mut(half);
                    for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                        let (x, y) = (*a0, *a1);
                        *a0 = (x + y) * r;
                        *a1 = (x - y) * r;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                for i in 0..psi.len() {
                    if i >> control & 1 == 1 && i >> target & 1 == 0 {
                        psi.swap(i, i | 1 << target);
                    }
                }
            }
            Gate::Rz { qubit, theta } => {
                let (s, c) = (theta / 2.0).sin_cos();
                let zero = Complex64::new(c, -s);
                let one = Complex64::new(c, s);
                for (i, amp) in psi.iter_mut().enumerate() {
                    *amp *= if i >> qubit & 1 == 0 { zero } else { one };
                }
            }
            Gate::Rx { qubit, theta } => apply_rx(&mut psi, qubit, theta),
        }
    }
    Ok(psi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisProbability {
    pub bitstring: String,
    pub probability: f64,
}

/// Outcome of an optimized QAOA run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaResult {
    pub n_qubits: usize,
    pub layers: usize,
    pub initial_params: Vec<f64>,
    pub best_params: Vec<f64>,
    pub expectation: f64,
    pub best_bitstring: String,
    pub best_probability: f64,
    pub enhancement_factor: f64,
    /// Most probable basis states, highest first.
    pub top: Vec<BasisProbability>,
    pub evaluations: usize,
}

impl QaoaResult {
    pub fn best_index(&self) -> u64 {
        crate::problem::parse_bitstring(&self.best_bitstring).expect("valid bitstring")
    }
}

/// The `k` most probable states, ties to the lower index.
pub fn top_states(probabilities: &[f64], n: usize, k: usize) -> Vec<BasisProbability> {
    let mut idx: Vec<usize> = (0..probabilities.len()).collect();
    idx.sort_by(|&a, &b| probabilities[b].total_cmp(&probabilities[a]).then(a.cmp(&b)));
    idx.into_iter()
        .take(k)
        .map(|i| BasisProbability {
            bitstring: format_bitstring(i as u64, n),
            probability: probabilities[i],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MomentSet;
    use crate::polynomial::VarKind;
    use crate::problem::{compile, PortfolioProblem};
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn from_binary(poly: MultilinearPolynomial, n: usize) -> CompiledProblem {
        let p = PortfolioProblem::new(vec!["A".into()], vec![1.0], 1.0, MomentSet::zeros(1), 3.0, 1.0).unwrap();
        let mut cp = compile(&p).unwrap();
        cp.spin_poly = poly.to_spin().unwrap();
        cp.binary_poly = poly;
        cp.n_qubits = n;
        cp
    }

    fn from_spin(spin: MultilinearPolynomial, n: usize) -> CompiledProblem {
        from_binary(spin.to_binary().unwrap(), n)
    }

    fn random_spin(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> MultilinearPolynomial {
        let mut p = MultilinearPolynomial::new(VarKind::Spin);
        for _ in 0..terms {
            let deg = rng.random_range(1..=4usize.min(n));
            let vars: Vec<u32> = rand::seq::index::sample(rng, n, deg)
                .into_iter()
                .map(|v| v as u32)
                .collect();
            p.add_term(vars, rng.random_range(-1.0..1.0));
        }
        p
    }

    fn norm(psi: &[Complex64]) -> f64 {
        psi.iter().map(|a| a.norm_sqr()).sum()
    }

    #[test]
    fn phases_examples() {
        let zero = from_binary(MultilinearPolynomial::new(VarKind::Binary), 3);
        assert_eq!(diagonal_phases(&zero).unwrap(), vec![0.0; 8]);
        let mut s = MultilinearPolynomial::new(VarKind::Spin);
        s.add_term([0], 0.7);
        assert_eq!(diagonal_phases(&from_spin(s, 1)).unwrap(), vec![0.7, -0.7]);
    }

    #[test]
    fn zero_layers_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cp = from_spin(random_spin(&mut rng, 3, 5), 3);
        let probs = QaoaSimulator::new(&cp).unwrap().probabilities(&[]).unwrap();
        for p in &probs {
            assert_relative_eq!(*p, 0.125, epsilon = 1e-15);
        }
        let e = diagonal_phases(&cp).unwrap();
        assert_relative_eq!(
            expectation(&cp, &[]).unwrap(),
            e.iter().sum::<f64>() / 8.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(enhancement_factor(&probs), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_gamma_keeps_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cp = from_spin(random_spin(&mut rng, 4, 6), 4);
        for p in QaoaSimulator::new(&cp).unwrap().probabilities(&[0.0, 0.83]).unwrap() {
            assert_relative_eq!(p, 1.0 / 16.0, epsilon = 1e-14);
        }
    }

    /// Hand-built 2x2 product: Rx(2 beta) diag(e^{-i gamma}, e^{i gamma}) |+>.
    fn single_qubit_oracle(gamma: f64, beta: f64) -> f64 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = Complex64::from_polar(r, -gamma);
        let v1 = Complex64::from_polar(r, gamma);
        let (c, s) = (beta.cos(), beta.sin());
        let w0 = v0 * c + v1 * Complex64::new(0.0, -s);
        let w1 = v0 * Complex64::new(0.0, -s) + v1 * c;
        w0.norm_sqr() - w1.norm_sqr()
    }

    #[test]
    fn single_qubit_closed_form() {
        let mut z = MultilinearPolynomial::new(VarKind::Spin);
        z.add_term([0], 1.0);
        let cp = from_spin(z, 1);
        let sim = QaoaSimulator::new(&cp).unwrap();
        for (g, b) in [(0.3, 0.2), (-1.1, 0.7), (2.0, -0.4)] {
            let e = sim.expectation(&[g, b]).unwrap();
            assert_relative_eq!(e, single_qubit_oracle(g, b), epsilon = 1e-12);
            assert_relative_eq!(e, (2.0 * b).sin() * (2.0 * g).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn enhancement_examples() {
        assert_eq!(enhancement_factor(&[0.25; 4]), 1.0);
        let mut delta = vec![0.0; 16];
        delta[5] = 1.0;
        assert_eq!(enhancement_factor(&delta), 16.0);
        assert_eq!(most_probable(&[0.3, 0.3, 0.4, 0.0]), 2);
        assert_eq!(most_probable(&[0.5, 0.5]), 0);
    }

    #[test]
    fn gate_path_basics() {
        let psi = simulate_gates(&[Gate::H(0), Gate::H(1)], 2).unwrap();
        for a in &psi {
            assert_relative_eq!(a.re, 0.5, epsilon = 1e-15);
            assert_eq!(a.im, 0.0);
        }
        let psi = simulate_gates(&[], 3).unwrap();
        assert_eq!(psi[0], Complex64::new(1.0, 0.0));
        assert!(psi[1..].iter().all(|a| *a == Complex64::new(0.0, 0.0)));
        assert!(matches!(
            simulate_gates(&[], 15),
            Err(Error::ResourceLimit { limit: 14, .. })
        ));
    }

    #[test]
    fn term_gate_counts() {
        let mut s = MultilinearPolynomial::new(VarKind::Spin);
        s.add_term([0, 1, 2, 3], 0.5);
        let c = synthesize_from_spin(&s, 4, &[0.1, 0.2]).unwrap();
        assert_eq!((c.metrics.cnot, c.metrics.rz, c.metrics.h, c.metrics.rx), (6, 1, 4, 4));
        assert_eq!(
            c.gates[4..11],
            [
                Gate::Cnot { control: 0, target: 1 },
                Gate::Cnot { control: 1, target: 2 },
                Gate::Cnot { control: 2, target: 3 },
                Gate::Rz { qubit: 3, theta: 0.1 },
                Gate::Cnot { control: 2, target: 3 },
                Gate::Cnot { control: 1, target: 2 },
                Gate::Cnot { control: 0, target: 1 },
            ]
        );
        // H, 3 ladder steps, Rz, 3 mirrored steps, Rx.
        assert_eq!(c.metrics.depth, 9);

        let mut s = MultilinearPolynomial::new(VarKind::Spin);
        s.add_term([2], -1.0);
        let c = synthesize_from_spin(&s, 3, &[0.1, 0.2]).unwrap();
        assert_eq!((c.metrics.cnot, c.metrics.rz), (0, 1));
        assert_eq!(c.metrics.depth, 3);
    }

    #[test]
    fn text_export() {
        let mut s = MultilinearPolynomial::new(VarKind::Spin);
        s.add_term([0, 1], 1.0);
        let c = synthesize_from_spin(&s, 2, &[0.25, 0.5]).unwrap();
        assert_eq!(c.to_text(), "H 0\nH 1\nCNOT 0 1\nRZ 1 0.5\nCNOT 0 1\nRX 0 1\nRX 1 1\n");
    }

    #[test]
    fn basis_state_expectation_matches_energy() {
        // Gate path on a basis state, phase layer only: <Z_S> terms recover E(b).
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spin = random_spin(&mut rng, 4, 8);
        let cp = from_spin(spin.clone(), 4);
        let e = diagonal_phases(&cp).unwrap();
        for b in 0..16usize {
            let mut gates: Vec<Gate> = (0..4)
                .filter(|q| b >> q & 1 == 1)
                .map(|q| Gate::Rx {
                    qubit: q,
                    theta: std::f64::consts::PI,
                })
                .collect();
            let circuit = synthesize_from_spin(&spin, 4, &[1.0, 0.0]).unwrap();
            gates.extend(
                circuit
                    .gates
                    .iter()
                    .filter(|g| matches!(g, Gate::Cnot { .. } | Gate::Rz { .. })),
            );
            let psi = simulate_gates(&gates, 4).unwrap();
            // Phase picked up relative to the prepared basis state.
            let phase = psi[b].arg() - simulate_gates(&gates[..b.count_ones() as usize], 4).unwrap()[b].arg();
            let expected = -(e[b] - spin.constant());
            let diff = (phase - expected).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(diff < 1e-9 || diff > 2.0 * std::f64::consts::PI - 1e-9, "state {b}");
        }
    }

    #[test]
    fn phase_layers_compose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cp = from_spin(random_spin(&mut rng, 5, 10), 5);
        let sim = QaoaSimulator::new(&cp).unwrap();
        let a = sim.statevector(&[0.3, 0.4, 0.0, 0.0]).unwrap();
        let b = sim.statevector(&[0.7, 0.0]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x.re, y.re, epsilon = 1e-12);
            assert_relative_eq!(x.im, y.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampled_expectation_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cp = from_spin(random_spin(&mut rng, 4, 8), 4);
        let sim = QaoaSimulator::new(&cp).unwrap();
        let params = [0.4, -0.3];
        let exact = sim.expectation(&params).unwrap();
        let probs = sim.probabilities(&params).unwrap();
        let var: f64 = probs
            .iter()
            .zip(sim.energies())
            .map(|(p, e)| p * (e - exact).powi(2))
            .sum();
        let shots = 100_000;
        let est = sim.sampled_expectation(&params, shots, &mut rng).unwrap();
        assert!((est - exact).abs() <= 3.0 * (var / shots as f64).sqrt());
    }

    #[test]
    fn initial_params_in_range() {
        let cfg = QaoaConfig {
            layers: 3,
            seed: 12,
            ..Default::default()
        };
        let p = cfg.initial_params().unwrap();
        assert_eq!(p.len(), 6);
        assert!(p.iter().all(|x| x.abs() <= INIT_RANGE));
        assert_eq!(p, cfg.initial_params().unwrap());
        let bad = QaoaConfig {
            initial_params: Some(vec![0.1]),
            ..Default::default()
        };
        assert!(bad.initial_params().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gate_and_diagonal_paths_agree(seed in 0u64..10_000, n in 2usize..8, p in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spin = random_spin(&mut rng, n, 3 * n);
            let cp = from_spin(spin, n);
            let params: Vec<f64> = (0..2 * p).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
            let fast = simulate(&cp, &params).unwrap();
            let circuit = synthesize_circuit(&cp, &params).unwrap();
            let slow = simulate_gates(&circuit.gates, n).unwrap();
            prop_assert!((norm(&fast) - 1.0).abs() < 1e-10);
            prop_assert!((norm(&slow) - 1.0).abs() < 1e-10);
            for (a, b) in fast.iter().zip(&slow) {
                prop_assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-9);
            }
            let overlap: Complex64 = fast.iter().zip(&slow).map(|(a, b)| a.conj() * b).sum();
            prop_assert!(overlap.norm_sqr() > 1.0 - 1e-9);
        }

        #[test]
        fn rz_and_cnot_counts_follow_terms(seed in 0u64..10_000, n in 1usize..9, p in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let spin = random_spin(&mut rng, n, 10);
            let params = vec![0.1; 2 * p];
            let c = synthesize_from_spin(&spin, n, &params).unwrap();
            let cnots: usize = spin.terms().map(|(v, _)| 2 * (v.len() - 1)).sum();
            prop_assert_eq!(c.metrics.cnot, p * cnots);
            prop_assert_eq!(c.metrics.rz, p * spin.len());
            prop_assert_eq!(c.metrics.h, n);
            prop_assert_eq!(c.metrics.rx, p * n);
        }
    }
}
