//! Exact diagonal solver.
//!
//! Every term of the cost Hamiltonian is a product of `Z` operators, so the
//! Hamiltonian is diagonal in the computational basis and its eigenvalues
//! are the polynomial values at the `2^n` bitstrings. Those values are
//! computed in one pass with a subset-sum transform of the binary
//! polynomial's coefficient table, `O(n 2^n)` instead of `O(terms 2^n)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomial::{MultilinearPolynomial, VarKind};
use crate::problem::{format_bitstring, Allocation, CompiledProblem};

/// Largest register enumerated densely.
pub const MAX_EXACT_QUBITS: usize = 20;

/// Energies of all basis states of a binary polynomial over `n` variables,
/// indexed so that variable `q` is bit `q` of the index.
pub fn energies(poly: &MultilinearPolynomial, n: usize) -> Result<Vec<f64>> {
    if n > MAX_EXACT_QUBITS {
        return Err(Error::ResourceLimit {
            n_qubits: n,
            limit: MAX_EXACT_QUBITS,
        });
    }
    if poly.kind() != VarKind::Binary {
        return Err(Error::Domain("energies need a binary polynomial".into()));
    }
    if poly.num_vars() > n {
        return Err(Error::Shape(format!(
            "polynomial uses {} variables, register has {n}",
            poly.num_vars()
        )));
    }
    let mut table = vec![0.0f64; 1 << n];
    table[0] = poly.constant();
    for (vars, c) in poly.terms() {
        let mask = vars.iter().fold(0usize, |m, &v| m | 1 << v);
        table[mask] += c;
    }
    // After pass `i`, entry `x` holds the sum over subsets of `x` that agree
    // with `x` above bit `i`.
    for i in 0..n {
        let half = 1usize << i;
        table.par_chunks_mut(half << 1).for_each(|chunk| {
            let (lo, hi) = chunk.split_at_mut(half);
            for (h, l) in hi.iter_mut().zip(lo.iter()) {
                *h += *l;
            }
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub index: u64,
    pub bitstring: String,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub n_qubits: usize,
    /// Ascending by energy, ties by bitstring.
    pub values: Vec<SpectrumEntry>,
    pub min_energy: f64,
    pub argmin_bits: String,
}

impl Spectrum {
    fn from_sorted(n_qubits: usize, order: Vec<(f64, u64)>) -> Self {
        let values: Vec<SpectrumEntry> = order
            .into_iter()
            .map(|(energy, index)| SpectrumEntry {
                index,
                bitstring: format_bitstring(index, n_qubits),
                energy,
            })
            .collect();
        Self {
            n_qubits,
            min_energy: values[0].energy,
            argmin_bits: values[0].bitstring.clone(),
            values,
        }
    }

    pub fn argmin_index(&self) -> u64 {
        self.values[0].index
    }

    /// Writes `bitstring,energy` rows in spectrum order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["bitstring", "energy"])?;
        for e in &self.values {
            w.write_record([e.bitstring.as_str(), &e.energy.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn by_energy_then_index(a: &(f64, u64), b: &(f64, u64)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// All `2^n` energies in ascending order.
pub fn full_spectrum(cp: &CompiledProblem) -> Result<Spectrum> {
    let e = energies(&cp.binary_poly, cp.n_qubits)?;
    let mut order: Vec<(f64, u64)> = e.into_iter().zip(0u64..).collect();
    order.par_sort_unstable_by(by_energy_then_index);
    Ok(Spectrum::from_sorted(cp.n_qubits, order))
}

#[derive(PartialEq)]
struct Ranked(f64, u64);

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        by_energy_then_index(&(self.0, self.1), &(other.0, other.1))
    }
}

/// The `k` lowest energies, kept in a bounded max-heap during the scan.
pub fn k_smallest(cp: &CompiledProblem, k: usize) -> Result<Spectrum> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let e = energies(&cp.binary_poly, cp.n_qubits)?;
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (energy, index) in e.into_iter().zip(0u64..) {
        let item = Ranked(energy, index);
        if heap.len() < k {
            heap.push(item);
        } else if heap.peek().is_some_and(|top| item < *top) {
            heap.pop();
            heap.push(item);
        }
    }
    let order = heap.into_sorted_vec().into_iter().map(|Ranked(e, i)| (e, i)).collect();
    Ok(Spectrum::from_sorted(cp.n_qubits, order))
}

/// Ground state of a compiled problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub bitstring: String,
    pub energy: f64,
    pub allocation: Allocation,
}

pub fn solve_exact(cp: &CompiledProblem) -> Result<ExactSolution> {
    let s = k_smallest(cp, 1)?;
    Ok(ExactSolution {
        bitstring: s.argmin_bits.clone(),
        energy: s.min_energy,
        allocation: cp.decode_index(s.argmin_index())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::MomentSet;
    use crate::problem::{compile, index_to_bits, PortfolioProblem};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bare(poly: MultilinearPolynomial, n: usize) -> CompiledProblem {
        let p = PortfolioProblem::new(vec!["A".into()], vec![1.0], 1.0, MomentSet::zeros(1), 3.0, 1.0).unwrap();
        let mut cp = compile(&p).unwrap();
        cp.spin_poly = poly.to_spin().unwrap();
        cp.binary_poly = poly;
        cp.n_qubits = n;
        cp
    }

    fn random_binary(rng: &mut ChaCha8Rng, n: u32, terms: usize) -> MultilinearPolynomial {
        let mut p = MultilinearPolynomial::new(VarKind::Binary);
        p.set_constant(rng.random_range(-1.0..1.0));
        for _ in 0..terms {
            let deg = rng.random_range(1..=4);
            let vars: Vec<u32> = (0..deg).map(|_| rng.random_range(0..n)).collect();
            p.add_term(vars, rng.random_range(-2.0..2.0));
        }
        p
    }

    /// Oracle: evaluate the spin form of the polynomial at every state.
    fn spin_oracle(poly: &MultilinearPolynomial, n: usize) -> Vec<f64> {
        let spin = poly.to_spin().unwrap();
        (0..1u64 << n)
            .map(|x| {
                let s: Vec<i8> = index_to_bits(x, n).iter().map(|b| 1 - 2 * b).collect();
                spin.evaluate(&s).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_polynomial() {
        let s = full_spectrum(&bare(MultilinearPolynomial::new(VarKind::Binary), 2)).unwrap();
        assert!(s.values.iter().all(|e| e.energy == 0.0));
        assert_eq!(s.argmin_bits, "00");
        let k = k_smallest(&bare(MultilinearPolynomial::new(VarKind::Binary), 4), 5).unwrap();
        let bits: Vec<&str> = k.values.iter().map(|e| e.bitstring.as_str()).collect();
        assert_eq!(bits, ["0000", "0001", "0010", "0011", "0100"]);
    }

    #[test]
    fn single_negative_literal() {
        let mut p = MultilinearPolynomial::new(VarKind::Binary);
        p.add_term([0], -1.0);
        let s = full_spectrum(&bare(p, 1)).unwrap();
        let pairs: Vec<(&str, f64)> = s.values.iter().map(|e| (e.bitstring.as_str(), e.energy)).collect();
        assert_eq!(pairs, [("1", -1.0), ("0", 0.0)]);
        assert_eq!(s.min_energy, -1.0);
    }

    #[test]
    fn transform_matches_spin_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 3, 8] {
            let p = random_binary(&mut rng, n as u32, 30);
            let fast = energies(&p, n).unwrap();
            for (a, b) in fast.iter().zip(spin_oracle(&p, n)) {
                assert_relative_eq!(*a, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn k_smallest_matches_full_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cp = bare(random_binary(&mut rng, 8, 40), 8);
        let full = full_spectrum(&cp).unwrap();
        assert_eq!(k_smallest(&cp, 1).unwrap().values[0], full.values[0]);
        assert_eq!(k_smallest(&cp, 17).unwrap().values, full.values[..17]);
        assert_eq!(k_smallest(&cp, 256).unwrap(), full);
        assert!(full.values.windows(2).all(|w| w[0].energy <= w[1].energy));
    }

    #[test]
    fn guards() {
        let p = MultilinearPolynomial::new(VarKind::Binary);
        assert!(matches!(
            energies(&p, 21),
            Err(Error::ResourceLimit {
                n_qubits: 21,
                limit: 20
            })
        ));
        assert!(matches!(k_smallest(&bare(p, 2), 0), Err(Error::Domain(_))));
    }

    #[test]
    fn csv_export() {
        let mut p = MultilinearPolynomial::new(VarKind::Binary);
        p.add_term([1], -0.5);
        let mut out = Vec::new();
        full_spectrum(&bare(p, 2)).unwrap().write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "bitstring,energy\n10,-0.5\n11,-0.5\n00,0\n01,0\n"
        );
    }

    proptest! {
        #[test]
        fn energies_match_direct_evaluation(seed in 0u64..1000, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_binary(&mut rng, n as u32, 12);
            let e = energies(&p, n).unwrap();
            for x in 0..1u64 << n {
                let direct = p.evaluate(&index_to_bits(x, n)).unwrap();
                prop_assert!((e[x as usize] - direct).abs() <= 1e-9 * direct.abs().max(1.0));
            }
        }
    }
}
