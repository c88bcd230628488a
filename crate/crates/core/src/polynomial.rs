//! Pseudo-boolean polynomial algebra.
//!
//! [`IntegerPolynomial`] holds the portfolio objective over bounded integer
//! variables. Each integer variable is replaced by a weighted sum of binary
//! variables ([`binary_expansion`]), which yields a [`MultilinearPolynomial`]
//! over `{0, 1}`; [`MultilinearPolynomial::to_spin`] rewrites it over
//! `{-1, +1}` with `x = (1 - s) / 2`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients with smaller magnitude are dropped by [`MultilinearPolynomial::simplify`].
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Alphabet of the polynomial variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    /// Values in `{0, 1}`, with `x * x = x`.
    Binary,
    /// Values in `{-1, +1}`, with `s * s = 1`.
    Spin,
}

/// Sparse multilinear polynomial `c + sum_S a_S prod_{i in S} v_i`.
///
/// Term keys are ascending, duplicate-free variable lists; iteration follows
/// the lexicographic order of the keys.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilinearPolynomial {
    kind: VarKind,
    constant: f64,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultilinearPolynomial {
    pub fn new(kind: VarKind) -> Self {
        Self {
            kind,
            constant: 0.0,
            terms: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn set_constant(&mut self, c: f64) {
        self.constant = c;
    }

    /// Non-constant terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn coefficient(&self, vars: &[u32]) -> f64 {
        if vars.is_empty() {
            self.constant
        } else {
            self.terms.get(vars).copied().unwrap_or(0.0)
        }
    }

    /// Number of non-constant terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// One past the largest variable index.
    pub fn num_vars(&self) -> usize {
        self.terms
            .keys()
            .filter_map(|k| k.last())
            .max()
            .map_or(0, |&m| m as usize + 1)
    }

    /// Adds `coef * prod(vars)`, reducing repeated variables with the
    /// alphabet's idempotence rule.
    pub fn add_term(&mut self, vars: impl IntoIterator<Item = u32>, coef: f64) {
        let mut key: Vec<u32> = vars.into_iter().collect();
        key.sort_unstable();
        match self.kind {
            VarKind::Binary => key.dedup(),
            VarKind::Spin => {
                let mut reduced = Vec::with_capacity(key.len());
                for v in key {
                    if reduced.last() == Some(&v) {
                        reduced.pop();
                    } else {
                        reduced.push(v);
                    }
                }
                key = reduced;
            }
        }
        self.add_canonical(key, coef);
    }

    fn add_canonical(&mut self, key: Vec<u32>, coef: f64) {
        if key.is_empty() {
            self.constant += coef;
        } else {
            *self.terms.entry(key).or_insert(0.0) += coef;
        }
    }

    /// Drops terms with `|coef| < PRUNE_THRESHOLD`.
    pub fn simplify(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE_THRESHOLD);
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.constant *= factor;
        out.terms.values_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_kind(other)?;
        let mut out = self.clone();
        out.constant += other.constant;
        for (k, c) in &other.terms {
            out.add_canonical(k.clone(), *c);
        }
        out.simplify();
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_kind(other)?;
        let mut out = Self::new(self.kind);
        let lhs = std::iter::once((&[][..], self.constant)).chain(self.terms());
        for (a, ca) in lhs {
            let rhs = std::iter::once((&[][..], other.constant)).chain(other.terms());
            for (b, cb) in rhs {
                out.add_term(a.iter().chain(b).copied(), ca * cb);
            }
        }
        out.simplify();
        Ok(out)
    }

    fn check_same_kind(&self, other: &Self) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::Domain(format!(
                "cannot combine {:?} and {:?} polynomials",
                self.kind, other.kind
            )));
        }
        Ok(())
    }

    /// Evaluates at an assignment of `0/1` (binary) or `-1/+1` (spin) values.
    pub fn evaluate(&self, assignment: &[i8]) -> Result<f64> {
        let allowed: &[i8] = match self.kind {
            VarKind::Binary => &[0, 1],
            VarKind::Spin => &[-1, 1],
        };
        if let Some(v) = assignment.iter().find(|v| !allowed.contains(v)) {
            return Err(Error::Domain(format!("value {v} is not a {:?} value", self.kind)));
        }
        if assignment.len() < self.num_vars() {
            return Err(Error::Domain(format!(
                "assignment has {} values, polynomial uses {}",
                assignment.len(),
                self.num_vars()
            )));
        }
        let mut total = self.constant;
        for (vars, coef) in &self.terms {
            let prod: i32 = vars.iter().map(|&v| assignment[v as usize] as i32).product();
            total += coef * prod as f64;
        }
        Ok(total)
    }

    /// Rewrites a binary polynomial over spins with `x_i = (1 - s_i) / 2`.
    pub fn to_spin(&self) -> Result<Self> {
        if self.kind != VarKind::Binary {
            return Err(Error::Domain("to_spin expects a binary polynomial".into()));
        }
        // prod_{i in S} (1 - s_i)/2 = 2^-|S| sum_{T subset S} (-1)^|T| s_T
        Ok(self.expand_subsets(VarKind::Spin, |k, t| {
            let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
            sign / f64::powi(2.0, k as i32)
        }))
    }

    /// Rewrites a spin polynomial over binaries with `s_i = 1 - 2 x_i`.
    pub fn to_binary(&self) -> Result<Self> {
        if self.kind != VarKind::Spin {
            return Err(Error::Domain("to_binary expects a spin polynomial".into()));
        }
        // prod_{i in S} (1 - 2 x_i) = sum_{T subset S} (-2)^|T| x_T
        Ok(self.expand_subsets(VarKind::Binary, |_, t| f64::powi(-2.0, t as i32)))
    }

    /// Expands each term over all subsets of its variables; `weight(|S|, |T|)`
    /// gives the factor of subset `T`.
    fn expand_subsets(&self, kind: VarKind, weight: impl Fn(usize, usize) -> f64) -> Self {
        let mut out = Self::new(kind);
        out.constant = self.constant;
        for (vars, coef) in &self.terms {
            let k = vars.len();
            assert!(k < 32, "term degree {k} too large to expand");
            for mask in 0u32..(1 << k) {
                let subset: Vec<u32> = (0..k).filter(|b| mask >> b & 1 == 1).map(|b| vars[b]).collect();
                let t = subset.len();
                out.add_canonical(subset, coef * weight(k, t));
            }
        }
        out.simplify();
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    vars: Vec<u32>,
    coef: f64,
}

#[derive(Serialize, Deserialize)]
struct PolynomialRepr {
    kind: VarKind,
    constant: f64,
    terms: Vec<TermRepr>,
}

impl Serialize for MultilinearPolynomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        PolynomialRepr {
            kind: self.kind,
            constant: self.constant,
            terms: self
                .terms
                .iter()
                .map(|(vars, coef)| TermRepr {
                    vars: vars.clone(),
                    coef: *coef,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MultilinearPolynomial {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = PolynomialRepr::deserialize(deserializer)?;
        let mut poly = MultilinearPolynomial::new(repr.kind);
        poly.constant = repr.constant;
        for t in repr.terms {
            poly.add_term(t.vars, t.coef);
        }
        Ok(poly)
    }
}

/// Polynomial over non-negative integer variables. Monomial keys are sorted
/// variable lists that may repeat (`[0, 0, 1]` is `z0^2 z1`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegerPolynomial {
    constant: f64,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl IntegerPolynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.terms.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    pub fn coefficient(&self, vars: &[u32]) -> f64 {
        let mut key = vars.to_vec();
        key.sort_unstable();
        if key.is_empty() {
            self.constant
        } else {
            self.terms.get(&key).copied().unwrap_or(0.0)
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_vars(&self) -> usize {
        self.terms
            .keys()
            .filter_map(|k| k.last())
            .max()
            .map_or(0, |&m| m as usize + 1)
    }

    pub fn add_term(&mut self, vars: impl IntoIterator<Item = u32>, coef: f64) {
        let mut key: Vec<u32> = vars.into_iter().collect();
        key.sort_unstable();
        if key.is_empty() {
            self.constant += coef;
        } else {
            *self.terms.entry(key).or_insert(0.0) += coef;
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.constant += other.constant;
        for (k, c) in &other.terms {
            *self.terms.entry(k.clone()).or_insert(0.0) += c;
        }
    }

    pub fn simplify(&mut self) {
        self.terms.retain(|_, c| c.abs() >= PRUNE_THRESHOLD);
    }

    pub fn evaluate(&self, z: &[f64]) -> Result<f64> {
        if z.len() < self.num_vars() {
            return Err(Error::Shape(format!(
                "assignment has {} values, polynomial uses {}",
                z.len(),
                self.num_vars()
            )));
        }
        let mut total = self.constant;
        for (vars, coef) in &self.terms {
            total += coef * vars.iter().map(|&v| z[v as usize]).product::<f64>();
        }
        Ok(total)
    }
}

/// Binary weights for an integer in `0..=n`: `[1, 2, .., 2^(M-1), n + 1 - 2^M]`
/// with `M = floor(log2 n)`. Their subset sums are exactly `{0, .., n}`.
pub fn binary_expansion(n: u64) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(Error::EmptyEncoding);
    }
    let m = n.ilog2();
    let mut coefs: Vec<u64> = (0..m).map(|k| 1u64 << k).collect();
    coefs.push(n + 1 - (1u64 << m));
    Ok(coefs)
}

/// Number of binary variables encoding `0..=n`; zero when `n == 0`.
pub fn encoding_bits(n: u64) -> usize {
    if n == 0 {
        0
    } else {
        n.ilog2() as usize + 1
    }
}

/// Binary expansion of each integer variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerEncoding {
    /// Range upper bound `N_i` per integer variable.
    pub ranges: Vec<u64>,
    /// `(binary variable, weight)` pairs per integer variable. Empty when the
    /// variable is fixed to zero.
    pub bits: Vec<Vec<(u32, u64)>>,
}

impl IntegerEncoding {
    /// Assigns binary variables consecutively, starting at `first_bit`, in
    /// variable order.
    pub fn from_ranges(ranges: &[u64], first_bit: u32) -> Self {
        let mut next = first_bit;
        let bits = ranges
            .iter()
            .map(|&n| match binary_expansion(n) {
                Ok(coefs) => coefs
                    .into_iter()
                    .map(|c| {
                        let b = next;
                        next += 1;
                        (b, c)
                    })
                    .collect(),
                Err(_) => Vec::new(),
            })
            .collect();
        Self {
            ranges: ranges.to_vec(),
            bits,
        }
    }

    pub fn num_bits(&self) -> usize {
        self.bits.iter().map(Vec::len).sum()
    }

    /// Integer value of variable `var` under a binary assignment.
    pub fn decode_var(&self, var: usize, is_set: impl Fn(u32) -> bool) -> u64 {
        self.bits[var].iter().filter(|(b, _)| is_set(*b)).map(|(_, c)| c).sum()
    }

    /// Some binary assignment (as set bit indices) representing `value`.
    pub fn encode_var(&self, var: usize, value: u64) -> Option<Vec<u32>> {
        let bits = &self.bits[var];
        if value > self.ranges[var] {
            return None;
        }
        // The boundary weight is last and never exceeds 2^M, so greedily
        // taking it first leaves a remainder representable by the powers of two.
        let mut rest = value;
        let mut set = Vec::new();
        for &(b, c) in bits.iter().rev() {
            if c <= rest {
                rest -= c;
                set.push(b);
            }
        }
        (rest == 0).then(|| {
            set.sort_unstable();
            set
        })
    }
}

/// Replaces every integer variable by its weighted binary sum and expands.
pub fn substitute_integer(poly: &IntegerPolynomial, enc: &IntegerEncoding) -> Result<MultilinearPolynomial> {
    let mut out = MultilinearPolynomial::new(VarKind::Binary);
    out.constant = poly.constant();
    for (vars, coef) in poly.terms() {
        let mut factors = Vec::with_capacity(vars.len());
        for &v in vars {
            let bits = enc
                .bits
                .get(v as usize)
                .ok_or_else(|| Error::Encoding(format!("integer variable {v} has no encoding")))?;
            factors.push(bits.as_slice());
        }
        if factors.iter().any(|f| f.is_empty()) {
            continue; // a variable fixed at zero
        }
        let mut idx = vec![0usize; factors.len()];
        'product: loop {
            let mut weight = coef;
            let mut key = Vec::with_capacity(factors.len());
            for (f, &i) in factors.iter().zip(&idx) {
                let (b, c) = f[i];
                weight *= c as f64;
                key.push(b);
            }
            out.add_term(key, weight);

            for pos in (0..factors.len()).rev() {
                idx[pos] += 1;
                if idx[pos] < factors[pos].len() {
                    continue 'product;
                }
                idx[pos] = 0;
            }
            break;
        }
    }
    out.simplify();
    Ok(out)
}
