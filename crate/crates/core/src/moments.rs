//! Mean, covariance, coskewness and cokurtosis estimates for aligned returns.
//!
//! Mean and covariance are annualized with the sampling frequency. The third
//! and fourth co-moments are standardized by the per-asset sample standard
//! deviations and are left dimensionless:
//!
//! ```text
//! S_ijk  = mean_t[d_i d_j d_k]     / (s_i s_j s_k)
//! K_ijkl = mean_t[d_i d_j d_k d_l] / (s_i s_j s_k s_l)
//! ```
//!
//! where `d_i = r_i - mean(r_i)` and `s_i` uses the `m - 1` denominator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{arithmetic_mean, MeanEstimator, ReturnSeries};

pub type Matrix = Vec<Vec<f64>>;
pub type Tensor3 = Vec<Vec<Vec<f64>>>;
pub type Tensor4 = Vec<Vec<Vec<Vec<f64>>>>;

/// Standard deviations below this are treated as a constant series.
const DEGENERATE_SIGMA: f64 = 1e-14;

/// The four moment structures of `n` assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub n: usize,
    pub mu: Vec<f64>,
    pub cov: Matrix,
    pub coskew: Tensor3,
    pub cokurt: Tensor4,
    pub sigma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MomentSet {
    /// All-zero moments for `n` assets.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            mu: vec![0.0; n],
            cov: vec![vec![0.0; n]; n],
            coskew: vec![vec![vec![0.0; n]; n]; n],
            cokurt: vec![vec![vec![vec![0.0; n]; n]; n]; n],
            sigma: vec![0.0; n],
            warnings: Vec::new(),
        }
    }

    /// Estimates all moments. Assets with zero variance get zero entries in
    /// both tensors and a warning instead of an error.
    pub fn estimate(returns: &[ReturnSeries], frequency: f64, estimator: MeanEstimator) -> Result<Self> {
        let m = check_aligned(returns)?;
        if m < 3 {
            return Err(Error::InsufficientData(format!(
                "need at least 3 returns per asset, got {m}"
            )));
        }
        let mu = returns
            .iter()
            .map(|r| estimator.estimate(r, frequency))
            .collect::<Result<Vec<_>>>()?;
        let cov = covariance_matrix(returns, frequency)?;
        let sigma = returns.iter().map(sample_std).collect::<Result<Vec<_>>>()?;

        let mut warnings = Vec::new();
        for (i, s) in sigma.iter().enumerate() {
            if *s < DEGENERATE_SIGMA {
                let msg = format!(
                    "asset {i} ({}) has zero variance; its coskewness and cokurtosis entries are zero",
                    returns[i].ticker
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        let centered = centered_returns(returns)?;
        let coskew = standardized_coskewness(&centered, &sigma);
        let cokurt = standardized_cokurtosis(&centered, &sigma);
        Ok(Self {
            n: returns.len(),
            mu,
            cov,
            coskew,
            cokurt,
            sigma,
            warnings,
        })
    }

    pub fn check_shape(&self) -> Result<()> {
        let n = self.n;
        let ok = self.mu.len() == n
            && self.sigma.len() == n
            && self.cov.len() == n
            && self.cov.iter().all(|r| r.len() == n)
            && self.coskew.len() == n
            && self.coskew.iter().flatten().all(|r| r.len() == n)
            && self.coskew.iter().all(|r| r.len() == n)
            && self.cokurt.len() == n
            && self.cokurt.iter().all(|a| a.len() == n)
            && self.cokurt.iter().flatten().all(|b| b.len() == n)
            && self.cokurt.iter().flatten().flatten().all(|c| c.len() == n);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "moment set is not consistently sized for n = {n}"
            )))
        }
    }

    /// Same moments with both higher-order tensors zeroed.
    pub fn without_higher_moments(&self) -> Self {
        let zero = Self::zeros(self.n);
        Self {
            coskew: zero.coskew,
            cokurt: zero.cokurt,
            ..self.clone()
        }
    }

    /// Restricts to the listed assets, in the given order.
    pub fn select(&self, assets: &[usize]) -> Self {
        let k = assets.len();
        let mut out = Self::zeros(k);
        for (a, &i) in assets.iter().enumerate() {
            out.mu[a] = self.mu[i];
            out.sigma[a] = self.sigma[i];
            for (b, &j) in assets.iter().enumerate() {
                out.cov[a][b] = self.cov[i][j];
                for (c, &kk) in assets.iter().enumerate() {
                    out.coskew[a][b][c] = self.coskew[i][j][kk];
                    for (d, &l) in assets.iter().enumerate() {
                        out.cokurt[a][b][c][d] = self.cokurt[i][j][kk][l];
                    }
                }
            }
        }
        out
    }
}

fn check_aligned(returns: &[ReturnSeries]) -> Result<usize> {
    let Some(first) = returns.first() else {
        return Err(Error::InsufficientData("no return series".into()));
    };
    let m = first.len();
    if let Some(bad) = returns.iter().find(|r| r.len() != m) {
        return Err(Error::Alignment(format!(
            "{} has {} returns, {} has {m}",
            bad.ticker,
            bad.len(),
            first.ticker
        )));
    }
    Ok(m)
}

fn centered_returns(returns: &[ReturnSeries]) -> Result<Vec<Vec<f64>>> {
    returns
        .iter()
        .map(|r| {
            let mean = arithmetic_mean(r, 1.0)?;
            Ok(r.returns.iter().map(|x| x - mean).collect())
        })
        .collect()
}

/// Sample standard deviation with the `m - 1` denominator.
pub fn sample_std(r: &ReturnSeries) -> Result<f64> {
    if r.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 returns",
            r.ticker
        )));
    }
    let mean = arithmetic_mean(r, 1.0)?;
    let ss: f64 = r.returns.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok((ss / (r.len() - 1) as f64).sqrt())
}

/// `c_ij = f / (m - 1) * sum_t (r_i - mean_i)(r_j - mean_j)`.
pub fn covariance_matrix(returns: &[ReturnSeries], frequency: f64) -> Result<Matrix> {
    let m = check_aligned(returns)?;
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 returns per asset, got {m}"
        )));
    }
    let d = centered_returns(returns)?;
    let n = returns.len();
    let scale = frequency / (m - 1) as f64;
    let mut cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = d[i].iter().zip(&d[j]).map(|(a, b)| a * b).sum();
            cov[i][j] = scale * s;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}

fn strict_inputs(returns: &[ReturnSeries]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let m = check_aligned(returns)?;
    if m < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 returns per asset, got {m}"
        )));
    }
    let sigma = returns.iter().map(sample_std).collect::<Result<Vec<_>>>()?;
    if let Some(asset) = sigma.iter().position(|s| *s < DEGENERATE_SIGMA) {
        return Err(Error::DegenerateAsset { asset });
    }
    Ok((centered_returns(returns)?, sigma))
}

/// Standardized coskewness tensor; fails on any constant series.
pub fn coskewness_tensor(returns: &[ReturnSeries]) -> Result<Tensor3> {
    let (d, sigma) = strict_inputs(returns)?;
    Ok(standardized_coskewness(&d, &sigma))
}

/// Standardized cokurtosis tensor; fails on any constant series.
pub fn cokurtosis_tensor(returns: &[ReturnSeries]) -> Result<Tensor4> {
    let (d, sigma) = strict_inputs(returns)?;
    Ok(standardized_cokurtosis(&d, &sigma))
}

// Entries are computed once for sorted index tuples and copied to every
// permutation, so the tensors are exactly symmetric.

fn standardized_coskewness(d: &[Vec<f64>], sigma: &[f64]) -> Tensor3 {
    let n = d.len();
    let m = d.first().map_or(0, Vec::len) as f64;
    let mut out = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let denom = sigma[i] * sigma[j] * sigma[k];
                if sigma[i] < DEGENERATE_SIGMA || sigma[j] < DEGENERATE_SIGMA || sigma[k] < DEGENERATE_SIGMA {
                    continue;
                }
                let s: f64 = (0..d[i].len()).map(|t| d[i][t] * d[j][t] * d[k][t]).sum();
                let v = s / m / denom;
                for (a, b, c) in permutations3(i, j, k) {
                    out[a][b][c] = v;
                }
            }
        }
    }
    out
}

fn standardized_cokurtosis(d: &[Vec<f64>], sigma: &[f64]) -> Tensor4 {
    let n = d.len();
    let m = d.first().map_or(0, Vec::len) as f64;
    let mut out = vec![vec![vec![vec![0.0; n]; n]; n]; n];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                for l in k..n {
                    if [i, j, k, l].iter().any(|&a| sigma[a] < DEGENERATE_SIGMA) {
                        continue;
                    }
                    let denom = sigma[i] * sigma[j] * sigma[k] * sigma[l];
                    let s: f64 = (0..d[i].len()).map(|t| d[i][t] * d[j][t] * d[k][t] * d[l][t]).sum();
                    let v = s / m / denom;
                    for [a, b, c, e] in permutations4([i, j, k, l]) {
                        out[a][b][c][e] = v;
                    }
                }
            }
        }
    }
    out
}

fn permutations3(i: usize, j: usize, k: usize) -> [(usize, usize, usize); 6] {
    [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)]
}

fn permutations4(idx: [usize; 4]) -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if a != b && a != c && a != d && b != c && b != d && c != d {
                        out.push([idx[a], idx[b], idx[c], idx[d]]);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rs(v: &[f64]) -> ReturnSeries {
        ReturnSeries::new("T", v.to_vec())
    }

    fn random_returns(n: usize, m: usize, seed: u64) -> Vec<ReturnSeries> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| ReturnSeries::new(format!("A{i}"), (0..m).map(|_| rng.random_range(-0.05..0.05)).collect()))
            .collect()
    }

    #[test]
    fn covariance_examples() {
        let c = covariance_matrix(&[rs(&[0.01, 0.01, 0.01])], 252.0).unwrap();
        assert!(c[0][0].abs() < 1e-30);
        let c = covariance_matrix(&[rs(&[0.1, -0.1]), rs(&[0.2, -0.2])], 252.0).unwrap();
        assert_relative_eq!(c[0][1], 10.08, epsilon = 1e-12);
        assert_eq!(c[0][1], c[1][0]);

        let r = random_returns(5, 40, 3);
        let c = covariance_matrix(&r, 252.0).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(c[i][j], c[j][i]);
            }
        }
    }

    #[test]
    fn covariance_errors() {
        assert!(matches!(
            covariance_matrix(&[rs(&[0.1, 0.2]), rs(&[0.1])], 1.0),
            Err(Error::Alignment(_))
        ));
        assert!(matches!(
            covariance_matrix(&[rs(&[0.1])], 1.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn single_asset_variance_matches_two_pass() {
        let r = random_returns(1, 50, 9);
        let x = &r[0].returns;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        let c = covariance_matrix(&r, 252.0).unwrap();
        assert_relative_eq!(c[0][0], 252.0 * var, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_data_has_zero_coskewness() {
        let r = [rs(&[0.1, -0.1, 0.1, -0.1]), rs(&[0.3, -0.3, 0.3, -0.3])];
        let s = coskewness_tensor(&r).unwrap();
        assert!(s.iter().flatten().flatten().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn diagonal_coskewness_matches_direct_skewness() {
        let x = [0.1, 0.2, -0.3, 0.05];
        // Direct oracle: third central moment over the (m-1) standard deviation cubed.
        let m = x.len() as f64;
        let mean = x.iter().sum::<f64>() / m;
        let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / m;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let expected = m3 / sd.powi(3);
        let s = coskewness_tensor(&[rs(&x)]).unwrap();
        assert_relative_eq!(s[0][0][0], expected, max_relative = 1e-12);
        assert_relative_eq!(s[0][0][0], -0.5640395515376585, max_relative = 1e-12);
    }

    #[test]
    fn two_point_cokurtosis() {
        // Alternating +-r: E[x^4] = r^4. The (m-1) deviation for m = 4 is
        // r * sqrt(4/3), so K = 9/16 with the sample-variance convention.
        let r = 0.02;
        let k = cokurtosis_tensor(&[rs(&[r, -r, r, -r])]).unwrap();
        assert_relative_eq!(k[0][0][0][0], 9.0 / 16.0, max_relative = 1e-12);
        // Population-variance normalization recovers the textbook value of 1.
        let long: Vec<f64> = (0..20_000).map(|t| if t % 2 == 0 { r } else { -r }).collect();
        let k = cokurtosis_tensor(&[rs(&long)]).unwrap();
        assert_relative_eq!(k[0][0][0][0], 1.0, max_relative = 1e-4);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let r = [rs(&[0.01, 0.01, 0.01, 0.01]), rs(&[0.1, 0.2, -0.1, 0.0])];
        assert!(matches!(
            cokurtosis_tensor(&r),
            Err(Error::DegenerateAsset { asset: 0 })
        ));
        assert!(matches!(
            coskewness_tensor(&r),
            Err(Error::DegenerateAsset { asset: 0 })
        ));

        let ms = MomentSet::estimate(&r, 252.0, MeanEstimator::Geometric).unwrap();
        assert_eq!(ms.warnings.len(), 1);
        assert_eq!(ms.cokurt[0][1][1][1], 0.0);
        assert_eq!(ms.coskew[1][0][1], 0.0);
        assert!(ms.cokurt[1][1][1][1] > 0.0);
    }

    #[test]
    fn tensors_are_permutation_invariant() {
        let r = random_returns(3, 30, 11);
        let s = coskewness_tensor(&r).unwrap();
        let k = cokurtosis_tensor(&r).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    for (a, b, c) in permutations3(i, j, l) {
                        assert_eq!(s[i][j][l], s[a][b][c]);
                    }
                    for q in 0..3 {
                        for [a, b, c, d] in permutations4([i, j, l, q]) {
                            assert_eq!(k[i][j][l][q], k[a][b][c][d]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rescaling_returns() {
        let r = random_returns(3, 25, 5);
        let scaled: Vec<_> = r
            .iter()
            .map(|s| ReturnSeries::new(s.ticker.clone(), s.returns.iter().map(|x| 3.0 * x).collect()))
            .collect();
        let (s0, s1) = (coskewness_tensor(&r).unwrap(), coskewness_tensor(&scaled).unwrap());
        let (k0, k1) = (cokurtosis_tensor(&r).unwrap(), cokurtosis_tensor(&scaled).unwrap());
        let (c0, c1) = (
            covariance_matrix(&r, 1.0).unwrap(),
            covariance_matrix(&scaled, 1.0).unwrap(),
        );
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(c1[i][j], 9.0 * c0[i][j], max_relative = 1e-12);
                for l in 0..3 {
                    assert_relative_eq!(s1[i][j][l], s0[i][j][l], max_relative = 1e-10, epsilon = 1e-14);
                    for q in 0..3 {
                        assert_relative_eq!(k1[i][j][l][q], k0[i][j][l][q], max_relative = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn covariance_is_psd() {
        let r = random_returns(6, 60, 21);
        let c = covariance_matrix(&r, 252.0).unwrap();
        let mat = nalgebra::DMatrix::from_fn(6, 6, |i, j| c[i][j]);
        let eig = mat.symmetric_eigen().eigenvalues;
        let max = eig.iter().cloned().fold(f64::MIN, f64::max);
        let min = eig.iter().cloned().fold(f64::MAX, f64::min);
        assert!(min >= -1e-8 * max);
    }

    #[test]
    fn json_field_names() {
        let ms = MomentSet::zeros(1);
        let v = serde_json::to_value(&ms).unwrap();
        for key in ["mu", "cov", "coskew", "cokurt", "sigma"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["cokurt"], serde_json::json!([[[[0.0]]]]));
    }

    #[test]
    fn select_preserves_entries() {
        let r = random_returns(4, 20, 2);
        let ms = MomentSet::estimate(&r, 252.0, MeanEstimator::Geometric).unwrap();
        let sub = ms.select(&[3, 1]);
        assert_eq!(sub.cokurt[0][1][1][0], ms.cokurt[3][1][1][3]);
        assert_eq!(sub.mu, vec![ms.mu[3], ms.mu[1]]);
        sub.check_shape().unwrap();
    }
}
