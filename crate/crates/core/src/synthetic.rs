//! Seeded synthetic price universes.
//!
//! Prices follow a geometric random walk driven by a common market factor,
//! an idiosyncratic shock and occasional log-normal jumps. The jumps give the
//! return distributions visible skew and excess kurtosis.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::Result;
use crate::market_data::PriceSeries;
use crate::seed::substream;

/// Thirty large-cap tickers used to label the synthetic universe.
pub const TICKERS: [&str; 30] = [
    "AAPL", "AXP", "BA", "CAT", "CSCO", "CVX", "DD", "DIS", "GE", "GS", "HD", "IBM", "INTC", "JNJ", "JPM", "KO", "MCD",
    "MMM", "MRK", "MSFT", "NKE", "PFE", "PG", "TRV", "UNH", "UTX", "V", "VZ", "WMT", "XOM",
];

/// Seed and length of the bundled two-asset fixture. Chosen so that the
/// constrained continuous weights are close to (0.63, 0.37).
pub const TWO_ASSET_SEED: u64 = 254;
pub const TWO_ASSET_DAYS: usize = 2515;
/// Latest prices of the bundled two-asset fixture.
pub const TWO_ASSET_PRICES: [f64; 2] = [111.39, 240.0333];
pub const TWO_ASSET_TICKERS: [&str; 2] = ["DIS", "TRV"];
pub const TWO_ASSET_CAPITAL: f64 = 723.0;

#[derive(Debug, Clone, PartialEq)]
pub struct UniverseConfig {
    pub seed: u64,
    pub start: NaiveDate,
    pub days: usize,
    pub min_price: f64,
    pub max_price: f64,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            seed: 2015,
            start: NaiveDate::from_ymd_opt(2015, 1, 2).expect("valid date"),
            days: 750,
            min_price: 20.0,
            max_price: 600.0,
        }
    }
}

/// `count` consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

struct AssetModel {
    drift: f64,
    beta: f64,
    idio_vol: f64,
    jump_prob: f64,
    jump: Normal<f64>,
}

fn simulate_paths(rng: &mut ChaCha8Rng, assets: &[AssetModel], days: usize) -> Vec<Vec<f64>> {
    let dt: f64 = 1.0 / 252.0;
    let market_vol: f64 = 0.15;
    let mut log_paths = vec![vec![0.0; days]; assets.len()];
    for t in 1..days {
        let market: f64 = rng.sample::<f64, _>(StandardNormal) * market_vol * dt.sqrt();
        for (a, path) in assets.iter().zip(log_paths.iter_mut()) {
            let idio: f64 = rng.sample::<f64, _>(StandardNormal) * a.idio_vol * dt.sqrt();
            let jump = if rng.random::<f64>() < a.jump_prob {
                a.jump.sample(rng)
            } else {
                0.0
            };
            let var = (a.beta * market_vol).powi(2) + a.idio_vol.powi(2);
            path[t] = path[t - 1] + (a.drift - 0.5 * var) * dt + a.beta * market + idio + jump;
        }
    }
    log_paths
}

fn draw_model(rng: &mut ChaCha8Rng) -> AssetModel {
    let jump_mean = rng.random_range(-0.06..0.03);
    AssetModel {
        drift: rng.random_range(-0.05..0.20),
        beta: rng.random_range(0.5..1.5),
        idio_vol: rng.random_range(0.10..0.30),
        jump_prob: rng.random_range(0.005..0.03),
        jump: Normal::new(jump_mean, rng.random_range(0.02..0.06)).expect("positive scale"),
    }
}

fn to_series(ticker: &str, dates: &[NaiveDate], log_path: &[f64], latest: f64) -> Result<PriceSeries> {
    let last = *log_path.last().expect("non-empty path");
    let closes = log_path.iter().map(|x| round4(latest * (x - last).exp())).collect();
    PriceSeries::new(ticker, dates.to_vec(), closes)
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Thirty synthetic tickers over `cfg.days` business days.
pub fn synthetic_universe(cfg: &UniverseConfig) -> Result<Vec<PriceSeries>> {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(cfg.seed, "universe"));
    let models: Vec<AssetModel> = TICKERS.iter().map(|_| draw_model(&mut rng)).collect();
    let latest: Vec<f64> = TICKERS
        .iter()
        .map(|_| (rng.random_range(cfg.min_price.ln()..cfg.max_price.ln())).exp())
        .collect();
    let paths = simulate_paths(&mut rng, &models, cfg.days);
    let dates = business_days(cfg.start, cfg.days);
    TICKERS
        .iter()
        .zip(&paths)
        .zip(&latest)
        .map(|((t, path), &p)| to_series(t, &dates, path, p))
        .collect()
}

/// Two synthetic tickers whose latest closes are [`TWO_ASSET_PRICES`].
pub fn two_asset_universe(seed: u64, days: usize) -> Result<Vec<PriceSeries>> {
    let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "two-asset"));
    let models: Vec<AssetModel> = (0..2).map(|_| draw_model(&mut rng)).collect();
    let paths = simulate_paths(&mut rng, &models, days);
    let dates = business_days(UniverseConfig::default().start, days);
    TWO_ASSET_TICKERS
        .iter()
        .zip(&paths)
        .zip(TWO_ASSET_PRICES)
        .map(|((t, path), p)| to_series(t, &dates, path, p))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weekdays_only() {
        let d = business_days(NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(), 3);
        assert_eq!(
            d,
            vec![
                NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
                NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(),
                NaiveDate::from_ymd_opt(2015, 1, 6).unwrap(),
            ]
        );
    }

    #[test]
    fn universe_is_deterministic() {
        let cfg = UniverseConfig {
            days: 40,
            ..Default::default()
        };
        let a = synthetic_universe(&cfg).unwrap();
        let b = synthetic_universe(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        for s in &a {
            assert_eq!(s.len(), 40);
            assert!(s.latest() >= 20.0 && s.latest() <= 600.0);
        }
    }

    #[test]
    fn two_asset_latest_prices() {
        let u = two_asset_universe(TWO_ASSET_SEED, 100).unwrap();
        assert_eq!(u[0].ticker, "DIS");
        assert_eq!(u[0].latest(), 111.39);
        assert_eq!(u[1].latest(), 240.0333);
    }
}
