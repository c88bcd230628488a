//! Price ingestion and per-period return statistics.
//!
//! Price files are long-format CSV with the header `date,ticker,close`, one
//! row per (date, ticker). Rows are grouped by ticker and sorted by date.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year.
pub const DEFAULT_FREQUENCY: f64 = 252.0;

/// Closing prices of a single asset, ordered by date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        let ticker = ticker.into();
        if dates.len() != closes.len() {
            return Err(Error::Alignment(format!(
                "{ticker}: {} dates but {} closes",
                dates.len(),
                closes.len()
            )));
        }
        if closes.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "{ticker}: need at least 2 prices, got {}",
                closes.len()
            )));
        }
        if let Some(bad) = closes.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!("{ticker}: non-positive close {bad}")));
        }
        if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "{ticker}: dates not strictly increasing at {}",
                w[1]
            )));
        }
        Ok(Self { ticker, dates, closes })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// Closing price at the last date.
    pub fn latest(&self) -> f64 {
        *self.closes.last().expect("validated non-empty")
    }
}

/// Per-period relative price changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub ticker: String,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(ticker: impl Into<String>, returns: Vec<f64>) -> Self {
        Self {
            ticker: ticker.into(),
            returns,
        }
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.closes.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 prices",
            prices.ticker
        )));
    }
    let returns = prices.closes.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    Ok(ReturnSeries::new(prices.ticker.clone(), returns))
}

/// `(f / m) * sum(r)`.
pub fn arithmetic_mean(r: &ReturnSeries, frequency: f64) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::InsufficientData(format!("{}: no returns", r.ticker)));
    }
    let sum: f64 = r.returns.iter().sum();
    Ok(frequency / r.len() as f64 * sum)
}

/// `(prod(1 + r))^(f / m) - 1`, evaluated in log space.
pub fn geometric_mean(r: &ReturnSeries, frequency: f64) -> Result<f64> {
    if r.is_empty() {
        return Err(Error::InsufficientData(format!("{}: no returns", r.ticker)));
    }
    if let Some(bad) = r.returns.iter().find(|x| !(**x > -1.0)) {
        return Err(Error::Domain(format!("{}: return {bad} is not above -1", r.ticker)));
    }
    let log_growth: f64 = r.returns.iter().map(|x| x.ln_1p()).sum();
    Ok((frequency / r.len() as f64 * log_growth).exp_m1())
}

/// Estimator used for the annualized mean return vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanEstimator {
    Arithmetic,
    #[default]
    Geometric,
}

impl MeanEstimator {
    pub fn estimate(self, r: &ReturnSeries, frequency: f64) -> Result<f64> {
        match self {
            MeanEstimator::Arithmetic => arithmetic_mean(r, frequency),
            MeanEstimator::Geometric => geometric_mean(r, frequency),
        }
    }
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    ticker: String,
    close: String,
}

/// Reads a `date,ticker,close` file. `source` names the input in errors.
pub fn parse_price_csv<R: Read>(reader: R, source: &str) -> Result<Vec<PriceSeries>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let headers = rdr.headers()?.clone();
    let expected = ["date", "ticker", "close"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_err(
            1,
            format!(
                "expected header `date,ticker,close`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut grouped: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row: PriceRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date `{}`: {e}", row.date)))?;
        let close: f64 = row
            .close
            .parse()
            .map_err(|e| parse_err(line, format!("bad close `{}`: {e}", row.close)))?;
        if !(close.is_finite() && close > 0.0) {
            return Err(parse_err(line, format!("non-positive close {close}")));
        }
        if row.ticker.is_empty() {
            return Err(parse_err(line, "empty ticker".into()));
        }
        let per_ticker = grouped.entry(row.ticker.clone()).or_default();
        if per_ticker.insert(date, close).is_some() {
            return Err(parse_err(line, format!("duplicate row for {} on {date}", row.ticker)));
        }
    }

    grouped
        .into_iter()
        .map(|(ticker, rows)| {
            let (dates, closes) = rows.into_iter().unzip();
            PriceSeries::new(ticker, dates, closes)
        })
        .collect()
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<Vec<PriceSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    parse_price_csv(file, &path.display().to_string())
}

/// Writes series in long format, ordered by date then ticker.
pub fn write_price_csv<W: Write>(writer: W, series: &[PriceSeries]) -> Result<()> {
    let mut rows: Vec<(NaiveDate, &str, f64)> = series
        .iter()
        .flat_map(|s| {
            s.dates
                .iter()
                .zip(&s.closes)
                .map(move |(d, c)| (*d, s.ticker.as_str(), *c))
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));

    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "ticker", "close"])?;
    for (date, ticker, close) in rows {
        w.write_record([
            date.format("%Y-%m-%d").to_string(),
            ticker.to_string(),
            format!("{close}"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Restricts every series to the dates present in all of them.
pub fn align(series: &[PriceSeries]) -> Result<Vec<PriceSeries>> {
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let mut common: BTreeSet<NaiveDate> = first.dates.iter().copied().collect();
    for s in &series[1..] {
        let dates: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&dates).copied().collect();
    }
    series
        .iter()
        .map(|s| {
            let (dates, closes) = s
                .dates
                .iter()
                .zip(&s.closes)
                .filter(|(d, _)| common.contains(d))
                .map(|(d, c)| (*d, *c))
                .unzip();
            PriceSeries::new(s.ticker.clone(), dates, closes)
        })
        .collect()
}
