use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, PriceError, Result};
use crate::problems::{PortfolioProfile, Window};

/// Daily closing prices, one row per date.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    tickers: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len(),
                got: rows.len(),
            });
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("dates must be strictly increasing".into()));
        }
        for row in &rows {
            if row.len() != tickers.len() {
                return Err(Error::DimensionMismatch {
                    expected: tickers.len(),
                    got: row.len(),
                });
            }
            if row.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                return Err(Error::InvalidArgument("prices must be positive and finite".into()));
            }
        }
        Ok(Self { dates, tickers, rows })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_stocks(&self) -> usize {
        self.tickers.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }

    /// Keeps only the listed stock columns, in the given order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_stocks()) {
            return Err(Error::InvalidArgument(format!("column {c} out of range")));
        }
        Ok(Self {
            dates: self.dates.clone(),
            tickers: columns.iter().map(|&c| self.tickers[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| columns.iter().map(|&c| r[c]).collect())
                .collect(),
        })
    }
}

/// Mean and sample covariance of simple returns over `window` ending at `end_date`.
pub fn estimate_profile(
    prices: &PriceSeries,
    window: Window,
    lambda: f64,
    end_date: NaiveDate,
) -> Result<PortfolioProfile> {
    let end = prices.dates.partition_point(|d| *d <= end_date);
    if end == 0 {
        return Err(Error::InvalidArgument(format!("no prices on or before {end_date}")));
    }
    let start = match window.trading_days() {
        Some(days) if days + 1 > end => {
            return Err(Error::InvalidArgument(format!(
                "window {window} needs {} prices but only {end} end on or before {end_date}",
                days + 1
            )))
        }
        Some(days) => end - (days + 1),
        None => 0,
    };
    let slice = &prices.rows[start..end];
    let n = prices.n_stocks();
    let returns: Vec<Vec<f64>> = slice
        .windows(2)
        .map(|w| (0..n).map(|j| w[1][j] / w[0][j] - 1.0).collect())
        .collect();
    let t = returns.len();
    if t < 3 {
        return Err(Error::InvalidArgument(format!(
            "window {window} yields {t} return rows; at least 3 are required"
        )));
    }

    let mut mu = DVector::zeros(n);
    for r in &returns {
        for j in 0..n {
            mu[j] += r[j];
        }
    }
    mu /= t as f64;

    let mut sigma = DMatrix::zeros(n, n);
    for r in &returns {
        for a in 0..n {
            let da = r[a] - mu[a];
            for b in 0..n {
                sigma[(a, b)] += da * (r[b] - mu[b]);
            }
        }
    }
    sigma /= (t - 1) as f64;
    sigma = (&sigma + sigma.transpose()) * 0.5;
    if n > 0 && sigma.clone().symmetric_eigenvalues().min() < 0.0 {
        for j in 0..n {
            sigma[(j, j)] += 1e-12;
        }
    }
    PortfolioProfile::new(window, lambda, mu, sigma)
}

/// Per-stock drift and volatility ranges for [`synthesize_prices_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisRanges {
    pub drift: (f64, f64),
    pub volatility: (f64, f64),
}

impl Default for SynthesisRanges {
    fn default() -> Self {
        Self {
            drift: (-5e-4, 1e-3),
            volatility: (0.005, 0.03),
        }
    }
}

/// Seeded geometric-Brownian-motion prices on consecutive business days.
pub fn synthesize_prices(n_stocks: usize, n_days: usize, seed: u64) -> Result<PriceSeries> {
    synthesize_prices_with(n_stocks, n_days, seed, &SynthesisRanges::default())
}

pub fn synthesize_prices_with(
    n_stocks: usize,
    n_days: usize,
    seed: u64,
    ranges: &SynthesisRanges,
) -> Result<PriceSeries> {
    if n_days < 10 {
        return Err(Error::InvalidArgument("at least 10 days are required".into()));
    }
    if n_stocks == 0 {
        return Err(Error::InvalidArgument("at least one stock is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo < hi { rng.random_range(lo..=hi) } else { lo };
    let drift: Vec<f64> = (0..n_stocks).map(|_| draw(&mut rng, ranges.drift)).collect();
    let vol: Vec<f64> = (0..n_stocks).map(|_| draw(&mut rng, ranges.volatility)).collect();
    let mut current: Vec<f64> = (0..n_stocks).map(|_| rng.random_range(20.0..200.0)).collect();

    let mut rows = Vec::with_capacity(n_days);
    rows.push(current.clone());
    for _ in 1..n_days {
        for j in 0..n_stocks {
            let z: f64 = rng.sample(StandardNormal);
            current[j] *= ((drift[j] - 0.5 * vol[j] * vol[j]) + vol[j] * z).exp();
        }
        rows.push(current.clone());
    }

    let mut dates = Vec::with_capacity(n_days);
    let mut day = NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date");
    while dates.len() < n_days {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(day);
        }
        day = day + Days::new(1);
    }
    let tickers = (0..n_stocks).map(|j| format!("S{j:03}")).collect();
    PriceSeries::new(dates, tickers, rows)
}

pub fn load_prices_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_prices_csv(&text)?)
}

/// Parses `date,<ticker>,...` followed by `YYYY-MM-DD,<price>,...` rows.
pub fn parse_prices_csv(text: &str) -> std::result::Result<PriceSeries, PriceError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(PriceError::Empty)?;
    let header: Vec<&str> = header.split(',').collect();
    if header[0].trim() != "date" {
        return Err(PriceError::MalformedHeader {
            line: 1,
            reason: "first column must be `date`".into(),
        });
    }
    if header.len() < 2 || header[1..].iter().any(|t| t.trim().is_empty()) {
        return Err(PriceError::MalformedHeader {
            line: 1,
            reason: "expected at least one non-empty ticker".into(),
        });
    }
    let tickers: Vec<String> = header[1..].iter().map(|t| t.trim().to_string()).collect();

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut rows = Vec::new();
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.split(',').collect();
        if fields.len() != header.len() {
            return Err(PriceError::RaggedRow {
                line,
                expected: header.len(),
                found: fields.len(),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0].trim(), "%Y-%m-%d").map_err(|e| PriceError::BadField {
            line,
            field: fields[0].to_string(),
            reason: e.to_string(),
        })?;
        if dates.last().is_some_and(|prev| *prev >= date) {
            return Err(PriceError::NonIncreasingDate {
                line,
                date: fields[0].to_string(),
            });
        }
        let mut row = Vec::with_capacity(tickers.len());
        for (column, f) in fields[1..].iter().enumerate() {
            let value: f64 = f.trim().parse().map_err(|e: std::num::ParseFloatError| PriceError::BadField {
                line,
                field: f.to_string(),
                reason: e.to_string(),
            })?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(PriceError::NonPositivePrice {
                    line,
                    column: column + 1,
                    value,
                });
            }
            row.push(value);
        }
        dates.push(date);
        rows.push(row);
    }
    if dates.is_empty() {
        return Err(PriceError::Empty);
    }
    Ok(PriceSeries { dates, tickers, rows })
}
