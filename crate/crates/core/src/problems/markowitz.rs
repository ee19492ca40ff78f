use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::CostModel;

/// Investment horizon of a profile, counted in trading days.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Window {
    #[serde(rename = "5d")]
    FiveDays,
    #[serde(rename = "1m")]
    OneMonth,
    #[serde(rename = "3m")]
    ThreeMonths,
    #[serde(rename = "6m")]
    SixMonths,
    #[serde(rename = "1y")]
    OneYear,
    #[serde(rename = "2y")]
    TwoYears,
    #[serde(rename = "5y")]
    FiveYears,
    #[serde(rename = "all")]
    All,
}

impl Window {
    pub const ALL: [Window; 8] = [
        Window::FiveDays,
        Window::OneMonth,
        Window::ThreeMonths,
        Window::SixMonths,
        Window::OneYear,
        Window::TwoYears,
        Window::FiveYears,
        Window::All,
    ];

    /// Number of return periods, `None` for the whole history.
    pub fn trading_days(&self) -> Option<usize> {
        match self {
            Window::FiveDays => Some(5),
            Window::OneMonth => Some(21),
            Window::ThreeMonths => Some(63),
            Window::SixMonths => Some(126),
            Window::OneYear => Some(252),
            Window::TwoYears => Some(504),
            Window::FiveYears => Some(1260),
            Window::All => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Window::FiveDays => "5d",
            Window::OneMonth => "1m",
            Window::ThreeMonths => "3m",
            Window::SixMonths => "6m",
            Window::OneYear => "1y",
            Window::TwoYears => "2y",
            Window::FiveYears => "5y",
            Window::All => "all",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Window::ALL
            .into_iter()
            .find(|w| w.label() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown window {s:?}")))
    }
}

/// One investor's view of the market.
#[derive(Clone, Debug, PartialEq)]
pub struct PortfolioProfile {
    pub window: Window,
    pub lambda: f64,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl PortfolioProfile {
    pub fn new(window: Window, lambda: f64, mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sigma.nrows().max(sigma.ncols()),
            });
        }
        if !(0.0..=0.1).contains(&lambda) {
            return Err(Error::InvalidArgument(format!("lambda {lambda} outside [0, 0.1]")));
        }
        let scale = sigma.abs().max().max(1.0);
        if (&sigma - sigma.transpose()).abs().max() > 1e-10 * scale {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        if n > 0 {
            let min_eig = sigma.clone().symmetric_eigenvalues().min();
            if min_eig < -1e-10 * scale {
                return Err(Error::InvalidArgument(format!(
                    "covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
                )));
            }
        }
        Ok(Self {
            window,
            lambda,
            mu,
            sigma,
        })
    }

    pub fn n_stocks(&self) -> usize {
        self.mu.len()
    }
}

/// `l(x) = x^T Sigma x - lambda mu^T x`
#[derive(Clone, Debug)]
pub struct MarkowitzCost {
    sigma: DMatrix<f64>,
    // lambda * mu
    tilt: DVector<f64>,
}

pub fn markowitz_cost(profile: &PortfolioProfile) -> MarkowitzCost {
    MarkowitzCost {
        sigma: profile.sigma.clone(),
        tilt: &profile.mu * profile.lambda,
    }
}

impl CostModel for MarkowitzCost {
    fn dimension(&self) -> usize {
        self.tilt.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        // column by column to avoid allocating in the estimator's hot loop
        let n = x.len();
        let mut total = 0.0;
        for j in 0..n {
            let column = self.sigma.column(j);
            let sx: f64 = (0..n).map(|i| column[i] * x[i]).sum();
            total += x[j] * sx - self.tilt[j] * x[j];
        }
        total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        let g = (&self.sigma * &x) * 2.0 - &self.tilt;
        g.as_slice().to_vec()
    }
}
