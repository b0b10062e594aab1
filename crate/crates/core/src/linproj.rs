//! Per-window linear projections.
//!
//! The target is first whitened against its own history by an AR(k) fit,
//! then the AR residuals are projected on lagged covariates. Both orders are
//! chosen by BIC over a common effective sample; ties go to the smaller order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::linalg::{bic, least_squares, nested_fits, total_sum_of_squares};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    /// Selected order `k`.
    pub order: usize,
    /// Intercept followed by the `k` lag coefficients.
    pub coefficients: Vec<f64>,
    /// Residuals `e_t` over rows `max_order..y.len()`.
    pub residuals: Vec<f64>,
    pub bic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovProjection {
    /// Selected lag `l`.
    pub lag: usize,
    /// Intercept, then covariate `j` lag `s` at index `1 + j * lag + (s - 1)`.
    pub coefficients: Vec<f64>,
    /// Fitted values `ê_t`, aligned with the projected residuals.
    pub fitted: Vec<f64>,
    pub rss: f64,
    pub bic: f64,
}

impl CovProjection {
    pub fn coefficient(&self, covariate: usize, lag: usize) -> f64 {
        self.coefficients[1 + covariate * self.lag + (lag - 1)]
    }
}

/// Fits AR(k) with intercept for every `k` in `0..=max_order` and keeps the
/// BIC minimiser. All candidates use the rows `max_order..y.len()`.
///
/// Rank-deficient designs drop out of the search; `k = 0` is always feasible,
/// so a constant series yields `k = 0` with zero residuals.
pub fn fit_ar(y: &[f64], max_order: usize) -> Result<ArFit> {
    if y.len() <= max_order + 2 {
        return Err(EwsError::InvalidConfig(format!(
            "AR window of length {} too short for max order {max_order}",
            y.len()
        )));
    }
    let n = y.len() - max_order;
    let response = &y[max_order..];
    let tss = total_sum_of_squares(response);

    // Candidate orders are nested, so one pass yields every RSS.
    let widest = (max_order + 1).min(n - 1);
    let design = DMatrix::from_fn(
        n,
        widest,
        |i, j| if j == 0 { 1.0 } else { y[max_order + i - j] },
    );
    let mut best: Option<(usize, f64)> = None;
    for (k, fit) in nested_fits(&design, response).iter().enumerate() {
        if fit.rank < k + 1 {
            continue;
        }
        let criterion = bic(fit.rss, tss, n, k + 1);
        if best.map_or(true, |(_, b)| criterion < b) {
            best = Some((k, criterion));
        }
    }
    let (order, criterion) = best.expect("the intercept-only model is always full rank");
    let fit = least_squares(&design.columns(0, order + 1).into_owned(), response);
    let residuals = response
        .iter()
        .zip(&fit.fitted)
        .map(|(v, f)| v - f)
        .collect();
    Ok(ArFit {
        order,
        coefficients: fit.coefficients,
        residuals,
        bic: criterion,
    })
}

/// Projects `e` on an intercept plus lags `1..=l` of every covariate, with
/// `l` chosen by BIC in `1..=max_lag`.
///
/// `covariates[j]` must hold `e.len() + max_lag` rows: residual `e[i]` sits on
/// covariate row `i + max_lag`, so every lag is available. Lags whose design
/// has at least as many regressors as rows are skipped. The BIC penalty counts
/// the numerical rank, so all-zero covariate columns leave the choice alone.
pub fn project_on_covariates(
    e: &[f64],
    covariates: &[Vec<f64>],
    max_lag: usize,
) -> Result<CovProjection> {
    let n = e.len();
    let d = covariates.len();
    if max_lag == 0 {
        return Err(EwsError::InvalidConfig("max_lag must be >= 1".into()));
    }
    if let Some(bad) = covariates.iter().find(|c| c.len() != n + max_lag) {
        return Err(EwsError::DimensionMismatch(format!(
            "covariate column has {} rows, expected {}",
            bad.len(),
            n + max_lag
        )));
    }
    let tss = total_sum_of_squares(e);

    // Lag-major column order makes each lag's design a prefix of the next.
    let max_feasible = (1..=max_lag)
        .take_while(|l| 1 + d * l < n)
        .last()
        .ok_or(EwsError::ProjectionInfeasible)?;
    let nested_design = DMatrix::from_fn(n, 1 + d * max_feasible, |i, c| {
        if c == 0 {
            1.0
        } else {
            let s = (c - 1) / d + 1;
            covariates[(c - 1) % d][i + max_lag - s]
        }
    });
    let nested = nested_fits(&nested_design, e);
    let mut best: Option<(usize, f64)> = None;
    for lag in 1..=max_feasible {
        let fit = nested[d * lag];
        let criterion = bic(fit.rss, tss, n, fit.rank);
        if best.map_or(true, |(_, b)| criterion < b) {
            best = Some((lag, criterion));
        }
    }
    let (lag, criterion) = best.ok_or(EwsError::ProjectionInfeasible)?;
    let design = DMatrix::from_fn(n, 1 + d * lag, |i, c| {
        if c == 0 {
            1.0
        } else {
            let j = (c - 1) / lag;
            let s = (c - 1) % lag + 1;
            covariates[j][i + max_lag - s]
        }
    });
    let fit = least_squares(&design, e);
    Ok(CovProjection {
        lag,
        coefficients: fit.coefficients,
        fitted: fit.fitted,
        rss: fit.rss,
        bic: criterion,
    })
}

/// Row-major lag features `[X^{(1)}_{t-1}, .., X^{(1)}_{t-l}, X^{(2)}_{t-1}, ..]`
/// laid out as in [`project_on_covariates`].
pub fn lag_features(
    covariates: &[Vec<f64>],
    n: usize,
    lag: usize,
    max_lag: usize,
) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            covariates
                .iter()
                .flat_map(|col| (1..=lag).map(move |s| col[i + max_lag - s]))
                .collect()
        })
        .collect()
}
