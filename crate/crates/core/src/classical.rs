//! Classical forecasters and the additive trend + seasonal + residual
//! decomposition.
//!
//! The decomposition fits the linear trend and the per-phase seasonal
//! offsets jointly by least squares. On a noiseless `line + periodic`
//! signal this recovers both exactly, which a trend-first fit does not
//! (the seasonal pattern leaks into the slope).

use serde::{Deserialize, Serialize};

/// Minimum lag-autocorrelation for a period to count as detected.
pub const PERIOD_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ForecastError {
    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTrend {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearTrend {
    pub fn at(&self, t: f64) -> f64 {
        self.intercept + self.slope * t
    }
}

/// Ordinary least squares line over `t = 0..n-1`.
pub fn fit_linear_trend(values: &[f64]) -> Result<LinearTrend, ForecastError> {
    let n = values.len();
    if n < 2 {
        return Err(ForecastError::TooShort { needed: 2, got: n });
    }
    let t_mean = (n - 1) as f64 / 2.0;
    let x_mean = values.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &x) in values.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (x - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    Ok(LinearTrend {
        intercept: x_mean - slope * t_mean,
        slope,
    })
}

/// Sample autocorrelation at `lag`, or `None` for a (numerically) constant series.
pub fn autocorrelation(values: &[f64], lag: usize) -> Option<f64> {
    let n = values.len();
    if lag >= n {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    let scale = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if denom <= (1e-12 * scale).powi(2) * n as f64 || denom == 0.0 {
        return None;
    }
    let num: f64 = (0..n - lag)
        .map(|t| (values[t] - mean) * (values[t + lag] - mean))
        .sum();
    Some(num / denom)
}

/// Lag in `[2, n/2]` with the highest autocorrelation, if it reaches
/// [`PERIOD_THRESHOLD`]. Ties go to the smaller lag. Series shorter than 8
/// points never report a period.
pub fn detect_period(detrended: &[f64]) -> Option<usize> {
    let n = detrended.len();
    if n < 8 {
        return None;
    }
    let mut best: Option<(usize, f64)> = None;
    for lag in 2..=n / 2 {
        let r = autocorrelation(detrended, lag)?;
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((lag, r));
        }
    }
    best.filter(|&(_, r)| r >= PERIOD_THRESHOLD).map(|(lag, _)| lag)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trend: LinearTrend,
    pub period: Option<usize>,
    /// Zero-mean seasonal offsets indexed by `t % period`; empty without a period.
    pub seasonal_profile: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl Decomposition {
    pub fn seasonal_at(&self, t: usize) -> f64 {
        self.period.map_or(0.0, |p| self.seasonal_profile[t % p])
    }

    /// Trend plus seasonal component at `t` (no residual).
    pub fn structural_at(&self, t: usize) -> f64 {
        self.trend.at(t as f64) + self.seasonal_at(t)
    }

    /// Residuals used for the short-term adjustment: the last full period,
    /// or all of them when there is no period.
    pub fn recent_residuals(&self) -> &[f64] {
        let n = self.residuals.len();
        let k = self.period.unwrap_or(n).min(n);
        &self.residuals[n - k..]
    }
}

/// Split `values` into trend, seasonal and residual parts.
///
/// Without a period this is the OLS line. With a period the slope is the
/// pooled within-phase regression slope and each phase gets its own
/// intercept; the phase intercepts' mean becomes the trend intercept and the
/// deviations form the seasonal profile.
pub fn decompose_additive(values: &[f64], period: Option<usize>) -> Result<Decomposition, ForecastError> {
    let n = values.len();
    if n < 4 {
        return Err(ForecastError::TooShort { needed: 4, got: n });
    }
    let Some(p) = period else {
        let trend = fit_linear_trend(values)?;
        let residuals = values
            .iter()
            .enumerate()
            .map(|(t, x)| x - trend.at(t as f64))
            .collect();
        return Ok(Decomposition {
            trend,
            period: None,
            seasonal_profile: Vec::new(),
            residuals,
        });
    };
    if p < 2 || p > n / 2 {
        return Err(ForecastError::Parameter(format!(
            "period {p} outside [2, {}] for {n} values",
            n / 2
        )));
    }

    let mut count = vec![0usize; p];
    let mut t_sum = vec![0.0; p];
    let mut x_sum = vec![0.0; p];
    for (t, &x) in values.iter().enumerate() {
        count[t % p] += 1;
        t_sum[t % p] += t as f64;
        x_sum[t % p] += x;
    }
    let t_mean: Vec<f64> = (0..p).map(|j| t_sum[j] / count[j] as f64).collect();
    let x_mean: Vec<f64> = (0..p).map(|j| x_sum[j] / count[j] as f64).collect();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, &x) in values.iter().enumerate() {
        let j = t % p;
        let dt = t as f64 - t_mean[j];
        sxy += dt * (x - x_mean[j]);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    let phase_level: Vec<f64> = (0..p).map(|j| x_mean[j] - slope * t_mean[j]).collect();
    let intercept = phase_level.iter().sum::<f64>() / p as f64;
    let seasonal_profile: Vec<f64> = phase_level.iter().map(|c| c - intercept).collect();
    let trend = LinearTrend { intercept, slope };
    let residuals = values
        .iter()
        .enumerate()
        .map(|(t, x)| x - trend.at(t as f64) - seasonal_profile[t % p])
        .collect();
    Ok(Decomposition {
        trend,
        period: Some(p),
        seasonal_profile,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForecastMethod {
    NaiveLast,
    SeasonalNaive(usize),
    MovingAverage(usize),
    /// Additive decomposition. A valid hint is used as the period; otherwise
    /// the period is detected from the detrended series.
    Decomposed { period_hint: Option<usize> },
}

impl ForecastMethod {
    pub fn label(&self) -> String {
        match self {
            ForecastMethod::NaiveLast => "Naive (last value)".into(),
            ForecastMethod::SeasonalNaive(p) => format!("Seasonal naive ({p})"),
            ForecastMethod::MovingAverage(k) => format!("Moving average ({k})"),
            ForecastMethod::Decomposed { .. } => "Additive decomposition".into(),
        }
    }
}

/// Period the decomposed forecaster will use for `values`.
pub fn choose_period(values: &[f64], hint: Option<usize>) -> Option<usize> {
    let n = values.len();
    if let Some(h) = hint.filter(|&h| h >= 2 && h <= n / 2) {
        return Some(h);
    }
    let trend = fit_linear_trend(values).ok()?;
    let detrended: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(t, x)| x - trend.at(t as f64))
        .collect();
    // a line fits exactly: what remains is rounding noise, not seasonality
    let scale = values.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let rms = (detrended.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    if rms <= 1e-9 * scale {
        return None;
    }
    detect_period(&detrended)
}

/// Point forecasts for steps `n, n+1, ..., n+horizon-1`.
pub fn forecast(values: &[f64], horizon: usize, method: &ForecastMethod) -> Result<Vec<f64>, ForecastError> {
    let n = values.len();
    let need = |needed: usize| {
        if n < needed {
            Err(ForecastError::TooShort { needed, got: n })
        } else {
            Ok(())
        }
    };
    match *method {
        ForecastMethod::NaiveLast => {
            need(1)?;
            Ok(vec![values[n - 1]; horizon])
        }
        ForecastMethod::SeasonalNaive(p) => {
            if p == 0 {
                return Err(ForecastError::Parameter("seasonal period must be positive".into()));
            }
            need(p)?;
            Ok((0..horizon).map(|h| values[n - p + h % p]).collect())
        }
        ForecastMethod::MovingAverage(k) => {
            if k == 0 {
                return Err(ForecastError::Parameter("window must be positive".into()));
            }
            need(k)?;
            let mean = values[n - k..].iter().sum::<f64>() / k as f64;
            Ok(vec![mean; horizon])
        }
        ForecastMethod::Decomposed { period_hint } => {
            need(4)?;
            let period = choose_period(values, period_hint);
            let d = decompose_additive(values, period)?;
            let recent = d.recent_residuals();
            let adjust = recent.iter().sum::<f64>() / recent.len() as f64;
            Ok((0..horizon).map(|h| d.structural_at(n + h) + adjust).collect())
        }
    }
}
