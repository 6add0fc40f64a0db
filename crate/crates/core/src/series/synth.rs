use std::f64::consts::TAU;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DomainKind, SeriesContext, SeriesError, Step, TimeSeries};

/// Shape of a synthetic fixture series. Seasonal terms are `amplitude * sin`
/// evaluated on the phase index, so `v[k] == v[k + period]` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    Constant { level: f64 },
    Linear { slope: f64, intercept: f64 },
    Sinusoid { period: usize, amplitude: f64 },
    LinearPlusSeasonal { slope: f64, intercept: f64, period: usize, amplitude: f64 },
    Noisy { slope: f64, intercept: f64, period: Option<usize>, amplitude: f64, sigma: f64 },
}

fn seasonal(t: usize, period: usize, amplitude: f64) -> f64 {
    amplitude * (TAU * (t % period) as f64 / period as f64).sin()
}

/// Generate a daily `Generic` series starting 2020-01-01; deterministic in
/// `(kind, length, seed)`.
pub fn synth_series(kind: &SynthKind, length: usize, seed: u64) -> Result<TimeSeries, SeriesError> {
    if length < 2 {
        return Err(SeriesError::Parameter(format!("length {length} < 2")));
    }
    let check_period = |p: usize| {
        if p == 0 {
            Err(SeriesError::Parameter("period must be positive".into()))
        } else {
            Ok(p)
        }
    };
    let values: Vec<f64> = match *kind {
        SynthKind::Constant { level } => vec![level; length],
        SynthKind::Linear { slope, intercept } => {
            (0..length).map(|t| slope * t as f64 + intercept).collect()
        }
        SynthKind::Sinusoid { period, amplitude } => {
            let p = check_period(period)?;
            (0..length).map(|t| seasonal(t, p, amplitude)).collect()
        }
        SynthKind::LinearPlusSeasonal { slope, intercept, period, amplitude } => {
            let p = check_period(period)?;
            (0..length)
                .map(|t| slope * t as f64 + intercept + seasonal(t, p, amplitude))
                .collect()
        }
        SynthKind::Noisy { slope, intercept, period, amplitude, sigma } => {
            let p = period.map(check_period).transpose()?;
            let noise = Normal::new(0.0, sigma)
                .map_err(|e| SeriesError::Parameter(format!("sigma {sigma}: {e}")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..length)
                .map(|t| {
                    let s = p.map_or(0.0, |p| seasonal(t, p, amplitude));
                    slope * t as f64 + intercept + s + noise.sample(&mut rng)
                })
                .collect()
        }
    };
    let start = NaiveDate::from_ymd_opt(2020, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    TimeSeries::new(
        format!("synth-{seed}"),
        values,
        start,
        Step::Day,
        SeriesContext::new(DomainKind::Generic, "synthetic"),
    )
}
