//! Offline stand-in for a chat model.
//!
//! The oracle reads the series back out of the prompt, forecasts it with the
//! additive decomposition, and writes a verbose three-component explanation
//! ending in `****Final Answer**** v1, v2, ...`. Seeded faults reproduce
//! common response defects: a dropped marker, one step too few, separate
//! short- and long-term answers, and a slip in an intermediate sum.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classical::{self, ForecastError};
use crate::extract::{number_runs, strip_non_values};
use crate::prompt::RenderedPrompt;

/// Season length assumed for hourly series before falling back to detection.
pub const HOURLY_PERIOD_HINT: usize = 24;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("no numeric sequence found in the prompt")]
    NoSequence,
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OracleFaults {
    #[serde(default)]
    pub p_omit_marker: f64,
    #[serde(default)]
    pub p_short_horizon: f64,
    #[serde(default)]
    pub p_split_answer: f64,
    #[serde(default)]
    pub p_arith_slip: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Which faults fire for one prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FaultDraw {
    pub omit_marker: bool,
    pub short_horizon: bool,
    pub split_answer: bool,
    pub arith_slip: bool,
    pub slip_negative: bool,
}

impl FaultDraw {
    /// Whether the response will lack at least one forecast step.
    pub fn causes_missing(&self) -> bool {
        self.short_horizon || self.split_answer
    }
}

impl OracleFaults {
    pub fn none(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Every fault at the same rate.
    pub fn uniform(p: f64, seed: u64) -> Self {
        Self {
            p_omit_marker: p,
            p_short_horizon: p,
            p_split_answer: p,
            p_arith_slip: p,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_omit_marker", self.p_omit_marker),
            ("p_short_horizon", self.p_short_horizon),
            ("p_split_answer", self.p_split_answer),
            ("p_arith_slip", self.p_arith_slip),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }

    /// Fault draws for a prompt; a pure function of the seed and the text.
    pub fn draw(&self, prompt_text: &str) -> FaultDraw {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(prompt_text.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        let mut fire = |p: f64| rng.random::<f64>() < p;
        let omit_marker = fire(self.p_omit_marker);
        let short_horizon = fire(self.p_short_horizon);
        let split_answer = fire(self.p_split_answer);
        let arith_slip = fire(self.p_arith_slip);
        FaultDraw {
            omit_marker,
            short_horizon,
            split_answer,
            arith_slip,
            slip_negative: rng.random::<bool>(),
        }
    }
}

/// The series embedded in the final question of a prompt.
///
/// Only the first line after the last `Q:` is read, so one-shot examples and
/// method directives are ignored. Dates, times and horizon phrases are
/// blanked, and the longest comma-separated list wins.
pub fn extract_prompt_series(prompt_text: &str) -> Option<Vec<f64>> {
    let query = &prompt_text[prompt_text.rfind("Q:")? + 2..];
    let line = query.lines().next().unwrap_or("");
    number_runs(&strip_non_values(line))
        .into_iter()
        .rev()
        .max_by_key(Vec::len)
        .filter(|run| run.len() >= 2)
}

fn looks_hourly(prompt_text: &str) -> bool {
    let query = prompt_text.rfind("Q:").map_or(prompt_text, |i| &prompt_text[i..]);
    let line = query.lines().next().unwrap_or("");
    line.to_ascii_lowercase().contains("hour")
}

/// Intermediate quantities behind an oracle forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReasoning {
    pub n: usize,
    pub slope: f64,
    pub period: Option<usize>,
    pub seasonal_range: f64,
    pub residual_window: usize,
    pub residual_sum: f64,
    pub forecast: Vec<f64>,
}

/// What the fault-free oracle answers for `values`. Matches
/// [`classical::forecast`] with the decomposed method (naive last value below
/// four points).
pub fn oracle_forecast(values: &[f64], horizon: usize, hourly: bool) -> Result<Vec<f64>, OracleError> {
    Ok(reason(values, horizon, hourly, 0.0)?.forecast)
}

fn reason(values: &[f64], horizon: usize, hourly: bool, slip: f64) -> Result<OracleReasoning, OracleError> {
    let n = values.len();
    if n < 4 {
        let last = *values.last().ok_or(OracleError::NoSequence)?;
        return Ok(OracleReasoning {
            n,
            slope: 0.0,
            period: None,
            seasonal_range: 0.0,
            residual_window: 0,
            residual_sum: 0.0,
            forecast: vec![last; horizon],
        });
    }
    let hint = hourly.then_some(HOURLY_PERIOD_HINT);
    let period = classical::choose_period(values, hint);
    let d = classical::decompose_additive(values, period)?;
    let recent = d.recent_residuals();
    let residual_sum = recent.iter().sum::<f64>() + slip;
    let adjust = residual_sum / recent.len() as f64;
    let forecast = (0..horizon).map(|h| d.structural_at(n + h) + adjust).collect();
    let (lo, hi) = d
        .seasonal_profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(*s), hi.max(*s)));
    Ok(OracleReasoning {
        n,
        slope: d.trend.slope,
        period,
        seasonal_range: if d.seasonal_profile.is_empty() { 0.0 } else { hi - lo },
        residual_window: recent.len(),
        residual_sum,
        forecast,
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

/// Generate the oracle's answer to `prompt`.
pub fn oracle_respond(prompt: &RenderedPrompt, faults: &OracleFaults) -> Result<String, OracleError> {
    let values = extract_prompt_series(&prompt.text).ok_or(OracleError::NoSequence)?;
    let draw = faults.draw(&prompt.text);
    let horizon = prompt.horizon.max(1);
    let scale = {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
    };
    let slip = if draw.arith_slip {
        let magnitude = 1.0 + scale;
        if draw.slip_negative {
            -magnitude
        } else {
            magnitude
        }
    } else {
        0.0
    };
    let r = reason(&values, horizon, looks_hourly(&prompt.text), slip)?;

    let mut out = String::new();
    let _ = writeln!(out, "Let's analyze the sequence of {} values step by step.\n", r.n);
    let level = values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    let direction = if r.slope.abs() <= 1e-3 * level {
        "stable"
    } else if r.slope > 0.0 {
        "increasing"
    } else {
        "decreasing"
    };
    let _ = writeln!(
        out,
        "Trend: a straight line fitted to all {} observations has a slope of {:.4} per step, so the overall direction is {direction}.\n",
        r.n, r.slope
    );
    match r.period {
        Some(p) => {
            let _ = writeln!(
                out,
                "Seasonality: after removing the trend, a repeating cycle of {p} steps stands out, with a peak-to-trough range of {:.3}.\n",
                r.seasonal_range
            );
        }
        None => out.push_str("Seasonality: after removing the trend, no repeating cycle stands out.\n\n"),
    }
    if r.residual_window > 0 {
        let _ = writeln!(
            out,
            "Short-term variations: the residuals of the most recent {} steps sum to {:.4}, which gives an average adjustment of {:.4} per step.\n",
            r.residual_window,
            r.residual_sum,
            r.residual_sum / r.residual_window as f64
        );
    } else {
        out.push_str("Short-term variations: the sequence is too short to estimate them, so the latest value is carried forward.\n\n");
    }

    if draw.split_answer {
        let f = &r.forecast;
        if horizon == 1 {
            let long = f[0] + slip.abs().max(1.0);
            let _ = write!(out, "Short-term outlook: {}; long-term outlook: {}.", f[0], long);
        } else {
            let s = horizon.div_ceil(2);
            let _ = write!(
                out,
                "Short-term outlook for the next {s} steps: {}.\n\nLong-term outlook for the remaining {} steps: {}.",
                join(&f[..s]),
                horizon - s,
                join(&f[s..])
            );
        }
        return Ok(out);
    }

    out.push_str("Combining the trend, seasonal, and residual components gives the forecast.\n\n");
    let shown = if draw.short_horizon { &r.forecast[..horizon - 1] } else { &r.forecast[..] };
    if draw.omit_marker {
        let verb = if horizon == 1 { "predicted value is" } else { "predicted values are" };
        if shown.is_empty() {
            let _ = write!(out, "Therefore, the {verb} undetermined.");
        } else {
            let _ = write!(out, "Therefore, the {verb} {}.", join(shown));
        }
    } else if shown.is_empty() {
        out.push_str("****Final Answer**** undetermined");
    } else {
        let _ = write!(out, "****Final Answer**** {}", join(shown));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_forecast, Extractor};
    use crate::prompt::PromptKind;

    fn prompt(text: &str, horizon: usize) -> RenderedPrompt {
        RenderedPrompt {
            text: text.to_string(),
            method: PromptKind::Baseline,
            max_output_tokens: 1024,
            sample_id: "s".into(),
            horizon,
        }
    }

    const LINE: &str = "Q: From January 01, 2020, Wednesday to January 08, 2020, Wednesday, the values of series 7 were 1, 2, 3, 4, 5, 6, 7, 8 on each day. What is the value going to be on January 09, 2020, Thursday? Please answer the predicted value only.";

    #[test]
    fn reads_series_from_final_query() {
        assert_eq!(extract_prompt_series(LINE).unwrap(), (1..=8).map(f64::from).collect::<Vec<_>>());
        let one_shot = format!("Q: example 9, 9, 9, 9, 9 values\nA: 9, 9, 9, 9, 9, 9, 9\n{LINE}\nA: 1. 2. 3.");
        assert_eq!(extract_prompt_series(&one_shot).unwrap().len(), 8);
        assert_eq!(extract_prompt_series("no numbers here"), None);
        assert_eq!(extract_prompt_series("Q: only 5 here"), None);
    }

    #[test]
    fn linear_series_answers_nine() {
        let text = oracle_respond(&prompt(LINE, 1), &OracleFaults::none(3)).unwrap();
        assert!(text.ends_with("****Final Answer**** 9"), "{text}");
        let e = extract_forecast(&text, 1);
        assert_eq!((e.steps, e.extractor), (vec![Some(9.0)], Extractor::Marker));
    }

    #[test]
    fn deterministic_per_seed() {
        let f = OracleFaults::uniform(0.5, 11);
        let a = oracle_respond(&prompt(LINE, 6), &f).unwrap();
        let b = oracle_respond(&prompt(LINE, 6), &f).unwrap();
        assert_eq!(a, b);
        assert_eq!(f.draw(LINE), f.draw(LINE));
    }

    #[test]
    fn omitted_marker_keeps_value_in_prose() {
        let f = OracleFaults { p_omit_marker: 1.0, ..OracleFaults::none(0) };
        let text = oracle_respond(&prompt(LINE, 1), &f).unwrap();
        assert!(!text.to_lowercase().contains("final answer"));
        assert!(text.contains("predicted value is 9."));
        assert_eq!(extract_forecast(&text, 1).steps, vec![Some(9.0)]);
    }

    #[test]
    fn short_horizon_emits_one_fewer_value() {
        let f = OracleFaults { p_short_horizon: 1.0, ..OracleFaults::none(0) };
        let text = oracle_respond(&prompt(LINE, 6), &f).unwrap();
        let tail = &text[text.rfind("****Final Answer****").unwrap() + 20..];
        assert_eq!(tail.split(',').count(), 5, "{tail}");
        let e = extract_forecast(&text, 6);
        assert_eq!(e.steps.iter().filter(|s| s.is_some()).count(), 5);
        assert_eq!(e.steps[5], None);
    }

    #[test]
    fn split_answer_is_never_complete() {
        let f = OracleFaults { p_split_answer: 1.0, ..OracleFaults::none(0) };
        for h in [1, 2, 6] {
            let text = oracle_respond(&prompt(LINE, h), &f).unwrap();
            assert!(!extract_forecast(&text, h).is_complete(), "h={h}: {text}");
        }
    }

    #[test]
    fn arith_slip_shifts_the_answer() {
        let f = OracleFaults { p_arith_slip: 1.0, ..OracleFaults::none(0) };
        let text = oracle_respond(&prompt(LINE, 1), &f).unwrap();
        let v = extract_forecast(&text, 1).steps[0].unwrap();
        assert!((v - 9.0).abs() > 0.1, "{text}");
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(OracleFaults::uniform(1.5, 0).validate().is_err());
        assert!(OracleFaults::uniform(-0.1, 0).validate().is_err());
        assert!(OracleFaults::uniform(1.0, 0).validate().is_ok());
    }

    #[test]
    fn no_sequence_is_an_error() {
        assert_eq!(
            oracle_respond(&prompt("Q: nothing to see", 1), &OracleFaults::none(0)),
            Err(OracleError::NoSequence)
        );
    }
}
