//! Forecast extraction from free-form model responses.
//!
//! Three extractors run in a fixed order and the first one that finds any
//! value wins:
//!
//! 1. **Marker**: values after the last `****Final Answer****` (1-4
//!    asterisks, any case, optional colon).
//! 2. **LabeledLine**: the last line carrying a label such as "prediction",
//!    "predicted value" or "answer" followed by numbers.
//! 3. **TailNumbers**: for multi-step horizons, the last list of at least
//!    `horizon` numbers (or, failing that, the last list); for one step, the
//!    single number of the final sentence.
//!
//! Before scanning, dates, clock times, enumerators, step labels and
//! horizon phrases ("next 6 hours") are blanked out. A partial list fills
//! the leading steps and leaves the rest missing. Nothing here fails: an
//! unreadable response is all-missing with [`Extractor::None`].

mod scan;
pub mod tokens;

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::prompt::PromptKind;

pub use scan::{number_runs, pick_leading_run, scan_numbers, strip_non_values, NumberSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    Marker,
    LabeledLine,
    TailNumbers,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    /// One entry per forecast step; `None` is a missing step.
    pub steps: Vec<Option<f64>>,
    pub extractor: Extractor,
}

impl Extraction {
    pub fn is_complete(&self) -> bool {
        !self.steps.is_empty() && self.steps.iter().all(Option::is_some)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedForecast {
    pub sample_id: String,
    pub method: PromptKind,
    pub horizon: usize,
    pub steps: Vec<Option<f64>>,
    pub extractor_used: Extractor,
}

impl ParsedForecast {
    pub fn parse(sample_id: impl Into<String>, method: PromptKind, raw_response: &str, horizon: usize) -> Self {
        let Extraction { steps, extractor } = extract_forecast(raw_response, horizon);
        Self {
            sample_id: sample_id.into(),
            method,
            horizon,
            steps,
            extractor_used: extractor,
        }
    }

    /// A forecast with every step missing.
    pub fn missing(sample_id: impl Into<String>, method: PromptKind, horizon: usize) -> Self {
        Self {
            sample_id: sample_id.into(),
            method,
            horizon,
            steps: vec![None; horizon],
            extractor_used: Extractor::None,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.steps.iter().all(Option::is_some)
    }
}

static MARKER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\*{1,4}\s*final\s*answer\s*:?\s*\*{0,4}\s*:?").expect("static pattern")
});

static LABEL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:predictions?|predicted\s+values?|answers?)\b").expect("static pattern")
});

static SENTENCE_END: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[.!?](?:\s|$)|\n").expect("static pattern"));

fn from_marker(text: &str, horizon: usize) -> Option<Vec<f64>> {
    let m = MARKER.find_iter(text).last()?;
    let region = strip_non_values(&text[m.end()..]);
    pick_leading_run(&number_runs(&region), horizon)
}

fn from_labeled_line(text: &str, horizon: usize) -> Option<Vec<f64>> {
    text.lines().rev().find_map(|line| {
        let label = LABEL.find_iter(line).last()?;
        let region = strip_non_values(&line[label.end()..]);
        pick_leading_run(&number_runs(&region), horizon)
    })
}

fn from_tail(text: &str, horizon: usize) -> Option<Vec<f64>> {
    let cleaned = strip_non_values(text);
    if horizon >= 2 {
        let runs = number_runs(&cleaned);
        return match runs.iter().rev().find(|r| r.len() >= horizon) {
            Some(run) => Some(run[..horizon].to_vec()),
            None => runs.last().cloned(),
        };
    }
    let last_sentence = SENTENCE_END
        .split(&cleaned)
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .last()?;
    match scan_numbers(last_sentence).as_slice() {
        [only] => Some(vec![only.value]),
        _ => None,
    }
}

type Layer = fn(&str, usize) -> Option<Vec<f64>>;

/// Recover up to `horizon` forecast values from a model response.
pub fn extract_forecast(raw_response: &str, horizon: usize) -> Extraction {
    let layers: [(Extractor, Layer); 3] = [
        (Extractor::Marker, from_marker),
        (Extractor::LabeledLine, from_labeled_line),
        (Extractor::TailNumbers, from_tail),
    ];
    if horizon > 0 {
        for (extractor, layer) in layers {
            if let Some(found) = layer(raw_response, horizon).filter(|v| !v.is_empty()) {
                let mut steps: Vec<Option<f64>> = found.into_iter().take(horizon).map(Some).collect();
                steps.resize(horizon, None);
                return Extraction { steps, extractor };
            }
        }
    }
    Extraction {
        steps: vec![None; horizon],
        extractor: Extractor::None,
    }
}
