//! Time series values, their domain context, and dataset construction.
//!
//! Everything here is a pure value transformation: parsing the raw
//! household-power log, hourly resampling, sliding windows, synthetic
//! fixtures and the line-delimited sample record format.

mod ihepc;
mod records;
mod synth;
mod window;

use chrono::{NaiveDateTime, TimeDelta};
use serde::{Deserialize, Serialize};

pub use ihepc::{parse_ihepc_minutes, resample_hourly, MinuteObs};
pub use records::{read_samples, write_samples, Sample, SampleRecord};
pub use synth::{synth_series, SynthKind};
pub use window::{build_windows, window_count, WindowSpec, WindowWarning, Windows};

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("series has no values")]
    Empty,
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unrecognized IHEPC layout: {0}")]
    Format(String),
    #[error("IHEPC row {row}: {message}")]
    Record { row: usize, message: String },
    #[error("minute observations out of order at index {index}")]
    Unordered { index: usize },
    #[error("first hour {hour} has no observed minutes to average or fill from")]
    FirstHourMissing { hour: NaiveDateTime },
    #[error("sample record {line}: {message}")]
    Sample { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sampling resolution of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    #[default]
    Day,
    Hour,
}

impl Step {
    pub fn duration(self) -> TimeDelta {
        match self {
            Step::Day => TimeDelta::days(1),
            Step::Hour => TimeDelta::hours(1),
        }
    }
}

/// What a series measures. Each kind selects one context-query template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Visitors,
    Temperature,
    ElectricityDaily,
    HouseholdCurrentHourly,
    Generic,
}

impl DomainKind {
    pub const ALL: [DomainKind; 5] = [
        DomainKind::Visitors,
        DomainKind::Temperature,
        DomainKind::ElectricityDaily,
        DomainKind::HouseholdCurrentHourly,
        DomainKind::Generic,
    ];

    /// Key used in template registries and record files.
    pub fn key(self) -> &'static str {
        match self {
            DomainKind::Visitors => "visitors",
            DomainKind::Temperature => "temperature",
            DomainKind::ElectricityDaily => "electricity_daily",
            DomainKind::HouseholdCurrentHourly => "household_current_hourly",
            DomainKind::Generic => "generic",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    fn default_phrases(self) -> (&'static str, &'static str) {
        match self {
            DomainKind::Visitors => ("people", "on each day"),
            DomainKind::Temperature => ("degree", "on each day"),
            DomainKind::ElectricityDaily => ("kWh", "on each day"),
            DomainKind::HouseholdCurrentHourly => ("ampere", "in each hour"),
            DomainKind::Generic => ("", "on each day"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesContext {
    pub domain_kind: DomainKind,
    pub entity_id: String,
    pub unit_phrase: String,
    pub resolution_phrase: String,
}

impl SeriesContext {
    /// Context with the default unit and resolution phrases for `kind`.
    pub fn new(kind: DomainKind, entity_id: impl Into<String>) -> Self {
        let (unit, resolution) = kind.default_phrases();
        Self {
            domain_kind: kind,
            entity_id: entity_id.into(),
            unit_phrase: unit.to_string(),
            resolution_phrase: resolution.to_string(),
        }
    }
}

/// Evenly spaced finite observations starting at a wall-clock timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    id: String,
    values: Vec<f64>,
    start: NaiveDateTime,
    step: Step,
    context: SeriesContext,
}

impl TimeSeries {
    pub fn new(
        id: impl Into<String>,
        values: Vec<f64>,
        start: NaiveDateTime,
        step: Step,
        context: SeriesContext,
    ) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { index });
        }
        Ok(Self {
            id: id.into(),
            values,
            start,
            step,
            context,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn step(&self) -> Step {
        self.step
    }

    pub fn context(&self) -> &SeriesContext {
        &self.context
    }

    /// Timestamp of observation `k`; `k` may run past the end for forecast dates.
    pub fn timestamp(&self, k: usize) -> NaiveDateTime {
        self.start + self.step.duration() * k as i32
    }

    pub fn end(&self) -> NaiveDateTime {
        self.timestamp(self.values.len() - 1)
    }

    /// Contiguous sub-series `[offset, offset + len)` with a shifted start.
    pub fn slice(&self, id: impl Into<String>, offset: usize, len: usize) -> Self {
        Self {
            id: id.into(),
            values: self.values[offset..offset + len].to_vec(),
            start: self.timestamp(offset),
            step: self.step,
            context: self.context.clone(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_context(mut self, context: SeriesContext) -> Self {
        self.context = context;
        self
    }

    pub fn with_start(mut self, start: NaiveDateTime, step: Step) -> Self {
        self.start = start;
        self.step = step;
        self
    }

    /// Replace the values, keeping timing and context.
    pub fn map_values(&self, f: impl FnMut(f64) -> f64) -> Result<Self, SeriesError> {
        let values = self.values.iter().copied().map(f).collect();
        Self::new(self.id.clone(), values, self.start, self.step, self.context.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2020, 4, 15).unwrap().and_hms_opt(0, 0, 0).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        let ctx = SeriesContext::new(DomainKind::Generic, "x");
        assert!(matches!(
            TimeSeries::new("a", vec![], start(), Step::Day, ctx.clone()),
            Err(SeriesError::Empty)
        ));
        assert!(matches!(
            TimeSeries::new("a", vec![1.0, f64::NAN], start(), Step::Day, ctx),
            Err(SeriesError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn timestamps_follow_step() {
        let ctx = SeriesContext::new(DomainKind::HouseholdCurrentHourly, "1");
        let s = TimeSeries::new("a", vec![1.0; 30], start(), Step::Hour, ctx).unwrap();
        assert_eq!(s.timestamp(25), start() + TimeDelta::hours(25));
        assert_eq!(s.end(), start() + TimeDelta::hours(29));
    }

    #[test]
    fn domain_keys_round_trip() {
        for kind in DomainKind::ALL {
            assert_eq!(DomainKind::from_key(kind.key()), Some(kind));
        }
        assert_eq!(DomainKind::from_key("weather"), None);
    }
}
