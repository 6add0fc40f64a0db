//! Line-delimited JSON sample records.
//!
//! One object per line:
//!
//! ```text
//! {"id":"ct-17","domain_kind":"temperature","entity_id":"110","start_date":"2020-04-15",
//!  "values":[44,51,59],"target":[63]}
//! ```
//!
//! `start` (alias `start_date`) accepts `YYYY-MM-DD` or `YYYY-MM-DDTHH:MM:SS`.
//! `step` defaults to `day`. When `target` is absent the last `horizon`
//! values are split off as the target.

use std::io::{BufRead, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{DomainKind, SeriesContext, SeriesError, Step, TimeSeries};

const DATETIME_FMT: &str = "%Y-%m-%dT%H:%M:%S";

/// A forecasting sample: observed history plus the values to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub history: TimeSeries,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn id(&self) -> &str {
        self.history.id()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub domain_kind: DomainKind,
    pub entity_id: String,
    #[serde(
        alias = "start_date",
        serialize_with = "ser_datetime",
        deserialize_with = "de_datetime"
    )]
    pub start: NaiveDateTime,
    #[serde(default)]
    pub step: Step,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_phrase: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_phrase: Option<String>,
}

fn ser_datetime<S: Serializer>(at: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&at.format(DATETIME_FMT).to_string())
}

fn de_datetime<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
    let text = String::deserialize(d)?;
    parse_datetime(&text).ok_or_else(|| serde::de::Error::custom(format!("bad timestamp {text:?}")))
}

fn parse_datetime(text: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(text, DATETIME_FMT)
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S"))
        .ok()
        .or_else(|| {
            NaiveDate::parse_from_str(text, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
}

impl SampleRecord {
    pub fn from_sample(sample: &Sample) -> Self {
        let h = &sample.history;
        let ctx = h.context();
        Self {
            id: h.id().to_string(),
            domain_kind: ctx.domain_kind,
            entity_id: ctx.entity_id.clone(),
            start: h.start(),
            step: h.step(),
            values: h.values().to_vec(),
            target: Some(sample.target.clone()),
            unit_phrase: Some(ctx.unit_phrase.clone()),
            resolution_phrase: Some(ctx.resolution_phrase.clone()),
        }
    }

    pub fn into_sample(self, horizon: usize) -> Result<Sample, String> {
        let mut values = self.values;
        let target = match self.target {
            Some(t) if t.len() >= horizon => t[..horizon].to_vec(),
            Some(t) => return Err(format!("target has {} values, horizon is {horizon}", t.len())),
            None => {
                if values.len() < horizon + 2 {
                    return Err(format!(
                        "{} values cannot hold a 2-point history and a {horizon}-step target",
                        values.len()
                    ));
                }
                values.split_off(values.len() - horizon)
            }
        };
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(format!("non-finite target value at {i}"));
        }
        let mut context = SeriesContext::new(self.domain_kind, self.entity_id);
        if let Some(u) = self.unit_phrase {
            context.unit_phrase = u;
        }
        if let Some(r) = self.resolution_phrase {
            context.resolution_phrase = r;
        }
        let history = TimeSeries::new(self.id, values, self.start, self.step, context)
            .map_err(|e| e.to_string())?;
        Ok(Sample { history, target })
    }
}

/// Read samples, skipping blank lines. Line numbers in errors are 1-based.
pub fn read_samples<R: BufRead>(reader: R, horizon: usize) -> Result<Vec<Sample>, SeriesError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| SeriesError::Sample { line: i + 1, message };
        let record: SampleRecord = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        out.push(record.into_sample(horizon).map_err(fail)?);
    }
    Ok(out)
}

pub fn write_samples<W: Write>(mut writer: W, samples: &[Sample]) -> Result<(), SeriesError> {
    for sample in samples {
        let line = serde_json::to_string(&SampleRecord::from_sample(sample))
            .map_err(|e| SeriesError::Parameter(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}
