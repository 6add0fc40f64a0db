//! Benchmark orchestration: dataset preparation, resumable runs over an
//! append-only exchange log, scoring, and the offline oracle demo.

mod demo;
mod run;
mod score;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::extract::tokens::TokenStats;
use crate::gateway::GatewayError;
use crate::metrics::MetricError;
use crate::prompt::{PromptError, PromptKind};
use crate::series::{
    build_windows, parse_ihepc_minutes, read_samples, resample_hourly, DomainKind, Sample, SeriesContext,
    SeriesError, WindowSpec, WindowWarning,
};

pub use demo::{demo_samples, oracle_demo, DemoOptions, DemoOutcome, DEMO_LST_TEXT};
pub use run::{ExecuteOptions, Run, RunConfig, RunManifest, RunSummary, TaskStatus};
pub use score::{score_exchanges, write_reports};

pub const IHEPC_HISTORY: usize = 96;
pub const IHEPC_STRIDE: usize = 10;
pub const IHEPC_MAX_WINDOWS: usize = 3000;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Named datasets the harness knows how to prepare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    Sg,
    Ct,
    Ecl,
    Ihepc,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [DatasetKind::Sg, DatasetKind::Ct, DatasetKind::Ecl, DatasetKind::Ihepc];

    pub fn key(self) -> &'static str {
        match self {
            DatasetKind::Sg => "sg",
            DatasetKind::Ct => "ct",
            DatasetKind::Ecl => "ecl",
            DatasetKind::Ihepc => "ihepc",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key().eq_ignore_ascii_case(key))
    }

    pub fn domain(self) -> DomainKind {
        match self {
            DatasetKind::Sg => DomainKind::Visitors,
            DatasetKind::Ct => DomainKind::Temperature,
            DatasetKind::Ecl => DomainKind::ElectricityDaily,
            DatasetKind::Ihepc => DomainKind::HouseholdCurrentHourly,
        }
    }

    /// One step for the short series, six for the hourly windows.
    pub fn default_horizon(self) -> usize {
        match self {
            DatasetKind::Ihepc => 6,
            _ => 1,
        }
    }
}

/// Comma-separated list of valid dataset names, for usage errors.
pub fn dataset_names() -> String {
    DatasetKind::ALL.map(DatasetKind::key).join(", ")
}

/// Comma-separated list of valid method keys, for usage errors.
pub fn method_names() -> String {
    PromptKind::ALL.map(PromptKind::key).join(", ")
}

/// Parse a comma-separated method list; returned in report order, deduplicated.
pub fn parse_methods(list: &str) -> Result<Vec<PromptKind>, String> {
    let mut out = Vec::new();
    for key in list.split(',').map(str::trim).filter(|k| !k.is_empty()) {
        if key.eq_ignore_ascii_case("all") {
            out.extend(PromptKind::ALL);
            continue;
        }
        let kind = PromptKind::from_key(key)
            .ok_or_else(|| format!("unknown method {key:?}; valid methods: {}", method_names()))?;
        out.push(kind);
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(format!("no methods given; valid methods: {}", method_names()));
    }
    Ok(out)
}

pub fn load_samples(path: &Path, horizon: usize) -> Result<Vec<Sample>, RunnerError> {
    let file = File::open(path).map_err(|e| RunnerError::io(path, e))?;
    Ok(read_samples(BufReader::new(file), horizon)?)
}

/// Outcome of [`prepare_ihepc`].
#[derive(Debug)]
pub struct Prepared {
    pub samples: Vec<Sample>,
    pub hourly_len: usize,
    pub warning: Option<WindowWarning>,
}

/// Raw minute file to hourly windows of `IHEPC_HISTORY + horizon` points,
/// each split into history and target.
pub fn prepare_ihepc(
    raw: &Path,
    horizon: usize,
    stride: usize,
    max_windows: Option<usize>,
) -> Result<Prepared, RunnerError> {
    let file = File::open(raw).map_err(|e| RunnerError::io(raw, e))?;
    let minutes = parse_ihepc_minutes(BufReader::new(file))?;
    if minutes.is_empty() {
        return Err(RunnerError::Config(format!("{} has no data rows", raw.display())));
    }
    let context = SeriesContext::new(DomainKind::HouseholdCurrentHourly, "1");
    let hourly = resample_hourly(&minutes, "ihepc", context)?;
    let spec = WindowSpec::new(IHEPC_HISTORY + horizon, stride, max_windows)?;
    let windows = build_windows(&hourly, &spec);
    let samples = windows
        .windows
        .into_iter()
        .map(|w| {
            let values = w.values();
            let target = values[IHEPC_HISTORY..].to_vec();
            let history = w.slice(w.id().to_string(), 0, IHEPC_HISTORY);
            Sample { history, target }
        })
        .collect();
    Ok(Prepared {
        samples,
        hourly_len: hourly.len(),
        warning: windows.warning,
    })
}

/// Check short-series samples against the dataset's domain.
pub fn validate_short_series(kind: DatasetKind, samples: &[Sample]) -> Result<(), RunnerError> {
    let mut seen = std::collections::HashSet::new();
    for s in samples {
        if s.history.context().domain_kind != kind.domain() {
            return Err(RunnerError::Config(format!(
                "sample {}: domain {} does not match dataset {}",
                s.id(),
                s.history.context().domain_kind.key(),
                kind.key()
            )));
        }
        if !seen.insert(s.id().to_string()) {
            return Err(RunnerError::Config(format!("duplicate sample id {}", s.id())));
        }
    }
    Ok(())
}

/// Token statistics for every history and target value, as rendered in prompts.
pub fn token_stats(samples: &[Sample]) -> TokenStats {
    let mut stats = TokenStats::default();
    for s in samples {
        for &v in s.history.values().iter().chain(&s.target) {
            stats.add_value(v);
        }
    }
    stats
}

/// Standard layout of a run directory.
pub fn run_dir(out_dir: &Path, run_id: &str) -> PathBuf {
    out_dir.join("runs").join(run_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn methods_parse_in_report_order() {
        let m = parse_methods("zero_shot_lst, baseline,baseline").unwrap();
        assert_eq!(m, vec![PromptKind::Baseline, PromptKind::ZeroShotLst]);
        assert_eq!(parse_methods("all").unwrap().len(), 7);
        let err = parse_methods("baseline,telepathy").unwrap_err();
        assert!(err.contains("telepathy") && err.contains("one_shot_sarima"), "{err}");
    }

    #[test]
    fn dataset_keys_round_trip() {
        for k in DatasetKind::ALL {
            assert_eq!(DatasetKind::from_key(k.key()), Some(k));
        }
        assert_eq!(DatasetKind::from_key("pisa"), None);
        assert_eq!(dataset_names(), "sg, ct, ecl, ihepc");
    }
}
