use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use super::RunnerError;
use crate::classical::{forecast, ForecastMethod};
use crate::extract::ParsedForecast;
use crate::gateway::{ModelExchange, ReplayStore, HOURLY_PERIOD_HINT};
use crate::metrics::{score_run, to_csv, to_markdown, EvalReport};
use crate::prompt::PromptKind;
use crate::series::{Sample, Step};

/// Build an [`EvalReport`] from logged exchanges.
///
/// For each (sample, method) the latest successful exchange is parsed; a task
/// with no successful exchange counts as fully missing. Two classical rows
/// (last value, additive decomposition) are scored on the same samples.
pub fn score_exchanges(
    dataset_id: &str,
    horizon: usize,
    methods: &[PromptKind],
    samples: &[Sample],
    exchanges: &[ModelExchange],
) -> Result<EvalReport, RunnerError> {
    let store = ReplayStore::from_exchanges(exchanges.iter().cloned());
    let mut parsed: BTreeMap<PromptKind, Vec<ParsedForecast>> = BTreeMap::new();
    for &kind in methods {
        let list = samples
            .iter()
            .map(|s| match store.get(s.id(), kind) {
                Some(ex) if ex.is_success() => ParsedForecast::parse(s.id(), kind, &ex.raw_response, horizon),
                _ => ParsedForecast::missing(s.id(), kind, horizon),
            })
            .collect();
        parsed.insert(kind, list);
    }
    let actuals: HashMap<String, Vec<f64>> = samples.iter().map(|s| (s.id().to_string(), s.target.clone())).collect();
    let mut report = score_run(dataset_id, horizon, &parsed, &actuals)?;

    let baselines = [("Naive (last value)", false), ("Additive decomposition", true)];
    for (label, decomposed) in baselines {
        let forecasts: Vec<(String, Vec<f64>)> = samples
            .iter()
            .map(|s| (s.id().to_string(), classical_forecast(s, horizon, decomposed)))
            .collect();
        report.add_baseline(label, &forecasts, &actuals)?;
    }
    Ok(report)
}

fn classical_forecast(sample: &Sample, horizon: usize, decomposed: bool) -> Vec<f64> {
    let values = sample.history.values();
    let naive = || vec![values[values.len() - 1]; horizon];
    if !decomposed {
        return naive();
    }
    let period_hint = (sample.history.step() == Step::Hour).then_some(HOURLY_PERIOD_HINT);
    // fewer than four points: fall back to the last value
    forecast(values, horizon, &ForecastMethod::Decomposed { period_hint }).unwrap_or_else(|_| naive())
}

/// Write `report.json`, `report.md` and `report.csv` into `dir`.
pub fn write_reports(report: &EvalReport, dir: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
    let mut json = serde_json::to_string_pretty(report).map_err(|e| RunnerError::Config(e.to_string()))?;
    json.push('\n');
    for (name, body) in [
        ("report.json", json),
        ("report.md", to_markdown(report)),
        ("report.csv", to_csv(report)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| RunnerError::io(&path, e))?;
    }
    Ok(())
}
