//! Forecast scoring: per-step RMSE/MAE over parsed steps, missing rates, and
//! RMSE*/MAE* over the samples every method parsed completely.

mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::extract::ParsedForecast;
use crate::prompt::PromptKind;

pub use report::{to_csv, to_markdown};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("prediction and actual lengths differ ({pred} vs {actual})")]
    LengthMismatch { pred: usize, actual: usize },
    #[error("cannot score an empty set")]
    Empty,
    #[error("non-finite input at index {0}")]
    NonFinite(usize),
    #[error("aggregation: {0}")]
    Aggregation(String),
}

fn check(pred: &[f64], actual: &[f64]) -> Result<(), MetricError> {
    if pred.len() != actual.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    if let Some(i) = pred
        .iter()
        .zip(actual)
        .position(|(p, a)| !p.is_finite() || !a.is_finite())
    {
        return Err(MetricError::NonFinite(i));
    }
    Ok(())
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check(pred, actual)?;
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check(pred, actual)?;
    let sae: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(sae / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub rmse: Option<f64>,
    pub mae: Option<f64>,
    pub n_scored: usize,
}

impl StepScore {
    fn from_pairs(pred: &[f64], actual: &[f64]) -> Self {
        Self {
            rmse: rmse(pred, actual).ok(),
            mae: mae(pred, actual).ok(),
            n_scored: pred.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub per_step: Vec<StepScore>,
    /// Fraction of samples with at least one missing step.
    pub missing_rate: f64,
    pub n_samples: usize,
    /// Per-step metrics over the common subset; absent when it is empty.
    pub rmse_star: Option<Vec<f64>>,
    pub mae_star: Option<Vec<f64>>,
    pub n_common: usize,
}

/// A classical forecaster scored on the same samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub label: String,
    pub per_step: Vec<StepScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub horizon: usize,
    pub n_common: usize,
    /// Rows in report order.
    pub per_method: Vec<(PromptKind, MethodScores)>,
    #[serde(default)]
    pub baselines: Vec<BaselineRow>,
}

impl EvalReport {
    pub fn method(&self, kind: PromptKind) -> Option<&MethodScores> {
        self.per_method.iter().find(|(k, _)| *k == kind).map(|(_, s)| s)
    }

    /// Score complete forecasts from a classical method and append them as a row.
    pub fn add_baseline(
        &mut self,
        label: impl Into<String>,
        forecasts: &[(String, Vec<f64>)],
        actuals: &HashMap<String, Vec<f64>>,
    ) -> Result<(), MetricError> {
        let mut per_step = Vec::with_capacity(self.horizon);
        for step in 0..self.horizon {
            let mut pred = Vec::with_capacity(forecasts.len());
            let mut act = Vec::with_capacity(forecasts.len());
            for (id, f) in forecasts {
                let a = actuals
                    .get(id)
                    .ok_or_else(|| MetricError::Aggregation(format!("no actuals for sample {id:?}")))?;
                pred.push(f[step]);
                act.push(a[step]);
            }
            per_step.push(StepScore::from_pairs(&pred, &act));
        }
        self.baselines.push(BaselineRow {
            label: label.into(),
            per_step,
        });
        Ok(())
    }
}

/// Sample ids that every method parsed completely.
pub fn common_subset(parsed: &BTreeMap<PromptKind, Vec<ParsedForecast>>) -> BTreeSet<String> {
    let mut methods = parsed.values();
    let Some(first) = methods.next() else {
        return BTreeSet::new();
    };
    let mut common: BTreeSet<String> = first
        .iter()
        .filter(|p| p.is_complete())
        .map(|p| p.sample_id.clone())
        .collect();
    for forecasts in methods {
        let complete: BTreeSet<&str> = forecasts
            .iter()
            .filter(|p| p.is_complete())
            .map(|p| p.sample_id.as_str())
            .collect();
        common.retain(|id| complete.contains(id.as_str()));
    }
    common
}

fn score_steps<'a>(
    forecasts: impl Iterator<Item = &'a ParsedForecast> + Clone,
    actuals: &HashMap<String, Vec<f64>>,
    horizon: usize,
) -> Vec<StepScore> {
    (0..horizon)
        .map(|step| {
            let (pred, act): (Vec<f64>, Vec<f64>) = forecasts
                .clone()
                .filter_map(|p| Some((p.steps[step]?, actuals[&p.sample_id][step])))
                .unzip();
            StepScore::from_pairs(&pred, &act)
        })
        .collect()
}

/// Aggregate parsed forecasts into an [`EvalReport`].
///
/// Every method must cover the same sample ids, every sample needs at least
/// `horizon` actual values, and every forecast must have `horizon` steps.
/// Samples are visited in each method's list order.
pub fn score_run(
    dataset_id: &str,
    horizon: usize,
    parsed: &BTreeMap<PromptKind, Vec<ParsedForecast>>,
    actuals: &HashMap<String, Vec<f64>>,
) -> Result<EvalReport, MetricError> {
    let agg = |m: String| MetricError::Aggregation(m);
    let mut reference: Option<(PromptKind, BTreeSet<&str>)> = None;
    for (&kind, forecasts) in parsed {
        let ids: BTreeSet<&str> = forecasts.iter().map(|p| p.sample_id.as_str()).collect();
        if ids.len() != forecasts.len() {
            return Err(agg(format!("{kind}: duplicate sample ids")));
        }
        for p in forecasts {
            if p.steps.len() != horizon {
                return Err(agg(format!(
                    "{kind}/{}: {} steps, horizon is {horizon}",
                    p.sample_id,
                    p.steps.len()
                )));
            }
            match actuals.get(&p.sample_id) {
                Some(a) if a.len() >= horizon => {}
                _ => return Err(agg(format!("no {horizon}-step actuals for sample {:?}", p.sample_id))),
            }
        }
        match &reference {
            None => reference = Some((kind, ids)),
            Some((ref_kind, ref_ids)) if *ref_ids != ids => {
                return Err(agg(format!("{kind} covers different samples than {ref_kind}")));
            }
            Some(_) => {}
        }
    }

    let common = common_subset(parsed);
    let n_common = common.len();
    let per_method = parsed
        .iter()
        .map(|(&kind, forecasts)| {
            let n_samples = forecasts.len();
            let incomplete = forecasts.iter().filter(|p| !p.is_complete()).count();
            let per_step = score_steps(forecasts.iter(), actuals, horizon);
            let (rmse_star, mae_star) = if n_common == 0 {
                (None, None)
            } else {
                let star = score_steps(
                    forecasts.iter().filter(|p| common.contains(&p.sample_id)),
                    actuals,
                    horizon,
                );
                (
                    star.iter().map(|s| s.rmse).collect::<Option<Vec<_>>>(),
                    star.iter().map(|s| s.mae).collect::<Option<Vec<_>>>(),
                )
            };
            let scores = MethodScores {
                per_step,
                missing_rate: if n_samples == 0 {
                    0.0
                } else {
                    incomplete as f64 / n_samples as f64
                },
                n_samples,
                rmse_star,
                mae_star,
                n_common,
            };
            (kind, scores)
        })
        .collect();

    Ok(EvalReport {
        dataset_id: dataset_id.to_string(),
        horizon,
        n_common,
        per_method,
        baselines: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(id: &str, kind: PromptKind, steps: &[Option<f64>]) -> ParsedForecast {
        ParsedForecast {
            sample_id: id.into(),
            method: kind,
            horizon: steps.len(),
            steps: steps.to_vec(),
            extractor_used: crate::extract::Extractor::Marker,
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let r = rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert!((r - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r - 1.154701).abs() < 1e-6);
        assert!((mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rmse(&[3.5], &[1.0]).unwrap(), 2.5);
        assert_eq!(mae(&[3.5], &[1.0]).unwrap(), 2.5);
    }

    #[test]
    fn metric_errors() {
        assert_eq!(rmse(&[], &[]), Err(MetricError::Empty));
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(MetricError::LengthMismatch { .. })));
        assert_eq!(rmse(&[f64::NAN], &[1.0]), Err(MetricError::NonFinite(0)));
    }

    fn actuals(ids: &[&str], h: usize) -> HashMap<String, Vec<f64>> {
        ids.iter().map(|id| (id.to_string(), vec![10.0; h])).collect()
    }

    #[test]
    fn no_missing_means_star_equals_plain() {
        let mut parsed = BTreeMap::new();
        parsed.insert(
            PromptKind::Baseline,
            vec![pf("a", PromptKind::Baseline, &[Some(9.0)]), pf("b", PromptKind::Baseline, &[Some(13.5)])],
        );
        let r = score_run("d", 1, &parsed, &actuals(&["a", "b"], 1)).unwrap();
        let s = r.method(PromptKind::Baseline).unwrap();
        assert_eq!(r.n_common, 2);
        assert_eq!(s.rmse_star.as_ref().unwrap()[0].to_bits(), s.per_step[0].rmse.unwrap().to_bits());
        assert_eq!(s.mae_star.as_ref().unwrap()[0].to_bits(), s.per_step[0].mae.unwrap().to_bits());
        assert_eq!(s.missing_rate, 0.0);
    }

    #[test]
    fn fully_unparsed_method() {
        let mut parsed = BTreeMap::new();
        parsed.insert(PromptKind::Baseline, vec![pf("a", PromptKind::Baseline, &[Some(9.0)])]);
        parsed.insert(PromptKind::ZeroShotLst, vec![pf("a", PromptKind::ZeroShotLst, &[None])]);
        let r = score_run("d", 1, &parsed, &actuals(&["a"], 1)).unwrap();
        let lst = r.method(PromptKind::ZeroShotLst).unwrap();
        assert_eq!(lst.missing_rate, 1.0);
        assert_eq!(lst.per_step[0], StepScore { rmse: None, mae: None, n_scored: 0 });
        assert_eq!(r.n_common, 0);
        assert!(lst.rmse_star.is_none() && lst.mae_star.is_none());
        assert!(r.method(PromptKind::Baseline).unwrap().rmse_star.is_none());
    }

    #[test]
    fn common_subset_is_intersection() {
        let mut parsed = BTreeMap::new();
        parsed.insert(
            PromptKind::Baseline,
            vec![
                pf("1", PromptKind::Baseline, &[None]),
                pf("2", PromptKind::Baseline, &[Some(1.0)]),
                pf("3", PromptKind::Baseline, &[Some(1.0)]),
            ],
        );
        parsed.insert(
            PromptKind::ZeroShotCot,
            vec![
                pf("1", PromptKind::ZeroShotCot, &[Some(1.0)]),
                pf("2", PromptKind::ZeroShotCot, &[None]),
                pf("3", PromptKind::ZeroShotCot, &[Some(1.0)]),
            ],
        );
        assert_eq!(common_subset(&parsed), BTreeSet::from(["3".to_string()]));
        parsed.remove(&PromptKind::ZeroShotCot);
        assert_eq!(common_subset(&parsed).len(), 2);
    }

    #[test]
    fn mismatched_samples_are_rejected() {
        let mut parsed = BTreeMap::new();
        parsed.insert(PromptKind::Baseline, vec![pf("a", PromptKind::Baseline, &[Some(1.0)])]);
        parsed.insert(PromptKind::ZeroShotCot, vec![pf("b", PromptKind::ZeroShotCot, &[Some(1.0)])]);
        assert!(score_run("d", 1, &parsed, &actuals(&["a", "b"], 1)).is_err());
        parsed.remove(&PromptKind::ZeroShotCot);
        assert!(score_run("d", 1, &parsed, &actuals(&["b"], 1)).is_err());
        assert!(score_run("d", 2, &parsed, &actuals(&["a"], 2)).is_err());
    }

    #[test]
    fn partial_multi_step_counts_as_missing_but_scores_parsed_steps() {
        let mut parsed = BTreeMap::new();
        parsed.insert(
            PromptKind::ZeroShotLst,
            vec![
                pf("a", PromptKind::ZeroShotLst, &[Some(11.0), None]),
                pf("b", PromptKind::ZeroShotLst, &[Some(12.0), Some(10.0)]),
            ],
        );
        let r = score_run("d", 2, &parsed, &actuals(&["a", "b"], 2)).unwrap();
        let s = r.method(PromptKind::ZeroShotLst).unwrap();
        assert_eq!(s.missing_rate, 0.5);
        assert_eq!(s.per_step[0].n_scored, 2);
        assert_eq!(s.per_step[1].n_scored, 1);
        assert_eq!(s.per_step[1].rmse, Some(0.0));
        assert_eq!(r.n_common, 1);
        assert_eq!(s.rmse_star.as_deref(), Some(&[2.0, 0.0][..]));
    }
}
