//! Fully offline end-to-end run: synthetic hourly series, every prompting
//! method, the oracle backend, scoring and reports.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{run_dir, write_reports, ExecuteOptions, Run, RunConfig, RunnerError};
use crate::gateway::{oracle_forecast, BackendConfig, OracleFaults};
use crate::metrics::EvalReport;
use crate::prompt::PromptKind;
use crate::series::{synth_series, write_samples, DomainKind, Sample, SeriesContext, Step, SynthKind};

/// Stand-in directive for the long/short-term method, whose real text is
/// supplied by the user.
pub const DEMO_LST_TEXT: &str = "A: Describe the long-term pattern of the whole series and the short-term pattern of the most recent values, then combine both into the forecast.";

const HISTORY: usize = 96;
const HORIZON: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoOptions {
    pub seed: u64,
    pub samples: usize,
    /// Rate applied to every fault kind.
    pub fault_rate: f64,
    pub workers: usize,
}

impl Default for DemoOptions {
    fn default() -> Self {
        Self {
            seed: 7,
            samples: 200,
            fault_rate: 0.0,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutcome {
    pub run_dir: PathBuf,
    pub report: EvalReport,
    /// Per method, how many samples the seeded fault draws leave incomplete.
    pub expected_missing: BTreeMap<PromptKind, usize>,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Synthetic hourly current series (daily cycle, slight trend, noise),
/// rounded to three decimals, with the oracle's own forecast as target.
pub fn demo_samples(seed: u64, count: usize) -> Result<Vec<Sample>, RunnerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origin = NaiveDate::from_ymd_opt(2007, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date");
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let kind = SynthKind::Noisy {
            slope: rng.random_range(-0.02..0.02),
            intercept: rng.random_range(6.0..14.0),
            period: Some(24),
            amplitude: rng.random_range(0.5..4.0),
            sigma: rng.random_range(0.0..0.8),
        };
        let series_seed = rng.random::<u64>();
        let context = SeriesContext::new(DomainKind::HouseholdCurrentHourly, (i % 10 + 1).to_string());
        let history = synth_series(&kind, HISTORY, series_seed)?
            .map_values(round3)?
            .with_id(format!("demo-{i:03}"))
            .with_context(context)
            .with_start(origin + TimeDelta::hours(10 * i as i64), Step::Hour);
        let target = oracle_forecast(history.values(), HORIZON, true)
            .map_err(|e| RunnerError::Config(format!("demo sample {i}: {e}")))?;
        out.push(Sample { history, target });
    }
    Ok(out)
}

/// Run the demo into `out_dir/runs/oracle-demo-s{seed}-f{rate}` and write the
/// reports there. Refuses to reuse an existing run directory.
pub fn oracle_demo(out_dir: &Path, options: &DemoOptions) -> Result<DemoOutcome, RunnerError> {
    let samples = demo_samples(options.seed, options.samples)?;
    let data_dir = out_dir.join("data");
    fs::create_dir_all(&data_dir).map_err(|e| RunnerError::io(&data_dir, e))?;
    let samples_path = data_dir.join(format!("oracle-demo-s{}.jsonl", options.seed));
    let file = File::create(&samples_path).map_err(|e| RunnerError::io(&samples_path, e))?;
    write_samples(BufWriter::new(file), &samples)?;

    let faults = OracleFaults::uniform(options.fault_rate, options.seed);
    let run_id = format!("oracle-demo-s{}-f{}", options.seed, options.fault_rate);
    let dir = run_dir(out_dir, &run_id);
    let run = Run::create(
        &dir,
        RunConfig {
            run_id,
            dataset_id: "oracle-demo".into(),
            samples_path,
            horizon: HORIZON,
            methods: PromptKind::ALL.to_vec(),
            backend: BackendConfig::Oracle(faults),
            lst_text: Some(DEMO_LST_TEXT.into()),
            prompt_dir: None,
        },
    )?;
    let summary = run.execute(&ExecuteOptions {
        workers: options.workers,
        limit: None,
        retry_failed: false,
    })?;
    if !summary.is_complete() || summary.failed > 0 {
        return Err(RunnerError::Config(format!("oracle demo left tasks unfinished: {summary:?}")));
    }

    let mut expected_missing = BTreeMap::new();
    for kind in PromptKind::ALL {
        let mut n = 0;
        for s in run.samples() {
            if faults.draw(&run.render(s, kind)?.text).causes_missing() {
                n += 1;
            }
        }
        expected_missing.insert(kind, n);
    }
    let report = run.score()?;
    write_reports(&report, run.dir())?;
    Ok(DemoOutcome {
        run_dir: dir,
        report,
        expected_missing,
    })
}
