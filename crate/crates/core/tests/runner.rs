use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use tsprompt_core::gateway::{BackendConfig, OracleFaults};
use tsprompt_core::prompt::PromptKind;
use tsprompt_core::runner::{
    demo_samples, prepare_ihepc, score_exchanges, ExecuteOptions, Run, RunConfig, RunnerError, TaskStatus,
    DEMO_LST_TEXT,
};
use tsprompt_core::series::write_samples;

fn write_dataset(dir: &Path, n: usize) -> PathBuf {
    let path = dir.join("samples.jsonl");
    write_samples(File::create(&path).unwrap(), &demo_samples(11, n).unwrap()).unwrap();
    path
}

fn config(samples_path: PathBuf, backend: BackendConfig) -> RunConfig {
    RunConfig {
        run_id: "r".into(),
        dataset_id: "synthetic".into(),
        samples_path,
        horizon: 6,
        methods: PromptKind::ALL.to_vec(),
        backend,
        lst_text: Some(DEMO_LST_TEXT.into()),
        prompt_dir: None,
    }
}

fn opts(workers: usize, limit: Option<usize>) -> ExecuteOptions {
    ExecuteOptions { workers, limit, retry_failed: false }
}

fn oracle() -> BackendConfig {
    BackendConfig::Oracle(OracleFaults::uniform(0.2, 5))
}

#[test]
fn one_pass_covers_every_task() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 20);
    let run = Run::create(&dir.path().join("run"), config(data, oracle())).unwrap();
    assert_eq!(run.summary().unwrap().pending, 140);
    let s = run.execute(&opts(4, None)).unwrap();
    assert_eq!((s.attempted, s.done, s.failed, s.pending), (140, 140, 0, 0));
    assert_eq!(run.exchanges().unwrap().len(), 140);
    let again = run.execute(&opts(4, None)).unwrap();
    assert_eq!(again.attempted, 0);
    assert_eq!(run.exchanges().unwrap().len(), 140);
}

#[test]
fn interrupted_run_resumes_without_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 20);
    let run_dir = dir.path().join("run");
    let run = Run::create(&run_dir, config(data, oracle())).unwrap();
    let first = run.execute(&opts(3, Some(60))).unwrap();
    assert_eq!((first.attempted, first.done, first.pending), (60, 60, 80));
    drop(run);

    let resumed = Run::open(&run_dir).unwrap();
    let before: HashSet<(String, PromptKind)> =
        resumed.exchanges().unwrap().into_iter().map(|e| (e.sample_id, e.method)).collect();
    let second = resumed.execute(&opts(3, None)).unwrap();
    assert_eq!(second.attempted, 80);
    assert!(second.is_complete());
    let all = resumed.exchanges().unwrap();
    assert_eq!(all.len(), 140);
    let keys: HashSet<(String, PromptKind)> = all.iter().map(|e| (e.sample_id.clone(), e.method)).collect();
    assert_eq!(keys.len(), 140);
    assert!(keys.is_superset(&before));
    assert!(resumed.statuses().unwrap().iter().all(|(_, _, s)| *s == TaskStatus::Done));
}

#[test]
fn torn_log_line_leaves_that_task_pending() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 2);
    let run_dir = dir.path().join("run");
    let run = Run::create(&run_dir, config(data, oracle())).unwrap();
    run.execute(&opts(1, Some(5))).unwrap();
    let mut f = std::fs::OpenOptions::new().append(true).open(run.exchanges_path()).unwrap();
    f.write_all(b"{\"sample_id\":\"demo-001\",\"method\":\"zero").unwrap();
    drop(f);
    let s = Run::open(&run_dir).unwrap().summary().unwrap();
    assert_eq!((s.done, s.pending), (5, 9));
}

#[test]
fn replay_reproduces_the_report_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 15);
    let live = Run::create(&dir.path().join("live"), config(data.clone(), oracle())).unwrap();
    live.execute(&opts(4, None)).unwrap();
    let original = live.score().unwrap();

    let replay_cfg = BackendConfig::Replay { replay_path: live.exchanges_path() };
    let replay = Run::create(&dir.path().join("replay"), config(data, replay_cfg)).unwrap();
    let s = replay.execute(&opts(2, None)).unwrap();
    assert!(s.is_complete() && s.failed == 0);
    assert_eq!(replay.score().unwrap(), original);

    // scoring a copy of the log is the same pure function
    let copy = dir.path().join("copy.jsonl");
    std::fs::copy(live.exchanges_path(), &copy).unwrap();
    let exchanges = tsprompt_core::gateway::read_exchanges(&copy).unwrap();
    let m = live.manifest();
    let rescored = score_exchanges(&m.dataset_id, m.horizon, &m.methods, live.samples(), &exchanges).unwrap();
    assert_eq!(rescored, original);
    assert_eq!(
        tsprompt_core::metrics::to_csv(&rescored),
        tsprompt_core::metrics::to_csv(&original)
    );
}

#[test]
fn replay_gaps_fail_single_tasks_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 4);
    let mut partial = config(data.clone(), oracle());
    partial.methods = vec![PromptKind::Baseline];
    let live = Run::create(&dir.path().join("live"), partial).unwrap();
    live.execute(&opts(1, None)).unwrap();

    let mut cfg = config(data, BackendConfig::Replay { replay_path: live.exchanges_path() });
    cfg.methods = vec![PromptKind::Baseline, PromptKind::ZeroShotCot];
    let replay = Run::create(&dir.path().join("replay"), cfg).unwrap();
    let s = replay.execute(&opts(2, None)).unwrap();
    assert_eq!((s.done, s.failed, s.pending), (4, 4, 0));
    let report = replay.score().unwrap();
    assert_eq!(report.method(PromptKind::ZeroShotCot).unwrap().missing_rate, 1.0);
    assert_eq!(report.n_common, 0);

    // failed tasks are skipped on resume unless asked for
    assert_eq!(replay.execute(&opts(1, None)).unwrap().attempted, 0);
    let retry = ExecuteOptions { workers: 1, limit: None, retry_failed: true };
    assert_eq!(replay.execute(&retry).unwrap().attempted, 4);
}

#[test]
fn configuration_errors_abort_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 3);

    let missing_store = BackendConfig::Replay { replay_path: dir.path().join("nope.jsonl") };
    let run = Run::create(&dir.path().join("a"), config(data.clone(), missing_store)).unwrap();
    assert!(run.execute(&opts(1, None)).is_err());
    assert!(run.exchanges().unwrap().is_empty());

    let mut no_lst = config(data.clone(), oracle());
    no_lst.lst_text = None;
    assert!(matches!(Run::create(&dir.path().join("b"), no_lst), Err(RunnerError::Prompt(_))));

    let bad_rate = BackendConfig::Oracle(OracleFaults::uniform(2.0, 0));
    assert!(Run::create(&dir.path().join("c"), config(data.clone(), bad_rate)).is_err());

    Run::create(&dir.path().join("d"), config(data.clone(), oracle())).unwrap();
    assert!(matches!(
        Run::create(&dir.path().join("d"), config(data, oracle())),
        Err(RunnerError::Config(_))
    ));
}

#[test]
fn raw_minute_file_becomes_hourly_windows() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("household_power_consumption.txt");
    let mut f = File::create(&raw).unwrap();
    writeln!(f, "Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;Sub_metering_1;Sub_metering_2;Sub_metering_3").unwrap();
    let start = chrono::NaiveDate::from_ymd_opt(2006, 12, 16).unwrap().and_hms_opt(17, 0, 0).unwrap();
    // 130 hours; every minute of hour h reads h, except hour 5 which is all "?"
    for m in 0..130 * 60 {
        let at = start + chrono::TimeDelta::minutes(m);
        let hour = m / 60;
        let v = if hour == 5 { "?".to_string() } else { format!("{hour}.000") };
        writeln!(f, "{};{};1;0;240;{v};0;0;0", at.format("%-d/%-m/%Y"), at.format("%H:%M:%S")).unwrap();
    }
    drop(f);
    let prepared = prepare_ihepc(&raw, 6, 10, Some(2)).unwrap();
    assert_eq!(prepared.hourly_len, 130);
    assert_eq!(prepared.samples.len(), 2);
    let first = &prepared.samples[0];
    assert_eq!(first.history.len(), 96);
    assert_eq!(first.history.values()[5], 4.0);
    assert_eq!(first.target, vec![96.0, 97.0, 98.0, 99.0, 100.0, 101.0]);
    assert_eq!(prepared.samples[1].history.values()[0], 10.0);
    assert_eq!(prepared.samples[1].history.start(), start + chrono::TimeDelta::hours(10));
    let uncapped = prepare_ihepc(&raw, 6, 10, None).unwrap();
    assert_eq!(uncapped.samples.len(), (130 - 102) / 10 + 1);
}
