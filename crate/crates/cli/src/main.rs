mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tsprompt_core::gateway::{BackendConfig, HttpSettings, OracleFaults};
use tsprompt_core::metrics::{to_csv, to_markdown, EvalReport};
use tsprompt_core::prompt::PromptKind;
use tsprompt_core::runner::{
    self, dataset_names, load_samples, oracle_demo, parse_methods, prepare_ihepc, run_dir, score_exchanges,
    validate_short_series, write_reports, DatasetKind, DemoOptions, ExecuteOptions, Run, RunConfig,
};
use tsprompt_core::series::write_samples;

use config::FileConfig;

/// Benchmark prompting methods for LLM time-series forecasting.
#[derive(Debug, Parser)]
#[command(name = "tsprompt", version, about)]
struct Cli {
    /// TOML file with [dataset], [methods], [backend], [faults] and [run] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a sample file: hourly windows from the raw household power log,
    /// or validation of a short-series sample file.
    PrepareData(PrepareArgs),
    /// Create or resume a run and send its pending prompts.
    Run(RunArgs),
    /// Score a run's exchange log and write report.{json,md,csv}.
    Score(ScoreArgs),
    /// Render a saved report.json as markdown or CSV.
    Report(ReportArgs),
    /// Numeric token statistics for a sample file.
    Tokens(TokensArgs),
    /// Offline end-to-end pipeline on synthetic data with the oracle backend.
    OracleDemo(DemoArgs),
}

#[derive(Debug, Args)]
struct PrepareArgs {
    /// One of: sg, ct, ecl, ihepc.
    #[arg(long)]
    dataset: Option<String>,
    /// Raw input: the semicolon-separated minute file for ihepc, a JSONL
    /// sample file otherwise.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file [default: <out-dir>/data/<dataset>.jsonl].
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    max_windows: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendChoice {
    Http,
    Replay,
    Oracle,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    dataset: Option<String>,
    /// Prepared sample file [default: <out-dir>/data/<dataset>.jsonl].
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated method keys, or "all".
    #[arg(long)]
    methods: Option<String>,
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Exchange log to replay (replay backend).
    #[arg(long)]
    replay_path: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    lst_prompt_file: Option<PathBuf>,
    /// Directory overriding the bundled prompt texts.
    #[arg(long)]
    prompt_dir: Option<PathBuf>,
    /// Oracle fault seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Continue an existing run.
    #[arg(long, value_name = "RUN_ID")]
    resume: Option<String>,
    /// Id for a new run [default: <dataset>-<UTC timestamp>].
    #[arg(long)]
    run_id: Option<String>,
    /// Send at most this many requests, leaving the rest pending.
    #[arg(long)]
    limit: Option<usize>,
    /// Re-send tasks whose earlier attempt failed.
    #[arg(long)]
    retry_failed: bool,
    /// Score the run and write reports once nothing is pending.
    #[arg(long)]
    score: bool,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Run directory (or use --resume/--out-dir).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    #[arg(long, value_name = "RUN_ID")]
    resume: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Score this exchange log instead of the run's own.
    #[arg(long)]
    exchanges: Option<PathBuf>,
    /// Where to write the reports [default: the run directory].
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Markdown,
    Csv,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// A report.json written by `score`.
    input: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    format: ReportFormat,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TokensArgs {
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Comma-separated fault rates; one run per rate.
    #[arg(long, default_value = "0,0.1", value_delimiter = ',')]
    fault_rates: Vec<f64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Bad names or missing required settings; reported with exit status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::PrepareData(a) => prepare(a, &cfg),
        Command::Run(a) => run(a, &cfg),
        Command::Score(a) => score(a, &cfg),
        Command::Report(a) => report(a),
        Command::Tokens(a) => tokens(a, &cfg),
        Command::OracleDemo(a) => demo(a, &cfg),
    }
}

fn dataset_kind(flag: Option<&str>, cfg: &FileConfig) -> anyhow::Result<DatasetKind> {
    let name = flag
        .or(cfg.dataset.name.as_deref())
        .ok_or_else(|| usage(format!("--dataset is required; valid datasets: {}", dataset_names())))?;
    DatasetKind::from_key(name)
        .ok_or_else(|| usage(format!("unknown dataset {name:?}; valid datasets: {}", dataset_names())))
}

fn out_dir(flag: Option<PathBuf>, cfg: &FileConfig) -> PathBuf {
    flag.or_else(|| cfg.run.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn default_data_path(out: &Path, kind: DatasetKind) -> PathBuf {
    out.join("data").join(format!("{}.jsonl", kind.key()))
}

fn prepare(a: PrepareArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let kind = dataset_kind(a.dataset.as_deref(), cfg)?;
    let horizon = a.horizon.or(cfg.dataset.horizon).unwrap_or(kind.default_horizon());
    let input = a
        .input
        .or_else(|| cfg.dataset.input.clone())
        .ok_or_else(|| usage("--input is required"))?;
    let output = a
        .output
        .unwrap_or_else(|| default_data_path(&out_dir(a.out_dir, cfg), kind));
    let samples = if kind == DatasetKind::Ihepc {
        let max_windows = a
            .max_windows
            .or(cfg.dataset.max_windows)
            .unwrap_or(runner::IHEPC_MAX_WINDOWS);
        let stride = a.stride.or(cfg.dataset.stride).unwrap_or(runner::IHEPC_STRIDE);
        let prepared = prepare_ihepc(&input, horizon, stride, Some(max_windows))?;
        if let Some(w) = &prepared.warning {
            eprintln!("warning: {w:?}");
        }
        eprintln!("{} hourly values -> {} windows", prepared.hourly_len, prepared.samples.len());
        prepared.samples
    } else {
        let samples = load_samples(&input, horizon)?;
        validate_short_series(kind, &samples)?;
        samples
    };
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(&output).with_context(|| format!("creating {}", output.display()))?;
    write_samples(BufWriter::new(file), &samples)?;
    println!("wrote {} samples to {}", samples.len(), output.display());
    Ok(())
}

fn backend_config(a: &RunArgs, cfg: &FileConfig) -> anyhow::Result<BackendConfig> {
    let mut backend = match (a.backend, &cfg.backend) {
        (None, Some(b)) => b.clone(),
        (None, None) => return Err(usage("--backend is required (http, replay or oracle)")),
        (Some(choice), from_file) => match (choice, from_file) {
            (BackendChoice::Http, Some(b @ BackendConfig::Http(_))) => b.clone(),
            (BackendChoice::Http, _) => BackendConfig::Http(HttpSettings::default()),
            (BackendChoice::Replay, Some(b @ BackendConfig::Replay { .. })) => b.clone(),
            (BackendChoice::Replay, _) => BackendConfig::Replay {
                replay_path: PathBuf::new(),
            },
            (BackendChoice::Oracle, Some(b @ BackendConfig::Oracle(_))) => b.clone(),
            (BackendChoice::Oracle, _) => BackendConfig::Oracle(OracleFaults::default()),
        },
    };
    match &mut backend {
        BackendConfig::Replay { replay_path } => {
            if let Some(p) = &a.replay_path {
                *replay_path = p.clone();
            }
            if replay_path.as_os_str().is_empty() {
                return Err(usage("the replay backend needs --replay-path"));
            }
        }
        BackendConfig::Oracle(f) => {
            if let Some(faults) = &cfg.faults {
                f.p_omit_marker = faults.p_omit_marker.unwrap_or(f.p_omit_marker);
                f.p_short_horizon = faults.p_short_horizon.unwrap_or(f.p_short_horizon);
                f.p_split_answer = faults.p_split_answer.unwrap_or(f.p_split_answer);
                f.p_arith_slip = faults.p_arith_slip.unwrap_or(f.p_arith_slip);
            }
            if let Some(seed) = a.seed.or(cfg.run.seed) {
                f.seed = seed;
            }
        }
        BackendConfig::Http(_) => {}
    }
    backend.validate()?;
    Ok(backend)
}

fn read_lst(path: Option<&Path>) -> anyhow::Result<Option<String>> {
    path.map(|p| std::fs::read_to_string(p).with_context(|| format!("reading LST prompt {}", p.display())))
        .transpose()
}

fn run(a: RunArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let out = out_dir(a.out_dir.clone(), cfg);
    let workers = a.workers.or(cfg.run.workers).unwrap_or(4);
    let run = if let Some(id) = &a.resume {
        let dir = run_dir(&out, id);
        if !dir.exists() {
            return Err(usage(format!("no run {id:?} under {}", out.display())));
        }
        Run::open(&dir)?
    } else {
        let kind = dataset_kind(a.dataset.as_deref(), cfg)?;
        let methods = match a.methods.as_deref() {
            Some(list) => parse_methods(list),
            None => match &cfg.methods.list {
                Some(list) => parse_methods(&list.join(",")),
                None => parse_methods("all"),
            },
        }
        .map_err(usage)?;
        let lst_file = a.lst_prompt_file.clone().or_else(|| cfg.methods.lst_prompt_file.clone());
        if methods.contains(&PromptKind::ZeroShotLst) && lst_file.is_none() {
            return Err(usage("zero_shot_lst needs --lst-prompt-file"));
        }
        let backend = backend_config(&a, cfg)?;
        let run_id = a
            .run_id
            .clone()
            .unwrap_or_else(|| format!("{}-{}", kind.key(), unix_stamp()));
        let samples_path = a
            .data
            .clone()
            .or_else(|| cfg.dataset.path.clone())
            .unwrap_or_else(|| default_data_path(&out, kind));
        Run::create(
            &run_dir(&out, &run_id),
            RunConfig {
                run_id,
                dataset_id: kind.key().to_string(),
                samples_path,
                horizon: a.horizon.or(cfg.dataset.horizon).unwrap_or(kind.default_horizon()),
                methods,
                backend,
                lst_text: read_lst(lst_file.as_deref())?,
                prompt_dir: a.prompt_dir.clone().or_else(|| cfg.methods.prompt_dir.clone()),
            },
        )?
    };
    let summary = run.execute(&ExecuteOptions {
        workers,
        limit: a.limit,
        retry_failed: a.retry_failed,
    })?;
    println!(
        "run {}: sent {}, done {}, failed {}, pending {}",
        run.manifest().run_id,
        summary.attempted,
        summary.done,
        summary.failed,
        summary.pending
    );
    println!("run directory: {}", run.dir().display());
    if a.score && summary.is_complete() {
        let report = run.score()?;
        write_reports(&report, run.dir())?;
        print!("{}", to_markdown(&report));
    }
    Ok(())
}

fn unix_stamp() -> String {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}

fn score(a: ScoreArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let dir = match (a.run_dir, a.resume) {
        (Some(d), _) => d,
        (None, Some(id)) => run_dir(&out_dir(a.out_dir, cfg), &id),
        (None, None) => return Err(usage("give --run-dir or --resume <RUN_ID>")),
    };
    let run = Run::open(&dir)?;
    let report = match &a.exchanges {
        Some(log) => {
            let m = run.manifest();
            let exchanges = tsprompt_core::gateway::read_exchanges(log)?;
            score_exchanges(&m.dataset_id, m.horizon, &m.methods, run.samples(), &exchanges)?
        }
        None => run.score()?,
    };
    let target = a.output.unwrap_or_else(|| dir.clone());
    write_reports(&report, &target)?;
    print!("{}", to_markdown(&report));
    eprintln!("reports written to {}", target.display());
    Ok(())
}

fn report(a: ReportArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let report: EvalReport =
        serde_json::from_str(&text).with_context(|| format!("{} is not a report", a.input.display()))?;
    let body = match a.format {
        ReportFormat::Markdown => to_markdown(&report),
        ReportFormat::Csv => to_csv(&report),
    };
    match a.output {
        Some(p) => std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn tokens(a: TokensArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let kind = dataset_kind(a.dataset.as_deref(), cfg)?;
    let horizon = a.horizon.or(cfg.dataset.horizon).unwrap_or(kind.default_horizon());
    let path = a
        .data
        .or_else(|| cfg.dataset.path.clone())
        .unwrap_or_else(|| default_data_path(&out_dir(a.out_dir, cfg), kind));
    let samples = load_samples(&path, horizon)?;
    let stats = runner::token_stats(&samples);
    println!("numbers: {}", stats.numbers);
    println!("tokens: {}", stats.tokens);
    println!("mean tokens per number: {:.4}", stats.mean_tokens());
    println!("max tokens per number: {}", stats.max_tokens);
    for (k, n) in stats.histogram.iter().enumerate().filter(|(_, n)| **n > 0) {
        println!("  {k} tokens: {n}");
    }
    Ok(())
}

fn demo(a: DemoArgs, cfg: &FileConfig) -> anyhow::Result<()> {
    let out = out_dir(a.out_dir, cfg);
    let seed = a.seed.or(cfg.run.seed).unwrap_or(7);
    let workers = a.workers.or(cfg.run.workers).unwrap_or(4);
    if a.fault_rates.is_empty() {
        bail!("no fault rates given");
    }
    for rate in a.fault_rates {
        if !(0.0..=1.0).contains(&rate) {
            return Err(usage(format!("fault rate {rate} is not in [0, 1]")));
        }
        let outcome = oracle_demo(
            &out,
            &DemoOptions {
                seed,
                samples: a.samples,
                fault_rate: rate,
                workers,
            },
        )?;
        let missing: BTreeMap<_, _> = outcome
            .report
            .per_method
            .iter()
            .map(|(k, s)| (k.key(), s.missing_rate))
            .collect();
        println!("fault rate {rate}: reports in {}", outcome.run_dir.display());
        for (k, m) in missing {
            println!("  {k}: missing rate {m}");
        }
    }
    Ok(())
}
