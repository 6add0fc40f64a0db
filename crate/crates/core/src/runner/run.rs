use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{load_samples, score, RunnerError};
use crate::gateway::{read_exchanges, BackendConfig, ExchangeLog, Gateway, GatewayError, ModelExchange};
use crate::metrics::EvalReport;
use crate::prompt::{PromptKind, PromptLibrary, PromptMethod, RenderedPrompt};
use crate::series::Sample;

const MANIFEST: &str = "manifest.json";
const SAMPLES: &str = "samples.jsonl";
const EXCHANGES: &str = "exchanges.jsonl";
const LST_PROMPT: &str = "lst_prompt.txt";

/// Everything needed to start a new run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub run_id: String,
    pub dataset_id: String,
    /// Prepared sample file; copied into the run directory.
    pub samples_path: PathBuf,
    pub horizon: usize,
    pub methods: Vec<PromptKind>,
    pub backend: BackendConfig,
    pub lst_text: Option<String>,
    /// Directory overriding the bundled prompt assets.
    pub prompt_dir: Option<PathBuf>,
}

/// Run metadata. Per-task status is not stored here; it is recomputed from
/// the exchange log whenever the run is opened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub dataset_id: String,
    pub methods: Vec<PromptKind>,
    pub backend: BackendConfig,
    pub horizon: usize,
    pub sample_count: usize,
    pub sample_ids: Vec<String>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecuteOptions {
    pub workers: usize,
    /// Stop after this many requests (the rest stay pending).
    pub limit: Option<usize>,
    /// Also re-send tasks whose previous attempt failed.
    pub retry_failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    /// Requests sent during this call.
    pub attempted: usize,
    pub done: usize,
    pub failed: usize,
    pub pending: usize,
}

impl RunSummary {
    pub fn is_complete(&self) -> bool {
        self.pending == 0
    }
}

/// An opened run directory.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    samples: Vec<Sample>,
    library: PromptLibrary,
    methods: Vec<PromptMethod>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunnerError> {
    fs::write(path, bytes).map_err(|e| RunnerError::io(path, e))
}

impl Run {
    /// Create `dir` and populate it. Fails if a run already lives there.
    pub fn create(dir: &Path, config: RunConfig) -> Result<Self, RunnerError> {
        if dir.join(MANIFEST).exists() {
            return Err(RunnerError::Config(format!(
                "run {} already exists in {}; resume it instead",
                config.run_id,
                dir.display()
            )));
        }
        if config.methods.is_empty() {
            return Err(RunnerError::Config("no methods selected".into()));
        }
        if config.horizon == 0 {
            return Err(RunnerError::Config("horizon must be at least 1".into()));
        }
        config.backend.validate()?;
        let samples = load_samples(&config.samples_path, config.horizon)?;
        if samples.is_empty() {
            return Err(RunnerError::Config(format!("{} holds no samples", config.samples_path.display())));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = samples.iter().find(|s| !seen.insert(s.id())) {
            return Err(RunnerError::Config(format!("duplicate sample id {}", dup.id())));
        }
        let library = load_library(config.prompt_dir.as_deref())?;
        let methods = build_methods(&library, &config.methods, config.lst_text.as_deref())?;

        fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
        let raw = fs::read(&config.samples_path).map_err(|e| RunnerError::io(&config.samples_path, e))?;
        write_file(&dir.join(SAMPLES), &raw)?;
        if let Some(text) = &config.lst_text {
            write_file(&dir.join(LST_PROMPT), text.as_bytes())?;
        }
        let manifest = RunManifest {
            run_id: config.run_id,
            dataset_id: config.dataset_id,
            methods: methods.iter().map(|m| m.kind).collect(),
            backend: config.backend,
            horizon: config.horizon,
            sample_count: samples.len(),
            sample_ids: samples.iter().map(|s| s.id().to_string()).collect(),
            created_at: Utc::now(),
            prompt_dir: config.prompt_dir,
        };
        let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| RunnerError::Config(e.to_string()))?;
        json.push('\n');
        write_file(&dir.join(MANIFEST), json.as_bytes())?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            samples,
            library,
            methods,
        })
    }

    pub fn open(dir: &Path) -> Result<Self, RunnerError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| RunnerError::io(&path, e))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| RunnerError::Config(format!("{}: {e}", path.display())))?;
        let samples = load_samples(&dir.join(SAMPLES), manifest.horizon)?;
        let ids: Vec<&str> = samples.iter().map(Sample::id).collect();
        if ids != manifest.sample_ids {
            return Err(RunnerError::Config(format!(
                "{} no longer matches the manifest's sample list",
                dir.join(SAMPLES).display()
            )));
        }
        let lst_path = dir.join(LST_PROMPT);
        let lst_text = match fs::read_to_string(&lst_path) {
            Ok(t) => Some(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => return Err(RunnerError::io(&lst_path, e)),
        };
        let library = load_library(manifest.prompt_dir.as_deref())?;
        let methods = build_methods(&library, &manifest.methods, lst_text.as_deref())?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            samples,
            library,
            methods,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn exchanges_path(&self) -> PathBuf {
        self.dir.join(EXCHANGES)
    }

    pub fn exchanges(&self) -> Result<Vec<ModelExchange>, RunnerError> {
        Ok(read_exchanges(self.exchanges_path())?)
    }

    /// Rendered prompt for one task.
    pub fn render(&self, sample: &Sample, kind: PromptKind) -> Result<RenderedPrompt, RunnerError> {
        let method = self
            .methods
            .iter()
            .find(|m| m.kind == kind)
            .ok_or_else(|| RunnerError::Config(format!("method {kind} is not part of this run")))?;
        Ok(self.library.render(&sample.history, method, self.manifest.horizon)?)
    }

    /// Status of every (sample, method) task, sample-major in dataset order.
    pub fn statuses(&self) -> Result<Vec<(String, PromptKind, TaskStatus)>, RunnerError> {
        let mut seen: HashMap<(&str, PromptKind), TaskStatus> = HashMap::new();
        let exchanges = self.exchanges()?;
        for ex in &exchanges {
            let status = if ex.is_success() { TaskStatus::Done } else { TaskStatus::Failed };
            let slot = seen.entry((ex.sample_id.as_str(), ex.method)).or_insert(status);
            if status == TaskStatus::Done {
                *slot = TaskStatus::Done;
            }
        }
        let mut out = Vec::with_capacity(self.samples.len() * self.methods.len());
        for s in &self.samples {
            for m in &self.methods {
                let status = seen.get(&(s.id(), m.kind)).copied().unwrap_or(TaskStatus::Pending);
                out.push((s.id().to_string(), m.kind, status));
            }
        }
        Ok(out)
    }

    pub fn summary(&self) -> Result<RunSummary, RunnerError> {
        let mut summary = RunSummary::default();
        for (_, _, status) in self.statuses()? {
            match status {
                TaskStatus::Pending => summary.pending += 1,
                TaskStatus::Done => summary.done += 1,
                TaskStatus::Failed => summary.failed += 1,
            }
        }
        Ok(summary)
    }

    /// Send every pending task through the configured backend.
    ///
    /// Backend and prompt problems abort before the first request. After
    /// that, a failed task is logged and the run carries on; only a failure
    /// to write the exchange log stops it.
    pub fn execute(&self, options: &ExecuteOptions) -> Result<RunSummary, RunnerError> {
        let gateway = Gateway::new(&self.manifest.backend)?.with_log(ExchangeLog::open(self.exchanges_path())?);
        let by_id: HashMap<&str, &Sample> = self.samples.iter().map(|s| (s.id(), s)).collect();
        let mut prompts = Vec::new();
        for (id, kind, status) in self.statuses()? {
            let wanted = match status {
                TaskStatus::Pending => true,
                TaskStatus::Failed => options.retry_failed,
                TaskStatus::Done => false,
            };
            if wanted {
                prompts.push(self.render(by_id[id.as_str()], kind)?);
            }
        }
        if let Some(limit) = options.limit {
            prompts.truncate(limit);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers.max(1))
            .build()
            .map_err(|e| RunnerError::Config(format!("worker pool: {e}")))?;
        let attempted = prompts.len();
        tracing::info!(run = %self.manifest.run_id, tasks = attempted, "sending requests");
        pool.install(|| {
            prompts.par_iter().try_for_each(|p| match gateway.complete(p) {
                Ok(ex) => {
                    if let Some(e) = &ex.error {
                        tracing::warn!(sample = %p.sample_id, method = %p.method, "request failed: {e}");
                    }
                    Ok(())
                }
                Err(GatewayError::ReplayGap { sample_id, method }) => {
                    tracing::warn!(sample = %sample_id, %method, "no recorded response to replay");
                    Ok(())
                }
                Err(e) => Err(e),
            })
        })?;
        Ok(RunSummary {
            attempted,
            ..self.summary()?
        })
    }

    /// Score the current exchange log.
    pub fn score(&self) -> Result<EvalReport, RunnerError> {
        score::score_exchanges(
            &self.manifest.dataset_id,
            self.manifest.horizon,
            &self.manifest.methods,
            &self.samples,
            &self.exchanges()?,
        )
    }
}

fn load_library(dir: Option<&Path>) -> Result<PromptLibrary, RunnerError> {
    Ok(match dir {
        Some(d) => PromptLibrary::load_dir(d)?,
        None => PromptLibrary::builtin(),
    })
}

fn build_methods(
    library: &PromptLibrary,
    kinds: &[PromptKind],
    lst_text: Option<&str>,
) -> Result<Vec<PromptMethod>, RunnerError> {
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|k| library.method(k, lst_text).map_err(RunnerError::from))
        .collect()
}
