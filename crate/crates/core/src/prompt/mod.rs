//! Query rendering and prompting-method composition.
//!
//! A final query is `Q: ` + the context query + a method directive. The
//! baseline carries only a short answer-format request; one-shot methods
//! prepend a worked example to their zero-shot query.
//!
//! Templates, method texts and one-shot examples are plain-text files. The
//! defaults under `assets/prompts/` are compiled in, and
//! [`PromptLibrary::load_dir`] overrides any of them from a directory.

mod context;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::series::{DomainKind, TimeSeries};

pub use context::{format_timestamp, format_value, Template, TemplateRegistry};

pub const BASELINE_FORMAT_REQUEST: &str = "Please answer the predicted value only.";
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 1024;
pub const LST_MAX_OUTPUT_TOKENS: u32 = 1280;

const TEMPLATES: &str = include_str!("../../assets/prompts/templates.toml");
const SARIMA: &str = include_str!("../../assets/prompts/sarima.txt");
const PAS_PLUS: &str = include_str!("../../assets/prompts/pas_plus.txt");
const COT: &str = include_str!("../../assets/prompts/cot.txt");
const ONE_SHOT_COT: &str = include_str!("../../assets/prompts/one_shot_cot.txt");
const ONE_SHOT_SARIMA: &str = include_str!("../../assets/prompts/one_shot_sarima.txt");

#[derive(Debug, thiserror::Error)]
pub enum PromptError {
    #[error("no context template registered for domain {0:?}")]
    Template(DomainKind),
    #[error("prompt configuration: {0}")]
    Config(String),
    #[error("invalid one-shot example: {0}")]
    InvalidShot(String),
    #[error("context query is empty")]
    EmptyContext,
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Prompting methods, in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Baseline,
    ZeroShotCot,
    OneShotCot,
    ZeroShotPasPlus,
    ZeroShotSarima,
    OneShotSarima,
    ZeroShotLst,
}

impl PromptKind {
    pub const ALL: [PromptKind; 7] = [
        PromptKind::Baseline,
        PromptKind::ZeroShotCot,
        PromptKind::OneShotCot,
        PromptKind::ZeroShotPasPlus,
        PromptKind::ZeroShotSarima,
        PromptKind::OneShotSarima,
        PromptKind::ZeroShotLst,
    ];

    pub fn key(self) -> &'static str {
        match self {
            PromptKind::Baseline => "baseline",
            PromptKind::ZeroShotCot => "zero_shot_cot",
            PromptKind::OneShotCot => "one_shot_cot",
            PromptKind::ZeroShotPasPlus => "zero_shot_pas_plus",
            PromptKind::ZeroShotSarima => "zero_shot_sarima",
            PromptKind::OneShotSarima => "one_shot_sarima",
            PromptKind::ZeroShotLst => "zero_shot_lst",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    /// Row label used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            PromptKind::Baseline => "Baseline",
            PromptKind::ZeroShotCot => "Zero-shot CoT",
            PromptKind::OneShotCot => "One-shot CoT",
            PromptKind::ZeroShotPasPlus => "Zero-shot PaS+",
            PromptKind::ZeroShotSarima => "Zero-shot SARIMA",
            PromptKind::OneShotSarima => "One-shot SARIMA",
            PromptKind::ZeroShotLst => "Zero-shot LST",
        }
    }

    pub fn is_one_shot(self) -> bool {
        matches!(self, PromptKind::OneShotCot | PromptKind::OneShotSarima)
    }

    /// The zero-shot method a one-shot method appends after its example.
    pub fn zero_shot_counterpart(self) -> PromptKind {
        match self {
            PromptKind::OneShotCot => PromptKind::ZeroShotCot,
            PromptKind::OneShotSarima => PromptKind::ZeroShotSarima,
            other => other,
        }
    }

    pub fn max_output_tokens(self) -> u32 {
        match self {
            PromptKind::ZeroShotLst => LST_MAX_OUTPUT_TOKENS,
            _ => DEFAULT_MAX_OUTPUT_TOKENS,
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// A worked question/answer pair placed before a one-shot query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotExample {
    pub id: String,
    pub example_query: String,
    pub example_answer: String,
}

impl ShotExample {
    pub fn new(
        id: impl Into<String>,
        example_query: impl Into<String>,
        example_answer: impl Into<String>,
    ) -> Result<Self, PromptError> {
        let shot = Self {
            id: id.into(),
            example_query: example_query.into(),
            example_answer: example_answer.into(),
        };
        if !shot.example_query.starts_with("Q:") {
            return Err(PromptError::InvalidShot(format!("{}: query must start with \"Q:\"", shot.id)));
        }
        if !shot.example_answer.starts_with("A:") {
            return Err(PromptError::InvalidShot(format!("{}: answer must start with \"A:\"", shot.id)));
        }
        Ok(shot)
    }

    /// Parse an example file: the query runs up to the first line that
    /// starts with `A:`, the answer is everything from there on.
    pub fn parse(id: impl Into<String>, text: &str) -> Result<Self, PromptError> {
        let id = id.into();
        let text = trim_trailing_newlines(text);
        let split = text
            .match_indices('\n')
            .map(|(i, _)| i)
            .find(|&i| text[i + 1..].starts_with("A:"))
            .ok_or_else(|| PromptError::InvalidShot(format!("{id}: no line starting with \"A:\"")))?;
        Self::new(id, &text[..split], &text[split + 1..])
    }
}

fn trim_trailing_newlines(text: &str) -> &str {
    text.strip_suffix("\r\n")
        .or_else(|| text.strip_suffix('\n'))
        .unwrap_or(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptMethod {
    pub kind: PromptKind,
    pub shot_example: Option<ShotExample>,
    /// User-supplied LST prompt text.
    pub external_text: Option<String>,
}

impl PromptMethod {
    pub fn new(
        kind: PromptKind,
        shot_example: Option<ShotExample>,
        external_text: Option<String>,
    ) -> Result<Self, PromptError> {
        if kind.is_one_shot() != shot_example.is_some() {
            return Err(PromptError::Config(format!(
                "{kind}: a shot example is required exactly for one-shot methods"
            )));
        }
        if kind == PromptKind::ZeroShotLst && external_text.is_none() {
            return Err(PromptError::Config(
                "zero_shot_lst needs the LST prompt text (--lst-prompt-file)".into(),
            ));
        }
        Ok(Self {
            kind,
            shot_example,
            external_text,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub method: PromptKind,
    pub max_output_tokens: u32,
    pub sample_id: String,
    pub horizon: usize,
}

/// Templates, method directives and one-shot examples.
#[derive(Debug, Clone)]
pub struct PromptLibrary {
    pub templates: TemplateRegistry,
    pub sarima: String,
    pub pas_plus: String,
    pub cot: String,
    pub one_shot_cot: ShotExample,
    pub one_shot_sarima: ShotExample,
}

impl PromptLibrary {
    pub fn builtin() -> Self {
        Self {
            templates: TemplateRegistry::from_toml(TEMPLATES).expect("bundled templates parse"),
            sarima: SARIMA.to_string(),
            pas_plus: PAS_PLUS.to_string(),
            cot: COT.to_string(),
            one_shot_cot: ShotExample::parse("one_shot_cot", ONE_SHOT_COT).expect("bundled example"),
            one_shot_sarima: ShotExample::parse("one_shot_sarima", ONE_SHOT_SARIMA)
                .expect("bundled example"),
        }
    }

    /// Built-in library with any of `templates.toml`, `sarima.txt`,
    /// `pas_plus.txt`, `cot.txt`, `one_shot_cot.txt`, `one_shot_sarima.txt`
    /// found in `dir` replacing the defaults.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut lib = Self::builtin();
        let read = |name: &str| -> Result<Option<String>, PromptError> {
            let path = dir.join(name);
            match std::fs::read_to_string(&path) {
                Ok(text) => Ok(Some(text)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(source) => Err(PromptError::Io {
                    path: path.display().to_string(),
                    source,
                }),
            }
        };
        if let Some(t) = read("templates.toml")? {
            lib.templates = TemplateRegistry::from_toml(&t)?;
        }
        for (name, slot) in [
            ("sarima.txt", &mut lib.sarima),
            ("pas_plus.txt", &mut lib.pas_plus),
            ("cot.txt", &mut lib.cot),
        ] {
            if let Some(t) = read(name)? {
                *slot = trim_trailing_newlines(&t).to_string();
            }
        }
        if let Some(t) = read("one_shot_cot.txt")? {
            lib.one_shot_cot = ShotExample::parse("one_shot_cot", &t)?;
        }
        if let Some(t) = read("one_shot_sarima.txt")? {
            lib.one_shot_sarima = ShotExample::parse("one_shot_sarima", &t)?;
        }
        Ok(lib)
    }

    /// Build a method, attaching the library's one-shot example where needed.
    pub fn method(&self, kind: PromptKind, lst_text: Option<&str>) -> Result<PromptMethod, PromptError> {
        let shot = match kind {
            PromptKind::OneShotCot => Some(self.one_shot_cot.clone()),
            PromptKind::OneShotSarima => Some(self.one_shot_sarima.clone()),
            _ => None,
        };
        let external = match kind {
            PromptKind::ZeroShotLst => lst_text.map(|t| trim_trailing_newlines(t).to_string()),
            _ => None,
        };
        PromptMethod::new(kind, shot, external)
    }

    /// The question embedding the series values, dates, entity and units.
    pub fn render_context_query(&self, series: &TimeSeries, horizon: usize) -> Result<String, PromptError> {
        context::render(&self.templates, series, horizon)
    }

    /// Directive text appended after the context query. Baseline has none;
    /// its format request is added by [`Self::assemble_query`].
    pub fn method_prompt_text<'a>(&'a self, method: &'a PromptMethod) -> Result<&'a str, PromptError> {
        match method.kind.zero_shot_counterpart() {
            PromptKind::Baseline => Err(PromptError::Config(
                "baseline has no method prompt; it only adds the format request".into(),
            )),
            PromptKind::ZeroShotCot => Ok(&self.cot),
            PromptKind::ZeroShotPasPlus => Ok(&self.pas_plus),
            PromptKind::ZeroShotSarima => Ok(&self.sarima),
            PromptKind::ZeroShotLst => method.external_text.as_deref().ok_or_else(|| {
                PromptError::Config("zero_shot_lst needs the LST prompt text (--lst-prompt-file)".into())
            }),
            PromptKind::OneShotCot | PromptKind::OneShotSarima => unreachable!("mapped to zero-shot"),
        }
    }

    pub fn assemble_query(
        &self,
        context_query: &str,
        method: &PromptMethod,
        sample_id: &str,
        horizon: usize,
    ) -> Result<RenderedPrompt, PromptError> {
        if context_query.is_empty() {
            return Err(PromptError::EmptyContext);
        }
        let text = match method.kind {
            PromptKind::Baseline => format!("Q: {context_query} {BASELINE_FORMAT_REQUEST}"),
            kind => {
                let zero_shot = format!("Q: {context_query}\n{}", self.method_prompt_text(method)?);
                if kind.is_one_shot() {
                    let shot = method.shot_example.as_ref().ok_or_else(|| {
                        PromptError::Config(format!("{kind}: missing shot example"))
                    })?;
                    format!("{}\n{}\n{zero_shot}", shot.example_query, shot.example_answer)
                } else {
                    zero_shot
                }
            }
        };
        Ok(RenderedPrompt {
            text,
            method: method.kind,
            max_output_tokens: method.kind.max_output_tokens(),
            sample_id: sample_id.to_string(),
            horizon,
        })
    }

    /// Render the full query for one sample under one method.
    pub fn render(
        &self,
        series: &TimeSeries,
        method: &PromptMethod,
        horizon: usize,
    ) -> Result<RenderedPrompt, PromptError> {
        let context_query = self.render_context_query(series, horizon)?;
        self.assemble_query(&context_query, method, series.id(), horizon)
    }
}

impl Default for PromptLibrary {
    fn default() -> Self {
        Self::builtin()
    }
}
