//! Optional TOML run configuration. Every key has a matching command-line
//! flag, and flags win.
//!
//! ```toml
//! [dataset]
//! name = "ihepc"
//! path = "out/data/ihepc.jsonl"
//! horizon = 6
//! max_windows = 3000
//!
//! [methods]
//! list = ["baseline", "zero_shot_cot"]
//! lst_prompt_file = "prompts/lst.txt"
//!
//! [backend]
//! kind = "http"
//! model_name = "gpt-4o-mini-2024-07-18"
//!
//! [faults]
//! p_omit_marker = 0.1
//!
//! [run]
//! workers = 4
//! out_dir = "out"
//! seed = 7
//! ```

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;
use tsprompt_core::gateway::BackendConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub methods: MethodsSection,
    pub backend: Option<BackendConfig>,
    pub faults: Option<FaultsSection>,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub name: Option<String>,
    pub path: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub horizon: Option<usize>,
    pub max_windows: Option<usize>,
    pub stride: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsSection {
    pub list: Option<Vec<String>>,
    pub lst_prompt_file: Option<PathBuf>,
    pub prompt_dir: Option<PathBuf>,
}

/// Fault rates for the oracle backend, merged over `[backend]`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultsSection {
    pub p_omit_marker: Option<f64>,
    pub p_short_horizon: Option<f64>,
    pub p_split_answer: Option<f64>,
    pub p_arith_slip: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
