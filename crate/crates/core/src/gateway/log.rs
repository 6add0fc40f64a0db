//! Append-only JSON-lines exchange log; the same file serves as replay store.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{GatewayError, ModelExchange};
use crate::prompt::PromptKind;

#[derive(Debug)]
pub struct ExchangeLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl ExchangeLog {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write one record and flush it before returning.
    pub fn append(&self, exchange: &ModelExchange) -> Result<(), GatewayError> {
        let mut line = serde_json::to_string(exchange).map_err(|e| GatewayError::Io(e.to_string()))?;
        line.push('\n');
        let mut file = self.file.lock().expect("exchange log poisoned");
        file.write_all(line.as_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| GatewayError::Io(format!("{}: {e}", self.path.display())))
    }
}

/// Read every record. A torn final line (interrupted write) is skipped.
pub fn read_exchanges(path: impl AsRef<Path>) -> Result<Vec<ModelExchange>, GatewayError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(GatewayError::Io(format!("{}: {e}", path.display()))),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
    let last = lines.len();
    let mut out = Vec::with_capacity(last);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(ex) => out.push(ex),
            Err(e) if i + 1 == last => {
                tracing::warn!(path = %path.display(), "skipping torn final record: {e}");
            }
            Err(e) => {
                return Err(GatewayError::Io(format!("{}:{}: {e}", path.display(), i + 1)));
            }
        }
    }
    Ok(out)
}

/// Latest exchange per (sample, method); successful ones take precedence.
#[derive(Debug, Default, Clone)]
pub struct ReplayStore {
    entries: HashMap<(String, PromptKind), ModelExchange>,
}

impl ReplayStore {
    pub fn from_exchanges(exchanges: impl IntoIterator<Item = ModelExchange>) -> Self {
        let mut entries: HashMap<(String, PromptKind), ModelExchange> = HashMap::new();
        for ex in exchanges {
            let key = (ex.sample_id.clone(), ex.method);
            let keep_old = entries
                .get(&key)
                .is_some_and(|old| old.error.is_none() && ex.error.is_some());
            if !keep_old {
                entries.insert(key, ex);
            }
        }
        Self { entries }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(GatewayError::Config(format!("replay store {} not found", path.display())));
        }
        Ok(Self::from_exchanges(read_exchanges(path)?))
    }

    pub fn get(&self, sample_id: &str, method: PromptKind) -> Option<&ModelExchange> {
        self.entries.get(&(sample_id.to_string(), method))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
