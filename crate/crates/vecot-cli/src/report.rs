//! Run reports: one JSON document per invocation, deterministic for a
//! given (instance, flags, seed) triple. The counters field carries
//! deterministic work measures (iterations, grid points, ...) so repeated
//! runs stay byte-identical; wall-clock timing goes to stderr only.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct RunReport<T: Serialize> {
    pub command: String,
    pub instance_digest: String,
    pub tool_version: String,
    pub counters: BTreeMap<String, u64>,
    pub outcome: T,
}

impl<T: Serialize> RunReport<T> {
    pub fn new(command: &str, digest: String, outcome: T) -> Self {
        RunReport {
            command: command.to_string(),
            instance_digest: digest,
            tool_version: TOOL_VERSION.to_string(),
            counters: BTreeMap::new(),
            outcome,
        }
    }

    pub fn counter(mut self, key: &str, value: u64) -> Self {
        self.counters.insert(key.to_string(), value);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Machine-readable error object; printed to stdout before exit code 1.
#[derive(Serialize)]
pub struct ErrorObject {
    pub error: String,
    pub detail: String,
}

impl ErrorObject {
    pub fn new(kind: &str, detail: impl ToString) -> Self {
        ErrorObject {
            error: kind.to_string(),
            detail: detail.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("error serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write-temp-then-rename so partial files never land under the target name.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = path.file_name().unwrap_or_default().to_os_string();
    tmp.push(".tmp");
    let tmp_path = dir.join(tmp);
    fs::write(&tmp_path, contents)?;
    fs::rename(&tmp_path, path)?;
    Ok(())
}

/// Emit to `--out` when given, stdout otherwise.
pub fn emit(out: Option<&Path>, contents: &str) -> io::Result<()> {
    match out {
        Some(path) => write_atomic(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}
