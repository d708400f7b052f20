use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// One pass/fail evaluation. Informational checks are reported but do not
/// change the exit code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub gating: bool,
    pub detail: String,
}

impl Check {
    pub fn gating(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            gating: true,
            detail: detail.into(),
        }
    }

    pub fn info(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            gating: false,
            ..Check::gating(name, pass, detail)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the manifest.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Everything the command needs to run again.
    pub config: Value,
    /// SHA-256 of the compact serialization of `config`.
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub threads: Option<usize>,
    /// Unix seconds, recorded only with `--record-time`.
    pub started: Option<u64>,
    pub finished: Option<u64>,
    pub dry_run: bool,
    pub outputs: Vec<OutputEntry>,
    pub checks: Vec<Check>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn config_hash(config: &Value) -> String {
    sha256_hex(config.to_string().as_bytes())
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Output directory of one command invocation and the files written so far.
pub struct Run {
    pub command: &'static str,
    pub dir: PathBuf,
    outputs: Vec<OutputEntry>,
    record_time: bool,
    started: Option<u64>,
    threads: Option<usize>,
}

impl Run {
    pub fn new(command: &'static str, out_dir: &Path, record_time: bool, threads: Option<usize>) -> Self {
        Run {
            command,
            dir: out_dir.join(command),
            outputs: Vec::new(),
            record_time,
            started: record_time.then(unix_now),
            threads,
        }
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        speclab::output::write_file(&path, contents).map_err(|e| CliError::Numerical(e.to_string()))?;
        self.outputs.push(OutputEntry {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish<C: Serialize>(
        self,
        config: &C,
        seed: u64,
        dry_run: bool,
        checks: Vec<Check>,
    ) -> Result<RunManifest, CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Numerical(e.to_string()))?;
        let manifest = RunManifest {
            command: self.command.to_string(),
            config_hash: config_hash(&config),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: self.threads,
            started: self.started,
            finished: self.record_time.then(unix_now),
            dry_run,
            outputs: self.outputs,
            checks,
        };
        let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        speclab::output::write_file(&self.dir.join("manifest.json"), &s).map_err(|e| CliError::Numerical(e.to_string()))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_survives_a_round_trip() {
        let v = serde_json::json!({"eps": [1.0, 0.1, 0.30000000000000004], "seed": 7});
        let back: Value = serde_json::from_str(&v.to_string()).unwrap();
        assert_eq!(config_hash(&v), config_hash(&back));
        assert_eq!(config_hash(&v).len(), 64);
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
