//! Deterministic artifact writing and the run manifest.

use crate::CliError;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// A float written with 17 significant digits; non-finite values become
/// the strings `inf`, `-inf`, `nan`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sci(pub f64);

impl Sci {
    pub fn text(self) -> String {
        match self.0 {
            x if x.is_nan() => "nan".into(),
            x if x == f64::INFINITY => "inf".into(),
            x if x == f64::NEG_INFINITY => "-inf".into(),
            x => format!("{x:.16e}"),
        }
    }
}

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            RawValue::from_string(self.text()).map_err(serde::ser::Error::custom)?.serialize(s)
        } else {
            s.serialize_str(&self.text())
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub stage: String,
    pub ms: Sci,
}

/// Manifest of one run. Everything except `timings` is reproducible.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the config file bytes.
    pub config_hash: String,
    pub timings: Vec<Timing>,
    pub artifacts: Vec<String>,
}

/// Collects artifacts and stage timings for one command.
pub struct Run {
    dir: PathBuf,
    command: String,
    config_hash: String,
    artifacts: Vec<String>,
    timings: Vec<Timing>,
}

impl Run {
    pub fn new(dir: &Path, command: &str, config_bytes: &[u8]) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::domain(format!("cannot create output directory {}: {e}", dir.display())))?;
        let hash = Sha256::digest(config_bytes);
        Ok(Run {
            dir: dir.to_path_buf(),
            command: command.into(),
            config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing { stage: stage.into(), ms: Sci(start.elapsed().as_secs_f64() * 1e3) });
        out
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::domain(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(name.into());
        Ok(path)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        let name = format!("manifest.{}.json", self.command);
        self.artifacts.push(name.clone());
        let manifest = RunManifest {
            schema_version: crate::config::SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.clone(),
            config_hash: self.config_hash.clone(),
            timings: std::mem::take(&mut self.timings),
            artifacts: self.artifacts.clone(),
        };
        let text = to_json(&manifest)?;
        let path = self.dir.join(&name);
        std::fs::write(&path, text).map_err(|e| CliError::domain(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(Sci(0.1).text(), "1.0000000000000001e-1");
        assert_eq!(to_json(&vec![Sci(2.0), Sci(f64::NEG_INFINITY)]).unwrap(), "[\n  2.0000000000000000e0,\n  \"-inf\"\n]\n");
        let back: Vec<serde_json::Value> = serde_json::from_str(&to_json(&vec![Sci(0.1)]).unwrap()).unwrap();
        assert_eq!(back[0].as_f64(), Some(0.1));
    }
}
