use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const TOOL_VERSION: &str = concat!("lapformer ", env!("CARGO_PKG_VERSION"));

/// What a driver ran and what it wrote. Output paths are file names
/// relative to the output directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_digest: String,
    pub tool_version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// `config` is a canonical description of every input that affects the
    /// outputs; its SHA-256 becomes the digest.
    pub fn new(seed: u64, config: &str) -> Self {
        Self {
            seed,
            config_digest: config_digest(config),
            tool_version: TOOL_VERSION.to_string(),
            outputs: Vec::new(),
        }
    }

    /// Writes `# manifest: <digest>` followed by `body` and records the file.
    pub fn write_csv(&mut self, out_dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(name);
        fs::write(&path, self.csv(body))?;
        self.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn csv(&self, body: &str) -> String {
        format!("# manifest: {}\n{body}", self.config_digest)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write_json(&self, out_dir: &Path, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join(name);
        fs::write(&path, self.to_json())?;
        Ok(path)
    }
}

/// Lower-case hex SHA-256 of `config`.
pub fn config_digest(config: &str) -> String {
    Sha256::digest(config.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Comma-joined `Display` of a list, for canonical config strings.
pub(crate) fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_empty_string() {
        assert_eq!(
            config_digest(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn csv_prefix_and_json() {
        let m = RunManifest::new(7, "x=1");
        assert!(m.csv("a,b\n").starts_with("# manifest: "));
        assert!(m.csv("a,b\n").ends_with("\na,b\n"));
        assert!(m.to_json().contains("\"seed\": 7"));
    }
}
