//! Run manifests: a small JSON record written beside each command's
//! output, tying it to the seed, mode, and input files that produced it.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use mtforge::hashing::sha256_hex;
use serde::Serialize;

/// Everything needed to tell whether two runs should produce the same
/// output. Deliberately carries no timestamps: reruns of the same inputs
/// must serialize byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub seed: u64,
    pub offline: bool,
    /// Input label to sha256 of the file's bytes.
    pub inputs: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &'static str, seed: u64, offline: bool) -> Self {
        Self {
            command,
            seed,
            offline,
            inputs: BTreeMap::new(),
            summary: serde_json::Value::Null,
        }
    }

    /// Records an input file under a label, keyed by content digest.
    pub fn record_input(&mut self, label: &str, path: &Path) -> io::Result<()> {
        let bytes = std::fs::read(path)?;
        self.inputs.insert(label.to_owned(), sha256_hex(&bytes));
        Ok(())
    }

    /// Writes `<output>.manifest.json` next to the given output file and
    /// returns the path written.
    pub fn write_beside(&self, output: &Path) -> io::Result<PathBuf> {
        let mut name = output
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "output".to_owned());
        name.push_str(".manifest.json");
        let path = output.with_file_name(name);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
