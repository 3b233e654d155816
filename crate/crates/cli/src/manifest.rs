use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

/// Record of one invocation, enough to run it again.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub subcommand: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub family_fingerprint: String,
    pub version: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Where outputs go: files next to `prefix` when one is given, standard
/// output otherwise.
pub struct Sink {
    prefix: Option<PathBuf>,
    outputs: Vec<String>,
}

impl Sink {
    pub fn new(prefix: Option<PathBuf>) -> Result<Self> {
        if let Some(parent) = prefix.as_deref().and_then(Path::parent) {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
        }
        Ok(Self { prefix, outputs: Vec::new() })
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.prefix.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".");
            s.push(name);
            PathBuf::from(s)
        })
    }

    /// Writes `<prefix>.<name>`; returns false when there is no prefix.
    pub fn file(&mut self, name: &str, contents: &str) -> Result<bool> {
        match self.path(name) {
            Some(path) => {
                fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
                self.outputs.push(path.display().to_string());
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Writes `<prefix>.<name>` or, without a prefix, prints to stdout.
    pub fn emit(&mut self, name: &str, contents: &str) -> Result<()> {
        if !self.file(name, contents)? {
            print!("{contents}");
            if !contents.ends_with('\n') {
                println!();
            }
        }
        Ok(())
    }

    /// Writes the manifest to `<prefix>.manifest.json`, or to stderr.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<()> {
        manifest.outputs = std::mem::take(&mut self.outputs);
        let text = serde_json::to_string_pretty(&manifest)?;
        if !self.file("manifest.json", &text)? {
            eprintln!("{}", serde_json::to_string(&manifest)?);
        }
        Ok(())
    }
}
