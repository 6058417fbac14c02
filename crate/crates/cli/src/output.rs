//! Output files and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    /// Effective configuration; feeding this file back as `--config` repeats the run.
    pub config: &'a C,
    pub seeds: BTreeMap<&'static str, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_source: Option<&'static str>,
    pub status: &'static str,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<String>,
}

impl<'a, C: Serialize> Manifest<'a, C> {
    pub fn new(command: &'a str, config: &'a C) -> Self {
        Self {
            tool: "adis",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seeds: BTreeMap::new(),
            q_source: None,
            status: "ok",
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }
}

/// Output directory that records every file written through it.
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    /// Path of `name` inside the directory, recorded as an output.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let path = self.file(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }

    pub fn text(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.file(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
    }

    pub fn trace(&mut self, name: &str, trace: &adis_nlp::SolveTrace) -> anyhow::Result<()> {
        let path = self.file(name);
        let file =
            fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut out = std::io::BufWriter::new(file);
        trace.write_jsonl(&mut out)?;
        out.flush()
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn manifest<C: Serialize>(&mut self, mut manifest: Manifest<'_, C>) -> anyhow::Result<()> {
        manifest.outputs = self.written.clone();
        manifest.outputs.push("manifest.json".into());
        self.json("manifest.json", &manifest)
    }
}
