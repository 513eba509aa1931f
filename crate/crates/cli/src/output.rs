//! Output directory handling: atomic writes and JSON sidecars.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::RunConfig;
use crate::failure::Failure;

pub struct OutputDir {
    root: PathBuf,
    command: &'static str,
}

impl OutputDir {
    pub fn create(root: &Path, command: &'static str) -> Result<Self, Failure> {
        fs::create_dir_all(root)
            .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), command })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes through a temporary file in the target directory and renames
    /// it into place, so readers never see a partial file.
    pub fn write_bytes(&self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let fail = |e: std::io::Error| Failure::usage(format!("cannot write {}: {e}", path.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
        tmp.write_all(bytes).map_err(fail)?;
        tmp.persist(path).map_err(|e| fail(e.error))?;
        Ok(())
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, Failure> {
        let path = self.path(name);
        self.write_bytes(&path, contents.as_bytes())?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn write_config(&self, config: &RunConfig) -> Result<PathBuf, Failure> {
        self.write("config.json", &config.to_pretty_json())
    }

    /// Writes `name` plus a `<stem>.json` sidecar carrying the resolved
    /// config and the seeds that produced it.
    pub fn write_table(&self, name: &str, csv: &str, config: &RunConfig, seeds: &[u64]) -> Result<PathBuf, Failure> {
        let path = self.write(name, csv)?;
        let stem = name.strip_suffix(".csv").unwrap_or(name);
        let sidecar = json!({
            "file": name,
            "command": self.command,
            "seeds": seeds,
            "config": config,
        });
        self.write_json(&format!("{stem}.json"), &sidecar)?;
        Ok(path)
    }
}
