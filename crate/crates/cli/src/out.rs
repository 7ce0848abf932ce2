use std::fs;
use std::path::{Path, PathBuf};

use omission_core::ExecutionTrace;
use serde_json::Value;

use crate::exit::Failure;

/// Trace and report files of one command, named `<command>.trace.jsonl` and
/// `<command>.report.jsonl` inside the output directory.
pub struct Outputs {
    dir: PathBuf,
    command: &'static str,
    report: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            command,
            report: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}.{suffix}", self.command))
    }

    pub fn write_trace(&self, suffix: &str, trace: &ExecutionTrace) -> Result<PathBuf, Failure> {
        let path = self.path(suffix);
        fs::write(&path, trace.to_jsonl()).map_err(|e| Failure::io(&path, e))?;
        Ok(path)
    }

    pub fn line(&mut self, v: Value) {
        self.report.push(v.to_string());
    }

    /// Writes the report file. Call once, after the last `line`.
    pub fn finish(&self) -> Result<(), Failure> {
        let path = self.path("report.jsonl");
        let mut text = self.report.join("\n");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }
}
