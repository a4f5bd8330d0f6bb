//! Staged output: everything is written into a hidden temp directory inside
//! the output directory and moved into place only once the command succeeds.
//! A failed run leaves previous outputs untouched.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::TempDir;

use crate::error::CliError;

pub struct Staging {
    out_dir: PathBuf,
    tmp: TempDir,
    entries: Vec<String>,
}

impl Staging {
    pub fn new(out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
        let tmp = tempfile::Builder::new()
            .prefix(".muxrisk-staging-")
            .tempdir_in(out_dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            tmp,
            entries: Vec::new(),
        })
    }

    /// Opens `name` (relative, may contain one directory level) for writing.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.tmp.path().join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let top = name.split('/').next().unwrap_or(name).to_string();
        if !self.entries.contains(&top) {
            self.entries.push(top);
        }
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        Ok(BufWriter::new(file))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Moves every staged top-level entry into the output directory,
    /// replacing what was there.
    pub fn promote(self) -> Result<(), CliError> {
        for name in &self.entries {
            let from = self.tmp.path().join(name);
            let to = self.out_dir.join(name);
            if to.is_dir() {
                fs::remove_dir_all(&to)
                    .map_err(|e| CliError::Io(format!("{}: {e}", to.display())))?;
            }
            fs::rename(&from, &to).map_err(|e| CliError::Io(format!("{}: {e}", to.display())))?;
        }
        Ok(())
    }
}

/// File-name-safe form of a label.
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
