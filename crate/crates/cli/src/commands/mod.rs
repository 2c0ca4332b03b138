pub mod analyze;
pub mod learn;
pub mod metrology;
pub mod reconstruct;
pub mod simulate;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use qdt::io::{write_json, write_table, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: qdt::Error },

    #[error(transparent)]
    Core(#[from] qdt::Error),

    #[error("{}: missing {}", dir.display(), files.join(", "))]
    MissingFiles {
        dir: PathBuf,
        files: Vec<&'static str>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

/// Tracks the files a command touches and records them in the manifest.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    /// Creates `dir` only after the caller has validated its inputs.
    pub fn start(command: &str, dir: &Path, config: impl Serialize, seed: u64) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let config = serde_json::to_value(config).map_err(qdt::Error::from)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest: RunManifest::new(command, config, seed),
            started: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.manifest.inputs.push(path.display().to_string());
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_owned());
        self.dir.join(name)
    }

    pub fn create(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.path(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|source| CliError::Io { path, source })
    }

    pub fn table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> CliResult<()> {
        let out = self.create(name)?;
        Ok(write_table(header, rows, out)?)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let path = self.path(name);
        Ok(write_json(value, &path)?)
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.manifest.duration_s = self.started.elapsed().as_secs_f64();
        Ok(self.manifest.append_to(&self.dir)?)
    }
}

/// Opens an input, tagging failures with its path.
pub fn read_input<T>(path: &Path, read: impl FnOnce(&Path) -> qdt::Result<T>) -> CliResult<T> {
    read(path).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

/// `all` or a comma-separated list of indices below `len`.
pub fn parse_indices(spec: &str, len: usize) -> CliResult<Vec<usize>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok((0..len).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let j: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad time index {part:?}")))?;
        if j >= len {
            return Err(CliError::Usage(format!(
                "time index {j} out of range (dataset has {len} times)"
            )));
        }
        out.push(j);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
