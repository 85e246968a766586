//! Experiment configs, runners and output files.

pub mod config;
pub mod experiments;

use std::path::{Path, PathBuf};

pub use config::{output_paths, read_config_file, read_json_arg, ConfigSource, ExperimentConfig, ExperimentKind};
pub use experiments::*;

use crate::error::Result;

/// Writes `<stem>.csv` and a `<stem>.json` manifest into `dir`. Contents
/// depend only on the inputs, so re-running a config reproduces the files
/// byte for byte.
pub fn write_outputs(dir: &Path, stem: &str, csv: &str, manifest: &serde_json::Value) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let (csv_path, json_path) = output_paths(dir, stem);
    std::fs::write(&csv_path, csv)?;
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(&json_path, text)?;
    Ok((csv_path, json_path))
}
