use std::fs;
use std::path::Path;

use anyhow::Context as _;

use crate::{CmdResult, Failure};

pub(crate) fn create_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(Failure::Internal)
}

pub(crate) fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Input)
}

pub(crate) fn read_bytes(path: &Path) -> CmdResult<Vec<u8>> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::Input)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CmdResult<()> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Internal)
}

/// Sorted stems of the files in `dir` with extension `ext`.
pub(crate) fn list_stems(dir: &Path, ext: &str) -> CmdResult<Vec<String>> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))
        .map_err(Failure::Input)?;
    let mut stems = Vec::new();
    for entry in entries {
        let path = entry.map_err(Failure::input)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Fails with the list of stems that could not be processed.
pub(crate) fn check_failures(failures: Vec<(String, String)>) -> CmdResult<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let detail: Vec<String> = failures.iter().map(|(s, e)| format!("{s}: {e}")).collect();
    Err(Failure::Input(anyhow::anyhow!(
        "{} stem(s) failed: {}",
        failures.len(),
        detail.join("; ")
    )))
}
