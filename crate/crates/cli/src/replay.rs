use std::fs;
use std::path::Path;

use crate::error::{CliError, EXIT_OK, EXIT_VIOLATION};
use crate::runner::{run_into, RunManifest, ARTIFACT_VERSION};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayOutcome {
    /// Output files whose bytes differ from the recorded run, or are missing.
    pub mismatched: Vec<String>,
    pub exit_code: i32,
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Manifest(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Manifest(format!("cannot parse {}: {e}", path.display())))
}

/// Re-runs the manifest's config in a scratch directory and compares outputs byte for byte.
pub fn replay(manifest_path: &Path) -> Result<ReplayOutcome, CliError> {
    let manifest = read_manifest(manifest_path)?;
    if manifest.artifact_version != ARTIFACT_VERSION {
        return Err(CliError::Manifest(format!(
            "manifest written by version {}, this is {ARTIFACT_VERSION}",
            manifest.artifact_version
        )));
    }
    let recorded_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let scratch = tempfile::tempdir()?;
    let rerun = run_into(&manifest.config, scratch.path())?;
    let mut mismatched = Vec::new();
    for name in &manifest.outputs {
        let old = fs::read(recorded_dir.join(name)).ok();
        let new = fs::read(scratch.path().join(name)).ok();
        if old.is_none() || old != new {
            mismatched.push(name.clone());
        }
    }
    for name in &rerun.manifest.outputs {
        if !manifest.outputs.contains(name) {
            mismatched.push(name.clone());
        }
    }
    let exit_code = if mismatched.is_empty() { EXIT_OK } else { EXIT_VIOLATION };
    Ok(ReplayOutcome {
        mismatched,
        exit_code,
    })
}
