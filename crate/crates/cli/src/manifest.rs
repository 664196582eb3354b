//! Run manifests: every subcommand records what was run and with which
//! configuration, so an output directory is self-describing and a run can be
//! reproduced exactly.
//!
//! The manifest deliberately excludes the output directory itself — moving
//! or renaming a run's directory must not change its bytes — and includes
//! the library version so results can be traced to the code that produced
//! them.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::commands::Failure;

/// Contents of `manifest.json`.
#[derive(Serialize)]
struct Manifest<'a> {
    /// Version of the estimation library the binary was built against.
    library_version: &'a str,
    /// Subcommand that produced the directory.
    command: &'a str,
    /// Full effective configuration: every input path and hyperparameter,
    /// including defaulted values.
    config: Value,
}

/// Writes `manifest.json` into `out`.
pub fn write_manifest(out: &Path, command: &str, config: Value) -> Result<(), Failure> {
    let manifest = Manifest {
        library_version: sliceweight::VERSION,
        command,
        config,
    };
    sliceweight::io::write_json(&out.join("manifest.json"), &manifest)
        .map_err(Failure::from_core)
}
