//! Shared fixtures for the benchmarks.

use std::path::PathBuf;

use vpdiff_core::dsl::{load_model, SourceUnit, ValidatedModel};

/// Directory holding the bundled `.dm` files.
pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

/// Loads a bundled model by file stem, e.g. `"minidev_v1"`.
pub fn bundled(stem: &str, loop_bound: u32) -> ValidatedModel {
    let path = models_dir().join(format!("{stem}.dm"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    load_model(&SourceUnit::new(path.display().to_string(), text), loop_bound).unwrap_or_else(|e| panic!("{e}"))
}
