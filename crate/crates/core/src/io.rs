//! Readers and writers for the on-disk dataset formats.
//!
//! All tabular data is CSV with a header row:
//! * slice files use columns `slice_0..slice_{k-1}` with values in {-1,0,1},
//! * loss files use a single `loss` column,
//! * weight files use a single `weight` column,
//! * feature files are all-numeric with any header (written as `f_0..`).
//!
//! Dependency edges are a JSON list of `[i, j]` pairs and correction tables
//! a JSON object with `source` and `target` lists of per-slice tables.
//! [`write_bundle`] lays a generated [`SyntheticBundle`] out as one such
//! directory plus a `truth.json` recording the reference value and the full
//! generator configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::FeatureMatrix;
use crate::correction::CorrectionBundle;
use crate::error::{Error, Result};
use crate::slices::{LossVector, SliceMatrix};
use crate::synthetics::{GeneratorConfig, SyntheticBundle, TruthKind};
use crate::weights::WeightVector;

/// Contents of a bundle's `truth.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthFile {
    pub true_target_value: f64,
    pub truth_kind: TruthKind,
    pub seed: u64,
    pub generator_config: GeneratorConfig,
}

fn slice_header(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("slice_{i}")).collect()
}

/// Reads a slice matrix, requiring the exact header `slice_0..slice_{k-1}`.
pub fn read_slice_csv(path: &Path) -> Result<SliceMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let k = headers.len();
    let expected = slice_header(k);
    for (got, want) in headers.iter().zip(&expected) {
        if got != want {
            return Err(Error::InvalidInput(format!(
                "{}: expected slice column header {want:?}, found {got:?}",
                path.display()
            )));
        }
    }
    let mut values = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != k {
            return Err(Error::InvalidInput(format!(
                "{}: row {} has {} fields, expected {k}",
                path.display(),
                n + 1,
                record.len()
            )));
        }
        for field in record.iter() {
            let v: i8 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: slice value {field:?} is not one of -1, 0, 1",
                    path.display()
                ))
            })?;
            values.push(v);
        }
        n += 1;
    }
    SliceMatrix::new(values, n, k)
}

/// Writes a slice matrix with the canonical header.
pub fn write_slice_csv(path: &Path, slices: &SliceMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(slice_header(slices.k()))?;
    for row in slices.rows() {
        writer.write_record(row.iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

fn read_single_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?;
    if headers.len() != 1 || &headers[0] != column {
        return Err(Error::InvalidInput(format!(
            "{}: expected a single {column:?} column, found header {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record?;
        let field = &record[0];
        let v: f64 = field.trim().parse().map_err(|_| {
            Error::InvalidInput(format!(
                "{}: {column} value {field:?} is not a number",
                path.display()
            ))
        })?;
        values.push(v);
    }
    Ok(values)
}

fn write_single_column(path: &Path, column: &str, values: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([column])?;
    for v in values {
        writer.write_record([format_float(*v)])?;
    }
    writer.flush()?;
    Ok(())
}

/// Decimal representation that round-trips through f64 (the standard
/// `Display` for floats prints the shortest such string).
fn format_float(v: f64) -> String {
    v.to_string()
}

/// Reads a loss vector from a single-column `loss` CSV.
pub fn read_loss_csv(path: &Path) -> Result<LossVector> {
    LossVector::new(read_single_column(path, "loss")?)
}

/// Writes a loss vector as a single-column `loss` CSV.
pub fn write_loss_csv(path: &Path, loss: &LossVector) -> Result<()> {
    write_single_column(path, "loss", loss.values())
}

/// Reads importance weights from a single-column `weight` CSV. The result is
/// tagged as raw; callers that need normalized weights should renormalize.
pub fn read_weights_csv(path: &Path) -> Result<WeightVector> {
    WeightVector::from_raw(read_single_column(path, "weight")?, false)
}

/// Writes importance weights as a single-column `weight` CSV.
pub fn write_weights_csv(path: &Path, weights: &WeightVector) -> Result<()> {
    write_single_column(path, "weight", weights.weights())
}

/// Reads a feature matrix from an all-numeric CSV with any header.
pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::Reader::from_path(path)?;
    let p = reader.headers()?.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != p {
            return Err(Error::InvalidInput(format!(
                "{}: row {} has {} fields, expected {p}",
                path.display(),
                rows.len() + 1,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(p);
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::InvalidInput(format!(
                    "{}: feature value {field:?} is not a number",
                    path.display()
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    FeatureMatrix::from_rows(&rows)
}

/// Writes a feature matrix with header `f_0..f_{p-1}`.
pub fn write_features_csv(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record((0..features.p()).map(|j| format!("f_{j}")))?;
    let m = features.values();
    for r in 0..features.n() {
        writer.write_record((0..features.p()).map(|j| format_float(m[(r, j)])))?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads dependency edges from a JSON list of `[i, j]` pairs.
pub fn read_edges_json(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes dependency edges as a JSON list of `[i, j]` pairs.
pub fn write_edges_json(path: &Path, edges: &[(usize, usize)]) -> Result<()> {
    write_json(path, &edges)
}

/// Reads a correction-table bundle from JSON.
pub fn read_correction_json(path: &Path) -> Result<CorrectionBundle> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a correction-table bundle as JSON.
pub fn write_correction_json(path: &Path, bundle: &CorrectionBundle) -> Result<()> {
    write_json(path, bundle)
}

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Lays a synthetic bundle out as a dataset directory:
/// `source_features.csv`, `target_features.csv`, `source_slices.csv`,
/// `target_slices.csv`, `source_loss.csv`, `edges.json`, `correction.json`,
/// and `truth.json`.
pub fn write_bundle(dir: &Path, bundle: &SyntheticBundle) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_features_csv(&dir.join("source_features.csv"), &bundle.source_features)?;
    write_features_csv(&dir.join("target_features.csv"), &bundle.target_features)?;
    write_slice_csv(&dir.join("source_slices.csv"), &bundle.source_slices)?;
    write_slice_csv(&dir.join("target_slices.csv"), &bundle.target_slices)?;
    write_loss_csv(&dir.join("source_loss.csv"), &bundle.source_loss)?;
    write_edges_json(&dir.join("edges.json"), &bundle.edges)?;
    write_correction_json(&dir.join("correction.json"), &bundle.correction)?;
    write_json(
        &dir.join("truth.json"),
        &TruthFile {
            true_target_value: bundle.true_target_value,
            truth_kind: bundle.truth_kind,
            seed: bundle.seed,
            generator_config: bundle.generator_config.clone(),
        },
    )
}
