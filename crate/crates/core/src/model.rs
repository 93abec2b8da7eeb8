//! Tucker model types and their on-disk form.
//!
//! A model directory holds `factor_<n>.txt` (one row per line, one-based
//! `n`), `core.txt` (sparse-tensor text format, all entries) and
//! `manifest.json`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dense core, first index varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl CoreTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), values.len(), "core size mismatch");
        CoreTensor { dims, values }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }

    /// Position of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        let mut pos = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            pos += i * stride;
            stride *= d;
        }
        pos
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.offset(idx)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuckerModel {
    pub core: CoreTensor,
    pub factors: Vec<Matrix>,
}

impl TuckerModel {
    pub fn new(core: CoreTensor, factors: Vec<Matrix>) -> Self {
        TuckerModel { core, factors }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema: String,
    pub dims: Vec<usize>,
    pub core: Vec<usize>,
    pub scheme: String,
    pub ranks: usize,
    pub seed: u64,
    pub invocations: usize,
    pub fit_history: Vec<f64>,
}

pub const MANIFEST_SCHEMA: &str = "sptucker.model/1";

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn format_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Writes the model into `dir`, creating it if needed.
pub fn write_model(dir: &Path, model: &TuckerModel, manifest: &ModelManifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (n, f) in model.factors.iter().enumerate() {
        write_file(&dir.join(format!("factor_{}.txt", n + 1)), &format_matrix(f))?;
    }
    let core = &model.core;
    let mut body = format!(
        "# dims: {}\n",
        core.dims.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
    );
    let mut idx = vec![0usize; core.dims.len()];
    for v in &core.values {
        let line: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
        body.push_str(&format!("{} {v:e}\n", line.join(" ")));
        for (i, d) in idx.iter_mut().zip(&core.dims) {
            *i += 1;
            if *i < *d {
                break;
            }
            *i = 0;
        }
    }
    write_file(&dir.join("core.txt"), &body)?;
    let json = serde_json::to_string_pretty(manifest)?;
    let path = dir.join("manifest.json");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    writeln!(f, "{json}").map_err(|e| Error::io(&path, e))
}

fn parse_matrix(path: &Path, text: &str, cols: usize) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("{}: bad number {tok:?}", path.display()),
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("{}: expected {cols} values, found {}", path.display(), row.len()),
            });
        }
        data.extend(row);
        rows += 1;
    }
    Ok(Matrix::from_row_major(rows, cols, data))
}

/// Reads a model written by [`write_model`].
pub fn read_model(dir: &Path) -> Result<(TuckerModel, ModelManifest)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    let mut factors = Vec::new();
    for (n, &k) in manifest.core.iter().enumerate() {
        let path = dir.join(format!("factor_{}.txt", n + 1));
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        factors.push(parse_matrix(&path, &text, k)?);
    }
    let path = dir.join("core.txt");
    let core_t = crate::tns::read_tns_file(&path)?;
    let mut values = vec![0.0; manifest.core.iter().product()];
    let core = CoreTensor::new(manifest.core.clone(), vec![0.0; values.len()]);
    for e in core_t.elements() {
        values[core.offset(&e.coords)] += e.value;
    }
    Ok((TuckerModel::new(CoreTensor::new(manifest.core.clone(), values), factors), manifest))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_directory() {
        let dir = std::env::temp_dir().join(format!("sptucker-model-{}", std::process::id()));
        let factors = vec![
            Matrix::from_fn(3, 2, |i, j| i as f64 - 0.25 * j as f64),
            Matrix::from_fn(2, 1, |i, _| 1.5 + i as f64),
        ];
        let core = CoreTensor::new(vec![2, 1], vec![0.125, -7.0]);
        let model = TuckerModel::new(core, factors);
        let manifest = ModelManifest {
            schema: MANIFEST_SCHEMA.into(),
            dims: vec![3, 2],
            core: vec![2, 1],
            scheme: "lite".into(),
            ranks: 2,
            seed: 42,
            invocations: 1,
            fit_history: vec![0.5],
        };
        write_model(&dir, &model, &manifest).unwrap();
        let (back, m2) = read_model(&dir).unwrap();
        fs::remove_dir_all(&dir).unwrap();
        assert_eq!(back, model);
        assert_eq!(m2, manifest);
    }

    #[test]
    fn offsets_run_first_index_fastest() {
        let c = CoreTensor::new(vec![2, 3], (0..6).map(f64::from).collect());
        assert_eq!(c.get(&[1, 0]), 1.0);
        assert_eq!(c.get(&[0, 1]), 2.0);
    }
}
