//! On-disk JSON formats: measurement datasets, pre-computed likelihood
//! fixtures, prior weight files, and a small atomic-write helper for
//! reports and other artifacts.
//!
//! One dataset schema covers both data shapes: `kind: "povm"` carries
//! per-basis POVM elements and counts, `kind: "diagonal"` carries a
//! stochastic response matrix and one count vector.  Likelihood fixtures
//! bypass the solver entirely, feeding published per-dimension likelihoods
//! straight into certification.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::certify::{CertifyError, KappaKind, Prior};
use crate::quantum::{
    BasisCounts, CMat, Dataset, DiagonalDataset, MeasurementDataset, PovmBasis, QuantumError,
};
use crate::xprec::{dec, parse_decimal, BigLog, XprecError};

pub const DATASET_SCHEMA: &str = "rbcert-dataset-v1";
pub const LIKELIHOODS_SCHEMA: &str = "rbcert-likelihoods-v1";
pub const PRIOR_SCHEMA: &str = "rbcert-prior-v1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("failed to access {path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("expected schema {expected:?}, got {got:?}")]
    SchemaMismatch { expected: &'static str, got: String },
    #[error("unknown dataset kind {0:?} (expected \"povm\" or \"diagonal\")")]
    UnknownKind(String),
    #[error("dataset file is missing its {0} section")]
    MissingSection(&'static str),
    #[error("unknown kappa kind {0:?} (expected \"full_state\" or \"diagonal\")")]
    UnknownKappa(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Xprec(#[from] XprecError),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

fn file_error(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

/// Write `contents` to `path` atomically: a temp file in the same
/// directory is written first and then renamed over the target.
pub fn write_text_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let file_name = path
        .file_name()
        .map(|name| name.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let temp_path = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    fs::write(&temp_path, contents).map_err(|e| file_error(&temp_path, e))?;
    fs::rename(&temp_path, path).map_err(|e| file_error(path, e))
}

#[derive(Serialize, Deserialize)]
struct BasisDto {
    /// One matrix per POVM element, entries as [re, im] pairs.
    elements: Vec<Vec<Vec<[f64; 2]>>>,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct DatasetDto {
    schema: String,
    kind: String,
    dim_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bases: Option<Vec<BasisDto>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Value>,
}

fn matrix_to_rows(matrix: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..matrix.nrows())
        .map(|i| {
            (0..matrix.ncols())
                .map(|j| [matrix[(i, j)].re, matrix[(i, j)].im])
                .collect()
        })
        .collect()
}

fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> CMat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    CMat::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        Complex::new(re, im)
    })
}

/// Serialize a dataset (plus optional free-form provenance) to `path`.
pub fn write_dataset(
    path: &Path,
    dataset: &Dataset,
    provenance: Option<Value>,
) -> Result<(), IoError> {
    let dto = match dataset {
        Dataset::Povm(measured) => DatasetDto {
            schema: DATASET_SCHEMA.to_string(),
            kind: "povm".to_string(),
            dim_max: measured.dim_max(),
            bases: Some(
                measured
                    .bases()
                    .iter()
                    .map(|entry| BasisDto {
                        elements: entry.basis.elements().iter().map(matrix_to_rows).collect(),
                        counts: entry.counts.clone(),
                    })
                    .collect(),
            ),
            response: None,
            counts: None,
            provenance,
        },
        Dataset::Diagonal(diagonal) => {
            let response = diagonal.response();
            DatasetDto {
                schema: DATASET_SCHEMA.to_string(),
                kind: "diagonal".to_string(),
                dim_max: diagonal.dim_max(),
                bases: None,
                response: Some(
                    (0..response.nrows())
                        .map(|i| (0..response.ncols()).map(|j| response[(i, j)]).collect())
                        .collect(),
                ),
                counts: Some(diagonal.counts().to_vec()),
                provenance,
            }
        }
    };
    write_text_atomic(path, &serde_json::to_string_pretty(&dto)?)
}

/// Read a dataset file, re-validating it through the domain constructors.
/// Returns the dataset together with any provenance block it carried.
pub fn read_dataset(path: &Path) -> Result<(Dataset, Option<Value>), IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let dto: DatasetDto = serde_json::from_str(&text)?;
    if dto.schema != DATASET_SCHEMA {
        return Err(IoError::SchemaMismatch {
            expected: DATASET_SCHEMA,
            got: dto.schema,
        });
    }
    let dataset = match dto.kind.as_str() {
        "povm" => {
            let bases = dto.bases.ok_or(IoError::MissingSection("bases"))?;
            let mut entries = Vec::with_capacity(bases.len());
            for basis in &bases {
                let elements: Vec<CMat> = basis.elements.iter().map(|m| rows_to_matrix(m)).collect();
                entries.push(BasisCounts {
                    basis: PovmBasis::new(elements)?,
                    counts: basis.counts.clone(),
                });
            }
            Dataset::Povm(MeasurementDataset::new(dto.dim_max, entries)?)
        }
        "diagonal" => {
            let rows = dto.response.ok_or(IoError::MissingSection("response"))?;
            let counts = dto.counts.ok_or(IoError::MissingSection("counts"))?;
            let nrows = rows.len();
            let ncols = rows.first().map_or(0, Vec::len);
            let response = DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
            Dataset::Diagonal(DiagonalDataset::new(dto.dim_max, response, counts)?)
        }
        other => return Err(IoError::UnknownKind(other.to_string())),
    };
    Ok((dataset, dto.provenance))
}

#[derive(Serialize, Deserialize)]
struct LikelihoodsDto {
    schema: String,
    d_min: usize,
    /// Decimal scientific-notation strings, one per dimension from d_min up.
    likelihoods: Vec<String>,
    total_counts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<String>,
}

/// Pre-computed per-dimension likelihoods, parsed to extended precision.
pub struct LikelihoodFixture {
    pub d_min: usize,
    pub likelihoods: Vec<BigLog>,
    pub total_counts: u64,
    pub kappa: KappaKind,
}

/// Read a likelihood fixture file (certification without a solver run).
pub fn read_likelihoods(path: &Path) -> Result<LikelihoodFixture, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let dto: LikelihoodsDto = serde_json::from_str(&text)?;
    if dto.schema != LIKELIHOODS_SCHEMA {
        return Err(IoError::SchemaMismatch {
            expected: LIKELIHOODS_SCHEMA,
            got: dto.schema,
        });
    }
    let likelihoods = dto
        .likelihoods
        .iter()
        .map(|s| parse_decimal(s))
        .collect::<Result<Vec<BigLog>, XprecError>>()?;
    let kappa = match dto.kappa.as_deref() {
        None | Some("full_state") => KappaKind::FullState,
        Some("diagonal") => KappaKind::Diagonal,
        Some(other) => return Err(IoError::UnknownKappa(other.to_string())),
    };
    Ok(LikelihoodFixture {
        d_min: dto.d_min,
        likelihoods,
        total_counts: dto.total_counts,
        kappa,
    })
}

#[derive(Serialize, Deserialize)]
struct PriorDto {
    schema: String,
    d_min: usize,
    /// Positive decimal strings, one weight per dimension from d_min up.
    weights: Vec<String>,
}

/// Read a prior weight file; weights are normalized on construction.
pub fn read_prior(path: &Path) -> Result<Prior, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    let dto: PriorDto = serde_json::from_str(&text)?;
    if dto.schema != PRIOR_SCHEMA {
        return Err(IoError::SchemaMismatch {
            expected: PRIOR_SCHEMA,
            got: dto.schema,
        });
    }
    let weights = dto
        .weights
        .iter()
        .map(|s| dec(s))
        .collect::<Result<Vec<_>, XprecError>>()?;
    Ok(Prior::from_weights(dto.d_min, weights)?)
}
