use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::Pmf;

/// On-disk distortion description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionFile {
    pub matrix: Vec<Vec<f64>>,
}

/// Single-letter distortion measure `d(s, z)`, rows indexed by source symbols
/// of the original alphabet and columns by reproduction symbols. Block
/// distortion is the per-letter average.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionSpec {
    matrix: Vec<Vec<f64>>,
}

impl DistortionSpec {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        if matrix.is_empty() {
            return Err(Error::InvalidDistortion("matrix has no rows".into()));
        }
        let cols = matrix[0].len();
        if cols == 0 {
            return Err(Error::InvalidDistortion("matrix[0] has no entries".into()));
        }
        for (s, row) in matrix.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidDistortion(format!(
                    "matrix[{s}] has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (z, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidDistortion(format!(
                        "matrix[{s}][{z}] = {v} is not a finite nonnegative number"
                    )));
                }
            }
        }
        Ok(Self { matrix })
    }

    /// Hamming distortion on `n` symbols.
    pub fn hamming(n: usize) -> Self {
        Self {
            matrix: crate::blahut::hamming_matrix(n),
        }
    }

    pub fn from_file(file: DistortionFile) -> Result<Self> {
        Self::new(file.matrix)
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let file: DistortionFile = serde_json::from_str(json)
            .map_err(|e| Error::InvalidDistortion(format!("cannot parse distortion JSON: {e}")))?;
        Self::from_file(file)
    }

    pub fn from_json_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidDistortion(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    /// Number of source symbols (rows).
    pub fn sources(&self) -> usize {
        self.matrix.len()
    }

    /// Number of reproduction symbols (columns).
    pub fn reproductions(&self) -> usize {
        self.matrix[0].len()
    }

    pub fn get(&self, s: usize, z: usize) -> f64 {
        self.matrix[s][z]
    }

    /// True for a square 0/1 matrix with a single zero in every row and
    /// column, i.e. Hamming distortion up to relabeling.
    pub fn is_permutation_hamming(&self) -> bool {
        let n = self.sources();
        if self.reproductions() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for row in &self.matrix {
            let zeros: Vec<usize> = (0..n).filter(|&z| row[z] == 0.0).collect();
            if zeros.len() != 1 || seen[zeros[0]] || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return false;
            }
            seen[zeros[0]] = true;
        }
        true
    }

    /// Rows for the support symbols of `p`, in support order.
    pub fn rows_for(&self, p: &Pmf) -> Result<Vec<Vec<f64>>> {
        p.original_indices()
            .iter()
            .map(|&o| {
                self.matrix.get(o).cloned().ok_or_else(|| {
                    Error::InvalidDistortion(format!(
                        "matrix has {} rows but the source uses symbol {o}",
                        self.sources()
                    ))
                })
            })
            .collect()
    }

    /// `E[min_z d(S, z)]`.
    pub fn d_min(&self, p: &Pmf) -> Result<f64> {
        let rows = self.rows_for(p)?;
        Ok(crate::blahut::RdProblem {
            p: p.probs(),
            dist: &rows,
        }
        .d_min())
    }

    /// `min_z E[d(S, z)]`.
    pub fn d_max(&self, p: &Pmf) -> Result<f64> {
        let rows = self.rows_for(p)?;
        Ok(crate::blahut::RdProblem {
            p: p.probs(),
            dist: &rows,
        }
        .d_max())
    }
}

/// `1{d(s, z) > d}` for each row.
pub(crate) fn excess_indicator(rows: &[Vec<f64>], d: f64) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|row| {
            row.iter()
                .map(|&v| f64::from(u8::from(v > d + 1e-12)))
                .collect()
        })
        .collect()
}
