//! File formats: 12-significant-digit numbers, matrix JSON and counts CSV.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qcore::{c64, ComplexMatrix};
use crate::tomography::{CountsRecord, MeasurementSetting, PauliBasis, TomographyError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {source}")]
    Counts { row: usize, source: TomographyError },
    #[error("matrix JSON: {0}")]
    Shape(String),
}

/// Rounds to 12 significant digits; `-0` becomes `0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Shortest form of [`round_sig`]; exponent notation outside `[1e-5, 1e15)`.
pub fn fmt_sig(x: f64) -> String {
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 || (1e-5..1e15).contains(&a) || !r.is_finite() {
        r.to_string()
    } else {
        format!("{r:e}")
    }
}

/// `{"dim": n, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    /// Entries rounded to 12 significant digits.
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let dim = m.rows();
        let grid = |f: fn(&crate::qcore::C64) -> f64| {
            (0..dim).map(|i| (0..m.cols()).map(|j| round_sig(f(&m[(i, j)]))).collect()).collect()
        };
        Self { dim, re: grid(|z| z.re), im: grid(|z| z.im) }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix, FormatError> {
        let n = self.dim;
        let ok = |g: &Vec<Vec<f64>>| g.len() == n && g.iter().all(|r| r.len() == n);
        if !ok(&self.re) || !ok(&self.im) {
            return Err(FormatError::Shape(format!("expected {n}x{n} re and im")));
        }
        let entries = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| c64(self.re[i][j], self.im[i][j]));
        ComplexMatrix::new(n, n, entries.collect()).map_err(|e| FormatError::Shape(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CountsRow {
    basis_a: PauliBasis,
    basis_b: PauliBasis,
    shots: u64,
    n00: u64,
    n01: u64,
    n10: u64,
    n11: u64,
}

/// Header `basis_a,basis_b,shots,n00,n01,n10,n11`, one row per setting.
pub fn write_counts_csv<W: Write>(records: &[CountsRecord], out: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let [n00, n01, n10, n11] = r.counts;
        w.serialize(CountsRow {
            basis_a: r.setting.basis_a,
            basis_b: r.setting.basis_b,
            shots: r.shots,
            n00,
            n01,
            n10,
            n11,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_counts_csv<R: Read>(input: R) -> Result<Vec<CountsRecord>, FormatError> {
    csv::Reader::from_reader(input)
        .deserialize::<CountsRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row?;
            let setting = MeasurementSetting::new(row.basis_a, row.basis_b);
            CountsRecord::with_shots(setting, row.shots, [row.n00, row.n01, row.n10, row.n11])
                .map_err(|source| FormatError::Counts { row: i + 1, source })
        })
        .collect()
}
