//! Base64 embedding of dense matrices: little-endian IEEE-754 doubles in
//! column-major order.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const LAYOUT: &str = "f64le-colmajor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub rows: usize,
    pub cols: usize,
    pub layout: String,
    pub data: String,
}

impl EncodedMatrix {
    pub fn encode(m: &Matrix) -> Self {
        let bytes: Vec<u8> = m.col_major().iter().flat_map(|v| v.to_le_bytes()).collect();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            layout: LAYOUT.to_string(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Matrix> {
        if self.layout != LAYOUT {
            return Err(Error::Config(format!("unsupported matrix layout {}", self.layout)));
        }
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Config(format!("bad base64 matrix: {e}")))?;
        if bytes.len() != 8 * self.rows * self.cols {
            return Err(Error::Dimension(format!(
                "{} bytes for a {}x{} matrix",
                bytes.len(),
                self.rows,
                self.cols
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Matrix::from_col_major(self.rows, self.cols, data)
    }
}

/// Same encoding for a plain vector.
pub fn encode_vec(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_vec(s: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Config(format!("bad base64 vector: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Dimension("vector byte length not a multiple of 8".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
