// SPDX-License-Identifier: Apache-2.0

//! Columnar binary export of a feature matrix.
//!
//! Layout: the magic `RGFM`, a little-endian `u32` format version, a
//! little-endian `u64` header length, the JSON header, then one column after
//! another as little-endian `f64` values (`rows` values per column).

use std::io::{Read, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};
use crate::netlist::RegisterClass;

const MAGIC: &[u8; 4] = b"RGFM";
pub const FEATURE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    feature_names: Vec<String>,
    k: usize,
    library_fingerprint: String,
    rows: usize,
    cols: usize,
    standardized: bool,
    register_rows: Vec<usize>,
    /// Aligned with `register_rows`.
    labels: Vec<Option<RegisterClass>>,
}

fn io(e: std::io::Error) -> FeatureError {
    FeatureError::Io(e.to_string())
}

pub fn write_feature_matrix(
    w: &mut impl Write,
    x: &FeatureMatrix,
    feature_names: &[String],
) -> Result<(), FeatureError> {
    let cols = x.values.ncols();
    if feature_names.len() != cols {
        return Err(FeatureError::Width { expected: cols, found: feature_names.len() });
    }
    let register_rows = x.register_rows();
    let header = Header {
        feature_names: feature_names.to_vec(),
        k: (cols - 4) / 2,
        library_fingerprint: x.library_fingerprint.clone(),
        rows: x.rows(),
        cols,
        standardized: x.standardized,
        labels: register_rows.iter().map(|&r| x.labels[r]).collect(),
        register_rows,
    };
    let json = serde_json::to_vec(&header).map_err(|e| FeatureError::Format(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + json.len() + 8 * x.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FEATURE_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for col in x.values.columns() {
        for v in col {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io)
}

/// Returns the matrix and the stored feature names.
pub fn read_feature_matrix(r: &mut impl Read) -> Result<(FeatureMatrix, Vec<String>), FeatureError> {
    let bad = |m: &str| FeatureError::Format(m.to_string());
    let mut fixed = [0u8; 16];
    r.read_exact(&mut fixed).map_err(io)?;
    if &fixed[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(fixed[4..8].try_into().unwrap());
    if version != FEATURE_FORMAT_VERSION {
        return Err(FeatureError::Format(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(fixed[8..16].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let h: Header = serde_json::from_slice(&json).map_err(|e| FeatureError::Format(e.to_string()))?;
    if h.feature_names.len() != h.cols || h.labels.len() != h.register_rows.len() {
        return Err(bad("inconsistent header"));
    }
    let mut raw = vec![0u8; 8 * h.rows * h.cols];
    r.read_exact(&mut raw).map_err(io)?;
    let col_major: Vec<f64> =
        raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let values = Array2::from_shape_vec((h.cols, h.rows), col_major)
        .map_err(|e| FeatureError::Format(e.to_string()))?
        .reversed_axes()
        .as_standard_layout()
        .into_owned();
    let mut register_mask = vec![false; h.rows];
    let mut labels = vec![None; h.rows];
    for (&row, &label) in h.register_rows.iter().zip(&h.labels) {
        if row >= h.rows {
            return Err(bad("register row out of range"));
        }
        register_mask[row] = true;
        labels[row] = label;
    }
    let x = FeatureMatrix {
        values,
        register_mask,
        labels,
        library_fingerprint: h.library_fingerprint,
        standardized: h.standardized,
    };
    Ok((x, h.feature_names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn round_trip() {
        let x = FeatureMatrix {
            values: array![[1.0, 0.0, 2.5, -1.0, 0.0, 3.0], [0.0, 1.0, 0.0, 7.0, 1e-300, 0.5]],
            register_mask: vec![false, true],
            labels: vec![None, Some(RegisterClass::State)],
            library_fingerprint: "abc".into(),
            standardized: true,
        };
        let names: Vec<String> = (0..6).map(|i| format!("f{i}")).collect();
        let mut buf = Vec::new();
        write_feature_matrix(&mut buf, &x, &names).unwrap();
        let (y, back) = read_feature_matrix(&mut buf.as_slice()).unwrap();
        assert_eq!(y, x);
        assert_eq!(back, names);
        // first column is stored contiguously right after the header
        let tail = &buf[buf.len() - 96..buf.len() - 80];
        assert_eq!(tail, [1.0f64.to_le_bytes(), 0.0f64.to_le_bytes()].concat());
    }

    #[test]
    fn rejects_bad_magic() {
        let err = read_feature_matrix(&mut &b"XXXX\x01\0\0\0\0\0\0\0\0\0\0\0"[..]).unwrap_err();
        assert_eq!(err, FeatureError::Format("bad magic".into()));
    }
}
