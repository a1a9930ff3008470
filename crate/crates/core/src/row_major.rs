//! Serde adapter writing a `DMatrix` as a list of rows.

use nalgebra::DMatrix;
use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let n_cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_cols) {
        return None;
    }
    Some(DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]))
}

pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    to_rows(m).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    from_rows(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
}

pub mod pair {
    use super::*;

    pub fn serialize<S: Serializer>(m: &[DMatrix<f64>; 2], s: S) -> Result<S::Ok, S::Error> {
        [to_rows(&m[0]), to_rows(&m[1])].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[DMatrix<f64>; 2], D::Error> {
        let [a, b] = <[Vec<Vec<f64>>; 2]>::deserialize(d)?;
        let conv = |r: &[Vec<f64>]| from_rows(r).ok_or_else(|| D::Error::custom("ragged matrix rows"));
        Ok([conv(&a)?, conv(&b)?])
    }
}
