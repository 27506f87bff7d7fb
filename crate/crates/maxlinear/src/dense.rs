//! Minimal dense row-major matrix used for observation samples and
//! semiring arithmetic. Deliberately small: no BLAS, no views, just
//! what the estimators need.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(n * m);
        for r in &rows {
            if r.len() != m {
                return Err(Error::DimensionMismatch(
                    "ragged rows in matrix literal".into(),
                ));
            }
            values.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: n,
            cols: m,
            values,
        })
    }

    pub fn identity_pattern(d: usize) -> Self {
        let mut m = DenseMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.values[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.values[i * self.cols + j]
    }
}

/// Max-times matrix product: `(A xmax B)_ij = max_k a_ik * b_kj`.
pub fn max_times_multiply(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut out = DenseMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        let ra = a.row(i);
        for j in 0..b.ncols() {
            let mut best = 0.0f64;
            for (k, &aik) in ra.iter().enumerate() {
                let v = aik * b[(k, j)];
                if v > best {
                    best = v;
                }
            }
            out[(i, j)] = best;
        }
    }
    Ok(out)
}

/// Max-times matrix-vector product: `(A xmax z)_i = max_k a_ik * z_k`.
pub fn max_times_apply(a: &DenseMatrix, z: &[f64]) -> Result<Vec<f64>> {
    if a.ncols() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "cannot apply {}x{} to vector of length {}",
            a.nrows(),
            a.ncols(),
            z.len()
        )));
    }
    Ok((0..a.nrows())
        .map(|i| {
            a.row(i)
                .iter()
                .zip(z)
                .map(|(&aik, &zk)| aik * zk)
                .fold(0.0f64, f64::max)
        })
        .collect())
}
