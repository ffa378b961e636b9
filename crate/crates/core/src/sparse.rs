//! Compressed sparse row matrices for adjacency operators and bag-of-words features.

use crate::error::{DgiError, Result};
use crate::tensor::{axpy, DenseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from raw CSR arrays; column indices must be strictly increasing per row.
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 || indptr[rows] != indices.len() {
            return Err(DgiError::dims("CsrMatrix::new", "malformed row pointer"));
        }
        if indices.len() != values.len() {
            return Err(DgiError::dims("CsrMatrix::new", "indices and values differ in length"));
        }
        for r in 0..rows {
            if indptr[r] > indptr[r + 1] {
                return Err(DgiError::dims("CsrMatrix::new", "row pointer decreases"));
            }
            let row = &indices[indptr[r]..indptr[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DgiError::invalid(format!("row {r} columns not strictly increasing")));
            }
            if let Some(&c) = row.last() {
                if c >= cols {
                    return Err(DgiError::IndexOutOfRange { index: c, len: cols });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in m.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                indices[next[j]] = i;
                values[next[j]] = v;
                next[j] += 1;
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// `self · dense`.
    pub fn spmm(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != dense.rows() {
            return Err(DgiError::dims(
                "spmm",
                format!("{:?} x {:?}", self.shape(), dense.shape()),
            ));
        }
        let k = dense.cols();
        let mut out = DenseMatrix::zeros(self.rows, k);
        let data = out.as_mut_slice();
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let out_row = &mut data[i * k..(i + 1) * k];
            for (&j, &v) in cols.iter().zip(vals) {
                axpy(v, dense.row(j), out_row);
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense`, scattering row by row without materializing the transpose.
    pub fn spmm_tn(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != dense.rows() {
            return Err(DgiError::dims(
                "spmm_tn",
                format!("{:?}ᵀ x {:?}", self.shape(), dense.shape()),
            ));
        }
        let k = dense.cols();
        let mut out = DenseMatrix::zeros(self.cols, k);
        let data = out.as_mut_slice();
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let src = dense.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                axpy(v, src, &mut data[j * k..(j + 1) * k]);
            }
        }
        Ok(out)
    }

    /// Output row `i` is input row `perm[i]`.
    pub fn select_rows(&self, perm: &[usize]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(perm.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &p in perm {
            if p >= self.rows {
                return Err(DgiError::IndexOutOfRange {
                    index: p,
                    len: self.rows,
                });
            }
            let (c, v) = self.row(p);
            indices.extend_from_slice(c);
            values.extend_from_slice(v);
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: perm.len(),
            cols: self.cols,
            indptr,
            indices,
            values,
        })
    }
}
