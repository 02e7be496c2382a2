//! Compressed sparse row storage and the handful of kernels the graph code needs.
//!
//! Matrices are immutable once built. Column indices within a row are sorted
//! and unique, so two matrices built from the same triplets compare equal.

use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::Shape(format!(
                    "entry ({r}, {c}) outside {rows}x{cols} matrix"
                )));
            }
        }
        entries.sort_by_key(|a| (a.0, a.1));

        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indptr[r + 1] += 1;
                indices.push(c);
                values.push(v);
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
        .pruned())
    }

    pub fn from_dense(dense: ArrayView2<f64>) -> Self {
        let (rows, cols) = dense.dim();
        let triplets = dense
            .indexed_iter()
            .filter(|(_, v)| **v != 0.0)
            .map(|((r, c), v)| (r, c, *v));
        Self::from_triplets(rows, cols, triplets).expect("indices come from the array itself")
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|v| *v != 0.0) {
            return self;
        }
        let rows = self.rows;
        let cols = self.cols;
        let triplets: Vec<_> = self.iter().filter(|t| t.2 != 0.0).collect();
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_indices(&self, row: usize) -> &[usize] {
        &self.indices[self.indptr[row]..self.indptr[row + 1]]
    }

    pub fn row_values(&self, row: usize) -> &[f64] {
        &self.values[self.indptr[row]..self.indptr[row + 1]]
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row_indices(row)
            .iter()
            .copied()
            .zip(self.row_values(row).iter().copied())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let idx = self.row_indices(row);
        match idx.binary_search(&col) {
            Ok(p) => self.row_values(row)[p],
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row_values(r).iter().sum())
            .collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn transpose(&self) -> CsrMatrix {
        Self::from_triplets(self.cols, self.rows, self.iter().map(|(r, c, v)| (c, r, v)))
            .expect("transpose keeps indices in range")
    }

    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> CsrMatrix {
        Self::from_triplets(
            self.rows,
            self.cols,
            self.iter().map(|(r, c, v)| (r, c, f(r, c, v))),
        )
        .expect("same pattern")
    }

    pub fn add(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Self::from_triplets(self.rows, self.cols, self.iter().chain(other.iter()))
    }

    pub fn scale(&self, alpha: f64) -> CsrMatrix {
        self.map_values(|_, _, v| alpha * v)
    }

    /// Sparse-sparse product `self * other` (Gustavson's row-by-row scheme).
    pub fn matmul(&self, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut acc = vec![0.0f64; other.cols];
        let mut touched = vec![false; other.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &pattern {
                triplets.push((r, c, acc[c]));
                acc[c] = 0.0;
                touched[c] = false;
            }
            pattern.clear();
        }
        Self::from_triplets(self.rows, other.cols, triplets)
    }

    /// Sparse-dense product `self * dense`.
    pub fn mul_dense(&self, dense: ArrayView2<f64>) -> Result<Array2<f64>> {
        if dense.nrows() != self.cols {
            return Err(Error::Shape(format!(
                "operator has {} columns but input has {} rows",
                self.cols,
                dense.nrows()
            )));
        }
        let mut out = Array2::<f64>::zeros((self.rows, dense.ncols()));
        for (r, mut out_row) in out.outer_iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                out_row.scaled_add(v, &dense.row(c));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, self.cols));
        for (r, c, v) in self.iter() {
            out[[r, c]] = v;
        }
        out
    }

    /// Largest absolute difference between `self` and its transpose.
    pub fn asymmetry(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// Writes the coordinate-list text form: `rows cols nnz` then one
    /// `row col weight` line per entry, weights with 17 significant digits.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_coo<R: BufRead>(reader: R, context: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((_, Ok(l))) if l.trim().is_empty() => continue,
                Some((_, Ok(l))) => break l,
                Some((_, Err(e))) => return Err(Error::parse(context, e.to_string())),
                None => return Err(Error::parse(context, "missing header")),
            }
        };
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(context, format!("bad header {header:?}: {e}")))?;
        let [rows, cols, nnz] = dims[..] else {
            return Err(Error::parse(context, format!("bad header {header:?}")));
        };
        let mut triplets = Vec::with_capacity(nnz);
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::parse(context, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || Error::parse(context, format!("line {}: {line:?}", lineno + 1));
            let mut parts = line.split_whitespace();
            let r: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let c: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let v: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if parts.next().is_some() {
                return Err(bad());
            }
            triplets.push((r, c, v));
        }
        if triplets.len() != nnz {
            return Err(Error::parse(
                context,
                format!("header promises {nnz} entries, found {}", triplets.len()),
            ));
        }
        Self::from_triplets(rows, cols, triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (0, 1, 2.0), (1, 0, 4.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn matmul_matches_dense() {
        let a = array![[1.0, 0.0, 2.0], [0.0, 3.0, 0.0]];
        let b = array![[0.0, 1.0], [4.0, 0.0], [5.0, 6.0]];
        let sa = CsrMatrix::from_dense(a.view());
        let sb = CsrMatrix::from_dense(b.view());
        assert_eq!(sa.matmul(&sb).unwrap().to_dense(), a.dot(&b));
        assert_eq!(sa.mul_dense(b.view()).unwrap(), a.dot(&b));
    }

    #[test]
    fn mul_dense_rejects_bad_shape() {
        let a = CsrMatrix::zeros(2, 3);
        let h = Array2::<f64>::zeros((2, 1));
        assert!(matches!(a.mul_dense(h.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn coo_round_trip_is_exact() {
        let m = CsrMatrix::from_triplets(3, 2, vec![(0, 0, 1.0 / 3.0), (2, 1, 1e-300), (1, 1, 7.0)])
            .unwrap();
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let back = CsrMatrix::read_coo(&buf[..], "test").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn coo_nnz_mismatch_is_an_error() {
        let text = "2 2 2\n0 0 1.0\n";
        assert!(CsrMatrix::read_coo(text.as_bytes(), "t").is_err());
    }
}
