//! Minimal compressed-sparse-row storage used for the lattice operators,
//! the constraint matrix and the objective Hessian.
//!
//! Factorizations are delegated to `faer`; this type only covers assembly,
//! products and conversion.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

/// Row-compressed sparse matrix with sorted column indices and no duplicates.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicate entries are
    /// summed. Explicit zeros are kept so that the sparsity pattern only
    /// depends on the triplet positions.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for r in 0..nrows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for r in 0..nrows {
            row.clear();
            row.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in &row {
                match indices.last() {
                    Some(&last) if last == c && indices.len() > indptr[r] => {
                        *values.last_mut().unwrap() += v;
                    }
                    _ => {
                        indices.push(c);
                        values.push(v);
                    }
                }
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored entries (explicit zeros included).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over `(col, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// Iterates over all stored `(row, col, value)` entries in row order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Entry lookup; absent entries read as zero.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// Computes `selfᵀ x`.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "dimension mismatch in mul_vec_transposed");
        let mut out = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    out[c] += v * xr;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self.triplets().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &t)
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Copy of the matrix with row `r` removed.
    pub fn without_row(&self, removed: usize) -> Self {
        let t: Vec<_> = self
            .triplets()
            .filter(|&(r, _, _)| r != removed)
            .map(|(r, c, v)| (if r > removed { r - 1 } else { r }, c, v))
            .collect();
        Self::from_triplets(self.nrows - 1, self.ncols, &t)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t: Vec<_> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .expect("CSR entries are in bounds and deduplicated")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 2, 2.0), (1, 0, -1.0), (0, 0, 4.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(0, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![7.0, -1.0]);
        assert_eq!(m.mul_vec_transposed(&[1.0, 2.0]), vec![2.0, 0.0, 3.0]);
    }

    #[test]
    fn row_removal_shifts_later_rows() {
        let m = CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 2.0), (2, 0, 3.0)]);
        let r = m.without_row(1);
        assert_eq!(r.nrows(), 2);
        assert_eq!(r.get(1, 0), 3.0);
        assert_eq!(r.transpose().get(0, 1), 3.0);
    }
}
