//! Compressed sparse row matrix, just enough for assembling and applying
//! the complementarity matrix.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("entry ({row}, {col}) assembled more than once")]
pub struct DuplicateEntry {
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets. Explicit zeros are dropped;
    /// a position given twice is an error rather than summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, DuplicateEntry> {
        let mut entries: Vec<(usize, usize, f64)> =
            triplets.iter().copied().filter(|t| t.2 != 0.0).collect();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(DuplicateEntry { row: w[0].0, col: w[0].1 });
            }
        }
        let mut row_ptr = vec![0; nrows + 1];
        for &(r, c, _) in &entries {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            row_ptr[r + 1] += 1;
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.get(i, i)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// `self * x + b`
    pub fn affine(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = self.mul_vec(x);
        for (o, bi) in out.iter_mut().zip(b) {
            *o += bi;
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.ncols, self.nrows, &triplets)
            .expect("transpose of a valid matrix has no duplicates")
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            out[r][c] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_and_multiplies() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 3.0), (0, 0, 1.0), (1, 1, -2.0), (1, 0, 0.0)])
            .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![4.0, -2.0]);
        let t = m.transpose();
        assert_eq!(t.get(2, 0), 3.0);
        assert_eq!(t.nrows(), 3);
    }

    #[test]
    fn duplicate_positions_are_rejected() {
        let err = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).unwrap_err();
        assert_eq!(err, DuplicateEntry { row: 0, col: 1 });
    }
}
