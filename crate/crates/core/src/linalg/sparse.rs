use std::ops::Range;

use crate::error::{check_len, Error, Result};

/// Sparse matrix stored column by column (compressed sparse column).
///
/// Each column is one data point, so splitting the instances across workers
/// is a split of the column range. Row indices within a column are strictly
/// increasing and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    n_rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseColumns {
    /// An `n_rows x 0` matrix.
    pub fn empty(n_rows: usize) -> Self {
        SparseColumns { n_rows, col_ptr: vec![0], row_idx: Vec::new(), values: Vec::new() }
    }

    /// Builds a matrix from per-column `(row, value)` lists.
    ///
    /// Zero values are dropped. Rows must be strictly increasing within a
    /// column and below `n_rows`.
    pub fn from_columns(n_rows: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut m = SparseColumns::empty(n_rows);
        for (j, col) in columns.into_iter().enumerate() {
            m.push_column(col).map_err(|e| match e {
                Error::Invariant(msg) => Error::Invariant(format!("column {j}: {msg}")),
                other => other,
            })?;
        }
        Ok(m)
    }

    /// Appends one column, validating ordering and bounds.
    pub fn push_column<I>(&mut self, entries: I) -> Result<()>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let start = self.row_idx.len();
        let mut last: Option<usize> = None;
        for (r, v) in entries {
            if r >= self.n_rows {
                self.truncate_to(start);
                return Err(Error::Invariant(format!("row index {r} out of bounds for {} rows", self.n_rows)));
            }
            if let Some(prev) = last {
                if r <= prev {
                    self.truncate_to(start);
                    return Err(Error::Invariant(format!("row indices not strictly increasing ({prev} then {r})")));
                }
            }
            last = Some(r);
            if v != 0.0 {
                self.row_idx.push(r);
                self.values.push(v);
            }
        }
        self.col_ptr.push(self.row_idx.len());
        Ok(())
    }

    fn truncate_to(&mut self, len: usize) {
        self.row_idx.truncate(len);
        self.values.truncate(len);
    }

    pub fn from_dense(n_rows: usize, n_cols: usize, row_major: &[f64]) -> Result<Self> {
        check_len(n_rows * n_cols, row_major.len())?;
        let columns = (0..n_cols).map(|c| (0..n_rows).map(|r| (r, row_major[r * n_cols + c])).collect()).collect();
        Self::from_columns(n_rows, columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Overrides the row dimension; fails if an existing entry would fall
    /// outside the new bound.
    pub fn with_n_rows(mut self, n_rows: usize) -> Result<Self> {
        if let Some(&max) = self.row_idx.iter().max() {
            if max >= n_rows {
                return Err(Error::Invariant(format!("row index {max} does not fit in {n_rows} rows")));
            }
        }
        self.n_rows = n_rows;
        Ok(self)
    }

    /// Row indices and values of column `j`.
    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn column_entries(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (rows, vals) = self.column(j);
        rows.iter().copied().zip(vals.iter().copied())
    }

    /// `x_jᵀ u` for column `j`.
    pub fn column_dot(&self, j: usize, u: &[f64]) -> f64 {
        let (rows, vals) = self.column(j);
        rows.iter().zip(vals).fold(0.0, |acc, (&r, &v)| acc + v * u[r])
    }

    /// `out += alpha * x_j`
    pub fn column_axpy(&self, j: usize, alpha: f64, out: &mut [f64]) {
        let (rows, vals) = self.column(j);
        for (&r, &v) in rows.iter().zip(vals) {
            out[r] += alpha * v;
        }
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        let (_, vals) = self.column(j);
        vals.iter().fold(0.0, |acc, v| acc + v * v)
    }

    /// `A v`, length `n_rows`.
    pub fn spmv(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_cols(), v.len())?;
        let mut out = vec![0.0; self.n_rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                self.column_axpy(j, vj, &mut out);
            }
        }
        Ok(out)
    }

    /// `A[:, cols] v` where `v` has one entry per column in `cols`.
    pub fn spmv_range(&self, cols: Range<usize>, v: &[f64]) -> Result<Vec<f64>> {
        check_len(cols.len(), v.len())?;
        let mut out = vec![0.0; self.n_rows];
        for (j, &vj) in cols.zip(v) {
            if vj != 0.0 {
                self.column_axpy(j, vj, &mut out);
            }
        }
        Ok(out)
    }

    /// `Aᵀ u`, length `n_cols`.
    pub fn spmv_transpose(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_rows, u.len())?;
        Ok((0..self.n_cols()).map(|j| self.column_dot(j, u)).collect())
    }

    /// Copies a contiguous range of columns into a new matrix.
    pub fn columns(&self, cols: Range<usize>) -> SparseColumns {
        let (a, b) = (self.col_ptr[cols.start], self.col_ptr[cols.end]);
        SparseColumns {
            n_rows: self.n_rows,
            col_ptr: self.col_ptr[cols.start..=cols.end].iter().map(|p| p - a).collect(),
            row_idx: self.row_idx[a..b].to_vec(),
            values: self.values[a..b].to_vec(),
        }
    }

    /// Concatenates column blocks left to right.
    pub fn hstack(blocks: &[SparseColumns]) -> Result<SparseColumns> {
        let n_rows = blocks.first().map_or(0, |b| b.n_rows);
        let mut out = SparseColumns::empty(n_rows);
        for b in blocks {
            check_len(n_rows, b.n_rows)?;
            let offset = out.row_idx.len();
            out.row_idx.extend_from_slice(&b.row_idx);
            out.values.extend_from_slice(&b.values);
            out.col_ptr.extend(b.col_ptr[1..].iter().map(|p| p + offset));
        }
        Ok(out)
    }

    /// Multiplies column `j` by `scale[j]`.
    pub fn scale_columns(&mut self, scale: &[f64]) -> Result<()> {
        check_len(self.n_cols(), scale.len())?;
        for (j, &s) in scale.iter().enumerate() {
            let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
            for v in &mut self.values[a..b] {
                *v *= s;
            }
        }
        Ok(())
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n_cols = self.n_cols();
        let mut out = vec![0.0; self.n_rows * n_cols];
        for j in 0..n_cols {
            for (r, v) in self.column_entries(j) {
                out[r * n_cols + j] = v;
            }
        }
        out
    }

    /// Largest eigenvalue of `AᵀA` (equivalently `‖A‖₂²`) by power
    /// iteration on `AAᵀ` from a fixed all-ones start.
    pub fn spectral_norm_sq(&self, iterations: usize) -> f64 {
        if self.nnz() == 0 {
            return 0.0;
        }
        let mut v = vec![1.0 / (self.n_rows as f64).sqrt(); self.n_rows];
        let mut estimate = 0.0;
        for _ in 0..iterations {
            let t = self.spmv_transpose(&v).expect("dimensions agree");
            let w = self.spmv(&t).expect("dimensions agree");
            let nrm = super::norm(&w);
            if nrm == 0.0 {
                return 0.0;
            }
            estimate = super::dot(&v, &w);
            v = w.into_iter().map(|x| x / nrm).collect();
        }
        // The Rayleigh quotient from power iteration approaches from below;
        // one more step with the final vector tightens the estimate.
        let t = self.spmv_transpose(&v).expect("dimensions agree");
        estimate.max(super::norm_sq(&t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (SparseColumns, Vec<f64>) {
        let dense: Vec<f64> =
            (0..rows * cols).map(|_| if rng.random_bool(0.4) { rng.random_range(-2.0..2.0) } else { 0.0 }).collect();
        (SparseColumns::from_dense(rows, cols, &dense).unwrap(), dense)
    }

    fn dense_matvec(dense: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
        (0..rows).map(|r| (0..cols).fold(0.0, |acc, c| acc + dense[r * cols + c] * v[c])).collect()
    }

    #[test]
    fn spmv_identity_and_single_column() {
        let id = SparseColumns::from_columns(2, vec![vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap();
        assert_eq!(id.spmv(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(id.spmv_transpose(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);

        let a = SparseColumns::from_columns(3, vec![vec![(0, 1.0), (2, 2.0)]]).unwrap();
        assert_eq!(a.spmv(&[5.0]).unwrap(), vec![5.0, 0.0, 10.0]);
        assert_eq!(a.spmv_transpose(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn spmv_basis_vectors_recover_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, dense) = random_sparse(&mut rng, 6, 4);
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let col: Vec<f64> = (0..6).map(|r| dense[r * 4 + j]).collect();
            assert_eq!(a.spmv(&e).unwrap(), col);
        }
    }

    #[test]
    fn transpose_of_column_is_gram_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (a, dense) = random_sparse(&mut rng, 5, 4);
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let got = a.spmv_transpose(&a.spmv(&e).unwrap()).unwrap();
            for (i, g) in got.iter().enumerate() {
                let gram: f64 = (0..5).map(|r| dense[r * 4 + i] * dense[r * 4 + j]).sum();
                assert!((g - gram).abs() <= 1e-12 * (1.0 + gram.abs()));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = SparseColumns::empty(3);
        assert!(matches!(a.spmv(&[1.0]), Err(Error::DimensionMismatch { expected: 0, got: 1 })));
        assert!(a.spmv_transpose(&[1.0]).is_err());
    }

    #[test]
    fn rejects_bad_columns() {
        assert!(SparseColumns::from_columns(2, vec![vec![(2, 1.0)]]).is_err());
        assert!(SparseColumns::from_columns(3, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
        assert!(SparseColumns::from_columns(3, vec![vec![(2, 1.0), (0, 2.0)]]).is_err());
        let z = SparseColumns::from_columns(3, vec![vec![(0, 0.0), (1, 2.0)]]).unwrap();
        assert_eq!(z.nnz(), 1);
    }

    #[test]
    fn split_and_hstack_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, _) = random_sparse(&mut rng, 7, 9);
        let blocks = vec![a.columns(0..4), a.columns(4..4), a.columns(4..9)];
        assert_eq!(SparseColumns::hstack(&blocks).unwrap(), a);
        let v: Vec<f64> = (0..5).map(|i| i as f64 - 1.0).collect();
        let direct = a.spmv_range(4..9, &v).unwrap();
        assert_eq!(direct, blocks[2].spmv(&v).unwrap());
    }

    #[test]
    fn power_iteration_matches_dense_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, dense) = random_sparse(&mut rng, 8, 5);
        let m = nalgebra::DMatrix::from_row_slice(8, 5, &dense);
        let top = (m.transpose() * &m).symmetric_eigen().eigenvalues.max();
        let est = a.spectral_norm_sq(200);
        assert!((est - top).abs() <= 1e-8 * top, "{est} vs {top}");
    }

    proptest::proptest! {
        #[test]
        fn adjoint_identity(seed in 0u64..500, rows in 1usize..12, cols in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (a, dense) = random_sparse(&mut rng, rows, cols);
            let u: Vec<f64> = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();
            let av = a.spmv(&v).unwrap();
            let lhs = crate::linalg::dot(&u, &av);
            let rhs = crate::linalg::dot(&a.spmv_transpose(&u).unwrap(), &v);
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);

            let reference = dense_matvec(&dense, rows, cols, &v);
            for (x, y) in av.iter().zip(&reference) {
                proptest::prop_assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
            }
        }
    }
}
