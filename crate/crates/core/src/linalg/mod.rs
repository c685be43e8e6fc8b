//! Linear algebra kernels: instance-major sparse storage, a pivoted
//! symmetric indefinite solver for small matrices, and dense vector helpers.
//!
//! Every reduction sums in ascending index order so results are
//! reproducible bit for bit.

mod dense;
mod sparse;

pub use dense::{solve_small_symmetric, SmallDenseMatrix, SymmetricFactor};
pub use sparse::SparseColumns;

/// Inner product, accumulated in ascending index order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
