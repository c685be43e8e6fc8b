//! Seeded synthetic classification data for tests, benchmarks and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LabeledDataset;
use crate::linalg::SparseColumns;

fn label_of(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Random sparse features with labels from a noisy sparse linear model.
///
/// Each entry is nonzero with probability `density` and Gaussian with
/// variance `1 / (d·density)`, so `E‖x_i‖² = 1`.
#[allow(clippy::filter_map_bool_then)]
pub fn logistic(n: usize, d: usize, density: f64, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (d as f64 * density).sqrt();
    let w_true: Vec<f64> =
        (0..d).map(|_| if rng.random_bool(0.3) { rng.sample::<f64, _>(StandardNormal) * 3.0 } else { 0.0 }).collect();
    let mut x = SparseColumns::empty(d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let col: Vec<(usize, f64)> = (0..d)
            .filter_map(|r| rng.random_bool(density).then(|| (r, rng.sample::<f64, _>(StandardNormal) * scale)))
            .collect();
        let score =
            col.iter().fold(0.0, |acc, &(r, v)| acc + v * w_true[r]) + 0.5 * rng.sample::<f64, _>(StandardNormal);
        x.push_column(col).expect("rows generated in order");
        labels.push(label_of(score));
    }
    LabeledDataset::new(x, labels).expect("consistent sizes")
}

/// Dense features dominated by a few shared latent directions.
///
/// `x_i = strength · Σ_f a_if v_f + ε_i` with Gaussian loadings, so the
/// instance Gram matrix has large entries far from its block diagonal.
/// Labels come from a noisy linear model on the features.
pub fn correlated(n: usize, d: usize, factors: usize, strength: f64, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    let noise_scale = 1.0 / (d as f64).sqrt();
    let directions: Vec<Vec<f64>> =
        (0..factors).map(|_| (0..d).map(|_| gauss(&mut rng) * noise_scale).collect()).collect();
    let w_true: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
    let mut x = SparseColumns::empty(d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let loadings: Vec<f64> = (0..factors).map(|_| gauss(&mut rng)).collect();
        let dense: Vec<f64> = (0..d)
            .map(|r| {
                let shared: f64 = loadings.iter().zip(&directions).fold(0.0, |acc, (a, v)| acc + a * v[r]);
                strength * shared + gauss(&mut rng) * noise_scale
            })
            .collect();
        let score = dense.iter().zip(&w_true).fold(0.0, |acc, (a, b)| acc + a * b) + 0.3 * gauss(&mut rng);
        x.push_column(dense.into_iter().enumerate()).expect("rows generated in order");
        labels.push(label_of(score));
    }
    LabeledDataset::new(x, labels).expect("consistent sizes")
}
