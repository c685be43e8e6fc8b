use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cluster::{ClusterSim, CommLedger, Partition};
use crate::error::{check_len, Result};
use crate::linalg::SparseColumns;
use crate::problems::Regularizer;

/// Settings for random-permutation coordinate descent on
/// `∇f(x)ᵀp + (scale/2) Σ_k (‖B_k p_k‖² + shift‖p_k‖²) + Ψ(x + p) − Ψ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockCdConfig {
    pub epochs: usize,
    pub scale: f64,
    /// Extra diagonal curvature, e.g. a proximal weight `κ`.
    pub shift: f64,
    pub seed: u64,
}

impl Default for BlockCdConfig {
    fn default() -> Self {
        BlockCdConfig { epochs: 1, scale: 1.0, shift: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCdOutcome {
    pub p: Vec<f64>,
    /// `B_k p_k` per worker.
    pub residuals: Vec<Vec<f64>>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for worker `k` at outer iteration `t`.
fn worker_rng(seed: u64, k: usize, t: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ splitmix(k as u64)) ^ t))
}

/// Solves the block-diagonal model with `epochs` passes of coordinate
/// descent per worker, visiting coordinates in a fresh random order each
/// pass. Workers never communicate.
#[allow(clippy::too_many_arguments)]
pub fn blockdiag_cd_solve<R: Regularizer>(
    blocks: &[SparseColumns],
    partition: &Partition,
    grad: &[f64],
    x: &[f64],
    reg: &R,
    config: &BlockCdConfig,
    iteration: u64,
    cluster: &ClusterSim,
) -> Result<BlockCdOutcome> {
    check_len(partition.n_blocks(), blocks.len())?;
    check_len(cluster.workers(), blocks.len())?;
    check_len(partition.total(), grad.len())?;
    check_len(partition.total(), x.len())?;
    let mut p = vec![0.0; x.len()];
    let residuals = cluster.map_workers(|k| {
        let b = &blocks[k];
        let r = partition.block(k);
        let mut res = vec![0.0; b.n_rows()];
        let mut order: Vec<usize> = (0..r.len()).collect();
        let mut rng = worker_rng(config.seed, k, iteration);
        let diag: Vec<f64> = (0..r.len()).map(|j| config.scale * (b.column_norm_sq(j) + config.shift)).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for &j in &order {
                let i = r.start + j;
                let g = grad[i] + config.scale * (b.column_dot(j, &res) + config.shift * p[i]);
                let current = x[i] + p[i];
                let next = reg.coordinate_minimizer(current, g, diag[j]);
                let change = next - current;
                if change != 0.0 {
                    p[i] += change;
                    b.column_axpy(j, change, &mut res);
                }
            }
        }
        res
    });
    Ok(BlockCdOutcome { p, residuals })
}

/// `(Δ, Q)` of a block-diagonal step, one round of two scalars.
#[allow(clippy::too_many_arguments)]
pub fn block_model_value<R: Regularizer>(
    partition: &Partition,
    grad: &[f64],
    x: &[f64],
    reg: &R,
    outcome: &BlockCdOutcome,
    config: &BlockCdConfig,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<(f64, f64)> {
    let p = &outcome.p;
    let parts = cluster.map_workers(|k| {
        let r = partition.block(k);
        let moved: Vec<f64> = r.clone().map(|i| x[i] + p[i]).collect();
        let mut lin = reg.value(&moved) - reg.value(&x[r.clone()]);
        let mut pp = 0.0;
        for i in r {
            lin += grad[i] * p[i];
            pp += p[i] * p[i];
        }
        let rr = crate::linalg::norm_sq(&outcome.residuals[k]);
        vec![lin, 0.5 * config.scale * (rr + config.shift * pp)]
    });
    let sums = cluster.allreduce_sum(&parts, ledger)?;
    Ok((sums[0], sums[0] + sums[1]))
}
