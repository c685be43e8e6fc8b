use super::{L1Norm, Problem, POWER_ITERATIONS};
use crate::cluster::{partition_even, ClusterSim, CommLedger, Partition};
use crate::datasets::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::linalg::SparseColumns;

/// `log(1 + e^{−t})` without overflow.
pub(crate) fn logistic_loss(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// ℓ1-regularized logistic regression,
/// `P(w) = C Σ_i log(1 + exp(−y_i x_iᵀw)) + ‖w‖₁`.
///
/// Instances are split across workers by column range; the variables `w`
/// are split evenly by feature index, independently of the instance split.
/// Every worker holds the full `w` and caches the label-scaled margins
/// `z_k = (YX)_kᵀ w` of its own instances.
#[derive(Debug, Clone)]
pub struct L1Logistic {
    c: f64,
    blocks: Vec<SparseColumns>,
    instances: Partition,
    variables: Partition,
    n_features: usize,
    lipschitz: f64,
    reg: L1Norm,
}

/// Label-scaled margins `y_i x_iᵀ w`, one vector per worker.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalState {
    pub margins: Vec<Vec<f64>>,
}

/// `(YX)_kᵀ p` per worker.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalImage {
    pub margins: Vec<Vec<f64>>,
}

impl L1Logistic {
    pub fn new(data: &LabeledDataset, c: f64, workers: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {c}")));
        }
        let scaled = data.label_scaled();
        let instances = data.instance_partition(workers)?;
        let variables = partition_even(data.n_features(), workers)?;
        let blocks = instances.blocks().iter().map(|r| scaled.columns(r.clone())).collect();
        let lipschitz = (0.25 * c * scaled.spectral_norm_sq(POWER_ITERATIONS)).max(f64::MIN_POSITIVE);
        Ok(L1Logistic {
            c,
            blocks,
            instances,
            variables,
            n_features: data.n_features(),
            lipschitz,
            reg: L1Norm::default(),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn instance_partition(&self) -> &Partition {
        &self.instances
    }

    fn check_workers(&self, cluster: &ClusterSim) -> Result<()> {
        check_len(self.blocks.len(), cluster.workers())
    }

    fn local_objective(&self, margins: &[f64], w_block: &[f64]) -> f64 {
        let loss = margins.iter().fold(0.0, |acc, &z| acc + logistic_loss(z));
        self.c * loss + self.reg.value_block(w_block)
    }
}

impl L1Norm {
    fn value_block(&self, x: &[f64]) -> f64 {
        super::Regularizer::value(self, x)
    }
}

impl Problem for L1Logistic {
    type Reg = L1Norm;
    type State = PrimalState;
    type Image = PrimalImage;

    fn dim(&self) -> usize {
        self.n_features
    }

    fn comm_dim(&self) -> usize {
        self.n_features
    }

    fn partition(&self) -> &Partition {
        &self.variables
    }

    fn regularizer(&self) -> &L1Norm {
        &self.reg
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn init_state(&self, x: &[f64], cluster: &ClusterSim, _ledger: &mut CommLedger) -> Result<PrimalState> {
        self.check_workers(cluster)?;
        check_len(self.n_features, x.len())?;
        let margins = cluster.map_workers(|k| self.blocks[k].spmv_transpose(x).expect("length checked"));
        Ok(PrimalState { margins })
    }

    fn objective(&self, x: &[f64], state: &PrimalState, cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<f64> {
        let parts = cluster.map_workers(|k| self.local_objective(&state.margins[k], &x[self.variables.block(k)]));
        cluster.allreduce_scalar(&parts, ledger)
    }

    /// One allreduce of length `d + 1`: the partial gradients
    /// `X_k ∇ξ_k(X_kᵀw)` and the partial losses.
    fn smooth_value_grad(
        &self,
        x: &[f64],
        state: &PrimalState,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<(f64, Vec<f64>)> {
        check_len(self.n_features, x.len())?;
        let d = self.n_features;
        let parts = cluster.map_workers(|k| {
            let mut out = vec![0.0; d + 1];
            let mut loss = 0.0;
            for (j, &z) in state.margins[k].iter().enumerate() {
                loss += logistic_loss(z);
                // d/dz log(1 + e^{−z}) = −σ(−z)
                let coef = -self.c * sigmoid(-z);
                if coef != 0.0 {
                    self.blocks[k].column_axpy(j, coef, &mut out[..d]);
                }
            }
            out[d] = self.c * loss;
            out
        });
        let mut reduced = cluster.allreduce_sum(&parts, ledger)?;
        let f = reduced.pop().expect("length d + 1");
        Ok((f, reduced))
    }

    /// `vᵀ X D Xᵀ v` with `D = diag(C σ_i (1 − σ_i))`; `v` is replicated, so
    /// only the per-worker partial sums are reduced.
    fn curvature(
        &self,
        _x: &[f64],
        state: &PrimalState,
        v: &[f64],
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64> {
        check_len(self.n_features, v.len())?;
        let parts = cluster.map_workers(|k| {
            state.margins[k].iter().enumerate().fold(0.0, |acc, (j, &z)| {
                let s = sigmoid(z);
                let t = self.blocks[k].column_dot(j, v);
                acc + self.c * s * (1.0 - s) * t * t
            })
        });
        cluster.allreduce_scalar(&parts, ledger)
    }

    /// Shares the direction blocks `p_{I_k}` with every worker (one round of
    /// `d` scalars), then each worker forms `(YX)_kᵀ p` locally.
    fn linesearch_precompute(
        &self,
        p: &[f64],
        _state: &PrimalState,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<PrimalImage> {
        let full = cluster.allgather(&self.variables, p, ledger)?;
        let margins = cluster.map_workers(|k| self.blocks[k].spmv_transpose(&full).expect("length checked"));
        Ok(PrimalImage { margins })
    }

    fn trial_objective(
        &self,
        x: &[f64],
        p: &[f64],
        lambda: f64,
        state: &PrimalState,
        image: &PrimalImage,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64> {
        let parts = cluster.map_workers(|k| {
            let loss = state.margins[k]
                .iter()
                .zip(&image.margins[k])
                .fold(0.0, |acc, (&z, &q)| acc + logistic_loss(z + lambda * q));
            let r = self.variables.block(k);
            let reg = x[r.clone()].iter().zip(&p[r]).fold(0.0, |acc, (&a, &b)| acc + (a + lambda * b).abs());
            self.c * loss + self.reg.weight * reg
        });
        cluster.allreduce_scalar(&parts, ledger)
    }

    fn advance(&self, state: &mut PrimalState, image: &PrimalImage, lambda: f64) {
        for (z, q) in state.margins.iter_mut().zip(&image.margins) {
            crate::linalg::axpy(lambda, q, z);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synthetic;
    use crate::problems::{build_h0, H0Mode, InitialModel, Regularizer};

    fn identity_problem() -> L1Logistic {
        let x = SparseColumns::from_columns(2, vec![vec![(0, 1.0)], vec![(1, 1.0)]]).unwrap();
        let ds = LabeledDataset::new(x, vec![1.0, 1.0]).unwrap();
        L1Logistic::new(&ds, 1.0, 1).unwrap()
    }

    /// Direct evaluation of `P(w)` from the dataset, no caches.
    fn direct_objective(ds: &LabeledDataset, c: f64, w: &[f64]) -> f64 {
        let z = ds.features().spmv_transpose(w).unwrap();
        let loss: f64 = z.iter().zip(ds.labels()).map(|(zi, yi)| (1.0 + (-yi * zi).exp()).ln()).sum();
        c * loss + w.iter().map(|v| v.abs()).sum::<f64>()
    }

    #[test]
    fn value_and_gradient_at_zero() {
        let ds = synthetic::logistic(4, 3, 0.7, 8);
        let prob = L1Logistic::new(&ds, 1.0, 2).unwrap();
        let cluster = ClusterSim::new(2).unwrap();
        let mut ledger = CommLedger::new();
        let w = vec![0.0; 3];
        let st = prob.init_state(&w, &cluster, &mut ledger).unwrap();
        let (f, g) = prob.smooth_value_grad(&w, &st, &cluster, &mut ledger).unwrap();
        assert!((f - 4.0 * std::f64::consts::LN_2).abs() < 1e-14);
        let xy = ds.features().spmv(ds.labels()).unwrap();
        for (gi, v) in g.iter().zip(&xy) {
            assert!((gi + 0.5 * v).abs() < 1e-14);
        }
        assert_eq!(ledger.rounds, 1);
        assert_eq!(ledger.scalars_transmitted, 4);
    }

    #[test]
    fn a0_on_identity_data() {
        let prob = identity_problem();
        let cluster = ClusterSim::new(1).unwrap();
        let mut ledger = CommLedger::new();
        let w = vec![0.0, 0.0];
        let st = prob.init_state(&w, &cluster, &mut ledger).unwrap();
        let (_, g) = prob.smooth_value_grad(&w, &st, &cluster, &mut ledger).unwrap();
        assert_eq!(g, vec![-0.5, -0.5]);
        let h0 = build_h0(&prob, H0Mode::ScaledIdentity, &w, &g, &st, &cluster, &mut ledger).unwrap();
        assert_eq!(h0, InitialModel::ScaledIdentity(0.25));
        assert!(build_h0(&prob, H0Mode::BlockDiagonal, &w, &g, &st, &cluster, &mut ledger).is_err());
    }

    #[test]
    fn zero_gradient_gives_unit_a0() {
        let prob = identity_problem();
        let cluster = ClusterSim::new(1).unwrap();
        let mut ledger = CommLedger::new();
        let w = vec![0.0, 0.0];
        let st = prob.init_state(&w, &cluster, &mut ledger).unwrap();
        let h0 = build_h0(&prob, H0Mode::ScaledIdentity, &w, &[0.0, 0.0], &st, &cluster, &mut ledger).unwrap();
        assert_eq!(h0, InitialModel::ScaledIdentity(1.0));
        assert_eq!(ledger.rounds, 0);
    }

    #[test]
    fn cheap_reevaluation_matches_direct() {
        let ds = synthetic::logistic(40, 12, 0.4, 3);
        let c = 0.8;
        let prob = L1Logistic::new(&ds, c, 3).unwrap();
        let cluster = ClusterSim::new(3).unwrap();
        let mut ledger = CommLedger::new();
        let w: Vec<f64> = (0..12).map(|i| (i as f64 - 6.0) * 0.1).collect();
        let p: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 * 0.2 - 0.4).collect();
        let st = prob.init_state(&w, &cluster, &mut ledger).unwrap();
        let image = prob.linesearch_precompute(&p, &st, &cluster, &mut ledger).unwrap();
        assert_eq!(ledger.rounds, 1);
        assert_eq!(ledger.scalars_transmitted, 12);
        for &lambda in &[1.0, 0.5, 0.25] {
            let cheap = prob.trial_objective(&w, &p, lambda, &st, &image, &cluster, &mut ledger).unwrap();
            let moved: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a + lambda * b).collect();
            let direct = direct_objective(&ds, c, &moved);
            assert!((cheap - direct).abs() <= 1e-12 * direct.abs(), "{cheap} vs {direct}");
        }
        let zero = vec![0.0; 12];
        let image0 = prob.linesearch_precompute(&zero, &st, &cluster, &mut ledger).unwrap();
        assert!(image0.margins.iter().flatten().all(|&v| v == 0.0));
        let f0 = prob.objective(&w, &st, &cluster, &mut ledger).unwrap();
        assert_eq!(prob.trial_objective(&w, &zero, 0.7, &st, &image0, &cluster, &mut ledger).unwrap(), f0);
    }

    #[test]
    fn advance_keeps_cache_consistent() {
        let ds = synthetic::logistic(30, 10, 0.5, 4);
        let prob = L1Logistic::new(&ds, 1.0, 4).unwrap();
        let cluster = ClusterSim::new(4).unwrap();
        let mut ledger = CommLedger::new();
        let w = vec![0.1; 10];
        let p: Vec<f64> = (0..10).map(|i| i as f64 * 0.05 - 0.2).collect();
        let mut st = prob.init_state(&w, &cluster, &mut ledger).unwrap();
        let image = prob.linesearch_precompute(&p, &st, &cluster, &mut ledger).unwrap();
        prob.advance(&mut st, &image, 0.5);
        let moved: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a + 0.5 * b).collect();
        let fresh = prob.init_state(&moved, &cluster, &mut ledger).unwrap();
        for (a, b) in st.margins.iter().flatten().zip(fresh.margins.iter().flatten()) {
            assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let ds = synthetic::logistic(4, 3, 0.7, 8);
        assert!(L1Logistic::new(&ds, 0.0, 1).is_err());
        assert!(L1Logistic::new(&ds, 1.0, 5).is_err());
        assert_eq!(L1Logistic::new(&ds, 1.0, 1).unwrap().regularizer().value(&[1.0, -2.0]), 3.0);
    }
}
