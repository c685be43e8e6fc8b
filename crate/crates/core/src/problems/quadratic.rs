use super::{Problem, Regularizer, POWER_ITERATIONS};
use crate::cluster::{partition_even, ClusterSim, CommLedger, Partition};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm, SmallDenseMatrix};

/// `F(x) = ½xᵀAx − bᵀx + Ψ(x)` with a dense symmetric positive
/// semidefinite `A`, rows split across workers.
#[derive(Debug, Clone)]
pub struct DenseQuadratic<R> {
    a: SmallDenseMatrix,
    b: Vec<f64>,
    reg: R,
    partition: Partition,
    lipschitz: f64,
}

/// Image of a vector under `A`, row blocks owned by their workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Product {
    pub values: Vec<f64>,
}

impl<R: Regularizer> DenseQuadratic<R> {
    pub fn new(a: SmallDenseMatrix, b: Vec<f64>, reg: R, workers: usize) -> Result<Self> {
        let n = a.order();
        check_len(n, b.len())?;
        if a.asymmetry() > 1e-12 * a.max_abs().max(1.0) {
            return Err(Error::Invariant("quadratic term is not symmetric".into()));
        }
        let partition = partition_even(n, workers)?;
        let mut v = vec![1.0; n];
        let mut lipschitz = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let w = a.matvec(&v)?;
            let nw = norm(&w);
            if nw == 0.0 {
                break;
            }
            lipschitz = dot(&v, &w) / dot(&v, &v);
            v = w.iter().map(|x| x / nw).collect();
        }
        Ok(DenseQuadratic { a, b, reg, partition, lipschitz: lipschitz.max(f64::MIN_POSITIVE) })
    }

    pub fn matrix(&self) -> &SmallDenseMatrix {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        &self.b
    }

    fn rows(&self, v: &[f64], cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<Vec<f64>> {
        check_len(self.partition.n_blocks(), cluster.workers())?;
        let full = cluster.allgather(&self.partition, v, ledger)?;
        let n = self.a.order();
        Ok(cluster
            .map_workers(|k| {
                self.partition
                    .block(k)
                    .map(|i| (0..n).fold(0.0, |acc, j| acc + self.a.get(i, j) * full[j]))
                    .collect::<Vec<f64>>()
            })
            .concat())
    }
}

impl<R: Regularizer> Problem for DenseQuadratic<R> {
    type Reg = R;
    type State = Product;
    type Image = Product;

    fn dim(&self) -> usize {
        self.a.order()
    }

    fn comm_dim(&self) -> usize {
        self.a.order()
    }

    fn partition(&self) -> &Partition {
        &self.partition
    }

    fn regularizer(&self) -> &R {
        &self.reg
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn init_state(&self, x: &[f64], cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<Product> {
        Ok(Product { values: self.rows(x, cluster, ledger)? })
    }

    fn objective(&self, x: &[f64], state: &Product, cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<f64> {
        self.trial_objective(x, x, 0.0, state, state, cluster, ledger)
    }

    fn smooth_value_grad(
        &self,
        x: &[f64],
        state: &Product,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<(f64, Vec<f64>)> {
        check_len(self.dim(), x.len())?;
        let parts = cluster.map_workers(|k| {
            self.partition.block(k).fold(0.0, |acc, i| acc + x[i] * (0.5 * state.values[i] - self.b[i]))
        });
        let f = cluster.allreduce_scalar(&parts, ledger)?;
        let grad = state.values.iter().zip(&self.b).map(|(ax, b)| ax - b).collect();
        Ok((f, grad))
    }

    fn curvature(
        &self,
        _x: &[f64],
        _state: &Product,
        v: &[f64],
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64> {
        let av = self.rows(v, cluster, ledger)?;
        let parts = cluster.map_workers(|k| self.partition.block(k).fold(0.0, |acc, i| acc + v[i] * av[i]));
        cluster.allreduce_scalar(&parts, ledger)
    }

    fn linesearch_precompute(
        &self,
        p: &[f64],
        _state: &Product,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<Product> {
        Ok(Product { values: self.rows(p, cluster, ledger)? })
    }

    fn trial_objective(
        &self,
        x: &[f64],
        p: &[f64],
        lambda: f64,
        state: &Product,
        image: &Product,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        check_len(self.dim(), p.len())?;
        let parts = cluster.map_workers(|k| {
            let r = self.partition.block(k);
            let moved: Vec<f64> = r.clone().map(|i| x[i] + lambda * p[i]).collect();
            let smooth = r.clone().zip(&moved).fold(0.0, |acc, (i, &v)| {
                let av = state.values[i] + lambda * image.values[i];
                acc + v * (0.5 * av - self.b[i])
            });
            smooth + self.reg.value(&moved)
        });
        cluster.allreduce_scalar(&parts, ledger)
    }

    fn advance(&self, state: &mut Product, image: &Product, lambda: f64) {
        crate::linalg::axpy(lambda, &image.values, &mut state.values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ZeroRegularizer;

    #[test]
    fn value_gradient_and_curvature() {
        let a = SmallDenseMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        let q = DenseQuadratic::new(a, vec![1.0, -1.0], ZeroRegularizer, 2).unwrap();
        let cluster = ClusterSim::new(2).unwrap();
        let mut ledger = CommLedger::new();
        let x = [1.0, 2.0];
        let st = q.init_state(&x, &cluster, &mut ledger).unwrap();
        let (f, g) = q.smooth_value_grad(&x, &st, &cluster, &mut ledger).unwrap();
        // ½(2 + 4 + 12) − (1 − 2) = 10
        assert_eq!(f, 10.0);
        assert_eq!(g, vec![3.0, 8.0]);
        assert_eq!(q.curvature(&x, &st, &[1.0, 0.0], &cluster, &mut ledger).unwrap(), 2.0);
        let lmax = (5.0 + 5f64.sqrt()) / 2.0;
        assert!((q.lipschitz() - lmax).abs() < 1e-10);
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let a = SmallDenseMatrix::from_row_major(2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(DenseQuadratic::new(a, vec![0.0, 0.0], ZeroRegularizer, 1).is_err());
    }
}
