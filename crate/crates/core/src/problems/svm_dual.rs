use super::{ExactStep, Problem, Regularizer, SquaredHingeConjugate, POWER_ITERATIONS};
use crate::cluster::{ClusterSim, CommLedger, Partition};
use crate::datasets::LabeledDataset;
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_sq, SparseColumns};

/// Dual of the ℓ2-regularized squared-hinge SVM,
/// `D(α) = ½‖(YX)α‖² + Σ_i (α_i²/(4C) − α_i)` over `α ≥ 0`.
///
/// The smooth part is `f(α) = ½‖z‖²` with `z = (YX)α`; everything else,
/// including the quadratic `α²/(4C)`, lives in the regularizer. Variables
/// follow the instance split, and every worker keeps a copy of `z`.
#[derive(Debug, Clone)]
pub struct SquaredHingeDual {
    c: f64,
    blocks: Vec<SparseColumns>,
    instances: Partition,
    n_features: usize,
    lipschitz: f64,
    reg: SquaredHingeConjugate,
}

/// The replicated vector `z = (YX)α`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub z: Vec<f64>,
}

/// The replicated vector `(YX)p`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualImage {
    pub q: Vec<f64>,
}

/// A proximal term `κ/2 ‖α − y‖²` added to the dual objective.
#[derive(Debug, Clone, Copy)]
pub struct ProximalCenter<'a> {
    pub kappa: f64,
    pub y: &'a [f64],
}

/// Exact line-search result on a possibly augmented dual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualStep {
    pub lambda: f64,
    /// Augmented objective at the step (equal to `original` without a center).
    pub objective: f64,
    pub original: f64,
    pub nonpositive: bool,
}

impl SquaredHingeDual {
    pub fn new(data: &LabeledDataset, c: f64, workers: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {c}")));
        }
        let scaled = data.label_scaled();
        let instances = data.instance_partition(workers)?;
        let blocks = instances.blocks().iter().map(|r| scaled.columns(r.clone())).collect();
        let lipschitz = scaled.spectral_norm_sq(POWER_ITERATIONS).max(f64::MIN_POSITIVE);
        Ok(SquaredHingeDual {
            c,
            blocks,
            instances,
            n_features: data.n_features(),
            lipschitz,
            reg: SquaredHingeConjugate { c },
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Modulus `σ = 1/(2C)` of the strongly convex `Ψ`.
    pub fn strong_convexity(&self) -> f64 {
        0.5 / self.c
    }

    /// `w(α) = ∇g*((YX)α) = z`.
    pub fn primal_recovery(&self, state: &DualState) -> Vec<f64> {
        state.z.clone()
    }

    /// `P(w) = ½‖w‖² + C Σ_i max(0, 1 − y_i x_iᵀw)²`, one scalar round.
    pub fn primal_objective(&self, w: &[f64], cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<f64> {
        check_len(self.n_features, w.len())?;
        check_len(self.blocks.len(), cluster.workers())?;
        let parts = cluster.map_workers(|k| {
            let b = &self.blocks[k];
            (0..b.n_cols()).fold(0.0, |acc, j| {
                let slack = (1.0 - b.column_dot(j, w)).max(0.0);
                acc + slack * slack
            })
        });
        Ok(0.5 * norm_sq(w) + self.c * cluster.allreduce_scalar(&parts, ledger)?)
    }

    /// Local contributions `Σ_k (YX)_k v_k` reduced in one round of `d`.
    fn assemble(&self, v: &[f64], cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<Vec<f64>> {
        check_len(self.instances.total(), v.len())?;
        check_len(self.blocks.len(), cluster.workers())?;
        cluster.reduce_blocks(&self.instances, ledger, |k, r| self.blocks[k].spmv(&v[r]).expect("block length matches"))
    }

    /// Minimizes `λ ↦ D(α + λp) + κ/2‖α + λp − y‖²` exactly over the
    /// feasible `λ ≥ 0`.
    ///
    /// The objective is a parabola in `λ`; its coefficients cost one scalar
    /// round, plus a min-reduction for the feasibility bound only when the
    /// vertex lies beyond `λ = 1` (`α + p` is feasible on entry).
    #[allow(clippy::too_many_arguments)]
    pub fn exact_step(
        &self,
        x: &[f64],
        p: &[f64],
        objective: f64,
        original: f64,
        state: &DualState,
        image: &DualImage,
        center: Option<ProximalCenter<'_>>,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<DualStep> {
        let (a1, b1) = (norm_sq(&image.q), dot(&state.z, &image.q));
        let half_inv_c = 0.5 / self.c;
        let per_worker = |k: usize| {
            let r = self.instances.block(k);
            let (mut a2, mut b2, mut a3, mut b3) = (0.0, 0.0, 0.0, 0.0);
            for i in r {
                a2 += p[i] * p[i] * half_inv_c;
                b2 += (x[i] * half_inv_c - 1.0) * p[i];
                if let Some(c) = center {
                    a3 += c.kappa * p[i] * p[i];
                    b3 += c.kappa * (x[i] - c.y[i]) * p[i];
                }
            }
            if center.is_some() {
                vec![a2, b2, a3, b3]
            } else {
                vec![a2, b2]
            }
        };
        let parts = cluster.map_workers(per_worker);
        let sums = cluster.allreduce_sum(&parts, ledger)?;
        let (a_orig, b_orig) = (a1 + sums[0], b1 + sums[1]);
        let (a, b) = match center {
            Some(_) => (a_orig + sums[2], b_orig + sums[3]),
            None => (a_orig, b_orig),
        };
        if !(a > 0.0) || b >= 0.0 {
            return Ok(DualStep { lambda: 0.0, objective, original, nonpositive: true });
        }
        let mut lambda = -b / a;
        if lambda > 1.0 {
            let bounds = cluster.map_workers(|k| {
                self.instances.block(k).fold(f64::INFINITY, |acc, i| {
                    if p[i] < 0.0 {
                        // Largest λ with x + λp ≥ 0 after rounding.
                        let mut l = -x[i] / p[i];
                        while x[i] + l * p[i] < 0.0 {
                            l = l.next_down();
                        }
                        acc.min(l)
                    } else {
                        acc
                    }
                })
            });
            lambda = lambda.min(cluster.allreduce_min(&bounds, ledger)?.max(1.0));
        }
        let change = |a: f64, b: f64| lambda * (b + 0.5 * a * lambda);
        Ok(DualStep {
            lambda,
            objective: objective + change(a, b).min(0.0),
            original: original + change(a_orig, b_orig),
            nonpositive: false,
        })
    }

    /// `F(α) + κ/2‖α − y‖²` split into `(augmented, original)`, one scalar
    /// round of two values.
    pub fn augmented_objective(
        &self,
        x: &[f64],
        state: &DualState,
        center: ProximalCenter<'_>,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<(f64, f64)> {
        let parts = cluster.map_workers(|k| {
            let r = self.instances.block(k);
            let prox: f64 = r.clone().map(|i| (x[i] - center.y[i]).powi(2)).sum();
            vec![self.reg.value(&x[r]), 0.5 * center.kappa * prox]
        });
        let sums = cluster.allreduce_sum(&parts, ledger)?;
        let original = 0.5 * norm_sq(&state.z) + sums[0];
        Ok((original + sums[1], original))
    }
}

impl Problem for SquaredHingeDual {
    type Reg = SquaredHingeConjugate;
    type State = DualState;
    type Image = DualImage;

    fn dim(&self) -> usize {
        self.instances.total()
    }

    fn comm_dim(&self) -> usize {
        self.n_features
    }

    fn partition(&self) -> &Partition {
        &self.instances
    }

    fn regularizer(&self) -> &SquaredHingeConjugate {
        &self.reg
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn init_state(&self, x: &[f64], cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<DualState> {
        Ok(DualState { z: self.assemble(x, cluster, ledger)? })
    }

    fn objective(&self, x: &[f64], state: &DualState, cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<f64> {
        check_len(self.dim(), x.len())?;
        let parts = cluster.map_workers(|k| self.reg.value(&x[self.instances.block(k)]));
        Ok(0.5 * norm_sq(&state.z) + cluster.allreduce_scalar(&parts, ledger)?)
    }

    /// `f = ½‖z‖²` and `∇f = (YX)ᵀz`, both local given the replicated `z`.
    fn smooth_value_grad(
        &self,
        x: &[f64],
        state: &DualState,
        cluster: &ClusterSim,
        _ledger: &mut CommLedger,
    ) -> Result<(f64, Vec<f64>)> {
        check_len(self.dim(), x.len())?;
        check_len(self.blocks.len(), cluster.workers())?;
        let grad = cluster.map_workers(|k| self.blocks[k].spmv_transpose(&state.z).expect("d-vector")).concat();
        Ok((0.5 * norm_sq(&state.z), grad))
    }

    /// `‖(YX)v‖²`, one round of `d`.
    fn curvature(
        &self,
        _x: &[f64],
        _state: &DualState,
        v: &[f64],
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64> {
        Ok(norm_sq(&self.assemble(v, cluster, ledger)?))
    }

    fn linesearch_precompute(
        &self,
        p: &[f64],
        _state: &DualState,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<DualImage> {
        Ok(DualImage { q: self.assemble(p, cluster, ledger)? })
    }

    fn trial_objective(
        &self,
        x: &[f64],
        p: &[f64],
        lambda: f64,
        state: &DualState,
        image: &DualImage,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64> {
        let parts = cluster.map_workers(|k| {
            let r = self.instances.block(k);
            let moved: Vec<f64> = x[r.clone()].iter().zip(&p[r]).map(|(a, b)| a + lambda * b).collect();
            self.reg.value(&moved)
        });
        let smooth = state.z.iter().zip(&image.q).fold(0.0, |acc, (z, q)| acc + (z + lambda * q).powi(2));
        Ok(0.5 * smooth + cluster.allreduce_scalar(&parts, ledger)?)
    }

    fn advance(&self, state: &mut DualState, image: &DualImage, lambda: f64) {
        crate::linalg::axpy(lambda, &image.q, &mut state.z);
    }

    fn exact_line_search(
        &self,
        x: &[f64],
        p: &[f64],
        f_x: f64,
        state: &DualState,
        image: &DualImage,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<Option<ExactStep>> {
        let s = self.exact_step(x, p, f_x, f_x, state, image, None, cluster, ledger)?;
        Ok(Some(ExactStep { lambda: s.lambda, objective: s.objective, nonpositive: s.nonpositive }))
    }

    fn local_blocks(&self) -> Option<&[SparseColumns]> {
        Some(&self.blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::synthetic;

    fn setup(n: usize, d: usize, k: usize) -> (LabeledDataset, SquaredHingeDual, ClusterSim) {
        let ds = synthetic::logistic(n, d, 0.5, 17);
        let prob = SquaredHingeDual::new(&ds, 1.0, k).unwrap();
        (ds, prob, ClusterSim::new(k).unwrap())
    }

    fn direct_dual(ds: &LabeledDataset, c: f64, a: &[f64]) -> f64 {
        let z = ds.label_scaled().spmv(a).unwrap();
        0.5 * norm_sq(&z) + a.iter().map(|v| v * v / (4.0 * c) - v).sum::<f64>()
    }

    #[test]
    fn zero_point() {
        let (_, prob, cluster) = setup(6, 3, 2);
        let mut ledger = CommLedger::new();
        let a = vec![0.0; 6];
        let st = prob.init_state(&a, &cluster, &mut ledger).unwrap();
        let (f, g) = prob.smooth_value_grad(&a, &st, &cluster, &mut ledger).unwrap();
        assert_eq!(f, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
        assert_eq!(prob.primal_recovery(&st), vec![0.0; 3]);
    }

    #[test]
    fn recovery_of_single_instance() {
        let x = SparseColumns::from_columns(2, vec![vec![(0, 1.0)]]).unwrap();
        let ds = LabeledDataset::new(x, vec![1.0]).unwrap();
        let prob = SquaredHingeDual::new(&ds, 1.0, 1).unwrap();
        let cluster = ClusterSim::new(1).unwrap();
        let st = prob.init_state(&[2.0], &cluster, &mut CommLedger::new()).unwrap();
        assert_eq!(prob.primal_recovery(&st), vec![2.0, 0.0]);
    }

    #[test]
    fn gradient_is_local() {
        let (_, prob, cluster) = setup(12, 5, 3);
        let mut ledger = CommLedger::new();
        let a: Vec<f64> = (0..12).map(|i| 0.1 * i as f64).collect();
        let st = prob.init_state(&a, &cluster, &mut ledger).unwrap();
        assert_eq!((ledger.rounds, ledger.scalars_transmitted), (1, 5));
        prob.smooth_value_grad(&a, &st, &cluster, &mut ledger).unwrap();
        assert_eq!(ledger.rounds, 1);
    }

    #[test]
    fn reevaluation_is_a_parabola() {
        let (ds, prob, cluster) = setup(15, 4, 3);
        let mut ledger = CommLedger::new();
        let a: Vec<f64> = (0..15).map(|i| 0.2 + 0.05 * i as f64).collect();
        let p: Vec<f64> = (0..15).map(|i| 0.1 - 0.013 * i as f64).collect();
        let st = prob.init_state(&a, &cluster, &mut ledger).unwrap();
        let img = prob.linesearch_precompute(&p, &st, &cluster, &mut ledger).unwrap();
        let eval =
            |l: f64, ledger: &mut CommLedger| prob.trial_objective(&a, &p, l, &st, &img, &cluster, ledger).unwrap();
        let (f0, f1, f2) = (eval(0.0, &mut ledger), eval(0.5, &mut ledger), eval(1.0, &mut ledger));
        // Fit through λ = 0, ½, 1 and predict λ = ¼.
        let c2 = 2.0 * (f2 - 2.0 * f1 + f0);
        let c1 = f2 - f0 - c2;
        let predicted = f0 + 0.25 * c1 + 0.0625 * c2;
        assert!((eval(0.25, &mut ledger) - predicted).abs() < 1e-12 * f0.abs().max(1.0));
        let moved: Vec<f64> = a.iter().zip(&p).map(|(x, y)| x + 0.25 * y).collect();
        let direct = direct_dual(&ds, 1.0, &moved);
        assert!((eval(0.25, &mut ledger) - direct).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn exact_step_hits_the_vertex() {
        let (_, prob, cluster) = setup(10, 4, 2);
        let mut ledger = CommLedger::new();
        let a = vec![0.5; 10];
        let st = prob.init_state(&a, &cluster, &mut ledger).unwrap();
        let f = prob.objective(&a, &st, &cluster, &mut ledger).unwrap();
        let (_, g) = prob.smooth_value_grad(&a, &st, &cluster, &mut ledger).unwrap();
        // A small descent direction that keeps α feasible for λ ≤ 1.
        let p: Vec<f64> = g.iter().zip(&a).map(|(gi, ai)| -0.01 * (gi + ai / 2.0 - 1.0)).collect();
        let img = prob.linesearch_precompute(&p, &st, &cluster, &mut ledger).unwrap();
        let step = prob.exact_line_search(&a, &p, f, &st, &img, &cluster, &mut ledger).unwrap().unwrap();
        assert!(!step.nonpositive && step.lambda > 0.0);
        let at = |l: f64| prob.trial_objective(&a, &p, l, &st, &img, &cluster, &mut CommLedger::new()).unwrap();
        assert!((at(step.lambda) - step.objective).abs() <= 1e-10 * f.abs());
        // Vertex oracle: a finer scan never beats the closed form.
        for i in 0..400 {
            let l = step.lambda * f64::from(i) / 200.0;
            let feasible = a.iter().zip(&p).all(|(x, y)| x + l * y >= 0.0);
            if feasible {
                assert!(at(l) >= step.objective - 1e-12 * f.abs());
            }
        }
    }

    #[test]
    fn exact_step_respects_the_boundary() {
        let x = SparseColumns::from_columns(1, vec![vec![(0, 1.0)], vec![(0, 1.0)]]).unwrap();
        let ds = LabeledDataset::new(x, vec![1.0, 1.0]).unwrap();
        let prob = SquaredHingeDual::new(&ds, 1.0, 2).unwrap();
        let cluster = ClusterSim::new(2).unwrap();
        let mut ledger = CommLedger::new();
        let a = vec![1.0, 3.0];
        let p = vec![-0.5, 0.0];
        let st = prob.init_state(&a, &cluster, &mut ledger).unwrap();
        let f = prob.objective(&a, &st, &cluster, &mut ledger).unwrap();
        let img = prob.linesearch_precompute(&p, &st, &cluster, &mut ledger).unwrap();
        let step = prob.exact_line_search(&a, &p, f, &st, &img, &cluster, &mut ledger).unwrap().unwrap();
        // Unconstrained vertex is λ = 14/3; α₁ hits zero at λ = 2.
        assert_eq!(step.lambda, 2.0);
    }

    #[test]
    fn boundary_step_stays_feasible_after_rounding() {
        // Find a coordinate where x + (−x/p)·p rounds below zero.
        let (x0, p0) = (1..1000)
            .map(|i| (0.1 * f64::from(i), -0.3 - 1e-3 * f64::from(i)))
            .find(|(x, p)| x + (-x / p) * p < 0.0)
            .expect("some pair rounds below zero");
        let x = SparseColumns::from_columns(1, vec![vec![(0, 1.0)], vec![(0, 1.0)]]).unwrap();
        let ds = LabeledDataset::new(x, vec![1.0, 1.0]).unwrap();
        let prob = SquaredHingeDual::new(&ds, 1e6, 2).unwrap();
        let cluster = ClusterSim::new(2).unwrap();
        let mut ledger = CommLedger::new();
        let a = vec![x0, 50.0];
        let p = vec![p0, 0.0];
        let st = prob.init_state(&a, &cluster, &mut ledger).unwrap();
        let f = prob.objective(&a, &st, &cluster, &mut ledger).unwrap();
        let img = prob.linesearch_precompute(&p, &st, &cluster, &mut ledger).unwrap();
        let step = prob.exact_line_search(&a, &p, f, &st, &img, &cluster, &mut ledger).unwrap().unwrap();
        assert!(step.lambda > 1.0);
        assert!(a[0] + step.lambda * p[0] >= 0.0);
    }

    #[test]
    fn primal_objective_matches_direct() {
        let (ds, prob, cluster) = setup(9, 4, 3);
        let w = vec![0.3, -0.2, 0.5, 0.1];
        let z = ds.label_scaled().spmv_transpose(&w).unwrap();
        let direct = 0.5 * norm_sq(&w) + z.iter().map(|m| (1.0 - m).max(0.0).powi(2)).sum::<f64>();
        let got = prob.primal_objective(&w, &cluster, &mut CommLedger::new()).unwrap();
        assert!((got - direct).abs() < 1e-13);
    }

    #[test]
    fn lipschitz_bound_on_random_pairs() {
        let (_, prob, cluster) = setup(20, 6, 2);
        let mut ledger = CommLedger::new();
        for s in 0..10 {
            let a: Vec<f64> = (0..20).map(|i| ((i * 31 + s * 7) % 11) as f64 * 0.1).collect();
            let b: Vec<f64> = (0..20).map(|i| ((i * 17 + s * 3) % 13) as f64 * 0.07).collect();
            let ga = prob
                .smooth_value_grad(&a, &prob.init_state(&a, &cluster, &mut ledger).unwrap(), &cluster, &mut ledger)
                .unwrap()
                .1;
            let gb = prob
                .smooth_value_grad(&b, &prob.init_state(&b, &cluster, &mut ledger).unwrap(), &cluster, &mut ledger)
                .unwrap()
                .1;
            let lhs = norm_sq(&crate::linalg::sub(&ga, &gb)).sqrt();
            let rhs = prob.lipschitz() * norm_sq(&crate::linalg::sub(&a, &b)).sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-6));
        }
    }
}
