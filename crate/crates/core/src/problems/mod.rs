//! Concrete `F = f + Ψ` instances and the oracles the solvers consume.
//!
//! A [`Problem`] exposes its smooth part through distributed oracles that
//! meter their own communication, and its block-separable regularizer
//! through a [`Regularizer`]. Iterates are held as full-length vectors;
//! worker `k` owns the coordinates in block `k` of
//! [`Problem::partition`], and every oracle computes per-worker partial
//! results over those blocks before reducing them on the cluster.

mod logistic;
mod quadratic;
mod svm_dual;

pub use logistic::{L1Logistic, PrimalImage, PrimalState};
pub use quadratic::{DenseQuadratic, Product};
pub use svm_dual::{DualImage, DualState, DualStep, ProximalCenter, SquaredHingeDual};

use crate::cluster::{ClusterSim, CommLedger, Partition};
use crate::linalg::{norm, SparseColumns};
use crate::Result;

/// Number of power-iteration steps behind every Lipschitz estimate.
pub const POWER_ITERATIONS: usize = 50;

/// A coordinate-separable convex regularizer.
pub trait Regularizer {
    /// `Ψ` summed over the coordinates in `x`; `+∞` outside the domain.
    fn value(&self, x: &[f64]) -> f64;

    /// `out = argmin_v ½‖v − u‖² + τ Ψ(v)`, coordinatewise.
    fn prox(&self, u: &[f64], tau: f64, out: &mut [f64]);

    /// `argmin_v g (v − x) + (h/2)(v − x)² + ψ(v)` for one coordinate,
    /// `h ≥ 0`. The default handles `h > 0` through the prox and leaves the
    /// coordinate unchanged when `h = 0`.
    fn coordinate_minimizer(&self, x: f64, g: f64, h: f64) -> f64 {
        if h > 0.0 {
            let mut out = [0.0];
            self.prox(&[x - g / h], 1.0 / h, &mut out);
            out[0]
        } else {
            x
        }
    }
}

/// `Ψ ≡ 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroRegularizer;

impl Regularizer for ZeroRegularizer {
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn prox(&self, u: &[f64], _tau: f64, out: &mut [f64]) {
        out.copy_from_slice(u);
    }
}

/// `Ψ(x) = weight · ‖x‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L1Norm {
    pub weight: f64,
}

impl Default for L1Norm {
    fn default() -> Self {
        L1Norm { weight: 1.0 }
    }
}

pub fn soft_threshold(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

impl Regularizer for L1Norm {
    fn value(&self, x: &[f64]) -> f64 {
        self.weight * x.iter().fold(0.0, |acc, v| acc + v.abs())
    }

    fn prox(&self, u: &[f64], tau: f64, out: &mut [f64]) {
        let t = tau * self.weight;
        for (o, &v) in out.iter_mut().zip(u) {
            *o = soft_threshold(v, t);
        }
    }
}

/// The conjugate part of the squared-hinge dual:
/// `Ψ(α) = Σ α_i² / (4C) − α_i` restricted to `α ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredHingeConjugate {
    pub c: f64,
}

impl Regularizer for SquaredHingeConjugate {
    fn value(&self, x: &[f64]) -> f64 {
        let q = 1.0 / (4.0 * self.c);
        x.iter().fold(0.0, |acc, &a| if a < 0.0 { f64::INFINITY } else { acc + a * a * q - a })
    }

    fn prox(&self, u: &[f64], tau: f64, out: &mut [f64]) {
        let denom = 1.0 + tau / (2.0 * self.c);
        for (o, &v) in out.iter_mut().zip(u) {
            *o = ((v + tau) / denom).max(0.0);
        }
    }

    fn coordinate_minimizer(&self, x: f64, g: f64, h: f64) -> f64 {
        ((h * x - g + 1.0) / (h + 1.0 / (2.0 * self.c))).max(0.0)
    }
}

/// How the curvature model is initialized before any pair is stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum H0Mode {
    /// `a₀ I` with `a₀ = |∇fᵀ∇²f∇f| / ‖∇f‖²`.
    ScaledIdentity,
    /// The block-diagonal part of the Hessian formed from each worker's
    /// local data (only for problems that expose local blocks).
    BlockDiagonal,
}

/// Initial quadratic model returned by [`build_h0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialModel {
    ScaledIdentity(f64),
    BlockDiagonal,
}

/// Outcome of an exact line search on a quadratic objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactStep {
    pub lambda: f64,
    /// Objective at the returned step.
    pub objective: f64,
    /// The unconstrained minimizer of the 1-D quadratic was not positive.
    pub nonpositive: bool,
}

/// A smooth-plus-separable objective spread over a simulated cluster.
pub trait Problem {
    type Reg: Regularizer;
    /// Per-worker cached products kept consistent with the iterate.
    type State: Clone;
    /// Precomputed image of a direction used to re-evaluate `F(x + λp)`
    /// without further matrix products.
    type Image;

    /// Number of variables `N`.
    fn dim(&self) -> usize;

    /// The primal feature dimension `d`, the unit in which communication
    /// volume is reported.
    fn comm_dim(&self) -> usize;

    /// The variable partition `{I_k}`.
    fn partition(&self) -> &Partition;

    fn regularizer(&self) -> &Self::Reg;

    /// Estimated Lipschitz constant of `∇f`. Diagnostics only.
    fn lipschitz(&self) -> f64;

    fn init_state(&self, x: &[f64], cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<Self::State>;

    /// `F(x)`, one scalar round.
    fn objective(&self, x: &[f64], state: &Self::State, cluster: &ClusterSim, ledger: &mut CommLedger) -> Result<f64>;

    /// `(f(x), ∇f(x))`.
    fn smooth_value_grad(
        &self,
        x: &[f64],
        state: &Self::State,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<(f64, Vec<f64>)>;

    /// `vᵀ ∇²f(x) v` for a vector `v` partitioned like `x`.
    fn curvature(
        &self,
        x: &[f64],
        state: &Self::State,
        v: &[f64],
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64>;

    fn linesearch_precompute(
        &self,
        p: &[f64],
        state: &Self::State,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<Self::Image>;

    /// `F(x + λp)` from the cached state and image, one scalar round.
    #[allow(clippy::too_many_arguments)]
    fn trial_objective(
        &self,
        x: &[f64],
        p: &[f64],
        lambda: f64,
        state: &Self::State,
        image: &Self::Image,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<f64>;

    /// Moves the cached state from `x` to `x + λp`.
    fn advance(&self, state: &mut Self::State, image: &Self::Image, lambda: f64);

    /// Exact minimizer of `λ ↦ F(x + λp)` over the feasible `λ ≥ 0`, for
    /// problems where it is available in closed form.
    #[allow(clippy::too_many_arguments)]
    fn exact_line_search(
        &self,
        _x: &[f64],
        _p: &[f64],
        _f_x: f64,
        _state: &Self::State,
        _image: &Self::Image,
        _cluster: &ClusterSim,
        _ledger: &mut CommLedger,
    ) -> Result<Option<ExactStep>> {
        Ok(None)
    }

    /// Per-worker column blocks `B_k` whose Gram matrices `B_kᵀB_k` form the
    /// block diagonal of `∇²f`, when the problem has that structure.
    fn local_blocks(&self) -> Option<&[SparseColumns]> {
        None
    }
}

/// Builds the initial curvature model at `x`.
///
/// `ScaledIdentity` costs whatever [`Problem::curvature`] costs; a zero
/// gradient gives `a₀ = 1`. `BlockDiagonal` is never materialized.
pub fn build_h0<P: Problem>(
    problem: &P,
    mode: H0Mode,
    x: &[f64],
    grad: &[f64],
    state: &P::State,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<InitialModel> {
    match mode {
        H0Mode::BlockDiagonal if problem.local_blocks().is_some() => Ok(InitialModel::BlockDiagonal),
        H0Mode::BlockDiagonal => {
            Err(crate::Error::Config("block-diagonal H0 needs a problem with local Hessian blocks".into()))
        }
        H0Mode::ScaledIdentity => {
            let gg = crate::linalg::norm_sq(grad);
            if gg == 0.0 {
                return Ok(InitialModel::ScaledIdentity(1.0));
            }
            let curv = problem.curvature(x, state, grad, cluster, ledger)?;
            let a0 = curv.abs() / gg;
            Ok(InitialModel::ScaledIdentity(if a0 > 0.0 { a0 } else { 1.0 }))
        }
    }
}

/// `‖prox_Ψ(x − ∇f) − x‖`, zero exactly at stationary points.
pub fn stationarity_measure<R: Regularizer>(reg: &R, x: &[f64], grad: &[f64]) -> f64 {
    let u: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - g).collect();
    let mut v = vec![0.0; x.len()];
    reg.prox(&u, 1.0, &mut v);
    norm(&crate::linalg::sub(&v, x))
}

/// Keeps the iterate with the smallest objective seen so far. Ties keep
/// the earlier iterate.
#[derive(Debug, Clone, Default)]
pub struct PocketTracker {
    best: Option<(Vec<f64>, f64)>,
    history: Vec<f64>,
}

impl PocketTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Offers a candidate; returns whether it replaced the pocket.
    pub fn update(&mut self, w: &[f64], value: f64) -> bool {
        let better = match &self.best {
            None => true,
            Some((_, best)) => value < *best,
        };
        if better {
            self.best = Some((w.to_vec(), value));
        }
        self.history.push(self.best.as_ref().map_or(value, |b| b.1));
        better
    }

    pub fn best(&self) -> Option<(&[f64], f64)> {
        self.best.as_ref().map(|(w, v)| (w.as_slice(), *v))
    }

    /// The pocket objective after each call.
    pub fn history(&self) -> &[f64] {
        &self.history
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_prox_soft_thresholds() {
        let mut out = [0.0; 3];
        L1Norm::default().prox(&[3.0, -0.5, -2.0], 1.0, &mut out);
        assert_eq!(out, [2.0, 0.0, -1.0]);
    }

    #[test]
    fn dual_prox_closed_form() {
        let reg = SquaredHingeConjugate { c: 0.5 };
        let mut out = [0.0];
        reg.prox(&[-1.0], 1.0, &mut out);
        assert_eq!(out, [0.0]);
        reg.prox(&[1.0], 1.0, &mut out);
        assert_eq!(out, [1.0]);
        assert_eq!(reg.value(&[-1e-12]), f64::INFINITY);
        assert_eq!(reg.value(&[2.0]), 0.0);
    }

    #[test]
    fn coordinate_minimizer_agrees_with_prox() {
        let reg = SquaredHingeConjugate { c: 1.3 };
        for &(x, g, h) in &[(0.5, 0.2, 2.0), (0.0, -1.0, 0.7), (2.0, 3.0, 1.0)] {
            let via_trait_default = {
                let mut out = [0.0];
                reg.prox(&[x - g / h], 1.0 / h, &mut out);
                out[0]
            };
            let direct = reg.coordinate_minimizer(x, g, h);
            assert!((direct - via_trait_default).abs() <= 1e-14 * (1.0 + direct.abs()));
        }
        // h = 0 still has a minimizer thanks to the quadratic term.
        assert!((reg.coordinate_minimizer(5.0, 0.5, 0.0) - 1.3).abs() < 1e-15);
    }

    /// Scalar enumeration: the prox output beats every grid point of the
    /// prox objective, and satisfies the subgradient inclusion.
    #[test]
    fn prox_optimality_by_enumeration() {
        fn check<R: Regularizer>(reg: &R, u: f64, tau: f64, subgrad: impl Fn(f64) -> (f64, f64)) {
            let mut out = [0.0];
            reg.prox(&[u], tau, &mut out);
            let v = out[0];
            let obj = |z: f64| 0.5 * (z - u) * (z - u) + tau * reg.value(&[z]);
            let best = obj(v);
            for i in -4000..=4000 {
                let z = v + f64::from(i) * 1e-3;
                assert!(obj(z) >= best - 1e-12, "u={u} tau={tau} v={v} z={z}");
            }
            // 0 ∈ v − u + τ ∂ψ(v)
            let (lo, hi) = subgrad(v);
            let r = u - v;
            assert!(r >= tau * lo - 1e-10 && r <= tau * hi + 1e-10, "u={u} v={v}");
        }
        let l1 = L1Norm::default();
        let l1_sub = |v: f64| {
            if v > 0.0 {
                (1.0, 1.0)
            } else if v < 0.0 {
                (-1.0, -1.0)
            } else {
                (-1.0, 1.0)
            }
        };
        let hinge = SquaredHingeConjugate { c: 0.7 };
        let hinge_sub = |v: f64| {
            let g = v / (2.0 * 0.7) - 1.0;
            if v > 0.0 {
                (g, g)
            } else {
                (f64::NEG_INFINITY, g)
            }
        };
        for &u in &[-3.0, -0.4, 0.0, 0.3, 1.0, 2.5] {
            for &tau in &[0.1, 1.0, 3.0] {
                check(&l1, u, tau, l1_sub);
                check(&hinge, u, tau, hinge_sub);
            }
        }
    }

    #[test]
    fn stationarity_examples() {
        assert_eq!(stationarity_measure(&ZeroRegularizer, &[1.0, 2.0], &[3.0, 4.0]), 5.0);
        assert_eq!(stationarity_measure(&L1Norm::default(), &[0.0], &[3.0]), 2.0);
    }

    #[test]
    fn stationarity_vanishes_at_lasso_optimum() {
        // min ½(x − 3)² + |x| has minimizer x = 2, found by scalar search.
        let obj = |x: f64| 0.5 * (x - 3.0) * (x - 3.0) + x.abs();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=40000 {
            let x = -10.0 + f64::from(i) * 5e-4;
            if obj(x) < best.1 {
                best = (x, obj(x));
            }
        }
        let x = best.0;
        assert!((x - 2.0).abs() < 1e-12);
        let grad = x - 3.0;
        assert!(stationarity_measure(&L1Norm::default(), &[x], &[grad]) <= 1e-10);
    }

    #[test]
    fn pocket_keeps_the_best() {
        let mut p = PocketTracker::new();
        assert!(p.update(&[1.0], 5.0));
        assert!(p.update(&[2.0], 3.0));
        assert!(!p.update(&[3.0], 4.0));
        assert!(!p.update(&[4.0], 3.0));
        assert_eq!(p.best(), Some((&[2.0][..], 3.0)));
        assert_eq!(p.history(), &[5.0, 3.0, 3.0, 3.0]);
    }

    proptest::proptest! {
        #[test]
        fn pocket_history_is_monotone(values in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            let mut p = PocketTracker::new();
            for (i, v) in values.iter().enumerate() {
                p.update(&[i as f64], *v);
            }
            proptest::prop_assert!(p.history().windows(2).all(|w| w[1] <= w[0]));
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            proptest::prop_assert_eq!(p.best().unwrap().1, min);
        }
    }
}
