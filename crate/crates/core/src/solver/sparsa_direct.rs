use std::time::Instant;

use super::{IterationRecord, RunOutcome, StopReason, StoppingRule};
use crate::cluster::{ClusterSim, CommLedger};
use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, norm_sq};
use crate::problems::{build_h0, H0Mode, InitialModel, Problem, Regularizer};

#[derive(Debug, Clone, PartialEq)]
pub struct SparsaDirectConfig {
    pub beta: f64,
    pub sigma0: f64,
    pub max_iters: usize,
    pub max_backoffs: usize,
    pub stopping: StoppingRule,
}

impl Default for SparsaDirectConfig {
    fn default() -> Self {
        SparsaDirectConfig {
            beta: 2.0,
            sigma0: 1e-2,
            max_iters: 1000,
            max_backoffs: 60,
            stopping: StoppingRule::default(),
        }
    }
}

impl SparsaDirectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(Error::Config(format!("β must exceed 1, got {}", self.beta)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0 < 1.0) {
            return Err(Error::Config(format!("σ₀ must lie in (0, 1), got {}", self.sigma0)));
        }
        Ok(())
    }
}

/// SpaRSA on `F` itself: proximal-gradient steps with a spectral step
/// length and the sufficient-decrease test `F(x⁺) ≤ F(x) − σ₀ψ/2 ‖x⁺ − x‖²`.
///
/// The first `ψ` is the Rayleigh quotient of `∇²f` along `∇f`. Every trial
/// point costs the problem's precompute, one objective round and one
/// scalar round for `‖p‖²`; the spectral update costs one round of two.
pub fn sparsa_direct_run<P: Problem>(
    problem: &P,
    config: &SparsaDirectConfig,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<RunOutcome> {
    config.validate()?;
    let clock = Instant::now();
    let stopping = config.stopping;
    let partition = problem.partition();
    check_len(cluster.workers(), partition.n_blocks())?;
    let n = problem.dim();
    let mut x = vec![0.0; n];
    let mut state = problem.init_state(&x, cluster, ledger)?;
    let mut f = problem.objective(&x, &state, cluster, ledger)?;
    let mut records = vec![IterationRecord::start(f, stopping.rel_err(f), *ledger, &clock)];
    let (_, mut grad) = problem.smooth_value_grad(&x, &state, cluster, ledger)?;
    let mut psi = match build_h0(problem, H0Mode::ScaledIdentity, &x, &grad, &state, cluster, ledger)? {
        InitialModel::ScaledIdentity(a) => a,
        InitialModel::BlockDiagonal => unreachable!(),
    };
    let reg = problem.regularizer();
    let mut u = vec![0.0; n];
    let mut p = vec![0.0; n];

    let stop = 'run: loop {
        if stopping.target_reached(f) {
            break StopReason::TargetReached;
        }
        if records.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        let mut accepted = None;
        for trials in 1..=config.max_backoffs + 1 {
            for ((ui, xi), gi) in u.iter_mut().zip(&x).zip(&grad) {
                *ui = xi - gi / psi;
            }
            reg.prox(&u, 1.0 / psi, &mut p);
            for (pi, xi) in p.iter_mut().zip(&x) {
                *pi -= xi;
            }
            let pp = cluster.map_workers(|k| norm_sq(&p[partition.block(k)]));
            let pp = match cluster.allreduce_scalar(&pp, ledger) {
                Ok(v) => v,
                Err(e) => break 'run StopReason::Failed(e),
            };
            if pp == 0.0 {
                break 'run StopReason::Stationary;
            }
            let trial = problem
                .linesearch_precompute(&p, &state, cluster, ledger)
                .and_then(|image| Ok((problem.trial_objective(&x, &p, 1.0, &state, &image, cluster, ledger)?, image)));
            let (ft, image) = match trial {
                Ok(v) => v,
                Err(e) => break 'run StopReason::Failed(e),
            };
            if ft <= f - 0.5 * config.sigma0 * psi * pp {
                accepted = Some((ft, image, trials, pp));
                break;
            }
            psi *= config.beta;
        }
        let Some((ft, image, trials, pp)) = accepted else {
            break StopReason::Failed(Error::LimitExceeded { what: "SpaRSA backoffs", limit: config.max_backoffs });
        };
        problem.advance(&mut state, &image, 1.0);
        axpy(1.0, &p, &mut x);
        f = ft;
        records.push(IterationRecord {
            iter: records.len(),
            objective: f,
            rel_err: stopping.rel_err(f),
            step_size: 1.0,
            sparsa_iters: 1,
            sparsa_trials: trials,
            gamma: psi,
            ledger: *ledger,
            elapsed_s: clock.elapsed().as_secs_f64(),
            ..IterationRecord::start(f, None, *ledger, &clock)
        });
        if stopping.target_reached(f) || records.len() > config.max_iters {
            continue;
        }
        let new_grad = match problem.smooth_value_grad(&x, &state, cluster, ledger) {
            Ok((_, g)) => g,
            Err(e) => break StopReason::Failed(e),
        };
        let parts = cluster.map_workers(|k| {
            let r = partition.block(k);
            let sy: f64 =
                p[r.clone()].iter().zip(&new_grad[r.clone()]).zip(&grad[r]).map(|((s, a), b)| s * (a - b)).sum();
            vec![sy]
        });
        let sy = match cluster.allreduce_sum(&parts, ledger) {
            Ok(v) => v[0],
            Err(e) => break StopReason::Failed(e),
        };
        let next = sy / pp;
        if next.is_finite() && next > 0.0 {
            psi = next;
        }
        grad = new_grad;
    };
    Ok(RunOutcome { x, records, stop, ledger: *ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SmallDenseMatrix;
    use crate::problems::{DenseQuadratic, L1Norm};
    use crate::solver::relative_error;

    #[test]
    fn solves_a_small_lasso() {
        // f = ½xᵀAx − bᵀx with A = diag(1, 4), b = (2, 2), λ = 1:
        // x* = (1, 0.25), F* = ½(1 + 0.25) − 2.5 + 1.25 = −0.625.
        let a = SmallDenseMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 4.0]).unwrap();
        let prob = DenseQuadratic::new(a, vec![2.0, 2.0], L1Norm { weight: 1.0 }, 2).unwrap();
        let cluster = ClusterSim::new(2).unwrap();
        let mut ledger = CommLedger::new();
        let cfg = SparsaDirectConfig { max_iters: 200, ..SparsaDirectConfig::default() };
        let out = sparsa_direct_run(&prob, &cfg, &cluster, &mut ledger).unwrap();
        assert!(relative_error(out.final_objective(), -0.625) < 1e-10, "{:?}", out.records.last());
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 0.25).abs() < 1e-6);
        assert!(out.records.windows(2).all(|w| w[1].objective <= w[0].objective));
    }
}
