use std::cell::RefCell;
use std::time::Instant;

use super::line_search::{armijo_backtrack, trust_region_step, TrialStep};
use super::{IterationRecord, RunOutcome, SolverConfig, StopReason, Variant};
use crate::cluster::{ClusterSim, CommLedger};
use crate::error::{check_len, Error, Result};
use crate::lbfgs::LbfgsState;
use crate::linalg::{axpy, sub};
use crate::problems::{build_h0, stationarity_measure, InitialModel, Problem};
use crate::subsolver::{block_model_value, blockdiag_cd_solve, sparsa_solve, BlockCdConfig, WarmStart};

/// Runs DPLBFGS from `x = 0`.
pub fn dplbfgs_run<P: Problem>(
    problem: &P,
    config: &SolverConfig,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<RunOutcome> {
    dplbfgs_run_with(problem, config, None, cluster, ledger, |_, _| Ok(()))
}

/// What an observer sees after each accepted step.
pub struct StepView<'a, P: Problem> {
    pub problem: &'a P,
    pub x: &'a [f64],
    pub state: &'a P::State,
    /// The curvature pairs the step was computed with.
    pub model: &'a LbfgsState,
    pub cluster: &'a ClusterSim,
}

/// Everything a step reports back to the outer loop.
struct Move {
    p: Vec<f64>,
    lambda: f64,
    objective: f64,
    sparsa_iters: usize,
    sparsa_trials: usize,
    ls_trials: usize,
    rescales: usize,
}

struct Run<'a, P: Problem> {
    problem: &'a P,
    config: &'a SolverConfig,
    cluster: &'a ClusterSim,
    x: Vec<f64>,
    state: P::State,
    objective: f64,
    grad: Vec<f64>,
    model: LbfgsState,
    block_model: bool,
    iteration: u64,
}

impl<P: Problem> Run<'_, P> {
    fn block_config(&self, scale: f64) -> BlockCdConfig {
        BlockCdConfig { epochs: self.config.block_epochs, scale, shift: 0.0, seed: self.config.seed }
    }

    fn negligible(&self, decrease: f64) -> bool {
        !(decrease < -f64::EPSILON * self.objective.abs())
    }

    fn line_search_step(&mut self, ledger: &mut CommLedger) -> Result<Option<Move>> {
        let (problem, cluster) = (self.problem, self.cluster);
        let reg = problem.regularizer();
        let part = problem.partition();
        let exact = self.config.exact_linesearch;
        let mut block = None;
        let (p, delta, sparsa_iters, sparsa_trials) = if self.block_model {
            let blocks = problem.local_blocks().expect("block model requires local blocks");
            let cfg = self.block_config(1.0);
            let cd = blockdiag_cd_solve(blocks, part, &self.grad, &self.x, reg, &cfg, self.iteration, cluster)?;
            let delta = if exact {
                None
            } else {
                Some(block_model_value(part, &self.grad, &self.x, reg, &cd, &cfg, cluster, ledger)?.0)
            };
            let p = cd.p.clone();
            block = Some(cd);
            (p, delta, 0, 0)
        } else {
            let out = sparsa_solve(
                &self.grad,
                &self.x,
                &self.model,
                1.0,
                reg,
                part,
                &self.config.sparsa,
                None,
                cluster,
                ledger,
            )?;
            (out.p, Some(out.lin), out.iterations, out.trials)
        };
        if let Some(d) = delta {
            if d <= 0.0 && self.negligible(d) {
                return Ok(None);
            }
        }
        let image = problem.linesearch_precompute(&p, &self.state, cluster, ledger)?;
        let before = ledger.rounds;
        let exact_step = if exact {
            problem.exact_line_search(&self.x, &p, self.objective, &self.state, &image, cluster, ledger)?
        } else {
            None
        };
        let (lambda, objective, ls_trials) = match exact_step {
            Some(s) if s.nonpositive => return Ok(None),
            Some(s) => (s.lambda, s.objective, (ledger.rounds - before) as usize),
            None => {
                let delta = match (delta, &block) {
                    (Some(d), _) => d,
                    (None, Some(cd)) => {
                        let cfg = self.block_config(1.0);
                        block_model_value(part, &self.grad, &self.x, reg, cd, &cfg, cluster, ledger)?.0
                    }
                    (None, None) => unreachable!("SpaRSA always reports Δ"),
                };
                let (x, state) = (&self.x, &self.state);
                let out = armijo_backtrack(
                    self.objective,
                    delta,
                    self.config.theta,
                    self.config.sigma1,
                    self.config.max_backtracks,
                    |l| problem.trial_objective(x, &p, l, state, &image, cluster, ledger),
                )?;
                (out.lambda, out.objective, out.trials)
            }
        };
        problem.advance(&mut self.state, &image, lambda);
        axpy(lambda, &p, &mut self.x);
        Ok(Some(Move { p, lambda, objective, sparsa_iters, sparsa_trials, ls_trials, rescales: 0 }))
    }

    fn trust_region_step(&mut self, ledger: &mut CommLedger) -> Result<Option<Move>> {
        let (problem, cluster) = (self.problem, self.cluster);
        let reg = problem.regularizer();
        let part = problem.partition();
        let ledger = RefCell::new(ledger);
        let counts = RefCell::new((0usize, 0usize));
        let (x, grad, state, model) = (&self.x, &self.grad, &self.state, &self.model);
        let block_model = self.block_model;
        let solve = |scale: f64, prev: Option<&TrialStep<Option<WarmStart>>>| {
            let mut ledger = ledger.borrow_mut();
            if block_model {
                let blocks = problem.local_blocks().expect("block model requires local blocks");
                let cfg = self.block_config(scale);
                let cd = blockdiag_cd_solve(blocks, part, grad, x, reg, &cfg, self.iteration, cluster)?;
                let (_, q) = block_model_value(part, grad, x, reg, &cd, &cfg, cluster, &mut ledger)?;
                Ok(TrialStep { p: cd.p, model_value: q, warm: None })
            } else {
                let warm = prev.and_then(|s| s.warm.as_ref());
                let out =
                    sparsa_solve(grad, x, model, scale, reg, part, &self.config.sparsa, warm, cluster, &mut ledger)?;
                let mut c = counts.borrow_mut();
                c.0 += out.iterations;
                c.1 += out.trials;
                let warm = Some(out.warm_start());
                Ok(TrialStep { p: out.p, model_value: out.value, warm })
            }
        };
        let evaluate = |p: &[f64]| {
            let mut ledger = ledger.borrow_mut();
            let image = problem.linesearch_precompute(p, state, cluster, &mut ledger)?;
            let f = problem.trial_objective(x, p, 1.0, state, &image, cluster, &mut ledger)?;
            Ok((f, image))
        };
        let outcome = trust_region_step(
            self.objective,
            self.config.theta,
            self.config.sigma1,
            self.config.max_rescales,
            solve,
            evaluate,
        )?;
        let Some(out) = outcome else { return Ok(None) };
        let (sparsa_iters, sparsa_trials) = counts.into_inner();
        problem.advance(&mut self.state, &out.image, 1.0);
        axpy(1.0, &out.step.p, &mut self.x);
        Ok(Some(Move {
            p: out.step.p,
            lambda: 1.0,
            objective: out.objective,
            sparsa_iters,
            sparsa_trials,
            ls_trials: out.rescales + 1,
            rescales: out.rescales,
        }))
    }
}

/// Runs DPLBFGS from `x0` (zero when `None`), calling `observer` after
/// every accepted step with the new iterate and its caches. Rounds the
/// observer charges land in the run's ledger.
///
/// Per outer iteration: the gradient, one safeguard round (plus the cache
/// update round when a pair is stored), the subproblem solve, the
/// direction image and the line-search or trust-region trials.
pub fn dplbfgs_run_with<P, O>(
    problem: &P,
    config: &SolverConfig,
    x0: Option<&[f64]>,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
    mut observer: O,
) -> Result<RunOutcome>
where
    P: Problem,
    O: FnMut(&StepView<'_, P>, &mut CommLedger) -> Result<()>,
{
    config.validate()?;
    let clock = Instant::now();
    let n = problem.dim();
    let x = match x0 {
        Some(x0) => {
            check_len(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let state = problem.init_state(&x, cluster, ledger)?;
    let objective = problem.objective(&x, &state, cluster, ledger)?;
    if !objective.is_finite() {
        return Err(Error::NonFinite("initial objective"));
    }
    let (_, grad) = problem.smooth_value_grad(&x, &state, cluster, ledger)?;
    let mut model = LbfgsState::new(n, config.memory, config.delta)?;
    let block_model = match build_h0(problem, config.h0, &x, &grad, &state, cluster, ledger)? {
        InitialModel::ScaledIdentity(a0) => {
            model.set_gamma(a0);
            false
        }
        InitialModel::BlockDiagonal => true,
    };
    let stopping = config.stopping;
    let mut records = vec![IterationRecord::start(objective, stopping.rel_err(objective), *ledger, &clock)];
    let mut run = Run { problem, config, cluster, x, state, objective, grad, model, block_model, iteration: 0 };
    let mut pair_accepted = None;
    let stop = loop {
        if stopping.target_reached(run.objective) {
            break StopReason::TargetReached;
        }
        if records.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        run.iteration += 1;
        if run.block_model && run.model.is_full() {
            run.block_model = false;
        }
        let memory_len = run.model.len();
        let used_block = run.block_model;
        let step = match config.variant {
            Variant::LineSearch => run.line_search_step(ledger),
            Variant::TrustRegion => run.trust_region_step(ledger),
        };
        let mv = match step {
            Ok(Some(mv)) => mv,
            Ok(None) => break StopReason::NoProgress,
            Err(e) => break StopReason::Failed(e),
        };
        if !mv.objective.is_finite() {
            break StopReason::Failed(Error::NonFinite("objective"));
        }
        run.objective = mv.objective;
        let view = StepView { problem, x: &run.x, state: &run.state, model: &run.model, cluster };
        if let Err(e) = observer(&view, ledger) {
            break StopReason::Failed(e);
        }
        records.push(IterationRecord {
            iter: records.len(),
            objective: run.objective,
            rel_err: stopping.rel_err(run.objective),
            step_size: mv.lambda,
            sparsa_iters: mv.sparsa_iters,
            sparsa_trials: mv.sparsa_trials,
            ls_trials: mv.ls_trials,
            tr_rescales: mv.rescales,
            pair_accepted,
            memory_len,
            gamma: run.model.gamma(),
            block_model: used_block,
            ledger: *ledger,
            elapsed_s: clock.elapsed().as_secs_f64(),
        });
        if stopping.target_reached(run.objective) {
            break StopReason::TargetReached;
        }
        if records.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        let next = (|| -> Result<(Vec<f64>, bool)> {
            let (_, grad) = problem.smooth_value_grad(&run.x, &run.state, cluster, ledger)?;
            let s: Vec<f64> = mv.p.iter().map(|v| mv.lambda * v).collect();
            let y = sub(&grad, &run.grad);
            let accepted = run.model.admit_pair(&s, &y, problem.partition(), cluster, ledger)?;
            Ok((grad, accepted))
        })();
        match next {
            Ok((grad, accepted)) => {
                run.grad = grad;
                pair_accepted = Some(accepted);
            }
            Err(e) => break StopReason::Failed(e),
        }
        if let Some(tol) = stopping.stationarity_tol {
            let parts = cluster.map_workers(|k| {
                let r = problem.partition().block(k);
                let g = stationarity_measure(problem.regularizer(), &run.x[r.clone()], &run.grad[r]);
                g * g
            });
            match cluster.allreduce_scalar(&parts, ledger) {
                Ok(v) if v.sqrt() <= tol => break StopReason::Stationary,
                Ok(_) => {}
                Err(e) => break StopReason::Failed(e),
            }
        }
    };
    Ok(RunOutcome { x: run.x, records, stop, ledger: *ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SmallDenseMatrix;
    use crate::problems::{DenseQuadratic, L1Norm, ZeroRegularizer};
    use crate::solver::StoppingRule;

    fn spd(n: usize) -> SmallDenseMatrix {
        let mut v = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let base = 1.0 / (1.0 + (i as f64 - j as f64).abs());
                v.push(if i == j { base + 0.5 * i as f64 } else { 0.3 * base });
            }
        }
        SmallDenseMatrix::from_row_major(n, v).unwrap()
    }

    #[test]
    fn smooth_quadratic_reaches_stationarity() {
        let n = 10;
        let a = spd(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let prob = DenseQuadratic::new(a.clone(), b.clone(), ZeroRegularizer, 2).unwrap();
        let cluster = ClusterSim::new(2).unwrap();
        let mut cfg = SolverConfig { max_iters: 100, ..SolverConfig::default() };
        cfg.sparsa.eps1 = 0.0;
        cfg.sparsa.max_iters = 500;
        // Below ~1e-8 the predicted decrease drops under rounding in F.
        cfg.stopping.stationarity_tol = Some(1e-7);
        let out = dplbfgs_run(&prob, &cfg, &cluster, &mut CommLedger::new()).unwrap();
        let ax = a.matvec(&out.x).unwrap();
        let g: f64 = ax.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert_eq!(out.stop, StopReason::Stationary, "{:?}", out.records.last());
        assert!(g <= 1e-7, "{g}");
        assert!(out.records.len() <= 20);
    }

    #[test]
    fn first_step_is_a_prox_gradient_step() {
        let a = SmallDenseMatrix::from_row_major(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let b = vec![3.0, -2.5];
        let prob = DenseQuadratic::new(a, b.clone(), L1Norm::default(), 1).unwrap();
        let cluster = ClusterSim::new(1).unwrap();
        let mut ledger = CommLedger::new();
        let cfg = SolverConfig { max_iters: 1, ..SolverConfig::default() };
        let out = dplbfgs_run(&prob, &cfg, &cluster, &mut ledger).unwrap();
        // a₀ = gᵀAg/‖g‖² with g = −b.
        let g = [-3.0, 2.5];
        let ag = [2.0 * g[0] + 0.5 * g[1], 0.5 * g[0] + g[1]];
        let a0 = (g[0] * ag[0] + g[1] * ag[1]) / (g[0] * g[0] + g[1] * g[1]);
        let lambda = out.records[1].step_size;
        for i in 0..2 {
            let pg = crate::problems::soft_threshold(-g[i] / a0, 1.0 / a0);
            assert!((out.x[i] - lambda * pg).abs() < 1e-14);
        }
    }

    #[test]
    fn trust_region_descends_monotonically() {
        let n = 8;
        let prob = DenseQuadratic::new(spd(n), vec![1.0; n], L1Norm { weight: 0.1 }, 4).unwrap();
        let cluster = ClusterSim::new(4).unwrap();
        let cfg = SolverConfig {
            variant: Variant::TrustRegion,
            max_iters: 30,
            stopping: StoppingRule { stationarity_tol: Some(1e-12), ..StoppingRule::default() },
            ..SolverConfig::default()
        };
        let out = dplbfgs_run(&prob, &cfg, &cluster, &mut CommLedger::new()).unwrap();
        assert!(out.records.windows(2).all(|w| w[1].objective <= w[0].objective));
        assert!(!matches!(out.stop, StopReason::Failed(_)), "{:?}", out.stop);
    }
}
