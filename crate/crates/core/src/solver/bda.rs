use std::time::Instant;

use super::{IterationRecord, RunOutcome, StopReason, StoppingRule};
use crate::cluster::{ClusterSim, CommLedger};
use crate::error::{check_len, Result};
use crate::linalg::axpy;
use crate::problems::{DualState, Problem, ProximalCenter, SquaredHingeDual};
use crate::subsolver::{blockdiag_cd_solve, BlockCdConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct BdaConfig {
    /// Coordinate-descent epochs per outer iteration.
    pub epochs: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub stopping: StoppingRule,
}

impl Default for BdaConfig {
    fn default() -> Self {
        BdaConfig { epochs: 1, seed: 0, max_iters: 1000, stopping: StoppingRule::default() }
    }
}

/// One block-diagonal step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdaStep {
    pub lambda: f64,
    /// The exact line search found no positive step; nothing moved.
    pub nonpositive: bool,
    /// Dual objective after the step.
    pub objective: f64,
    /// Objective including the proximal term, if any.
    pub augmented: f64,
}

/// The block-diagonal method on the squared-hinge dual, one step at a time.
///
/// Each step runs coordinate descent on every worker's local Gram block,
/// assembles `(YX)p` in one round of `d` and takes the exact line search.
#[derive(Debug, Clone)]
pub struct BdaRunner<'a> {
    problem: &'a SquaredHingeDual,
    cluster: &'a ClusterSim,
    x: Vec<f64>,
    state: DualState,
    objective: f64,
    iteration: u64,
    epochs: usize,
    seed: u64,
}

impl<'a> BdaRunner<'a> {
    pub fn new(
        problem: &'a SquaredHingeDual,
        cluster: &'a ClusterSim,
        x0: Option<&[f64]>,
        epochs: usize,
        seed: u64,
        ledger: &mut CommLedger,
    ) -> Result<Self> {
        let x = match x0 {
            Some(x0) => {
                check_len(problem.dim(), x0.len())?;
                x0.to_vec()
            }
            None => vec![0.0; problem.dim()],
        };
        let state = problem.init_state(&x, cluster, ledger)?;
        let objective = problem.objective(&x, &state, cluster, ledger)?;
        Ok(BdaRunner { problem, cluster, x, state, objective, iteration: 0, epochs, seed })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Steps taken so far, including those that did not move.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One step on `D(α) + κ/2‖α − y‖²` (plain `D` without a center).
    /// `augmented` is the current value of that objective.
    pub fn step(
        &mut self,
        center: Option<ProximalCenter<'_>>,
        augmented: f64,
        ledger: &mut CommLedger,
    ) -> Result<BdaStep> {
        let problem = self.problem;
        let (_, mut grad) = problem.smooth_value_grad(&self.x, &self.state, self.cluster, ledger)?;
        let shift = match center {
            Some(c) => {
                check_len(self.x.len(), c.y.len())?;
                for ((g, x), y) in grad.iter_mut().zip(&self.x).zip(c.y) {
                    *g += c.kappa * (x - y);
                }
                c.kappa
            }
            None => 0.0,
        };
        let cfg = BlockCdConfig { epochs: self.epochs, scale: 1.0, shift, seed: self.seed };
        let blocks = problem.local_blocks().expect("dual problem exposes its blocks");
        let cd = blockdiag_cd_solve(
            blocks,
            problem.partition(),
            &grad,
            &self.x,
            problem.regularizer(),
            &cfg,
            self.iteration,
            self.cluster,
        )?;
        self.iteration += 1;
        let image = problem.linesearch_precompute(&cd.p, &self.state, self.cluster, ledger)?;
        let s = problem.exact_step(
            &self.x,
            &cd.p,
            augmented,
            self.objective,
            &self.state,
            &image,
            center,
            self.cluster,
            ledger,
        )?;
        if !s.nonpositive {
            problem.advance(&mut self.state, &image, s.lambda);
            axpy(s.lambda, &cd.p, &mut self.x);
            self.objective = s.original;
        }
        Ok(BdaStep { lambda: s.lambda, nonpositive: s.nonpositive, objective: self.objective, augmented: s.objective })
    }
}

pub(super) fn step_record(
    iter: usize,
    step: &BdaStep,
    stopping: &StoppingRule,
    ledger: CommLedger,
    clock: &Instant,
) -> IterationRecord {
    IterationRecord {
        iter,
        objective: step.objective,
        rel_err: stopping.rel_err(step.objective),
        step_size: step.lambda,
        block_model: true,
        ledger,
        elapsed_s: clock.elapsed().as_secs_f64(),
        ..IterationRecord::start(step.objective, None, ledger, clock)
    }
}

/// Plain block-diagonal method from `α = 0`.
pub fn bda_run(
    problem: &SquaredHingeDual,
    config: &BdaConfig,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<RunOutcome> {
    let clock = Instant::now();
    let mut runner = BdaRunner::new(problem, cluster, None, config.epochs, config.seed, ledger)?;
    let stopping = config.stopping;
    let f0 = runner.objective();
    let mut records = vec![IterationRecord::start(f0, stopping.rel_err(f0), *ledger, &clock)];
    let stop = loop {
        if stopping.target_reached(runner.objective()) {
            break StopReason::TargetReached;
        }
        if records.len() > config.max_iters {
            break StopReason::MaxIterations;
        }
        let f = runner.objective();
        let step = match runner.step(None, f, ledger) {
            Ok(s) => s,
            Err(e) => break StopReason::Failed(e),
        };
        if step.nonpositive {
            break StopReason::NoProgress;
        }
        records.push(step_record(records.len(), &step, &stopping, *ledger, &clock));
    };
    Ok(RunOutcome { x: runner.x().to_vec(), records, stop, ledger: *ledger })
}
