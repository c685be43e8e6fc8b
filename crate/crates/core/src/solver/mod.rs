//! Outer loops: DPLBFGS with line search or trust region, the
//! block-diagonal baseline with its Catalyst acceleration, SpaRSA applied
//! directly to `F`, and the proximal-gradient reference solver.

mod bda;
mod catalyst;
mod dplbfgs;
mod line_search;
mod reference;
mod sparsa_direct;

use std::time::Instant;

pub use bda::{bda_run, BdaConfig, BdaRunner, BdaStep};
pub use catalyst::{catalyst_run, CatalystConfig, CatalystPreset};
pub use dplbfgs::{dplbfgs_run, dplbfgs_run_with, StepView};
pub use line_search::{armijo_backtrack, trust_region_step, LineSearchOutcome, TrialStep, TrustRegionOutcome};
pub use reference::{reference_solve, ReferenceSolution, REFERENCE_ITERATIONS};
pub use sparsa_direct::{sparsa_direct_run, SparsaDirectConfig};

use crate::cluster::CommLedger;
use crate::error::{Error, Result};
use crate::lbfgs::{DEFAULT_DELTA, DEFAULT_MEMORY};
use crate::problems::H0Mode;
use crate::subsolver::SparsaConfig;

/// Globalization of the DPLBFGS step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    LineSearch,
    TrustRegion,
}

/// When to stop, beyond the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StoppingRule {
    /// Reference optimum `F*` used for the relative error `|F − F*|/|F*|`.
    pub reference: Option<f64>,
    /// Stop once the relative error is at most this.
    pub target_rel_err: Option<f64>,
    /// Stop once `‖prox(x − ∇f) − x‖` is at most this; costs one scalar
    /// round per iteration.
    pub stationarity_tol: Option<f64>,
}

impl StoppingRule {
    pub fn rel_err(&self, objective: f64) -> Option<f64> {
        self.reference.map(|r| relative_error(objective, r))
    }

    fn target_reached(&self, objective: f64) -> bool {
        match (self.rel_err(objective), self.target_rel_err) {
            (Some(e), Some(t)) => e <= t,
            _ => false,
        }
    }
}

/// `|F − F*| / |F*|`, or the absolute gap when `F* = 0`.
pub fn relative_error(objective: f64, reference: f64) -> f64 {
    let gap = (objective - reference).abs();
    if reference == 0.0 {
        gap
    } else {
        gap / reference.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    pub theta: f64,
    pub sigma1: f64,
    pub memory: usize,
    pub delta: f64,
    pub sparsa: SparsaConfig,
    pub max_iters: usize,
    pub stopping: StoppingRule,
    /// Closed-form line search when the problem offers one.
    pub exact_linesearch: bool,
    pub h0: H0Mode,
    /// Coordinate-descent epochs per step while the block-diagonal model
    /// is in use.
    pub block_epochs: usize,
    pub seed: u64,
    pub max_backtracks: usize,
    pub max_rescales: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            variant: Variant::LineSearch,
            theta: 0.5,
            sigma1: 1e-4,
            memory: DEFAULT_MEMORY,
            delta: DEFAULT_DELTA,
            sparsa: SparsaConfig::default(),
            max_iters: 100,
            stopping: StoppingRule::default(),
            exact_linesearch: false,
            h0: H0Mode::ScaledIdentity,
            block_epochs: 1,
            seed: 0,
            max_backtracks: 50,
            max_rescales: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("θ must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.sigma1 > 0.0 && self.sigma1 < 1.0) {
            return Err(Error::Config(format!("σ₁ must lie in (0, 1), got {}", self.sigma1)));
        }
        if self.block_epochs == 0 {
            return Err(Error::Config("block coordinate descent needs at least one epoch".into()));
        }
        self.sparsa.validate()
    }
}

/// Why an outer loop ended.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    TargetReached,
    Stationary,
    MaxIterations,
    /// The model predicted no decrease distinguishable from rounding.
    NoProgress,
    /// The run aborted; the records up to this point are kept.
    Failed(Error),
}

/// One row of a trajectory. Row 0 describes the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub rel_err: Option<f64>,
    pub step_size: f64,
    pub sparsa_iters: usize,
    /// SpaRSA acceptance tests, one allreduce each.
    pub sparsa_trials: usize,
    pub ls_trials: usize,
    pub tr_rescales: usize,
    /// Whether the pair offered before this step was stored.
    pub pair_accepted: Option<bool>,
    /// Stored pairs when the step was computed.
    pub memory_len: usize,
    pub gamma: f64,
    pub block_model: bool,
    pub ledger: CommLedger,
    pub elapsed_s: f64,
}

impl IterationRecord {
    fn start(objective: f64, rel_err: Option<f64>, ledger: CommLedger, clock: &Instant) -> Self {
        IterationRecord {
            iter: 0,
            objective,
            rel_err,
            step_size: 0.0,
            sparsa_iters: 0,
            sparsa_trials: 0,
            ls_trials: 0,
            tr_rescales: 0,
            pair_accepted: None,
            memory_len: 0,
            gamma: 0.0,
            block_model: false,
            ledger,
            elapsed_s: clock.elapsed().as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub x: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
    pub ledger: CommLedger,
}

impl RunOutcome {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }
}
