use std::time::Instant;

use super::bda::{step_record, BdaRunner};
use super::{IterationRecord, RunOutcome, StopReason, StoppingRule};
use crate::cluster::{ClusterSim, CommLedger};
use crate::error::{Error, Result};
use crate::problems::{ProximalCenter, SquaredHingeDual};

/// Tuned `(κ, warmup)` pairs for the three benchmark datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalystPreset {
    News,
    Epsilon,
    Webspam,
}

impl CatalystPreset {
    pub fn kappa(self) -> f64 {
        match self {
            CatalystPreset::News => 17.0,
            CatalystPreset::Epsilon => 12000.0,
            CatalystPreset::Webspam => 2000.0,
        }
    }

    pub fn warmup(self) -> usize {
        match self {
            CatalystPreset::News => 0,
            CatalystPreset::Epsilon => 2000,
            CatalystPreset::Webspam => 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalystConfig {
    pub kappa: f64,
    /// Strong-convexity modulus of the dual, `1/(2C)`.
    pub mu: f64,
    /// Block-diagonal steps per outer iteration.
    pub inner_iters: usize,
    /// Plain block-diagonal steps before acceleration starts.
    pub warmup: usize,
    /// Budget on block-diagonal steps, warmup included.
    pub max_iters: usize,
    pub epochs: usize,
    pub seed: u64,
    pub stopping: StoppingRule,
}

impl CatalystConfig {
    /// Defaults for `problem` with `workers` machines: `K` inner steps.
    pub fn new(problem: &SquaredHingeDual, kappa: f64, workers: usize) -> Self {
        CatalystConfig {
            kappa,
            mu: problem.strong_convexity(),
            inner_iters: workers.max(1),
            warmup: 0,
            max_iters: 1000,
            epochs: 1,
            seed: 0,
            stopping: StoppingRule::default(),
        }
    }

    pub fn with_preset(problem: &SquaredHingeDual, preset: CatalystPreset, workers: usize) -> Self {
        CatalystConfig { warmup: preset.warmup(), ..Self::new(problem, preset.kappa(), workers) }
    }

    /// `κ` at the smallest positive double: `q = 1`, `β = 0`, and each outer
    /// iteration reduces to plain block-diagonal steps.
    pub fn vanishing(problem: &SquaredHingeDual, workers: usize) -> Self {
        Self::new(problem, f64::MIN_POSITIVE, workers)
    }

    pub fn q(&self) -> f64 {
        self.mu / (self.mu + self.kappa)
    }

    pub fn beta(&self) -> f64 {
        let r = self.q().sqrt();
        (1.0 - r) / (1.0 + r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("κ must be positive, got {}", self.kappa)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!("μ must be positive, got {}", self.mu)));
        }
        if self.inner_iters == 0 || self.epochs == 0 {
            return Err(Error::Config("Catalyst needs at least one inner step and one epoch".into()));
        }
        Ok(())
    }
}

/// Catalyst around the block-diagonal method.
///
/// Each outer iteration minimizes `D(α) + κ/2‖α − y‖²` approximately with
/// `inner_iters` block-diagonal steps warm-started at the current iterate,
/// then extrapolates `y = α_k + β(α_k − α_{k−1})`. Records hold the plain
/// dual objective after every inner step.
pub fn catalyst_run(
    problem: &SquaredHingeDual,
    config: &CatalystConfig,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<RunOutcome> {
    config.validate()?;
    let clock = Instant::now();
    let stopping = config.stopping;
    let mut runner = BdaRunner::new(problem, cluster, None, config.epochs, config.seed, ledger)?;
    let f0 = runner.objective();
    let mut records = vec![IterationRecord::start(f0, stopping.rel_err(f0), *ledger, &clock)];
    let done = |records: &Vec<IterationRecord>, f: f64| {
        if stopping.target_reached(f) {
            Some(StopReason::TargetReached)
        } else if records.len() > config.max_iters {
            Some(StopReason::MaxIterations)
        } else {
            None
        }
    };

    let stop = 'run: {
        for _ in 0..config.warmup {
            if let Some(s) = done(&records, runner.objective()) {
                break 'run s;
            }
            let f = runner.objective();
            let step = match runner.step(None, f, ledger) {
                Ok(s) => s,
                Err(e) => break 'run StopReason::Failed(e),
            };
            if step.nonpositive {
                break 'run StopReason::NoProgress;
            }
            records.push(step_record(records.len(), &step, &stopping, *ledger, &clock));
        }

        let beta = config.beta();
        let mut prev = runner.x().to_vec();
        let mut y = prev.clone();
        loop {
            if let Some(s) = done(&records, runner.objective()) {
                break 'run s;
            }
            let center = ProximalCenter { kappa: config.kappa, y: &y };
            let (mut aug, _) = match problem.augmented_objective(runner.x(), runner.state(), center, cluster, ledger) {
                Ok(v) => v,
                Err(e) => break 'run StopReason::Failed(e),
            };
            let mut moved = false;
            for _ in 0..config.inner_iters {
                if let Some(s) = done(&records, runner.objective()) {
                    break 'run s;
                }
                let step = match runner.step(Some(center), aug, ledger) {
                    Ok(s) => s,
                    Err(e) => break 'run StopReason::Failed(e),
                };
                if step.nonpositive {
                    break;
                }
                moved = true;
                aug = step.augmented;
                records.push(step_record(records.len(), &step, &stopping, *ledger, &clock));
            }
            if !moved {
                break 'run StopReason::NoProgress;
            }
            let x = runner.x();
            let next: Vec<f64> = x.iter().zip(&prev).map(|(a, b)| a + beta * (a - b)).collect();
            prev.copy_from_slice(x);
            y = next;
        }
    };
    Ok(RunOutcome { x: runner.x().to_vec(), records, stop, ledger: *ledger })
}
