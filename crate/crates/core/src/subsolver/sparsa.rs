use crate::cluster::{ClusterSim, CommLedger, Partition};
use crate::error::{check_len, Error, Result};
use crate::lbfgs::{LbfgsState, Projection};
use crate::problems::Regularizer;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsaConfig {
    /// Factor by which `ψ` grows after a failed acceptance test.
    pub beta: f64,
    pub sigma0: f64,
    /// Stop once a step is shorter than `eps1` times the first step.
    pub eps1: f64,
    pub max_iters: usize,
    pub max_backoffs: usize,
}

impl Default for SparsaConfig {
    fn default() -> Self {
        SparsaConfig { beta: 2.0, sigma0: 1e-2, eps1: 1e-2, max_iters: 100, max_backoffs: 60 }
    }
}

impl SparsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0) {
            return Err(Error::Config(format!("β must exceed 1, got {}", self.beta)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0 < 1.0) {
            return Err(Error::Config(format!("σ₀ must lie in (0, 1), got {}", self.sigma0)));
        }
        if !(self.eps1 >= 0.0) {
            return Err(Error::Config(format!("ε₁ must be nonnegative, got {}", self.eps1)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("SpaRSA needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// A previously computed point of the same subproblem, possibly under a
/// different scaling of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub p: Vec<f64>,
    pub proj: Projection,
    /// `∇f(x)ᵀp + Ψ(x + p) − Ψ(x)`.
    pub lin: f64,
    pub norm_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsaOutcome {
    pub p: Vec<f64>,
    pub proj: Projection,
    /// `Δ = ∇f(x)ᵀp + Ψ(x + p) − Ψ(x)`.
    pub lin: f64,
    /// `pᵀHp` of the unscaled model.
    pub curvature: f64,
    pub norm_sq: f64,
    /// `Q(p)` under the scaled model.
    pub value: f64,
    /// Accepted updates.
    pub iterations: usize,
    /// Acceptance tests, each one allreduce.
    pub trials: usize,
    /// `ψ` before any backoff, one per iteration.
    pub initial_psi: Vec<f64>,
    /// `Q(p⁽ⁱ⁾)` for `i = 0, 1, …`.
    pub history: Vec<f64>,
}

impl SparsaOutcome {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart { p: self.p.clone(), proj: self.proj.clone(), lin: self.lin, norm_sq: self.norm_sq }
    }
}

/// Approximately minimizes
/// `Q(p) = ∇f(x)ᵀp + (scale/2) pᵀHp + Ψ(x + p) − Ψ(x)` by SpaRSA.
///
/// Every acceptance test reduces `[Uᵀp_trial, Δ-part, ‖p_trial‖²,
/// ‖p_trial − p‖²]` in a single round of `2m(t) + 3` scalars; the reduced
/// `Uᵀp` doubles as the projection needed for the next gradient
/// `∇f(x) + scale·Hp`, and the spectral estimate
/// `ψ = (Δp)ᵀ(scale·H)(Δp)/‖Δp‖²` follows from two consecutive
/// projections without further communication.
///
/// The warm start is used only when its objective is negative.
#[allow(clippy::too_many_arguments)]
pub fn sparsa_solve<R: Regularizer>(
    grad: &[f64],
    x: &[f64],
    model: &LbfgsState,
    scale: f64,
    reg: &R,
    partition: &Partition,
    config: &SparsaConfig,
    warm: Option<&WarmStart>,
    cluster: &ClusterSim,
    ledger: &mut CommLedger,
) -> Result<SparsaOutcome> {
    config.validate()?;
    let n = model.dim();
    check_len(n, grad.len())?;
    check_len(n, x.len())?;
    check_len(n, partition.total())?;
    check_len(cluster.workers(), partition.n_blocks())?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Config(format!("model scale must be positive, got {scale}")));
    }
    let psi_x: Vec<f64> = partition.blocks().iter().map(|r| reg.value(&x[r.clone()])).collect();
    let q_of = |lin: f64, norm_sq: f64, proj: &Projection| lin + 0.5 * scale * model.quad_form(norm_sq, proj);

    let zero = model.projection(&vec![0.0; 2 * model.len()])?;
    let mut p = vec![0.0; n];
    let mut proj = zero;
    let (mut lin, mut norm_sq, mut value) = (0.0, 0.0, 0.0);
    if let Some(w) = warm {
        check_len(n, w.p.len())?;
        let v = q_of(w.lin, w.norm_sq, &w.proj);
        if v < 0.0 {
            p.clone_from(&w.p);
            proj = w.proj.clone();
            lin = w.lin;
            norm_sq = w.norm_sq;
            value = v;
        }
    }

    let mut out = SparsaOutcome {
        p: Vec::new(),
        proj: proj.clone(),
        lin,
        curvature: 0.0,
        norm_sq,
        value,
        iterations: 0,
        trials: 0,
        initial_psi: Vec::new(),
        history: vec![value],
    };
    let mut psi = scale * model.gamma();
    let mut first_step: Option<f64> = None;
    let mut fhat = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut u = vec![0.0; n];

    for _ in 0..config.max_iters {
        // ∇f̂(p) = ∇f(x) + scale·Hp, each worker on its own rows.
        for r in partition.blocks() {
            model.apply_rows(&p, &proj, r.clone(), &mut fhat);
            for i in r.clone() {
                fhat[i] = grad[i] + scale * fhat[i];
            }
        }
        out.initial_psi.push(psi);
        let mut backoffs = 0;
        let (new_proj, new_lin, new_norm_sq, step_sq, new_value) = loop {
            out.trials += 1;
            let parts = cluster.map_workers(|k| {
                let r = partition.block(k);
                for i in r.clone() {
                    u[i] = x[i] + p[i] - fhat[i] / psi;
                }
                reg.prox(&u[r.clone()], 1.0 / psi, &mut trial[r.clone()]);
                let mut partial = model.partial_products(vec_sub_into(&mut trial, x, r.clone()), r.clone());
                let (mut lin_k, mut nrm, mut step) = (0.0, 0.0, 0.0);
                let mut moved = Vec::with_capacity(r.len());
                for i in r.clone() {
                    lin_k += grad[i] * trial[i];
                    nrm += trial[i] * trial[i];
                    step += (trial[i] - p[i]) * (trial[i] - p[i]);
                    moved.push(x[i] + trial[i]);
                }
                lin_k += reg.value(&moved) - psi_x[k];
                partial.extend([lin_k, nrm, step]);
                partial
            });
            let reduced = cluster.allreduce_sum(&parts, ledger)?;
            let m2 = 2 * model.len();
            let t_proj = model.projection(&reduced[..m2])?;
            let (t_lin, t_norm, t_step) = (reduced[m2], reduced[m2 + 1], reduced[m2 + 2]);
            let t_value = q_of(t_lin, t_norm, &t_proj);
            if !t_value.is_finite() {
                return Err(Error::NonFinite("SpaRSA subproblem objective"));
            }
            if t_value <= value - 0.5 * config.sigma0 * psi * t_step {
                break (t_proj, t_lin, t_norm, t_step, t_value);
            }
            backoffs += 1;
            if backoffs > config.max_backoffs {
                return Err(Error::LimitExceeded { what: "SpaRSA backoffs", limit: config.max_backoffs });
            }
            psi *= config.beta;
        };
        let step_norm = step_sq.sqrt();
        // ψ for the next iteration from the curvature along the step.
        let dproj = new_proj.minus(&proj);
        let next_psi = scale * model.quad_form(step_sq, &dproj) / step_sq;
        std::mem::swap(&mut p, &mut trial);
        proj = new_proj;
        lin = new_lin;
        norm_sq = new_norm_sq;
        value = new_value;
        out.iterations += 1;
        out.history.push(value);
        let first = *first_step.get_or_insert(step_norm);
        if step_norm == 0.0 || (out.iterations > 1 && step_norm <= config.eps1 * first) {
            break;
        }
        if next_psi.is_finite() && next_psi > 0.0 {
            psi = next_psi;
        }
    }
    out.curvature = model.quad_form(norm_sq, &proj);
    out.p = p;
    out.proj = proj;
    out.lin = lin;
    out.norm_sq = norm_sq;
    out.value = value;
    Ok(out)
}

/// Turns `trial[r]` from `x + p` into `p` and returns the full buffer.
fn vec_sub_into<'a>(trial: &'a mut [f64], x: &[f64], r: std::ops::Range<usize>) -> &'a [f64] {
    for i in r {
        trial[i] -= x[i];
    }
    trial
}
