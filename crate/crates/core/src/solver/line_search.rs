use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub lambda: f64,
    pub objective: f64,
    pub trials: usize,
}

/// Largest `λ ∈ {1, θ, θ², …}` with `F(x + λp) ≤ F(x) + λσ₁Δ`.
///
/// `trial(λ)` returns `F(x + λp)`. `Δ` must be negative.
pub fn armijo_backtrack<T>(
    f_x: f64,
    delta: f64,
    theta: f64,
    sigma1: f64,
    max_backtracks: usize,
    mut trial: T,
) -> Result<LineSearchOutcome>
where
    T: FnMut(f64) -> Result<f64>,
{
    if !(delta < 0.0) {
        return Err(Error::Invariant(format!("direction is not a descent direction (Δ = {delta:e})")));
    }
    let mut lambda = 1.0;
    for trials in 1..=max_backtracks + 1 {
        let f = trial(lambda)?;
        if f.is_nan() {
            return Err(Error::NonFinite("line-search objective"));
        }
        if f <= f_x + lambda * sigma1 * delta {
            return Ok(LineSearchOutcome { lambda, objective: f, trials });
        }
        lambda *= theta;
    }
    Err(Error::LimitExceeded { what: "line-search backtracks", limit: max_backtracks })
}

/// A candidate step from the subproblem solver, with whatever the solver
/// needs to warm-start the next solve.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialStep<W> {
    pub p: Vec<f64>,
    /// `Q_H(p; x)` under the scaling used to compute `p`.
    pub model_value: f64,
    pub warm: W,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionOutcome<W, I> {
    pub step: TrialStep<W>,
    pub objective: f64,
    pub image: I,
    /// Final multiplier of the quadratic term.
    pub scale: f64,
    pub rescales: usize,
}

/// Accepts `p` once `F(x + p) − F(x) ≤ σ₁ Q_H(p; x)`; otherwise scales
/// the quadratic term by `1/θ` and re-solves.
///
/// `solve(scale, previous)` returns a step for `Q_{scale·H}`;
/// `evaluate(p)` returns `F(x + p)` and the direction image used to move
/// the caches. Returns `None` when the model promises no decrease.
pub fn trust_region_step<W, I, S, E>(
    f_x: f64,
    theta: f64,
    sigma1: f64,
    max_rescales: usize,
    mut solve: S,
    mut evaluate: E,
) -> Result<Option<TrustRegionOutcome<W, I>>>
where
    S: FnMut(f64, Option<&TrialStep<W>>) -> Result<TrialStep<W>>,
    E: FnMut(&[f64]) -> Result<(f64, I)>,
{
    let mut scale = 1.0;
    let mut previous: Option<TrialStep<W>> = None;
    for rescales in 0..=max_rescales {
        let step = solve(scale, previous.as_ref())?;
        if !(step.model_value < -f64::EPSILON * f_x.abs()) {
            return Ok(None);
        }
        let (f, image) = evaluate(&step.p)?;
        if f.is_nan() {
            return Err(Error::NonFinite("trust-region objective"));
        }
        if f - f_x <= sigma1 * step.model_value {
            return Ok(Some(TrustRegionOutcome { step, objective: f, image, scale, rescales }));
        }
        scale /= theta;
        previous = Some(step);
    }
    Err(Error::LimitExceeded { what: "trust-region rescales", limit: max_rescales })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_square(x: f64) -> f64 {
        0.5 * x * x
    }

    #[test]
    fn unit_step_on_quadratic() {
        let out = armijo_backtrack(0.5, -1.0, 0.5, 1e-4, 50, |l| Ok(half_square(1.0 - l))).unwrap();
        assert_eq!((out.lambda, out.objective, out.trials), (1.0, 0.0, 1));
    }

    #[test]
    fn backtracks_twice_on_long_step() {
        // x = 1, p = −4, Δ = ∇f·p = −4.
        let out = armijo_backtrack(0.5, -4.0, 0.5, 1e-4, 50, |l| Ok(half_square(1.0 - 4.0 * l))).unwrap();
        assert_eq!((out.lambda, out.trials), (0.25, 3));
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn ascent_direction_is_an_error() {
        assert!(matches!(armijo_backtrack(0.5, 0.0, 0.5, 1e-4, 50, |_| Ok(0.0)), Err(Error::Invariant(_))));
        assert!(matches!(armijo_backtrack(0.5, -1.0, 0.5, 1e-4, 3, |_| Ok(1.0)), Err(Error::LimitExceeded { .. })));
    }

    /// `f(x) = 50x²` from `x = 1` with the model `Q(p) = 100p + (ε/2)p²`
    /// and no regularizer; the exact model step is `−100/(scale·ε)`.
    #[test]
    fn tiny_model_forces_rescaling() {
        let eps = 1.0;
        let f = |x: f64| 50.0 * x * x;
        let out = trust_region_step(
            f(1.0),
            0.5,
            1e-4,
            50,
            |scale, _prev: Option<&TrialStep<()>>| {
                let h = scale * eps;
                let p = -100.0 / h;
                Ok(TrialStep { p: vec![p], model_value: 100.0 * p + 0.5 * h * p * p, warm: () })
            },
            |p| Ok((f(1.0 + p[0]), ())),
        )
        .unwrap()
        .unwrap();
        assert!(out.rescales >= 1);
        assert!(out.objective - f(1.0) <= 1e-4 * out.step.model_value);
        assert!(out.step.model_value <= 0.0);
    }

    #[test]
    fn exact_model_accepts_immediately() {
        let f = |x: f64| 2.0 * x * x - x;
        let out = trust_region_step(
            f(0.0),
            0.5,
            1e-4,
            50,
            |scale, _: Option<&TrialStep<()>>| {
                let p = 1.0 / (4.0 * scale);
                Ok(TrialStep { p: vec![p], model_value: -p + 2.0 * scale * p * p, warm: () })
            },
            |p| Ok((f(p[0]), ())),
        )
        .unwrap()
        .unwrap();
        assert_eq!((out.rescales, out.scale), (0, 1.0));
        assert_eq!(out.step.p, vec![0.25]);
    }

    #[test]
    fn zero_model_decrease_stops() {
        let out = trust_region_step(
            1.0,
            0.5,
            1e-4,
            50,
            |_, _: Option<&TrialStep<()>>| Ok(TrialStep { p: vec![0.0], model_value: 0.0, warm: () }),
            |_| Ok((1.0, ())),
        )
        .unwrap();
        assert!(out.is_none());
    }
}
