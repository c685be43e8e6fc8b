use crate::cluster::{ClusterSim, CommLedger};
use crate::error::{Error, Result};
use crate::problems::{Problem, Regularizer};

/// Iterations used for reference optima.
pub const REFERENCE_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

/// Proximal gradient with the fixed step `1/L` from zero. The ledger is
/// a scratch one; reference solves are not part of any measured run.
pub fn reference_solve<P: Problem>(problem: &P, iterations: usize, cluster: &ClusterSim) -> Result<ReferenceSolution> {
    let mut ledger = CommLedger::new();
    let l = problem.lipschitz();
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Invariant(format!("Lipschitz estimate must be positive, got {l}")));
    }
    let step = 1.0 / l;
    let n = problem.dim();
    let reg = problem.regularizer();
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; n];
    for _ in 0..iterations {
        let state = problem.init_state(&x, cluster, &mut ledger)?;
        let (_, g) = problem.smooth_value_grad(&x, &state, cluster, &mut ledger)?;
        for ((ui, xi), gi) in u.iter_mut().zip(&x).zip(&g) {
            *ui = xi - step * gi;
        }
        reg.prox(&u, step, &mut x);
    }
    let state = problem.init_state(&x, cluster, &mut ledger)?;
    let objective = problem.objective(&x, &state, cluster, &mut ledger)?;
    if !objective.is_finite() {
        return Err(Error::NonFinite("reference objective"));
    }
    Ok(ReferenceSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SmallDenseMatrix;
    use crate::problems::{DenseQuadratic, L1Norm};

    #[test]
    fn lasso_reference() {
        let a = SmallDenseMatrix::from_row_major(2, vec![1.0, 0.0, 0.0, 4.0]).unwrap();
        let prob = DenseQuadratic::new(a, vec![2.0, 2.0], L1Norm { weight: 1.0 }, 1).unwrap();
        let sol = reference_solve(&prob, 500, &ClusterSim::new(1).unwrap()).unwrap();
        assert!((sol.objective + 0.625).abs() < 1e-14);
        assert!((sol.x[0] - 1.0).abs() < 1e-12 && (sol.x[1] - 0.25).abs() < 1e-12);
    }
}
