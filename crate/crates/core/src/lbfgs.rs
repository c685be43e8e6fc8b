//! Compact limited-memory BFGS model `H = γI − U M⁻¹ Uᵀ`.
//!
//! With `S = [s_1 … s_m]`, `Y = [y_1 … y_m]` (oldest first),
//!
//! ```text
//! U = [γS, Y],   M = [ γSᵀS   L ]
//!                    [ Lᵀ    −D ]
//! ```
//!
//! where `D = diag(s_iᵀy_i)` and `L` is the strictly lower triangle of
//! `SᵀY`. Pairs are stored as full-length vectors whose rows are owned by
//! the workers of a variable partition; the caches `SᵀS` and the lower
//! triangle of `SᵀY` are updated from reduced inner products.

use std::collections::VecDeque;

use crate::cluster::{ClusterSim, CommLedger, Partition};
use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, SmallDenseMatrix, SymmetricFactor};

pub const DEFAULT_MEMORY: usize = 10;
pub const DEFAULT_DELTA: f64 = 1e-10;

/// Largest dimension [`LbfgsState::materialize_dense`] accepts.
pub const MATERIALIZE_LIMIT: usize = 64;

#[derive(Debug, Clone)]
pub struct LbfgsState {
    dim: usize,
    memory: usize,
    delta: f64,
    gamma: f64,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    /// `ss[i][j] = s_iᵀs_j`.
    ss: Vec<Vec<f64>>,
    /// `sy[i][j] = s_iᵀy_j` for `j ≤ i`.
    sy: Vec<Vec<f64>>,
    factor: Option<SymmetricFactor>,
}

/// `Uᵀp` together with `M⁻¹Uᵀp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub w: Vec<f64>,
    pub c: Vec<f64>,
}

impl Projection {
    /// Difference of two projections of the same model, i.e. the
    /// projection of `p − p'`.
    pub fn minus(&self, other: &Projection) -> Projection {
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Projection { w: sub(&self.w, &other.w), c: sub(&self.c, &other.c) }
    }
}

impl LbfgsState {
    pub fn new(dim: usize, memory: usize, delta: f64) -> Result<Self> {
        if memory == 0 {
            return Err(Error::Config("L-BFGS memory must be positive".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("safeguard δ must be positive, got {delta}")));
        }
        Ok(LbfgsState {
            dim,
            memory,
            delta,
            gamma: 1.0,
            s: VecDeque::new(),
            y: VecDeque::new(),
            ss: Vec::new(),
            sy: Vec::new(),
            factor: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Number of stored pairs `m(t)`.
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.s.len() == self.memory
    }

    /// Sets the scale of the empty model `H = γI`. Ignored once pairs are
    /// stored.
    pub fn set_gamma(&mut self, gamma: f64) {
        if self.is_empty() && gamma > 0.0 && gamma.is_finite() {
            self.gamma = gamma;
        }
    }

    /// Stored pairs, oldest first.
    pub fn pairs(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.s.iter().zip(&self.y).map(|(s, y)| (s.as_slice(), y.as_slice()))
    }

    /// The cached `SᵀS`.
    pub fn cached_ss(&self) -> &[Vec<f64>] {
        &self.ss
    }

    /// The cached lower triangle (with diagonal) of `SᵀY`, row by row.
    pub fn cached_sy_lower(&self) -> &[Vec<f64>] {
        &self.sy
    }

    /// Offers a curvature pair; returns whether it was stored.
    ///
    /// Costs one round of three scalars for the safeguard test and, when a
    /// pair is accepted and older pairs remain, one round of `2(m(t) − 1)`
    /// inner products against the retained pairs.
    pub fn admit_pair(
        &mut self,
        s: &[f64],
        y: &[f64],
        partition: &Partition,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<bool> {
        check_len(self.dim, s.len())?;
        check_len(self.dim, y.len())?;
        check_len(self.dim, partition.total())?;
        let scalars = cluster.reduce_blocks(partition, ledger, |_, r| {
            vec![dot(&s[r.clone()], &y[r.clone()]), dot(&s[r.clone()], &s[r.clone()]), dot(&y[r.clone()], &y[r])]
        })?;
        let (sy, ss, yy) = (scalars[0], scalars[1], scalars[2]);
        if !(ss > 0.0 && sy.is_finite() && yy.is_finite() && sy >= self.delta * ss) {
            return Ok(false);
        }
        if self.is_full() {
            self.evict_oldest();
        }
        let old = self.len();
        if old > 0 {
            let cross = cluster.reduce_blocks(partition, ledger, |_, r| {
                let mut v = Vec::with_capacity(2 * old);
                v.extend(self.s.iter().map(|sj| dot(&s[r.clone()], &sj[r.clone()])));
                v.extend(self.y.iter().map(|yj| dot(&s[r.clone()], &yj[r.clone()])));
                v
            })?;
            for (row, &v) in self.ss.iter_mut().zip(&cross[..old]) {
                row.push(v);
            }
            let mut ss_row = cross[..old].to_vec();
            ss_row.push(ss);
            self.ss.push(ss_row);
            let mut sy_row = cross[old..].to_vec();
            sy_row.push(sy);
            self.sy.push(sy_row);
        } else {
            self.ss.push(vec![ss]);
            self.sy.push(vec![sy]);
        }
        self.s.push_back(s.to_vec());
        self.y.push_back(y.to_vec());
        self.gamma = yy / sy;
        self.refactor();
        Ok(true)
    }

    fn evict_oldest(&mut self) {
        self.s.pop_front();
        self.y.pop_front();
        self.ss.remove(0);
        for row in &mut self.ss {
            row.remove(0);
        }
        self.sy.remove(0);
        for row in &mut self.sy {
            row.remove(0);
        }
    }

    /// Assembles `M` from the caches.
    pub fn middle_matrix(&self) -> SmallDenseMatrix {
        let m = self.len();
        let mut mat = SmallDenseMatrix::zeros(2 * m);
        for i in 0..m {
            for j in 0..m {
                mat.set(i, j, self.gamma * self.ss[i][j]);
            }
            for j in 0..i {
                mat.set(i, m + j, self.sy[i][j]);
                mat.set(m + j, i, self.sy[i][j]);
            }
            mat.set(m + i, m + i, -self.sy[i][i]);
        }
        mat
    }

    /// Refactorizes `M`, dropping the oldest pairs while it is singular.
    fn refactor(&mut self) {
        while !self.is_empty() {
            match self.middle_matrix().factorize_symmetric() {
                Ok(f) => {
                    self.factor = Some(f);
                    return;
                }
                Err(_) => self.evict_oldest(),
            }
        }
        self.factor = None;
    }

    /// Per-worker partial `[Sᵀp; Yᵀp]` over the rows in `rows`.
    pub fn partial_products(&self, p: &[f64], rows: std::ops::Range<usize>) -> Vec<f64> {
        let pr = &p[rows.clone()];
        self.s.iter().chain(&self.y).map(|v| dot(&v[rows.clone()], pr)).collect()
    }

    /// Completes a projection from reduced `[Sᵀp; Yᵀp]`.
    pub fn projection(&self, raw: &[f64]) -> Result<Projection> {
        check_len(2 * self.len(), raw.len())?;
        let m = self.len();
        let mut w = raw.to_vec();
        for v in &mut w[..m] {
            *v *= self.gamma;
        }
        let c = match &self.factor {
            Some(f) => f.solve(&w)?,
            None => Vec::new(),
        };
        Ok(Projection { w, c })
    }

    /// `Uᵀp` assembled with one round of `2m(t)` scalars (no round when the
    /// model is empty).
    pub fn project(
        &self,
        p: &[f64],
        partition: &Partition,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<Projection> {
        check_len(self.dim, p.len())?;
        if self.is_empty() {
            return self.projection(&[]);
        }
        let raw = cluster.reduce_blocks(partition, ledger, |_, r| self.partial_products(p, r))?;
        self.projection(&raw)
    }

    /// `(Hp)_i` for `i` in `rows`, written to `out[rows]`, given the
    /// projection of `p`.
    pub fn apply_rows(&self, p: &[f64], proj: &Projection, rows: std::ops::Range<usize>, out: &mut [f64]) {
        let m = self.len();
        for i in rows {
            let mut low_rank = 0.0;
            for j in 0..m {
                low_rank += self.gamma * proj.c[j] * self.s[j][i] + proj.c[m + j] * self.y[j][i];
            }
            out[i] = self.gamma * p[i] - low_rank;
        }
    }

    /// `pᵀHp = γ‖p‖² − wᵀM⁻¹w`.
    pub fn quad_form(&self, p_norm_sq: f64, proj: &Projection) -> f64 {
        self.gamma * p_norm_sq - dot(&proj.w, &proj.c)
    }

    /// `Hp`, metered like [`project`](Self::project).
    pub fn hvp(
        &self,
        p: &[f64],
        partition: &Partition,
        cluster: &ClusterSim,
        ledger: &mut CommLedger,
    ) -> Result<Vec<f64>> {
        let proj = self.project(p, partition, cluster, ledger)?;
        let mut out = vec![0.0; self.dim];
        self.apply_rows(p, &proj, 0..self.dim, &mut out);
        Ok(out)
    }

    /// `Hp` on a single process, without metering.
    pub fn hvp_local(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, p.len())?;
        let proj = self.projection(&self.partial_products(p, 0..self.dim))?;
        let mut out = vec![0.0; self.dim];
        self.apply_rows(p, &proj, 0..self.dim, &mut out);
        Ok(out)
    }

    /// The dense `H`, row-major; for checks on small models only.
    pub fn materialize_dense(&self) -> Result<SmallDenseMatrix> {
        if self.dim > MATERIALIZE_LIMIT {
            return Err(Error::LimitExceeded { what: "materialized dimension", limit: MATERIALIZE_LIMIT });
        }
        let n = self.dim;
        let mut h = SmallDenseMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.hvp_local(&e)?;
            for (i, v) in col.into_iter().enumerate() {
                h.set(i, j, v);
            }
            e[j] = 0.0;
        }
        Ok(h)
    }
}
