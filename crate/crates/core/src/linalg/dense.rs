use crate::error::{check_len, Error, Result};

/// Square dense matrix of small order, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallDenseMatrix {
    order: usize,
    values: Vec<f64>,
}

impl SmallDenseMatrix {
    pub fn zeros(order: usize) -> Self {
        SmallDenseMatrix { order, values: vec![0.0; order * order] }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(order: usize, values: Vec<f64>) -> Result<Self> {
        check_len(order * order, values.len())?;
        Ok(SmallDenseMatrix { order, values })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.order + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.order + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order, x.len())?;
        Ok((0..self.order).map(|i| super::dot(&self.values[i * self.order..(i + 1) * self.order], x)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to `max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0_f64;
        for i in 0..self.order {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Symmetric indefinite factorization `P M Pᵀ = L D Lᵀ` with
    /// Bunch-Parlett complete pivoting (1x1 and 2x2 diagonal blocks).
    pub fn factorize_symmetric(&self) -> Result<SymmetricFactor> {
        SymmetricFactor::new(self)
    }
}

/// Relative pivot threshold below which the matrix is declared singular.
const SINGULAR_PIVOT_RTOL: f64 = 1e-14;

/// Growth-optimal Bunch-Parlett constant `(1 + √17) / 8`.
const BUNCH_PARLETT_ALPHA: f64 = 0.640_388_203_202_208_4;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pivot {
    One(f64),
    /// Symmetric 2x2 block `[a b; b c]`.
    Two(f64, f64, f64),
}

/// Reusable factorization of a small symmetric (possibly indefinite) matrix.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    order: usize,
    perm: Vec<usize>,
    /// Unit lower triangular factor, row-major.
    lower: Vec<f64>,
    /// Pivot blocks keyed by their leading index.
    pivots: Vec<(usize, Pivot)>,
}

impl SymmetricFactor {
    fn new(m: &SmallDenseMatrix) -> Result<Self> {
        let n = m.order;
        let threshold = SINGULAR_PIVOT_RTOL * m.max_abs();
        let mut a = m.values.clone();
        let mut lower = vec![0.0; n * n];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::new();
        let idx = |i: usize, j: usize| i * n + j;

        let swap = |a: &mut Vec<f64>, lower: &mut Vec<f64>, perm: &mut Vec<usize>, k: usize, i: usize, j: usize| {
            if i == j {
                return;
            }
            for c in 0..n {
                a.swap(idx(i, c), idx(j, c));
            }
            for r in 0..n {
                a.swap(idx(r, i), idx(r, j));
            }
            for c in 0..k {
                lower.swap(idx(i, c), idx(j, c));
            }
            perm.swap(i, j);
        };

        let mut k = 0;
        while k < n {
            let (mut diag_max, mut p) = (0.0_f64, k);
            for i in k..n {
                if a[idx(i, i)].abs() > diag_max {
                    diag_max = a[idx(i, i)].abs();
                    p = i;
                }
            }
            let (mut off_max, mut r, mut q) = (0.0_f64, k, k);
            for j in k..n {
                for i in j + 1..n {
                    if a[idx(i, j)].abs() > off_max {
                        off_max = a[idx(i, j)].abs();
                        r = i;
                        q = j;
                    }
                }
            }
            let largest = diag_max.max(off_max);
            if largest <= threshold || largest == 0.0 {
                return Err(Error::Singular { pivot: largest, threshold });
            }

            if diag_max >= BUNCH_PARLETT_ALPHA * off_max {
                swap(&mut a, &mut lower, &mut perm, k, k, p);
                let d = a[idx(k, k)];
                lower[idx(k, k)] = 1.0;
                for i in k + 1..n {
                    lower[idx(i, k)] = a[idx(i, k)] / d;
                }
                for i in k + 1..n {
                    let li = lower[idx(i, k)];
                    for j in k + 1..n {
                        a[idx(i, j)] -= li * a[idx(k, j)];
                    }
                }
                pivots.push((k, Pivot::One(d)));
                k += 1;
            } else {
                // Move the off-diagonal maximum (r, q), q < r, into (k+1, k).
                swap(&mut a, &mut lower, &mut perm, k, k, q);
                let r = if r == k { q } else { r };
                swap(&mut a, &mut lower, &mut perm, k, k + 1, r);
                let (e11, e21, e22) = (a[idx(k, k)], a[idx(k + 1, k)], a[idx(k + 1, k + 1)]);
                let det = e11 * e22 - e21 * e21;
                if det.abs() <= threshold * threshold {
                    return Err(Error::Singular { pivot: det.abs().sqrt(), threshold });
                }
                let (i11, i21, i22) = (e22 / det, -e21 / det, e11 / det);
                lower[idx(k, k)] = 1.0;
                lower[idx(k + 1, k + 1)] = 1.0;
                for i in k + 2..n {
                    let (ak, ak1) = (a[idx(i, k)], a[idx(i, k + 1)]);
                    lower[idx(i, k)] = ak * i11 + ak1 * i21;
                    lower[idx(i, k + 1)] = ak * i21 + ak1 * i22;
                }
                for i in k + 2..n {
                    let (l0, l1) = (lower[idx(i, k)], lower[idx(i, k + 1)]);
                    for j in k + 2..n {
                        a[idx(i, j)] -= l0 * a[idx(k, j)] + l1 * a[idx(k + 1, j)];
                    }
                }
                pivots.push((k, Pivot::Two(e11, e21, e22)));
                k += 2;
            }
        }
        Ok(SymmetricFactor { order: n, perm, lower, pivots })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.order;
        check_len(n, b.len())?;
        let l = |i: usize, j: usize| self.lower[i * n + j];
        let mut w: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut acc = w[i];
            for j in 0..i {
                acc -= l(i, j) * w[j];
            }
            w[i] = acc;
        }
        for &(k, pivot) in &self.pivots {
            match pivot {
                Pivot::One(d) => w[k] /= d,
                Pivot::Two(a, b, c) => {
                    let det = a * c - b * b;
                    let (x0, x1) = (w[k], w[k + 1]);
                    w[k] = (c * x0 - b * x1) / det;
                    w[k + 1] = (a * x1 - b * x0) / det;
                }
            }
        }
        for i in (0..n).rev() {
            let mut acc = w[i];
            for j in i + 1..n {
                acc -= l(j, i) * w[j];
            }
            w[i] = acc;
        }
        let mut x = vec![0.0; n];
        for (a, &p) in self.perm.iter().enumerate() {
            x[p] = w[a];
        }
        Ok(x)
    }
}

/// Solves `M x = b` for symmetric, possibly indefinite `M`.
pub fn solve_small_symmetric(m: &SmallDenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len(m.order(), b.len())?;
    m.factorize_symmetric()?.solve(b)
}
