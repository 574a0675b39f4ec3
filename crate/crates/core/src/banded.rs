//! Symmetric banded matrices with a small, fixed half-bandwidth.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Half-bandwidth of the four-point staggered stiffness stencil.
pub(crate) const HALF_BAND: usize = 3;

/// Lower bands of a symmetric matrix: `lower[d][i] = A[i][i - d]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SymBand {
    pub(crate) lower: [Vec<f64>; HALF_BAND + 1],
}

impl SymBand {
    pub(crate) fn zeros(n: usize) -> Self {
        Self { lower: core::array::from_fn(|_| vec![0.0; n]) }
    }

    pub(crate) fn len(&self) -> usize {
        self.lower[0].len()
    }

    /// Adds `value` to `A[i][j]` (and its mirror).
    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        debug_assert!(d <= HALF_BAND);
        self.lower[d][hi] += value;
    }

    pub(crate) fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.lower[0][i] * x[i];
            for d in 1..=HALF_BAND {
                if i >= d {
                    acc += self.lower[d][i] * x[i - d];
                }
                if i + d < n {
                    acc += self.lower[d][i + d] * x[i + d];
                }
            }
            y[i] = acc;
        }
    }

    /// Leading principal `m × m` block.
    pub(crate) fn truncated(&self, m: usize) -> Self {
        Self { lower: core::array::from_fn(|d| self.lower[d][..m].to_vec()) }
    }

    pub(crate) fn add_diagonal(&mut self, diag: &[f64], scale: f64) {
        for (a, d) in self.lower[0].iter_mut().zip(diag) {
            *a += scale * d;
        }
    }
}

/// Banded Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub(crate) struct BandCholesky {
    l: SymBand,
}

impl BandCholesky {
    pub(crate) fn factor(a: &SymBand) -> Result<Self> {
        let n = a.len();
        let mut l = SymBand::zeros(n);
        for i in 0..n {
            for d in (1..=HALF_BAND.min(i)).rev() {
                let j = i - d;
                let mut s = a.lower[d][i];
                // sum_{k < j, |i-k| <= p} L[i][k] L[j][k]
                for e in 1..=HALF_BAND {
                    if j < e || d + e > HALF_BAND {
                        continue;
                    }
                    s -= l.lower[d + e][i] * l.lower[e][j];
                }
                l.lower[d][i] = s / l.lower[0][j];
            }
            let mut s = a.lower[0][i];
            for d in 1..=HALF_BAND.min(i) {
                s -= l.lower[d][i] * l.lower[d][i];
            }
            if !(s > 0.0) {
                return Err(Error::Range(alloc::format!("banded matrix not positive definite at row {i}")));
            }
            l.lower[0][i] = libm::sqrt(s);
        }
        Ok(Self { l })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.l.len();
        for i in 0..n {
            let mut s = x[i];
            for d in 1..=HALF_BAND.min(i) {
                s -= self.l.lower[d][i] * x[i - d];
            }
            x[i] = s / self.l.lower[0][i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for d in 1..=HALF_BAND {
                if i + d < n {
                    s -= self.l.lower[d][i + d] * x[i + d];
                }
            }
            x[i] = s / self.l.lower[0][i];
        }
    }
}

/// General banded matrix with `kl` sub- and `ku` super-diagonals, stored with
/// room for the fill-in of partial pivoting.
#[derive(Debug, Clone)]
pub(crate) struct Band {
    n: usize,
    kl: usize,
    ku: usize,
    /// `rows[i * width + (j + kl - i)] = A[i][j]`
    rows: Vec<f64>,
}

impl Band {
    pub(crate) fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, rows: vec![0.0; n * (2 * kl + ku + 1)] }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        let k = self.at(i, j);
        self.rows[k] += value;
    }
}

/// `PA = LU` of a [`Band`].
#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    a: Band,
    pivots: Vec<usize>,
    /// `kl` multipliers per column
    mult: Vec<f64>,
}

impl BandLu {
    pub(crate) fn factor(mut a: Band) -> Result<Self> {
        let (n, kl) = (a.n, a.kl);
        let reach = kl + a.ku;
        let mut pivots = vec![0; n];
        let mut mult = vec![0.0; n * kl];
        for i in 0..n {
            let last_row = (i + kl).min(n - 1);
            let last_col = (i + reach).min(n - 1);
            let mut p = i;
            for r in i + 1..=last_row {
                if a.rows[a.at(r, i)].abs() > a.rows[a.at(p, i)].abs() {
                    p = r;
                }
            }
            pivots[i] = p;
            if p != i {
                for c in i..=last_col {
                    let (x, y) = (a.at(i, c), a.at(p, c));
                    a.rows.swap(x, y);
                }
            }
            let piv = a.rows[a.at(i, i)];
            if piv == 0.0 || !piv.is_finite() {
                return Err(Error::Range(alloc::format!("singular banded matrix at column {i}")));
            }
            for r in i + 1..=last_row {
                let l = a.rows[a.at(r, i)] / piv;
                mult[i * kl + (r - i - 1)] = l;
                if l == 0.0 {
                    continue;
                }
                for c in i + 1..=last_col {
                    let v = a.rows[a.at(i, c)];
                    let k = a.at(r, c);
                    a.rows[k] -= l * v;
                }
            }
        }
        Ok(Self { a, pivots, mult })
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let a = &self.a;
        let (n, kl) = (a.n, a.kl);
        for i in 0..n {
            x.swap(i, self.pivots[i]);
            let xi = x[i];
            for r in i + 1..=(i + kl).min(n - 1) {
                x[r] -= self.mult[i * kl + (r - i - 1)] * xi;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for c in i + 1..=(i + kl + a.ku).min(n - 1) {
                s -= a.rows[a.at(i, c)] * x[c];
            }
            x[i] = s / a.rows[a.at(i, i)];
        }
    }
}
