//! Radial grids on `[0, R]`, planar quadrature and radial differential operators.
//!
//! A grid is the image of a uniform computational coordinate `ξ ∈ [0, 1]`
//! under a smooth odd map `r(ξ)`: the identity scaled by `R` for uniform
//! spacing, or `R sinh(βξ)/sinh β` for graded spacing (fine near the origin,
//! geometrically coarsening outward).
//!
//! Two discretizations of the Laplacian live here:
//!
//! * [`radial_laplacian`] is the pointwise second-order three-point stencil
//!   with the regular-center row `4(u₁ − u₀)/r₁²` and a zero ghost value past
//!   `R`.
//! * The *stiffness form* is a fourth-order staggered discretization of
//!   `∫ 2π r u′² dr`. Its Hessian `S` paired with the quadrature weights `W`
//!   gives the operator `W⁻¹S ≈ −Δ` that the energy and its gradient use, so
//!   `⟨W⁻¹Su, φ⟩_W` is exactly the directional derivative of the kinetic
//!   energy. [`grad_norm_sq`] evaluates this form.
//!
//! Quadrature is the trapezoid rule in `ξ` with the planar factor `2πr r′`
//! folded in, plus a three-node correction at the origin that cancels the
//! `h²` and `h⁴` endpoint terms and makes the center row of `W⁻¹S`
//! consistent with `Δu(0)`. The last weight absorbs the remainder so that
//! constants integrate to `πR²` exactly.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::banded::SymBand;
use crate::error::{Error, Result};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 16;

/// Node distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacing {
    Uniform,
    /// `r(ξ) = R sinh(stretch·ξ) / sinh(stretch)`.
    Graded {
        stretch: f64,
    },
}

impl Spacing {
    fn map(&self, radius: f64, xi: f64) -> (f64, f64) {
        match *self {
            Spacing::Uniform => (radius * xi, radius),
            Spacing::Graded { stretch } => {
                let s = libm::sinh(stretch);
                (radius * libm::sinh(stretch * xi) / s, radius * stretch * libm::cosh(stretch * xi) / s)
            }
        }
    }

    /// `r(ξ)/ξ`, continued to `r′(0)` at the origin.
    fn ratio(&self, radius: f64, xi: f64) -> f64 {
        if xi == 0.0 {
            return self.map(radius, 0.0).1;
        }
        self.map(radius, xi).0 / xi
    }
}

// Origin corrections to the trapezoid weights, in units of hξ²·c₀.
const CENTER_CORRECTION: [f64; 3] = [3.0 / 32.0, -1.0 / 90.0, 1.0 / 1440.0];

/// Immutable radial grid with planar quadrature weights and the stiffness form.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    radius: f64,
    spacing: Spacing,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Computational step `1/(n-1)`.
    step: f64,
    /// Cell coefficients `2π r(ξ_{j+½}) hξ / r′(ξ_{j+½})` of the kinetic form.
    cell_coeff: Vec<f64>,
    stiffness: SymBand,
}

/// One cell's staggered derivative `Σ c·u[i]`, ghosts already folded in.
type CellStencil = [(usize, f64); 4];

impl RadialGrid {
    pub fn new(radius: f64, n: usize, spacing: Spacing) -> Result<Arc<Self>> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::Config(format!("grid radius must be positive, got {radius}")));
        }
        if n < MIN_NODES {
            return Err(Error::Config(format!("grid too coarse: n = {n} (need at least {MIN_NODES})")));
        }
        if let Spacing::Graded { stretch } = spacing {
            if !(stretch > 0.0) || stretch > 20.0 {
                return Err(Error::Config(format!("graded stretch must lie in (0, 20], got {stretch}")));
            }
        }
        let step = 1.0 / (n - 1) as f64;
        let xi = |k: f64| k * step;

        let mut nodes: Vec<f64> = (0..n).map(|k| spacing.map(radius, xi(k as f64)).0).collect();
        nodes[0] = 0.0;
        nodes[n - 1] = radius;
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid nodes are not strictly increasing".into()));
        }

        let mut weights = vec![0.0; n];
        for k in 0..n - 1 {
            let x = xi(k as f64);
            let jac = spacing.map(radius, x).1;
            let c = 2.0 * PI * spacing.ratio(radius, x) * jac;
            let corr = CENTER_CORRECTION.get(k).copied().unwrap_or(0.0);
            weights[k] = step * step * c * (k as f64 + corr);
        }
        let interior: f64 = weights[..n - 1].iter().sum();
        weights[n - 1] = PI * radius * radius - interior;
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("quadrature weights are not all positive".into()));
        }

        let cell_coeff: Vec<f64> = (0..n - 1)
            .map(|j| {
                let (r, jac) = spacing.map(radius, xi(j as f64 + 0.5));
                2.0 * PI * r * step / jac
            })
            .collect();

        let mut grid =
            Self { radius, spacing, nodes, weights, step, cell_coeff, stiffness: SymBand::zeros(n) };
        let mut band = SymBand::zeros(n);
        for j in 0..n - 1 {
            let st = grid.cell_stencil(j);
            let kappa = grid.cell_coeff[j];
            // ordered pairs with a >= b; `add` mirrors the off-diagonal part
            for &(a, ca) in &st {
                for &(b, cb) in &st {
                    if a >= b {
                        band.add(a, b, kappa * ca * cb);
                    }
                }
            }
        }
        grid.stiffness = band;
        Ok(Arc::new(grid))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Planar quadrature weights (the `2πr` factor is included).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest node spacing.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// `Σ wₖ fₖ`.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Fourth-order staggered derivative for cell `j` (between nodes `j` and
    /// `j+1`): even reflection at the origin, odd reflection about `u(R)`
    /// past the outer node.
    fn cell_stencil(&self, j: usize) -> CellStencil {
        let n = self.len();
        let inv = 1.0 / (24.0 * self.step);
        let left = if j == 0 { 1 } else { j - 1 };
        let mut st: CellStencil = [(left, inv), (j, -27.0 * inv), (j + 1, 27.0 * inv), (0, 0.0)];
        if j + 2 < n {
            st[3] = (j + 2, -inv);
        } else {
            // ghost u[n] = 2u[n-1] - u[n-2]
            st[2].1 += -2.0 * inv;
            st[3] = (n - 2, inv);
        }
        st
    }

    /// Kinetic form `Σ κⱼ Dⱼ² ≈ 2π∫ u′² r dr`.
    pub fn kinetic_form(&self, values: &[f64]) -> f64 {
        (0..self.len() - 1)
            .map(|j| {
                let d: f64 = self.cell_stencil(j).iter().map(|&(i, c)| c * values[i]).sum();
                self.cell_coeff[j] * d * d
            })
            .sum()
    }

    /// `S u`, the gradient of half the kinetic form.
    pub fn apply_stiffness(&self, values: &[f64], out: &mut [f64]) {
        self.stiffness.matvec(values, out);
    }

    /// `W⁻¹ S u ≈ −Δu`, the operator whose `W`-pairing is the kinetic form.
    pub fn stiffness_operator(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_stiffness(values, &mut out);
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
        out
    }

    pub(crate) fn stiffness_band(&self) -> &SymBand {
        &self.stiffness
    }

    /// Pointwise second-order `u″ + u′/r` with the regular-center row and a
    /// zero ghost value one step past `R`.
    pub fn laplacian_fd(&self, u: &[f64]) -> Vec<f64> {
        let n = self.len();
        let r = &self.nodes;
        let mut out = vec![0.0; n];
        out[0] = 4.0 * (u[1] - u[0]) / (r[1] * r[1]);
        for k in 1..n {
            let hm = r[k] - r[k - 1];
            let (hp, up) = if k + 1 < n { (r[k + 1] - r[k], u[k + 1]) } else { (hm, 0.0) };
            let um = u[k - 1];
            let second = 2.0 * ((up - u[k]) / hp - (u[k] - um) / hm) / (hp + hm);
            let first = (hm * hm * up - hp * hp * um + (hp * hp - hm * hm) * u[k]) / (hp * hm * (hp + hm));
            out[k] = second + first / r[k];
        }
        out
    }
}

/// Samples of a radial profile on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "profile has {} samples, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Range("profile contains non-finite samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()] }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v * factor).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Same values with the sample at `R` set to zero.
    pub(crate) fn pinned(mut self) -> Self {
        if let Some(last) = self.values.last_mut() {
            *last = 0.0;
        }
        self
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }
}

pub fn make_grid(radius: f64, n: usize, spacing: Spacing) -> Result<Arc<RadialGrid>> {
    RadialGrid::new(radius, n, spacing)
}

/// `∫_{ℝ²} f dx` for a radial `f`.
pub fn integrate(f: &RadialFunction) -> f64 {
    f.grid.quadrature(&f.values)
}

/// `∫ u² dx`.
pub fn mass(u: &RadialFunction) -> f64 {
    u.grid.weights.iter().zip(&u.values).map(|(w, v)| w * v * v).sum()
}

/// `∫ |∇u|² dx` from the stiffness form.
pub fn grad_norm_sq(u: &RadialFunction) -> f64 {
    u.grid.kinetic_form(&u.values)
}

pub fn radial_laplacian(u: &RadialFunction) -> RadialFunction {
    RadialFunction::from_parts_unchecked(u.grid.clone(), u.grid.laplacian_fd(&u.values))
}

/// Fraction of the mass of `u` carried by the outer tenth of `[0, R]`.
pub fn tail_mass_fraction(u: &RadialFunction) -> f64 {
    let total = mass(u);
    if total == 0.0 {
        return 0.0;
    }
    let cut = 0.9 * u.grid.radius;
    let tail: f64 = u
        .grid
        .nodes
        .iter()
        .zip(&u.grid.weights)
        .zip(&u.values)
        .filter(|((r, _), _)| **r > cut)
        .map(|((_, w), v)| w * v * v)
        .sum();
    tail / total
}
