//! Energy, Pohozaev functional, gradients, multipliers and the fiber map.
//!
//! For a state `w = (u, v)`,
//!
//! ```text
//! J(w) = ½∫|∇w|² − ∫H(w),        P(w) = ∫|∇w|² − ∫H̃(w),
//! ```
//!
//! and the mass-preserving dilation `F(w, s) = e^s w(e^s ·)` has
//! `J(F(w, s)) = e^{2s}/2 ∫|∇w|² − e^{−2s}∫H(e^s w)`, whose derivative in `s`
//! is `P(F(w, s))`. Fiber quantities use this change of variables on the
//! original grid; [`resample_scaled`] only exists to materialize dilated
//! states.
//!
//! The sample at `R` carries the Dirichlet condition. Gradients, residuals
//! and multipliers live on the remaining (interior) nodes, and gradient rows
//! at `R` are zero.

use alloc::sync::Arc;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, RadialFunction, RadialGrid};
use crate::interp::pchip_sorted;
use crate::nonlinearity::NonlinearityModel;

/// Default bound on `|s|` accepted by [`resample_scaled`].
pub const DEFAULT_S_MAX: f64 = 5.0;

/// A pair of profiles on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePair {
    pub u: RadialFunction,
    pub v: RadialFunction,
}

impl StatePair {
    pub fn new(u: RadialFunction, v: RadialFunction) -> Result<Self> {
        if !Arc::ptr_eq(u.grid(), v.grid()) && u.grid() != v.grid() {
            return Err(Error::Config("state components live on different grids".into()));
        }
        Ok(Self { u, v })
    }

    pub fn zeros(grid: &Arc<RadialGrid>) -> Self {
        Self { u: RadialFunction::zeros(grid), v: RadialFunction::zeros(grid) }
    }

    pub fn from_fns(grid: &Arc<RadialGrid>, f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(RadialFunction::from_fn(grid, f)?, RadialFunction::from_fn(grid, g)?)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    pub fn len(&self) -> usize {
        self.u.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(|u|₂², |v|₂²)`.
    pub fn masses(&self) -> (f64, f64) {
        (grid::mass(&self.u), grid::mass(&self.v))
    }

    /// `|∇u|₂² + |∇v|₂²`.
    pub fn kinetic(&self) -> f64 {
        grid::grad_norm_sq(&self.u) + grid::grad_norm_sq(&self.v)
    }

    /// Builds a pair from node values on `grid`.
    pub fn from_values(grid: &Arc<RadialGrid>, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Ok(Self { u: RadialFunction::new(grid.clone(), u)?, v: RadialFunction::new(grid.clone(), v)? })
    }

    pub(crate) fn pinned(self) -> Self {
        Self { u: self.u.pinned(), v: self.v.pinned() }
    }
}

/// The pieces of `J` and `P` at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValues {
    pub energy: f64,
    pub pohozaev: f64,
    /// `|∇w|₂²`
    pub kinetic: f64,
    /// `∫H(w)`
    pub potential: f64,
    /// `∫∇H(w)·w`
    pub nl_pairing: f64,
}

/// `J`, `P` and their parts. `P` is formed from the factored `H̃`.
pub fn evaluate(w: &StatePair, model: &NonlinearityModel) -> Result<FunctionalValues> {
    let kinetic = w.kinetic();
    let g = w.grid();
    let (mut potential, mut pairing, mut tilde) = (0.0, 0.0, 0.0);
    for ((wt, &u), &v) in g.weights().iter().zip(w.u.values()).zip(w.v.values()) {
        potential += wt * model.eval_h(u, v)?;
        pairing += wt * model.eval_pairing(u, v)?;
        tilde += wt * model.eval_tilde_h(u, v)?;
    }
    Ok(FunctionalValues {
        energy: 0.5 * kinetic - potential,
        pohozaev: kinetic - tilde,
        kinetic,
        potential,
        nl_pairing: pairing,
    })
}

pub fn energy(w: &StatePair, model: &NonlinearityModel) -> Result<f64> {
    let pot = integrate_pointwise(w, |u, v| model.eval_h(u, v))?;
    Ok(0.5 * w.kinetic() - pot)
}

pub fn pohozaev(w: &StatePair, model: &NonlinearityModel) -> Result<f64> {
    let tilde = integrate_pointwise(w, |u, v| model.eval_tilde_h(u, v))?;
    Ok(w.kinetic() - tilde)
}

fn integrate_pointwise(w: &StatePair, f: impl Fn(f64, f64) -> Result<f64>) -> Result<f64> {
    let mut acc = 0.0;
    for ((wt, &u), &v) in w.grid().weights().iter().zip(w.u.values()).zip(w.v.values()) {
        acc += wt * f(u, v)?;
    }
    Ok(acc)
}

/// `(H_u, H_v)` at every node.
pub(crate) fn nonlinear_terms(w: &StatePair, model: &NonlinearityModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = w.len();
    let mut hu = Vec::with_capacity(n);
    let mut hv = Vec::with_capacity(n);
    for (&u, &v) in w.u.values().iter().zip(w.v.values()) {
        let (a, b) = model.eval_grad_h(u, v)?;
        hu.push(a);
        hv.push(b);
    }
    Ok((hu, hv))
}

/// Unconstrained `L²` gradient `(−Δu − H_u, −Δv − H_v)`, zero at `R`.
pub fn energy_gradient(w: &StatePair, model: &NonlinearityModel) -> Result<StatePair> {
    let g = w.grid();
    let (hu, hv) = nonlinear_terms(w, model)?;
    let mut gu = g.stiffness_operator(w.u.values());
    let mut gv = g.stiffness_operator(w.v.values());
    for k in 0..gu.len() {
        gu[k] -= hu[k];
        gv[k] -= hv[k];
    }
    let last = gu.len() - 1;
    gu[last] = 0.0;
    gv[last] = 0.0;
    StatePair::from_values(g, gu, gv)
}

/// `Σ_{k<n−1} wₖ aₖ bₖ`, the inner product on the free nodes.
pub(crate) fn interior_dot(grid: &RadialGrid, a: &[f64], b: &[f64]) -> f64 {
    let n = grid.len();
    grid.weights()[..n - 1].iter().zip(&a[..n - 1]).zip(&b[..n - 1]).map(|((w, x), y)| w * x * y).sum()
}

/// `(λ₁, λ₂)` making the constrained residual orthogonal to `(u, 0)` and `(0, v)`.
pub fn lagrange_multipliers(w: &StatePair, model: &NonlinearityModel) -> Result<(f64, f64)> {
    let grad = energy_gradient(w, model)?;
    multipliers_from_gradient(w, &grad)
}

fn multipliers_from_gradient(w: &StatePair, grad: &StatePair) -> Result<(f64, f64)> {
    let g = w.grid();
    let mu = interior_dot(g, w.u.values(), w.u.values());
    let mv = interior_dot(g, w.v.values(), w.v.values());
    if !(mu > 0.0) || !(mv > 0.0) {
        return Err(Error::DegenerateState("multipliers need both components nonzero"));
    }
    let l1 = -interior_dot(g, grad.u.values(), w.u.values()) / mu;
    let l2 = -interior_dot(g, grad.v.values(), w.v.values()) / mv;
    Ok((l1, l2))
}

/// Constrained residual and its multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub lambda1: f64,
    pub lambda2: f64,
    /// `(−Δu + λ₁u − H_u, −Δv + λ₂v − H_v)`, zero at `R`.
    pub g: StatePair,
    /// `L²` norm of `g` over the free nodes.
    pub norm: f64,
}

pub fn residual(w: &StatePair, model: &NonlinearityModel) -> Result<Residual> {
    let grad = energy_gradient(w, model)?;
    let (lambda1, lambda2) = multipliers_from_gradient(w, &grad)?;
    let n = w.len();
    let StatePair { u: gu, v: gv } = grad;
    let (mut gu, mut gv) = (gu.into_values(), gv.into_values());
    for k in 0..n - 1 {
        gu[k] += lambda1 * w.u.values()[k];
        gv[k] += lambda2 * w.v.values()[k];
    }
    let grid = w.grid();
    let norm = libm::sqrt(interior_dot(grid, &gu, &gu) + interior_dot(grid, &gv, &gv));
    Ok(Residual { lambda1, lambda2, g: StatePair::from_values(grid, gu, gv)?, norm })
}

/// The kinetic term of a fixed state, reused across many fiber evaluations.
#[derive(Debug, Clone, Copy)]
pub struct Fiber<'a> {
    w: &'a StatePair,
    kinetic: f64,
}

impl<'a> Fiber<'a> {
    pub fn new(w: &'a StatePair) -> Self {
        Self { w, kinetic: w.kinetic() }
    }

    pub fn kinetic(&self) -> f64 {
        self.kinetic
    }

    fn dilated_integral(&self, s: f64, f: impl Fn(f64, f64) -> Result<f64>) -> Result<f64> {
        let t = libm::exp(s);
        integrate_pointwise(self.w, |u, v| f(t * u, t * v))
    }

    /// `J(F(w, s))`.
    pub fn energy(&self, model: &NonlinearityModel, s: f64) -> Result<f64> {
        let pot = self.dilated_integral(s, |u, v| model.eval_h(u, v))?;
        Ok(libm::exp(2.0 * s) * 0.5 * self.kinetic - libm::exp(-2.0 * s) * pot)
    }

    /// `d/ds J(F(w, s)) = P(F(w, s))`.
    pub fn derivative(&self, model: &NonlinearityModel, s: f64) -> Result<f64> {
        let tilde = self.dilated_integral(s, |u, v| model.eval_tilde_h(u, v))?;
        Ok(libm::exp(2.0 * s) * self.kinetic - libm::exp(-2.0 * s) * tilde)
    }

    /// `d²/ds² J(F(w, s))`.
    pub fn second_derivative(&self, model: &NonlinearityModel, s: f64) -> Result<f64> {
        let (mut tilde, mut tilde_pair) = (0.0, 0.0);
        let t = libm::exp(s);
        for ((wt, &u), &v) in self.w.grid().weights().iter().zip(self.w.u.values()).zip(self.w.v.values()) {
            tilde += wt * model.eval_tilde_h(t * u, t * v)?;
            tilde_pair += wt * model.eval_tilde_pairing(t * u, t * v)?;
        }
        let e = libm::exp(-2.0 * s);
        Ok(2.0 * libm::exp(2.0 * s) * self.kinetic + 2.0 * e * tilde - e * tilde_pair)
    }
}

pub fn fiber_energy(w: &StatePair, model: &NonlinearityModel, s: f64) -> Result<f64> {
    Fiber::new(w).energy(model, s)
}

pub fn fiber_derivative(w: &StatePair, model: &NonlinearityModel, s: f64) -> Result<f64> {
    Fiber::new(w).derivative(model, s)
}

pub fn fiber_second_derivative(w: &StatePair, model: &NonlinearityModel, s: f64) -> Result<f64> {
    Fiber::new(w).second_derivative(model, s)
}

/// `F(w, s)` sampled on the original grid, with `|s| ≤` [`DEFAULT_S_MAX`].
pub fn resample_scaled(w: &StatePair, s: f64) -> Result<StatePair> {
    resample_scaled_within(w, s, DEFAULT_S_MAX)
}

/// `e^s w(e^s r)` by monotone cubic interpolation; zero beyond `R`.
pub fn resample_scaled_within(w: &StatePair, s: f64, s_max: f64) -> Result<StatePair> {
    if !s.is_finite() || s.abs() > s_max {
        return Err(Error::Range(alloc::format!("dilation |s| = {s} exceeds {s_max}")));
    }
    if s == 0.0 {
        return Ok(w.clone());
    }
    let grid = w.grid();
    let t = libm::exp(s);
    let queries: Vec<f64> = grid.nodes().iter().map(|r| t * r).collect();
    let scale = |vals: &[f64]| -> Vec<f64> {
        pchip_sorted(grid.nodes(), vals, &queries).into_iter().map(|x| t * x).collect()
    };
    StatePair::from_values(grid, scale(w.u.values()), scale(w.v.values()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Spacing};
    use crate::nonlinearity::ModelKind;
    use approx::assert_relative_eq;
    use core::f64::consts::PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian_pair(n: usize) -> StatePair {
        let g = make_grid(12.0, n, Spacing::Uniform).unwrap();
        StatePair::from_fns(&g, |r| (-r * r / 2.0).exp(), |r| (-r * r / 2.0).exp()).unwrap()
    }

    fn pp(mu: f64) -> NonlinearityModel {
        NonlinearityModel::pure_power(mu, 6.0).unwrap()
    }

    /// Smooth random radial profile that is negligible at `R = 12`.
    fn random_profile(rng: &mut ChaCha8Rng) -> impl Fn(f64) -> f64 {
        let a1: f64 = rng.gen_range(0.3..1.0);
        let a2: f64 = rng.gen_range(-0.3..0.3);
        let b1: f64 = rng.gen_range(0.3..1.0);
        let b2: f64 = rng.gen_range(0.5..2.0);
        move |r: f64| a1 * (-b1 * r * r).exp() + a2 * r * r * (-b2 * r * r).exp()
    }

    #[test]
    fn energy_examples() {
        let w = gaussian_pair(2048);
        assert_relative_eq!(energy(&w, &pp(1.0)).unwrap(), -5.0 * PI / 3.0, epsilon = 1e-3);
        assert_relative_eq!(energy(&w, &pp(0.5)).unwrap(), -PI / 3.0, epsilon = 1e-3);
        let z = StatePair::zeros(w.grid());
        let ce = NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap();
        assert_eq!(energy(&z, &ce).unwrap(), 0.0);
        assert_eq!(pohozaev(&z, &ce).unwrap(), 0.0);
    }

    #[test]
    fn pohozaev_example() {
        let w = gaussian_pair(2048);
        assert_relative_eq!(pohozaev(&w, &pp(1.0)).unwrap(), -26.0 * PI / 3.0, epsilon = 1e-2);
    }

    #[test]
    fn functional_values_are_consistent() {
        let w = gaussian_pair(512);
        for m in [pp(1.0), NonlinearityModel::coupled_exp(2.0, 6.0, 1.0).unwrap()] {
            let f = evaluate(&w, &m).unwrap();
            assert!((f.energy - (0.5 * f.kinetic - f.potential)).abs() <= 1e-12 * f.kinetic);
            let alt = f.kinetic + 2.0 * f.potential - f.nl_pairing;
            assert!((f.pohozaev - alt).abs() <= 1e-12 * f.nl_pairing.abs().max(1.0));
            assert_eq!(f.energy, energy(&w, &m).unwrap());
        }
    }

    #[test]
    fn gradient_center_value() {
        let w = gaussian_pair(2048);
        let g = energy_gradient(&w, &pp(1.0)).unwrap();
        assert_relative_eq!(g.u.values()[0], -22.0, epsilon = 1e-2);
        let z = StatePair::zeros(w.grid());
        let g0 = energy_gradient(&z, &pp(1.0)).unwrap();
        assert!(g0.u.values().iter().chain(g0.v.values()).all(|x| *x == 0.0));
    }

    #[test]
    fn gradient_matches_directional_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = make_grid(12.0, 512, Spacing::Uniform).unwrap();
        let models = [pp(1.0), NonlinearityModel::coupled_exp(1.5, 6.0, 1.0).unwrap()];
        for m in models {
            for _ in 0..5 {
                let w = StatePair::from_fns(&g, random_profile(&mut rng), random_profile(&mut rng)).unwrap();
                let phi =
                    StatePair::from_fns(&g, random_profile(&mut rng), random_profile(&mut rng)).unwrap();
                let eps = 1e-5;
                let shift = |sign: f64| {
                    let u: Vec<f64> =
                        w.u.values().iter().zip(phi.u.values()).map(|(a, b)| a + sign * eps * b).collect();
                    let v: Vec<f64> =
                        w.v.values().iter().zip(phi.v.values()).map(|(a, b)| a + sign * eps * b).collect();
                    StatePair::from_values(&g, u, v).unwrap()
                };
                let fd = (energy(&shift(1.0), &m).unwrap() - energy(&shift(-1.0), &m).unwrap()) / (2.0 * eps);
                let grad = energy_gradient(&w, &m).unwrap();
                let exact = interior_dot(&g, grad.u.values(), phi.u.values())
                    + interior_dot(&g, grad.v.values(), phi.v.values());
                assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn multiplier_examples() {
        let w = gaussian_pair(2048);
        let (l1, l2) = lagrange_multipliers(&w, &pp(1.0)).unwrap();
        assert_relative_eq!(l1, 7.0, epsilon = 1e-2);
        assert_eq!(l1, l2);
        // negligible coupling isolates the kinetic part
        let (l1, _) = lagrange_multipliers(&w, &pp(1e-300)).unwrap();
        assert_relative_eq!(l1, -1.0, epsilon = 1e-3);
        let half = StatePair::new(w.u.clone(), RadialFunction::zeros(w.grid())).unwrap();
        assert!(matches!(lagrange_multipliers(&half, &pp(1.0)), Err(Error::DegenerateState(_))));
    }

    #[test]
    fn residual_is_orthogonal_to_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = make_grid(12.0, 700, Spacing::Graded { stretch: 2.0 }).unwrap();
        let m = NonlinearityModel::new(ModelKind::AdditiveExp, 1.0, 6.0, 0.7).unwrap();
        for _ in 0..10 {
            let w = StatePair::from_fns(&g, random_profile(&mut rng), random_profile(&mut rng)).unwrap();
            let res = residual(&w, &m).unwrap();
            let nu = libm::sqrt(interior_dot(&g, w.u.values(), w.u.values()));
            let nv = libm::sqrt(interior_dot(&g, w.v.values(), w.v.values()));
            let du = interior_dot(&g, res.g.u.values(), w.u.values());
            let dv = interior_dot(&g, res.g.v.values(), w.v.values());
            assert!(du.abs() <= 1e-8 * res.norm * nu);
            assert!(dv.abs() <= 1e-8 * res.norm * nv);
        }
    }

    #[test]
    fn fiber_examples() {
        let w = gaussian_pair(2048);
        let m = pp(1.0);
        assert_eq!(fiber_energy(&w, &m, 0.0).unwrap(), energy(&w, &m).unwrap());
        let s_star = 0.5 * (3.0f64 / 16.0).ln();
        assert_relative_eq!(fiber_energy(&w, &m, s_star).unwrap(), 3.0 * PI / 32.0, epsilon = 1e-3);
        assert!(fiber_derivative(&w, &m, s_star).unwrap().abs() < 1e-6);
        assert!((fiber_derivative(&w, &m, 0.0).unwrap() - pohozaev(&w, &m).unwrap()).abs() < 1e-12 * 30.0);
        let far = fiber_energy(&w, &m, -10.0).unwrap();
        let kin = w.kinetic();
        assert!(far > 0.0 && far <= (-18.0f64).exp() * kin);
    }

    #[test]
    fn fiber_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = make_grid(12.0, 512, Spacing::Uniform).unwrap();
        let models = [pp(1.0), NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap()];
        for m in models {
            let w = StatePair::from_fns(&g, random_profile(&mut rng), random_profile(&mut rng)).unwrap();
            let f = Fiber::new(&w);
            for k in 0..=40 {
                let s = -2.0 + 0.1 * k as f64;
                let eps = 1e-5;
                let fd = (f.energy(&m, s + eps).unwrap() - f.energy(&m, s - eps).unwrap()) / (2.0 * eps);
                let d = f.derivative(&m, s).unwrap();
                assert!((d - fd).abs() <= 1e-5 * d.abs().max(1.0), "s={s}: {d} vs {fd}");
                let d2 = f.second_derivative(&m, s).unwrap();
                let fd2 =
                    (f.derivative(&m, s + eps).unwrap() - f.derivative(&m, s - eps).unwrap()) / (2.0 * eps);
                assert!((d2 - fd2).abs() <= 1e-5 * d2.abs().max(1.0), "s={s}: {d2} vs {fd2}");
            }
        }
    }

    #[test]
    fn resample_examples() {
        let w = gaussian_pair(2048);
        assert_eq!(resample_scaled(&w, 0.0).unwrap(), w);
        assert!(matches!(resample_scaled(&w, 5.5), Err(Error::Range(_))));
        assert!(resample_scaled_within(&w, 5.5, 6.0).is_ok());

        // dilations by e^{±2} need room on both ends: a graded grid on [0, 40]
        let g = make_grid(40.0, 2048, Spacing::Graded { stretch: 3.0 }).unwrap();
        let w = StatePair::from_fns(&g, |r| (-r * r / 2.0).exp(), |r| (-r * r).exp()).unwrap();
        let (mu0, mv0) = w.masses();
        let k0 = grid::grad_norm_sq(&w.u);
        for s in [-2.0, -1.0, -0.3, 0.4, 1.0, 2.0] {
            let ws = resample_scaled(&w, s).unwrap();
            let (mu, mv) = ws.masses();
            assert_relative_eq!(mu, mu0, max_relative = 1e-4);
            assert_relative_eq!(mv, mv0, max_relative = 1e-4);
            assert_relative_eq!(grid::grad_norm_sq(&ws.u), (2.0 * s).exp() * k0, max_relative = 1e-3);
        }
    }
}
