//! Ground states by constrained descent on the Pohozaev manifold.
//!
//! Each start draws a pair of Gaussian bumps, normalizes the masses and
//! dilates onto `P = 0`. An iteration then
//!
//! 1. forms the multipliers and the constrained residual `g`,
//! 2. preconditions `g` with `(−Δ + c)⁻¹` (a Sobolev gradient) and removes the
//!    component along the mass constraint,
//! 3. steps with backtracking until `J`, measured after mass normalization
//!    and Pohozaev reprojection, does not increase.
//!
//! A run has converged when the residual norm is below `tol_grad` and
//! `|P| ≤ tol_pohozaev·|∇w|₂²`.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::{Band, BandCholesky, BandLu, HALF_BAND};
use crate::error::{Error, Result};
use crate::functional::{evaluate, interior_dot, residual, Fiber, StatePair};
use crate::grid::{RadialGrid, Spacing};
use crate::manifold::{self, project_mass, FiberSettings, MassConstraint};
use crate::nonlinearity::NonlinearityModel;
use crate::verify::{self, BoundsReport};

/// Allowed increase of `J` per accepted step.
pub const ENERGY_SLACK: f64 = 1e-12;
/// Energies this close are ties when picking the winning start.
pub const TIE_TOLERANCE: f64 = 1e-10;
/// Relative `|P|` reached by the closing projection of a converged run.
const FINAL_PROJECTION_TOL: f64 = 1e-13;
const MAX_HALVINGS: usize = 60;
/// Residual below which a stagnating descent hands over to Newton.
const POLISH_FROM: f64 = 1e-3;
/// Window over which the residual must halve to count as progress.
const POLISH_RETRY: usize = 25;
const POLISH_ITERS: usize = 12;
/// Smallest ratio `μ_max / μ_min` accepted by [`sweep_mu`].
pub const MIN_SWEEP_SPAN: f64 = 8.0;

/// Grid parameters (the grid itself is built per solve).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub n: usize,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { radius: 12.0, n: 1024, spacing: Spacing::Uniform }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        RadialGrid::new(self.radius, self.n, self.spacing)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub constraint: MassConstraint,
    pub model: NonlinearityModel,
    pub grid: GridSpec,
    pub dt0: f64,
    pub tol_grad: f64,
    /// Relative to `|∇w|₂²`.
    pub tol_pohozaev: f64,
    pub max_iters: usize,
    pub reproject_every: usize,
    pub n_starts: usize,
    pub seed: u64,
    pub fiber: FiberSettings,
}

impl SolverConfig {
    /// Default controls for the given problem.
    pub fn new(constraint: MassConstraint, model: NonlinearityModel) -> Self {
        Self {
            constraint,
            model,
            grid: GridSpec::default(),
            dt0: 1.0,
            tol_grad: 1e-6,
            tol_pohozaev: 1e-6,
            max_iters: 5000,
            reproject_every: 1,
            n_starts: 4,
            seed: 0,
            fiber: FiberSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.fiber.validate()?;
        let c = &self.constraint;
        if !(c.a > 0.0) || !(c.b > 0.0) {
            return Err(Error::Config("masses must be positive".into()));
        }
        let positive = [("dt0", self.dt0), ("tol_grad", self.tol_grad), ("tol_pohozaev", self.tol_pohozaev)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters < 1 || self.reproject_every < 1 || self.n_starts < 1 {
            return Err(Error::Config("max_iters, reproject_every and n_starts must be at least 1".into()));
        }
        self.grid.build().map(|_| ())
    }

    /// Same configuration with another coupling strength.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Ok(Self { model: self.model.with_mu(mu)?, ..*self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// Backtracking could not find an acceptable step.
    Stalled,
}

/// One row of the per-iteration trail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub iteration: usize,
    pub energy: f64,
    /// `|P|`
    pub pohozaev: f64,
    pub grad_residual: f64,
    pub kinetic: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub state: StatePair,
    pub lambda1: f64,
    pub lambda2: f64,
    pub energy: f64,
    /// `|P|`
    pub pohozaev_residual: f64,
    pub grad_residual: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub nl_pairing: f64,
    /// `𝒥̃″(0)` at the final state.
    pub fiber_curvature: f64,
    pub iterations: usize,
    pub start_index: usize,
    pub trail: Vec<Monitor>,
    pub bounds: Option<BoundsReport>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Initial bump `α e^{−βr²}` parameters for both components of a start.
pub fn start_parameters(seed: u64, start_index: usize) -> [(f64, f64); 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start_index as u64);
    let mut draw = || (rng.gen_range(0.5..=2.0), rng.gen_range(0.25..=1.0));
    let u = draw();
    let v = draw();
    [u, v]
}

fn initial_state(config: &SolverConfig, grid: &Arc<RadialGrid>, start_index: usize) -> Result<StatePair> {
    let [(au, bu), (av, bv)] = start_parameters(config.seed, start_index);
    let w =
        StatePair::from_fns(grid, |r| au * libm::exp(-bu * r * r), |r| av * libm::exp(-bv * r * r))?.pinned();
    project_mass(&w, &config.constraint)
}

/// Runs one start of the multi-start solve.
pub fn run_start(config: &SolverConfig, grid: &Arc<RadialGrid>, start_index: usize) -> Result<SolveReport> {
    let init = initial_state(config, grid, start_index)?;
    descend(config, init, start_index)
}

/// Runs the descent from a given state (masses are normalized first).
pub fn solve_from_state(config: &SolverConfig, init: &StatePair) -> Result<SolveReport> {
    config.validate()?;
    let w = project_mass(&init.clone().pinned(), &config.constraint)?;
    let mut report = descend(config, w, 0)?;
    attach_bounds(config, &mut report);
    if report.converged() {
        Ok(report)
    } else {
        Err(Error::NotConverged(Box::new(report)))
    }
}

/// Multi-start solve; the converged run of least energy wins.
pub fn solve_ground_state(config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let grid = config.grid.build()?;
    let runs = (0..config.n_starts).map(|i| run_start(config, &grid, i)).collect();
    let mut winner = select_winner(runs)?;
    attach_bounds(config, &mut winner);
    Ok(winner)
}

pub fn attach_bounds(config: &SolverConfig, report: &mut SolveReport) {
    if report.converged() {
        report.bounds = verify::check_bounds(report, config).ok();
    }
}

/// Least-energy converged run, ties (within [`TIE_TOLERANCE`]) going to the
/// lowest start index. Without a converged run the closest one is returned
/// inside [`Error::NotConverged`].
pub fn select_winner(runs: Vec<Result<SolveReport>>) -> Result<SolveReport> {
    let mut best: Option<SolveReport> = None;
    let mut closest: Option<SolveReport> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(r) if r.converged() => {
                let take = match &best {
                    None => true,
                    Some(b) => {
                        r.energy < b.energy - TIE_TOLERANCE
                            || ((r.energy - b.energy).abs() <= TIE_TOLERANCE && r.start_index < b.start_index)
                    }
                };
                if take {
                    best = Some(r);
                }
            }
            Ok(r) => {
                if closest.as_ref().is_none_or(|c| r.grad_residual < c.grad_residual) {
                    closest = Some(r);
                }
            }
            Err(Error::NotConverged(r)) => {
                if closest.as_ref().is_none_or(|c| r.grad_residual < c.grad_residual) {
                    closest = Some(*r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, closest, first_err) {
        (Some(b), _, _) => Ok(b),
        (None, Some(c), _) => Err(Error::NotConverged(Box::new(c))),
        (None, None, Some(e)) => Err(e),
        (None, None, None) => Err(Error::Config("no starts were run".into())),
    }
}

struct Snapshot {
    state: StatePair,
    energy: f64,
    pohozaev: f64,
    kinetic: f64,
}

fn snapshot(state: StatePair, model: &NonlinearityModel) -> Result<Snapshot> {
    let f = evaluate(&state, model)?;
    Ok(Snapshot { state, energy: f.energy, pohozaev: f.pohozaev, kinetic: f.kinetic })
}

/// `(S + cW)⁻¹ W x` on the free nodes, for one component.
fn precondition(grid: &RadialGrid, chol: &BandCholesky, x: &[f64]) -> Vec<f64> {
    let m = grid.len() - 1;
    let mut y: Vec<f64> = grid.weights()[..m].iter().zip(&x[..m]).map(|(w, v)| w * v).collect();
    chol.solve_in_place(&mut y);
    y.push(0.0);
    y
}

/// Preconditioned direction for one component, `W`-orthogonal to `u`.
fn component_direction(grid: &RadialGrid, shift: f64, g: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let m = grid.len() - 1;
    let mut a = grid.stiffness_band().truncated(m);
    a.add_diagonal(&grid.weights()[..m], shift);
    let chol = BandCholesky::factor(&a)?;
    let d = precondition(grid, &chol, g);
    let z = precondition(grid, &chol, u);
    let den = interior_dot(grid, u, &z);
    let nu = if den > 0.0 { interior_dot(grid, u, &d) / den } else { 0.0 };
    Ok(d.iter().zip(&z).map(|(di, zi)| di - nu * zi).collect())
}

fn descend(config: &SolverConfig, init: StatePair, start_index: usize) -> Result<SolveReport> {
    let model = &config.model;
    let grid = init.grid().clone();
    let first = manifold::project_pohozaev_with(&init, model, &config.fiber)?;
    let mut cur = snapshot(first.state, model)?;
    let mut dt = config.dt0;
    let mut trail = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    // (iteration, residual) at the last stagnation check
    let mut checkpoint = (0, f64::INFINITY);
    let mut polished = false;

    loop {
        let res = residual(&cur.state, model)?;
        trail.push(Monitor {
            iteration: iterations,
            energy: cur.energy,
            pohozaev: cur.pohozaev.abs(),
            grad_residual: res.norm,
            kinetic: cur.kinetic,
            dt,
        });
        if res.norm <= config.tol_grad && cur.pohozaev.abs() <= config.tol_pohozaev * cur.kinetic {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= checkpoint.0 + POLISH_RETRY {
            let stagnant = res.norm > 0.5 * checkpoint.1;
            checkpoint = (iterations, res.norm);
            if stagnant && res.norm <= POLISH_FROM {
                if let Some(p) = newton_polish(config, &cur.state)? {
                    let f = evaluate(&p.state, model)?;
                    if p.norm <= config.tol_grad && f.pohozaev.abs() <= config.tol_pohozaev * f.kinetic {
                        cur = snapshot(p.state, model)?;
                        polished = true;
                        status = SolveStatus::Converged;
                        break;
                    }
                }
            }
        }
        if iterations >= config.max_iters {
            break;
        }
        iterations += 1;

        let floor = 0.05;
        let du = component_direction(&grid, res.lambda1.max(floor), res.g.u.values(), cur.state.u.values())?;
        let dv = component_direction(&grid, res.lambda2.max(floor), res.g.v.values(), cur.state.v.values())?;
        let reproject = iterations % config.reproject_every == 0;

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if let Ok(next) = trial(config, &cur.state, &du, &dv, dt, reproject) {
                if next.energy <= cur.energy + ENERGY_SLACK {
                    accepted = Some(next);
                    break;
                }
            }
            dt *= 0.5;
        }
        match accepted {
            Some(next) => {
                cur = next;
                dt = (2.0 * dt).min(config.dt0);
            }
            None => {
                status = SolveStatus::Stalled;
                break;
            }
        }
    }

    if status == SolveStatus::Converged {
        // close the run exactly on the manifold; a polished state keeps its
        // own P if the projection would cost the residual tolerance
        let settings = FiberSettings { tol_proj: FINAL_PROJECTION_TOL, max_passes: 20, ..config.fiber };
        if let Ok(p) = manifold::reproject_near(&cur.state, model, &settings) {
            if !polished || residual(&p.state, model)?.norm <= config.tol_grad {
                cur = snapshot(p.state, model)?;
            }
        }
    }
    finish(config, cur, status, iterations, start_index, trail)
}

struct Polished {
    state: StatePair,
    norm: f64,
}

/// Newton iteration on the full stationarity system
///
/// ```text
/// S u + λ₁ W u − W H_u = 0,   S v + λ₂ W v − W H_v = 0,
/// uᵀ W u = a²,                vᵀ W v = b²
/// ```
///
/// started from a near-critical state. The discrete critical point sits
/// slightly off `P = 0` (the discrete energy is not exactly dilation
/// covariant), which the projected descent alone cannot reach.
fn newton_polish(config: &SolverConfig, start: &StatePair) -> Result<Option<Polished>> {
    let model = &config.model;
    let mut w = start.clone();
    let mut norm = residual(&w, model)?.norm;
    let first = norm;
    for _ in 0..POLISH_ITERS {
        let Some(step) = newton_step(config, &w)? else {
            break;
        };
        let mut alpha = 1.0;
        let mut improved = None;
        for _ in 0..8 {
            let moved = StatePair::from_values(
                w.grid(),
                w.u.values().iter().zip(&step.u).map(|(x, d)| x + alpha * d).collect(),
                w.v.values().iter().zip(&step.v).map(|(x, d)| x + alpha * d).collect(),
            )?
            .pinned();
            if let Ok(next) = project_mass(&moved, &config.constraint) {
                if let Ok(r) = residual(&next, model) {
                    if r.norm < norm {
                        improved = Some((next, r.norm));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((next, next_norm)) = improved else {
            break;
        };
        let stalled = next_norm > 0.5 * norm;
        w = next;
        norm = next_norm;
        if norm <= 1e-3 * config.tol_grad || stalled {
            break;
        }
    }
    Ok((norm < first).then_some(Polished { state: w, norm }))
}

struct Step {
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Linearized stationarity system at a state, in interleaved unknowns
/// `(u₀, v₀, u₁, v₁, …)` over the free nodes.
struct Kkt {
    /// Factor of `B + sW`; `B` itself is singular whenever `H` has a
    /// continuous symmetry (pure power with equal multipliers is invariant
    /// under rotations of `(u, v)`), while the bordered system is not.
    lu: BandLu,
    /// `(Wₖ(λ₁ − H_uu), −Wₖ H_uv, Wₖ(λ₂ − H_vv))` per free node
    local: Vec<(f64, f64, f64)>,
    cu: Vec<f64>,
    cv: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    schur: [[f64; 2]; 2],
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| p * q).sum()
}

impl Kkt {
    fn new(
        grid: &RadialGrid,
        w: &StatePair,
        model: &NonlinearityModel,
        l1: f64,
        l2: f64,
    ) -> Result<Option<Self>> {
        let m = grid.len() - 1;
        let weights = grid.weights();
        let (u, v) = (w.u.values(), w.v.values());
        let shift = 1e-4 * l1.abs().max(l2.abs()).max(1e-2);
        let band = 2 * HALF_BAND + 1;
        let mut jac = Band::zeros(2 * m, band, band);
        let stiff = grid.stiffness_band();
        let mut local = Vec::with_capacity(m);
        for k in 0..m {
            for d in 0..=HALF_BAND.min(k) {
                let val = stiff.lower[d][k];
                let j = k - d;
                jac.add(2 * k, 2 * j, val);
                jac.add(2 * k + 1, 2 * j + 1, val);
                if d > 0 {
                    jac.add(2 * j, 2 * k, val);
                    jac.add(2 * j + 1, 2 * k + 1, val);
                }
            }
            let (huu, huv, hvv) = model.eval_hessian_h(u[k], v[k])?;
            let wk = weights[k];
            let entry = (wk * (l1 - huu), -wk * huv, wk * (l2 - hvv));
            local.push(entry);
            jac.add(2 * k, 2 * k, entry.0 + shift * wk);
            jac.add(2 * k, 2 * k + 1, entry.1);
            jac.add(2 * k + 1, 2 * k, entry.1);
            jac.add(2 * k + 1, 2 * k + 1, entry.2 + shift * wk);
        }
        let Ok(lu) = BandLu::factor(jac) else {
            return Ok(None);
        };
        let mut cu = vec![0.0; 2 * m];
        let mut cv = vec![0.0; 2 * m];
        for k in 0..m {
            cu[2 * k] = weights[k] * u[k];
            cv[2 * k + 1] = weights[k] * v[k];
        }
        let (mut x1, mut x2) = (cu.clone(), cv.clone());
        lu.solve_in_place(&mut x1);
        lu.solve_in_place(&mut x2);
        let schur = [[2.0 * dot(&cu, &x1), 2.0 * dot(&cu, &x2)], [2.0 * dot(&cv, &x1), 2.0 * dot(&cv, &x2)]];
        let det = schur[0][0] * schur[1][1] - schur[0][1] * schur[1][0];
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Ok(None);
        }
        Ok(Some(Self { lu, local, cu, cv, x1, x2, schur }))
    }

    /// Solves the shifted bordered system for right-hand side `(rz, e)`.
    fn solve_shifted(&self, rz: &[f64], e: [f64; 2]) -> (Vec<f64>, [f64; 2]) {
        let mut x0 = rz.to_vec();
        self.lu.solve_in_place(&mut x0);
        let r1 = 2.0 * dot(&self.cu, &x0) - e[0];
        let r2 = 2.0 * dot(&self.cv, &x0) - e[1];
        let [[a, b], [c, d]] = self.schur;
        let det = a * d - b * c;
        let dl = [(r1 * d - r2 * b) / det, (a * r2 - c * r1) / det];
        let dz = x0.iter().zip(&self.x1).zip(&self.x2).map(|((x, p), q)| x - dl[0] * p - dl[1] * q).collect();
        (dz, dl)
    }

    /// Unshifted `B z`.
    fn apply(&self, grid: &RadialGrid, z: &[f64]) -> Vec<f64> {
        let m = self.local.len();
        let n = m + 1;
        let mut zu = vec![0.0; n];
        let mut zv = vec![0.0; n];
        for k in 0..m {
            zu[k] = z[2 * k];
            zv[k] = z[2 * k + 1];
        }
        let (mut su, mut sv) = (vec![0.0; n], vec![0.0; n]);
        let stiff = grid.stiffness_band();
        stiff.matvec(&zu, &mut su);
        stiff.matvec(&zv, &mut sv);
        let mut out = vec![0.0; 2 * m];
        for (k, &(a, b, c)) in self.local.iter().enumerate() {
            out[2 * k] = su[k] + a * zu[k] + b * zv[k];
            out[2 * k + 1] = sv[k] + b * zu[k] + c * zv[k];
        }
        out
    }

    /// Solves the unshifted system by refinement on the shifted one.
    fn solve(&self, grid: &RadialGrid, rz: &[f64], e: [f64; 2]) -> Vec<f64> {
        let (mut z, mut l) = self.solve_shifted(rz, e);
        let scale = rz.iter().map(|x| x.abs()).fold(0.0, f64::max).max(e[0].abs()).max(e[1].abs());
        for _ in 0..8 {
            let bz = self.apply(grid, &z);
            let res_z: Vec<f64> =
                (0..rz.len()).map(|i| rz[i] - bz[i] - l[0] * self.cu[i] - l[1] * self.cv[i]).collect();
            let res_e = [e[0] - 2.0 * dot(&self.cu, &z), e[1] - 2.0 * dot(&self.cv, &z)];
            let size =
                res_z.iter().map(|x| x.abs()).fold(0.0, f64::max).max(res_e[0].abs()).max(res_e[1].abs());
            if size <= 1e-14 * scale {
                break;
            }
            let (dz, dl) = self.solve_shifted(&res_z, res_e);
            z.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
            l[0] += dl[0];
            l[1] += dl[1];
        }
        z
    }
}

fn newton_step(config: &SolverConfig, w: &StatePair) -> Result<Option<Step>> {
    let model = &config.model;
    let grid = w.grid();
    let n = grid.len();
    let m = n - 1;
    let weights = grid.weights();
    let res = residual(w, model)?;
    let Some(kkt) = Kkt::new(grid, w, model, res.lambda1, res.lambda2)? else {
        return Ok(None);
    };
    let mut rhs = vec![0.0; 2 * m];
    for k in 0..m {
        rhs[2 * k] = -weights[k] * res.g.u.values()[k];
        rhs[2 * k + 1] = -weights[k] * res.g.v.values()[k];
    }
    let (ma, mb) = w.masses();
    let (a, b) = (config.constraint.a, config.constraint.b);
    let dz = kkt.solve(grid, &rhs, [a * a - ma, b * b - mb]);
    let mut su = vec![0.0; n];
    let mut sv = vec![0.0; n];
    for k in 0..m {
        su[k] = dz[2 * k];
        sv[k] = dz[2 * k + 1];
    }
    if su.iter().chain(&sv).any(|x| !x.is_finite()) {
        return Ok(None);
    }
    Ok(Some(Step { u: su, v: sv }))
}

fn trial(
    config: &SolverConfig,
    w: &StatePair,
    du: &[f64],
    dv: &[f64],
    dt: f64,
    reproject: bool,
) -> Result<Snapshot> {
    let step = |x: &[f64], d: &[f64]| -> Vec<f64> { x.iter().zip(d).map(|(a, b)| a - dt * b).collect() };
    let moved = StatePair::from_values(w.grid(), step(w.u.values(), du), step(w.v.values(), dv))?.pinned();
    let mut next = project_mass(&moved, &config.constraint)?;
    if reproject {
        next = manifold::reproject_near(&next, &config.model, &config.fiber)?.state;
    }
    snapshot(next, &config.model)
}

fn finish(
    config: &SolverConfig,
    cur: Snapshot,
    mut status: SolveStatus,
    iterations: usize,
    start_index: usize,
    trail: Vec<Monitor>,
) -> Result<SolveReport> {
    let model = &config.model;
    let res = residual(&cur.state, model)?;
    let f = evaluate(&cur.state, model)?;
    if status == SolveStatus::Converged
        && !(res.norm <= config.tol_grad && f.pohozaev.abs() <= config.tol_pohozaev * f.kinetic)
    {
        status = SolveStatus::MaxIterations;
    }
    if cur.state.u.max_abs() == 0.0 || cur.state.v.max_abs() == 0.0 {
        return Err(Error::DegenerateState("a component vanished during the descent"));
    }
    let fiber_curvature = Fiber::new(&cur.state).second_derivative(model, 0.0)?;
    let report = SolveReport {
        status,
        lambda1: res.lambda1,
        lambda2: res.lambda2,
        energy: f.energy,
        pohozaev_residual: f.pohozaev.abs(),
        grad_residual: res.norm,
        kinetic: f.kinetic,
        potential: f.potential,
        nl_pairing: f.nl_pairing,
        fiber_curvature,
        iterations,
        start_index,
        trail,
        bounds: None,
        state: cur.state,
    };
    if report.converged() {
        Ok(report)
    } else {
        Err(Error::NotConverged(Box::new(report)))
    }
}

/// Discrete maximum of `J` along the dilation path `s = (1−t)s₁ + t s₂`.
pub fn mountain_pass_upper_bound(
    w0: &StatePair,
    model: &NonlinearityModel,
    s1: f64,
    s2: f64,
    m: usize,
) -> Result<f64> {
    if m < 16 {
        return Err(Error::InvalidPath(format!("path resolution {m} is below 16")));
    }
    let fiber = Fiber::new(w0);
    let start = fiber.energy(model, s1)?;
    let end = fiber.energy(model, s2)?;
    if !(start > 0.0) || !(end < 0.0) {
        return Err(Error::InvalidPath(format!(
            "endpoints need J > 0 then J < 0, got {start:.4e} and {end:.4e}"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..=m {
        let t = k as f64 / m as f64;
        best = best.max(fiber.energy(model, (1.0 - t) * s1 + t * s2)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    pub energy: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log m_μ` against `log μ` over converged rows.
    pub slope: f64,
    /// Every row converged.
    pub complete: bool,
    /// Smallest swept `μ` with both multipliers positive.
    pub mu_positive: Option<f64>,
}

/// Solves along ascending `μ`, warm-starting each solve from the previous
/// converged state.
pub fn sweep_mu(config: &SolverConfig, mu_values: &[f64]) -> Result<SweepTable> {
    if mu_values.len() < 4 {
        return Err(Error::Config("a sweep needs at least four values of mu".into()));
    }
    if mu_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("mu values must be strictly ascending".into()));
    }
    if !(mu_values[mu_values.len() - 1] >= MIN_SWEEP_SPAN * mu_values[0]) {
        return Err(Error::Config(format!("mu values must span a factor of at least {MIN_SWEEP_SPAN}")));
    }
    let mut rows = Vec::with_capacity(mu_values.len());
    let mut warm: Option<StatePair> = None;
    for &mu in mu_values {
        let cfg = config.with_mu(mu)?;
        let outcome = match &warm {
            None => solve_ground_state(&cfg),
            Some(w) => solve_from_state(&cfg, w),
        };
        let (report, converged) = match outcome {
            Ok(r) => (r, true),
            Err(Error::NotConverged(r)) => (*r, false),
            Err(e) => return Err(e),
        };
        if converged {
            warm = Some(report.state.clone());
        }
        rows.push(SweepRow {
            mu,
            energy: report.energy,
            lambda1: report.lambda1,
            lambda2: report.lambda2,
            converged,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.converged && r.energy > 0.0)
        .map(|r| (libm::log(r.mu), libm::log(r.energy)))
        .collect();
    let slope = least_squares_slope(&pts);
    let complete = rows.iter().all(|r| r.converged);
    let mu_positive = rows.iter().find(|r| r.converged && r.lambda1 > 0.0 && r.lambda2 > 0.0).map(|r| r.mu);
    Ok(SweepTable { rows, slope, complete, mu_positive })
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Closed-form pure-power fiber level used by the tests: the maximum of
/// `A e^{2s}/2 − C e^{(σ−2)s}` over `s`.
pub fn pure_power_fiber_level(kinetic: f64, potential: f64, sigma: f64) -> f64 {
    let p = sigma - 2.0;
    // maximizer of A/2 x − C x^{p/2} with x = e^{2s}
    let x = libm::pow(kinetic / (p * potential), 2.0 / (p - 2.0));
    0.5 * kinetic * x - potential * libm::pow(x, p / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn gaussian_pair(grid: &Arc<RadialGrid>) -> StatePair {
        StatePair::from_fns(grid, |r| libm::exp(-r * r / 2.0), |r| libm::exp(-r * r / 2.0)).unwrap()
    }

    fn pp_config() -> SolverConfig {
        let model = NonlinearityModel::pure_power(1.0, 6.0).unwrap();
        SolverConfig::new(MassConstraint::new(1.0, 1.0, model.gamma0).unwrap(), model)
    }

    #[test]
    fn start_parameters_are_seeded_and_in_range() {
        for i in 0..32 {
            let [(au, bu), (av, bv)] = start_parameters(7, i);
            for (a, b) in [(au, bu), (av, bv)] {
                assert!((0.5..=2.0).contains(&a) && (0.25..=1.0).contains(&b));
            }
            assert_eq!(start_parameters(7, i), [(au, bu), (av, bv)]);
        }
        assert_ne!(start_parameters(7, 0), start_parameters(7, 1));
        assert_ne!(start_parameters(7, 0), start_parameters(8, 0));
    }

    #[test]
    fn closed_form_fiber_level() {
        // πe^{2s} − (8π/3)e^{4s} peaks at 3π/32
        let level = pure_power_fiber_level(2.0 * PI, 8.0 * PI / 3.0, 6.0);
        assert!((level - 3.0 * PI / 32.0).abs() < 1e-14);
    }

    #[test]
    fn mountain_pass_path_reproduces_closed_form() {
        let grid = RadialGrid::new(12.0, 2048, Spacing::Uniform).unwrap();
        let w0 = gaussian_pair(&grid);
        let model = NonlinearityModel::pure_power(1.0, 6.0).unwrap();
        let exact = 3.0 * PI / 32.0;
        let coarse = mountain_pass_upper_bound(&w0, &model, -3.0, 1.0, 1024).unwrap();
        assert!((coarse - exact).abs() < 1e-4, "{coarse}");
        let fine = mountain_pass_upper_bound(&w0, &model, -3.0, 1.0, 2048).unwrap();
        assert!(fine >= coarse - 1e-8);
        assert!(fine <= exact + 1e-8);
    }

    #[test]
    fn mountain_pass_path_rejects_bad_endpoints() {
        let grid = RadialGrid::new(12.0, 512, Spacing::Uniform).unwrap();
        let w0 = gaussian_pair(&grid);
        let model = NonlinearityModel::pure_power(1.0, 6.0).unwrap();
        assert!(matches!(mountain_pass_upper_bound(&w0, &model, 0.5, 1.0, 64), Err(Error::InvalidPath(_))));
        assert!(matches!(mountain_pass_upper_bound(&w0, &model, -3.0, 1.0, 8), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn least_squares_slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 - 0.5 * k as f64)).collect();
        assert!((least_squares_slope(&pts) + 0.5).abs() < 1e-15);
        assert!(least_squares_slope(&pts[..1]).is_nan());
    }

    #[test]
    fn config_validation() {
        let mut c = pp_config();
        assert!(c.validate().is_ok());
        c.n_starts = 0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = pp_config();
        c.tol_grad = 0.0;
        assert!(c.validate().is_err());
        let mut c = pp_config();
        c.grid.n = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn solve_is_deterministic_and_stationary() {
        let mut c = pp_config();
        c.n_starts = 1;
        c.seed = 3;
        let a = solve_ground_state(&c).unwrap();
        let b = solve_ground_state(&c).unwrap();
        assert_eq!(a.energy.to_bits(), b.energy.to_bits());
        assert_eq!(a.state, b.state);
        assert_eq!(a.trail, b.trail);
        assert!(a.grad_residual <= c.tol_grad);
        assert!(a.pohozaev_residual <= c.tol_pohozaev * a.kinetic);
        let (ma, mb) = a.state.masses();
        assert!((ma - 1.0).abs() < 1e-10 && (mb - 1.0).abs() < 1e-10);
        assert!(a.lambda1 > 0.0 && a.lambda2 > 0.0);
        assert!(a.fiber_curvature < 0.0);
        for w in a.trail.windows(2) {
            assert!(w[1].energy <= w[0].energy + ENERGY_SLACK);
        }
        assert!(a.bounds.as_ref().is_some_and(|b| b.passed()));
    }

    #[test]
    fn winner_dominated_by_its_own_mountain_pass_path() {
        let mut c = pp_config();
        c.n_starts = 2;
        let r = solve_ground_state(&c).unwrap();
        let top = mountain_pass_upper_bound(&r.state, &c.model, -3.0, 1.0, 1024).unwrap();
        assert!(r.energy <= top + 1e-6);
    }

    fn fake(energy: f64, start_index: usize, status: SolveStatus) -> SolveReport {
        let grid = RadialGrid::new(1.0, 16, Spacing::Uniform).unwrap();
        SolveReport {
            status,
            state: StatePair::zeros(&grid),
            lambda1: 1.0,
            lambda2: 1.0,
            energy,
            pohozaev_residual: 0.0,
            grad_residual: energy,
            kinetic: 1.0,
            potential: 0.0,
            nl_pairing: 0.0,
            fiber_curvature: -1.0,
            iterations: 1,
            start_index,
            trail: Vec::new(),
            bounds: None,
        }
    }

    #[test]
    fn winner_selection_prefers_least_energy_then_lowest_index() {
        let runs = vec![
            Ok(fake(0.5, 0, SolveStatus::Converged)),
            Ok(fake(0.3 + 5e-11, 1, SolveStatus::Converged)),
            Ok(fake(0.3, 2, SolveStatus::Converged)),
            Err(Error::NotConverged(Box::new(fake(0.1, 3, SolveStatus::MaxIterations)))),
        ];
        assert_eq!(select_winner(runs).unwrap().start_index, 1);
        let runs = vec![
            Err(Error::NotConverged(Box::new(fake(0.4, 0, SolveStatus::Stalled)))),
            Err(Error::NotConverged(Box::new(fake(0.2, 1, SolveStatus::MaxIterations)))),
        ];
        match select_winner(runs) {
            Err(Error::NotConverged(r)) => assert_eq!(r.start_index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_preconditions() {
        let c = pp_config();
        assert!(matches!(sweep_mu(&c, &[1.0, 2.0, 4.0]), Err(Error::Config(_))));
        assert!(matches!(sweep_mu(&c, &[1.0, 4.0, 2.0, 8.0]), Err(Error::Config(_))));
        assert!(matches!(sweep_mu(&c, &[1.0, 1.5, 2.0, 3.0]), Err(Error::Config(_))));
    }
}
