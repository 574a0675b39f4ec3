//! Projections onto the mass torus and the Pohozaev manifold.

use alloc::format;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{self, resample_scaled_within, Fiber, StatePair};
use crate::nonlinearity::NonlinearityModel;

/// Target masses `|u|₂ = a`, `|v|₂ = b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassConstraint {
    pub a: f64,
    pub b: f64,
    pub gamma0: f64,
    /// `a² + b² < 2π/γ₀`; a violation is allowed but reported.
    pub admissible: bool,
}

impl MassConstraint {
    pub fn new(a: f64, b: f64, gamma0: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("masses must be positive, got a = {a}, b = {b}")));
        }
        if !(gamma0 > 0.0) {
            return Err(Error::Config(format!("gamma0 must be positive, got {gamma0}")));
        }
        Ok(Self { a, b, gamma0, admissible: a * a + b * b < 2.0 * PI / gamma0 })
    }

    /// `2π/γ₀ − a² − b²`, positive exactly when admissible.
    pub fn window(&self) -> f64 {
        2.0 * PI / self.gamma0 - self.a * self.a - self.b * self.b
    }
}

/// Rescales each component to its target `L²` norm.
pub fn project_mass(w: &StatePair, c: &MassConstraint) -> Result<StatePair> {
    let (mu, mv) = w.masses();
    if !(mu > 0.0) || !(mv > 0.0) {
        return Err(Error::DegenerateState("cannot normalize a zero-mass component"));
    }
    let fu = c.a / libm::sqrt(mu);
    let fv = c.b / libm::sqrt(mv);
    Ok(StatePair {
        u: if fu == 1.0 { w.u.clone() } else { w.u.scaled(fu) },
        v: if fv == 1.0 { w.v.clone() } else { w.v.scaled(fv) },
    })
}

/// Fiber scan, bisection and projection controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSettings {
    /// Scan step in `s`.
    pub s_scan: f64,
    /// The scan covers `[−s_range, s_range]`.
    pub s_range: f64,
    /// Largest dilation accepted when resampling.
    pub s_max: f64,
    /// `|𝒥̃′(s*)|` tolerance relative to `e^{2s*}·|∇w|₂²`.
    pub tol_fiber: f64,
    /// `|P|` tolerance relative to `|∇w|₂²` after projection.
    pub tol_proj: f64,
    /// Resample/normalize passes allowed per projection.
    pub max_passes: usize,
}

impl Default for FiberSettings {
    fn default() -> Self {
        Self {
            s_scan: 0.05,
            s_range: 8.0,
            s_max: functional::DEFAULT_S_MAX,
            tol_fiber: 1e-10,
            tol_proj: 1e-6,
            max_passes: 12,
        }
    }
}

impl FiberSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.s_scan > 0.0
            && self.s_range > self.s_scan
            && self.s_max > 0.0
            && self.tol_fiber > 0.0
            && self.tol_proj > 0.0
            && self.max_passes >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("fiber settings must be positive with s_range > s_scan".into()))
        }
    }
}

/// The fiber maximizer `s*` together with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberMax {
    pub s_star: f64,
    /// `𝒥̃_w(s*)`
    pub value: f64,
    /// `𝒥̃″_w(s*)`, expected negative.
    pub curvature: f64,
}

pub fn fiber_maximizer(w: &StatePair, model: &NonlinearityModel) -> Result<f64> {
    fiber_maximizer_with(w, model, &FiberSettings::default()).map(|m| m.s_star)
}

/// Scans `𝒥̃′` for its single `+ → −` sign change and bisects it.
///
/// The scan stops early at the first dilation the overflow guard refuses.
pub fn fiber_maximizer_with(
    w: &StatePair,
    model: &NonlinearityModel,
    settings: &FiberSettings,
) -> Result<FiberMax> {
    let fiber = Fiber::new(w);
    if !(fiber.kinetic() > 0.0) {
        return Err(Error::DegenerateState("fiber of a state with zero gradient"));
    }
    let steps = libm::ceil(2.0 * settings.s_range / settings.s_scan) as usize;
    let lo = -settings.s_range;
    let mut bracket = None;
    let mut changes = 0;
    let mut prev: Option<(f64, f64)> = None;
    let mut last_s = lo;
    for k in 0..=steps {
        let s = (lo + k as f64 * settings.s_scan).min(settings.s_range);
        let d = match fiber.derivative(model, s) {
            Ok(d) => d,
            Err(Error::Range(_)) => break,
            Err(e) => return Err(e),
        };
        last_s = s;
        if let Some((ps, pd)) = prev {
            if (pd > 0.0) != (d > 0.0) {
                changes += 1;
                if pd > 0.0 && bracket.is_none() {
                    bracket = Some((ps, s));
                }
            }
        }
        prev = Some((s, d));
    }
    match (bracket, changes) {
        (Some(b), 1) => finish(&fiber, model, b, settings),
        (None, _) => Err(Error::NoMaximizer { lo, hi: last_s }),
        (Some(_), n) => Err(Error::NonUnique { sign_changes: n }),
    }
}

fn finish(
    fiber: &Fiber<'_>,
    model: &NonlinearityModel,
    (mut a, mut b): (f64, f64),
    settings: &FiberSettings,
) -> Result<FiberMax> {
    // bisection down to adjacent doubles
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if fiber.derivative(model, m)? > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let da = fiber.derivative(model, a)?;
    let db = fiber.derivative(model, b)?;
    let (s_star, d) = if da.abs() <= db.abs() { (a, da) } else { (b, db) };
    let scale = libm::exp(2.0 * s_star) * fiber.kinetic();
    if d.abs() > settings.tol_fiber * scale {
        return Err(Error::Range(format!(
            "fiber derivative {d:.3e} at the maximizer exceeds tolerance {:.1e}",
            settings.tol_fiber * scale
        )));
    }
    Ok(FiberMax {
        s_star,
        value: fiber.energy(model, s_star)?,
        curvature: fiber.second_derivative(model, s_star)?,
    })
}

/// Newton iteration on `𝒥̃′` started at `s = 0`, for states already close to
/// the manifold. Falls back to the full scan when the curvature is not
/// negative or the iteration does not settle.
pub(crate) fn fiber_maximizer_near(
    w: &StatePair,
    model: &NonlinearityModel,
    settings: &FiberSettings,
) -> Result<FiberMax> {
    let fiber = Fiber::new(w);
    let mut s = 0.0;
    for _ in 0..40 {
        let d = fiber.derivative(model, s)?;
        let scale = libm::exp(2.0 * s) * fiber.kinetic();
        if d.abs() <= 4.0 * f64::EPSILON * scale {
            return Ok(FiberMax {
                s_star: s,
                value: fiber.energy(model, s)?,
                curvature: fiber.second_derivative(model, s)?,
            });
        }
        let c = fiber.second_derivative(model, s)?;
        if !(c < 0.0) {
            break;
        }
        let step = (-d / c).clamp(-0.25, 0.25);
        if s + step == s {
            if d.abs() <= settings.tol_fiber * scale {
                return Ok(FiberMax { s_star: s, value: fiber.energy(model, s)?, curvature: c });
            }
            break;
        }
        s += step;
        if s.abs() > settings.s_range {
            break;
        }
    }
    fiber_maximizer_with(w, model, settings)
}

/// Outcome of [`project_pohozaev_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct PohozaevProjection {
    pub state: StatePair,
    /// Maximizer found on the first pass.
    pub s_star: f64,
    pub passes: usize,
    /// `P` of the returned state.
    pub pohozaev: f64,
    pub kinetic: f64,
}

/// Dilates `w` onto `P = 0` keeping its own masses.
pub fn project_pohozaev(w: &StatePair, model: &NonlinearityModel) -> Result<StatePair> {
    project_pohozaev_with(w, model, &FiberSettings::default()).map(|p| p.state)
}

/// Repeats resample → zero the `R` sample → renormalize until
/// `|P| ≤ tol_proj·|∇w|₂²`. Every pass after the first starts from a state
/// whose maximizer is within interpolation error of zero.
pub fn project_pohozaev_with(
    w: &StatePair,
    model: &NonlinearityModel,
    settings: &FiberSettings,
) -> Result<PohozaevProjection> {
    project_passes(w, model, settings, false)
}

/// [`project_pohozaev_with`] for states near the manifold: every pass uses
/// the local Newton root instead of the global scan.
pub(crate) fn reproject_near(
    w: &StatePair,
    model: &NonlinearityModel,
    settings: &FiberSettings,
) -> Result<PohozaevProjection> {
    project_passes(w, model, settings, true)
}

fn project_passes(
    w: &StatePair,
    model: &NonlinearityModel,
    settings: &FiberSettings,
    local: bool,
) -> Result<PohozaevProjection> {
    let (mu, mv) = w.masses();
    let target = MassConstraint::new(libm::sqrt(mu), libm::sqrt(mv), model.gamma0)?;
    let mut state = w.clone();
    let mut s_first = None;
    let mut best = f64::INFINITY;
    for pass in 1..=settings.max_passes {
        let max = if local || pass > 1 {
            fiber_maximizer_near(&state, model, settings)?
        } else {
            fiber_maximizer_with(&state, model, settings)?
        };
        s_first.get_or_insert(max.s_star);
        let moved = resample_scaled_within(&state, max.s_star, settings.s_max)?.pinned();
        state = project_mass(&moved, &target)?;
        let kin = state.kinetic();
        let p = functional::pohozaev(&state, model)?;
        best = best.min(p.abs() / kin);
        if p.abs() <= settings.tol_proj * kin {
            return Ok(PohozaevProjection {
                state,
                s_star: s_first.unwrap_or(0.0),
                passes: pass,
                pohozaev: p,
                kinetic: kin,
            });
        }
    }
    Err(Error::Range(format!(
        "Pohozaev projection stalled at |P|/|∇w|² = {best:.3e} after {} passes",
        settings.max_passes
    )))
}
