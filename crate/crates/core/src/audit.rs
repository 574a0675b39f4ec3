//! Sampled falsification of the structural hypotheses on a coupling.
//!
//! | id | property tested                                                  |
//! |----|------------------------------------------------------------------|
//! | H1 | `|∇H(w)| / |w|^τ` shrinks to zero on shells `|w| → 0`             |
//! | H2 | `0 < θH(w) ≤ ∇H(w)·w`                                             |
//! | H3 | `H_u(u, 0) = 0` for all `u` and `H_v(0, v) = 0` for all `v`        |
//! | H4 | `H_u(w)u > 0` and `H_v(w)v > 0` where the component is nonzero    |
//! | H5 | `∇H̃(w)·w ≥ 4H̃(w)`                                                |
//! | H6 | `H(w) ≥ μ|w|^σ`                                                   |
//! | H7 | `|∇H| e^{−γ|w|²}` → 0 for `γ = γ₀ + 0.2`, → ∞ for `γ = γ₀ − 0.2`   |
//!
//! Points come from a two-dimensional Halton sequence on `[−M, M]²`. An axis
//! margin `δ > 0` keeps the pointwise H4, H6 and H2-positivity tests at
//! `min(|u|, |v|) > δ`; with `δ = 0` the coordinate axes are sampled
//! explicitly as well.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{powf_nonneg, ModelKind, NonlinearityModel};

/// Relative slack of the pointwise inequality tests.
const REL_SLACK: f64 = 1e-12;
const MAX_WITNESSES: usize = 8;
const AXIS_POINTS: usize = 64;
const H1_SHELLS: usize = 48;
const H7_SHELLS: usize = 24;
const SHELL_ANGLES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 7] = [
        Hypothesis::H1,
        Hypothesis::H2,
        Hypothesis::H3,
        Hypothesis::H4,
        Hypothesis::H5,
        Hypothesis::H6,
        Hypothesis::H7,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
            Hypothesis::H6 => "H6",
            Hypothesis::H7 => "H7",
        }
    }

    pub fn statement(&self) -> &'static str {
        match self {
            Hypothesis::H1 => "|∇H(w)| = o(|w|^τ) as |w| → 0",
            Hypothesis::H2 => "0 < θH(w) ≤ ∇H(w)·w",
            Hypothesis::H3 => "H_u(u,0) = 0 and H_v(0,v) = 0",
            Hypothesis::H4 => "H_u(w)u > 0 and H_v(w)v > 0",
            Hypothesis::H5 => "∇H̃(w)·w ≥ 4H̃(w)",
            Hypothesis::H6 => "H(w) ≥ μ|w|^σ",
            Hypothesis::H7 => "γ₀-exponential critical growth of ∇H",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

/// A sample point and the two sides of the inequality it violates, written
/// so that the violation reads `lhs > rhs` (or `lhs ≠ rhs` for H3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub u: f64,
    pub v: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub hypothesis: Hypothesis,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    /// Points at which the hypothesis was tested.
    pub tested: usize,
    pub note: String,
}

/// Fitted `κ_ε` with `|∇H(w)| ≤ ε|w|^τ + κ_ε |w|^{q−1}(e^{γ|w|²} − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub eps: f64,
    pub q: f64,
    pub gamma: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSettings {
    /// Half-width `M` of the sampled box.
    pub half_width: f64,
    pub n_samples: usize,
    pub axis_margin: f64,
    /// Offset into the Halton sequence.
    pub seed: u64,
    pub envelope_eps: f64,
    pub envelope_q: f64,
    /// `γ = factor·γ₀` in the envelope.
    pub envelope_gamma_factor: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            half_width: 3.0,
            n_samples: 4096,
            axis_margin: 0.1,
            seed: 0,
            envelope_eps: 0.1,
            envelope_q: 4.0,
            envelope_gamma_factor: 1.1,
        }
    }
}

impl AuditSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0) || !self.half_width.is_finite() {
            return Err(Error::Config(format!("audit box must be positive, got {}", self.half_width)));
        }
        if self.n_samples < 1000 {
            return Err(Error::Config(format!("audit needs at least 1000 samples, got {}", self.n_samples)));
        }
        if !(self.axis_margin >= 0.0 && self.axis_margin < self.half_width) {
            return Err(Error::Config(format!(
                "axis margin must lie in [0, {}), got {}",
                self.half_width, self.axis_margin
            )));
        }
        if !(self.envelope_eps > 0.0) || !(self.envelope_q > 2.0) || !(self.envelope_gamma_factor > 1.0) {
            return Err(Error::Config("envelope needs eps > 0, q > 2 and a gamma factor above 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub model: NonlinearityModel,
    pub settings: AuditSettings,
    pub results: Vec<HypothesisResult>,
    pub envelope: Option<Envelope>,
    /// Human-readable description of the sampled domain.
    pub domain: String,
    /// Sample points dropped by the overflow guard.
    pub skipped: usize,
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn result(&self, h: Hypothesis) -> &HypothesisResult {
        self.results.iter().find(|r| r.hypothesis == h).expect("every hypothesis is audited")
    }

    pub fn verdict(&self, h: Hypothesis) -> Verdict {
        self.result(h).verdict
    }

    pub fn any_failed(&self) -> bool {
        self.results.iter().any(|r| r.verdict == Verdict::Fail)
    }
}

/// `k`-th element of the van der Corput sequence in `base`.
fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

fn halton_points(settings: &AuditSettings) -> Vec<(f64, f64)> {
    let m = settings.half_width;
    (0..settings.n_samples as u64)
        .map(|i| {
            let k = settings.seed.wrapping_add(i + 1);
            (m * (2.0 * radical_inverse(k, 2) - 1.0), m * (2.0 * radical_inverse(k, 3) - 1.0))
        })
        .collect()
}

/// Axis points, `(±1, 0)` and `(0, ±1)` first.
fn axis_points(half_width: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];
    for k in 1..=AXIS_POINTS {
        let t = half_width * k as f64 / AXIS_POINTS as f64;
        pts.extend_from_slice(&[(t, 0.0), (-t, 0.0), (0.0, t), (0.0, -t)]);
    }
    pts.retain(|(u, v)| u.abs() <= half_width && v.abs() <= half_width);
    pts
}

struct Collector {
    hyp: Hypothesis,
    tested: usize,
    /// `(severity, witness)`
    bad: Vec<(f64, Witness)>,
}

impl Collector {
    fn new(hyp: Hypothesis) -> Self {
        Self { hyp, tested: 0, bad: Vec::new() }
    }

    fn record(&mut self, severity: f64, w: Witness) {
        self.bad.push((severity, w));
    }

    fn finish(mut self, sort: bool, note: String) -> HypothesisResult {
        if sort {
            self.bad.sort_by(|a, b| b.0.total_cmp(&a.0));
        }
        let verdict = if self.bad.is_empty() { Verdict::Pass } else { Verdict::Fail };
        HypothesisResult {
            hypothesis: self.hyp,
            verdict,
            witnesses: self.bad.into_iter().take(MAX_WITNESSES).map(|(_, w)| w).collect(),
            tested: self.tested,
            note,
        }
    }
}

/// `lhs ≤ rhs` up to relative rounding.
fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + REL_SLACK * lhs.abs().max(rhs.abs())
}

pub fn audit_hypotheses(model: &NonlinearityModel, settings: &AuditSettings) -> Result<AuditReport> {
    model.validate()?;
    settings.validate()?;
    let delta = settings.axis_margin;
    let strict = delta == 0.0;

    let mut points = halton_points(settings);
    if strict {
        points.extend(axis_points(settings.half_width));
    }
    let rho_cap = model.max_rho();
    let before = points.len();
    points.retain(|(u, v)| u * u + v * v <= rho_cap && !(*u == 0.0 && *v == 0.0));
    let skipped = before - points.len();
    let off_axis = |u: f64, v: f64| {
        if strict {
            true
        } else {
            u.abs().min(v.abs()) > delta
        }
    };
    if !points.iter().any(|&(u, v)| off_axis(u, v)) {
        return Err(Error::Config("no sample points left after the axis margin".into()));
    }

    let mut h2 = Collector::new(Hypothesis::H2);
    let mut h4 = Collector::new(Hypothesis::H4);
    let mut h5 = Collector::new(Hypothesis::H5);
    let mut h6 = Collector::new(Hypothesis::H6);
    for &(u, v) in &points {
        let h = model.eval_h(u, v)?;
        let (hu, hv) = model.eval_grad_h(u, v)?;
        let pairing = model.eval_pairing(u, v)?;
        let keep = off_axis(u, v);

        h2.tested += 1;
        let th = model.theta * h;
        if !le(th, pairing) {
            h2.record(th - pairing, Witness { u, v, lhs: th, rhs: pairing });
        }
        if keep && !(th > 0.0) {
            // 0 < θH written as lhs > rhs violation: 0 ≥ θH
            h2.record(0.0, Witness { u, v, lhs: 0.0, rhs: th });
        }

        if keep {
            h4.tested += 1;
            if u != 0.0 && !(hu * u > 0.0) {
                h4.record(-(hu * u), Witness { u, v, lhs: 0.0, rhs: hu * u });
            }
            if v != 0.0 && !(hv * v > 0.0) {
                h4.record(-(hv * v), Witness { u, v, lhs: 0.0, rhs: hv * v });
            }

            h6.tested += 1;
            let floor = model.mu * powf_nonneg(u * u + v * v, model.sigma / 2.0);
            if !le(floor, h) {
                h6.record(floor - h, Witness { u, v, lhs: floor, rhs: h });
            }
        }

        h5.tested += 1;
        let tilde4 = 4.0 * model.eval_tilde_h(u, v)?;
        let tilde_pair = model.eval_tilde_pairing(u, v)?;
        if !le(tilde4, tilde_pair) {
            h5.record(tilde4 - tilde_pair, Witness { u, v, lhs: tilde4, rhs: tilde_pair });
        }
    }

    let mut notes = vec![String::from(
        "H3 is tested in its axis form: H_u(u,0) = 0 for every u and H_v(0,v) = 0 for every v",
    )];
    if model.kind == ModelKind::CoupledExp {
        notes.push(String::from(
            "coupled_exp vanishes on the axes, so H2 positivity, H4 and H6 can only hold off the axes",
        ));
    }

    let margin_note = if strict {
        String::from("axes included")
    } else {
        format!("points with min(|u|,|v|) ≤ {delta} excluded")
    };
    let results = vec![
        audit_h1(model, settings.half_width)?,
        h2.finish(true, format!("θ = {}; positivity {}", model.theta, margin_note)),
        audit_h3(model, settings.half_width)?,
        h4.finish(true, margin_note.clone()),
        h5.finish(true, String::new()),
        h6.finish(true, format!("μ = {}, σ = {}; {}", model.mu, model.sigma, margin_note)),
        audit_h7(model)?,
    ];

    let envelope = fit_envelope(model, settings, &points)?;
    let domain = format!(
        "[-{m}, {m}]², {} Halton points from offset {}, {}",
        settings.n_samples,
        settings.seed,
        margin_note,
        m = settings.half_width
    );
    Ok(AuditReport { model: *model, settings: *settings, results, envelope, domain, skipped, notes })
}

fn grad_norm(model: &NonlinearityModel, u: f64, v: f64) -> Result<f64> {
    let (hu, hv) = model.eval_grad_h(u, v)?;
    Ok(libm::hypot(hu, hv))
}

fn shell_max(
    model: &NonlinearityModel,
    radius: f64,
    f: impl Fn(f64, f64) -> Result<f64>,
) -> Result<(f64, f64, f64)> {
    let _ = model;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for k in 0..SHELL_ANGLES {
        let phi = core::f64::consts::FRAC_PI_2 * (k as f64 + 0.5) / SHELL_ANGLES as f64
            + core::f64::consts::PI * (k % 4) as f64 / 2.0;
        let (u, v) = (radius * libm::cos(phi), radius * libm::sin(phi));
        let val = f(u, v)?;
        if val > best.0 {
            best = (val, u, v);
        }
    }
    Ok(best)
}

fn audit_h1(model: &NonlinearityModel, half_width: f64) -> Result<HypothesisResult> {
    let mut c = Collector::new(Hypothesis::H1);
    let tau = model.tau;
    let start = half_width.min(1.0);
    let mut ratios = Vec::with_capacity(H1_SHELLS);
    for j in 0..H1_SHELLS {
        let t = start * libm::pow(2.0, -(j as f64));
        let (g, u, v) = shell_max(model, t, |u, v| grad_norm(model, u, v))?;
        ratios.push((g / libm::pow(t, tau), u, v));
        c.tested += SHELL_ANGLES;
    }
    let first = ratios[0].0;
    for w in ratios.windows(2) {
        let (prev, (r, u, v)) = (w[0].0, w[1]);
        if !le(r, prev) {
            c.record(r - prev, Witness { u, v, lhs: r, rhs: prev });
        }
    }
    let (last, u, v) = ratios[H1_SHELLS - 1];
    if !(last <= 1e-2 * first) {
        c.record(last, Witness { u, v, lhs: last, rhs: 1e-2 * first });
    }
    Ok(c.finish(true, format!("τ = {tau}; max |∇H|/|w|^τ over {H1_SHELLS} halving shells")))
}

fn audit_h3(model: &NonlinearityModel, half_width: f64) -> Result<HypothesisResult> {
    let mut c = Collector::new(Hypothesis::H3);
    for (u, v) in axis_points(half_width.max(1.0)) {
        if u * u + v * v > model.max_rho() {
            continue;
        }
        let (hu, hv) = model.eval_grad_h(u, v)?;
        c.tested += 1;
        // on the u-axis H_u must vanish, on the v-axis H_v
        let val = if v == 0.0 { hu } else { hv };
        if val != 0.0 {
            c.record(val.abs(), Witness { u, v, lhs: val, rhs: 0.0 });
        }
    }
    Ok(c.finish(false, String::from("exact evaluation on the coordinate axes")))
}

fn audit_h7(model: &NonlinearityModel) -> Result<HypothesisResult> {
    let mut c = Collector::new(Hypothesis::H7);
    if !model.kind.is_exponential() {
        return Ok(HypothesisResult {
            hypothesis: Hypothesis::H7,
            verdict: Verdict::NotApplicable,
            witnesses: Vec::new(),
            tested: 0,
            note: String::from("polynomial growth: no exponential threshold"),
        });
    }
    let g0 = model.gamma0;
    let above = g0 + 0.2;
    let below = if g0 > 0.2 { g0 - 0.2 } else { 0.5 * g0 };
    let rho_max = 600.0 / g0;
    let mut logs = Vec::with_capacity(H7_SHELLS);
    for j in 1..=H7_SHELLS {
        let rho = rho_max * j as f64 / H7_SHELLS as f64;
        let t = libm::sqrt(rho);
        let (g, u, v) = shell_max(model, t, |u, v| {
            let (hu, hv) = model.eval_grad_h(u, v)?;
            Ok(hu.abs().max(hv.abs()))
        })?;
        logs.push((rho, libm::log(g), u, v));
        c.tested += SHELL_ANGLES;
    }
    let n = logs.len();
    for (gamma, falling) in [(above, true), (below, false)] {
        let series: Vec<f64> = logs.iter().map(|(rho, lg, _, _)| lg - gamma * rho).collect();
        let tail_ok = series[n - 3..].windows(2).all(|w| if falling { w[1] < w[0] } else { w[1] > w[0] });
        let net_ok = if falling { series[n - 1] < series[0] } else { series[n - 1] > series[0] };
        if !(tail_ok && net_ok) {
            let (_, _, u, v) = logs[n - 1];
            c.record(1.0, Witness { u, v, lhs: series[n - 1], rhs: series[0] });
        }
    }
    Ok(c.finish(
        false,
        format!("log(|∇H| e^(-γ|w|²)) on shells up to |w|² = {rho_max:.0} for γ = {below:.3} and {above:.3}"),
    ))
}

fn fit_envelope(
    model: &NonlinearityModel,
    settings: &AuditSettings,
    points: &[(f64, f64)],
) -> Result<Option<Envelope>> {
    let eps = settings.envelope_eps;
    let q = settings.envelope_q;
    let gamma = settings.envelope_gamma_factor * model.gamma0;
    let mut terms = Vec::with_capacity(points.len());
    let mut kappa: f64 = 0.0;
    for &(u, v) in points {
        let rho = u * u + v * v;
        if gamma * rho > crate::EXP_ARG_LIMIT {
            continue;
        }
        let r = libm::sqrt(rho);
        let g = grad_norm(model, u, v)?;
        let small = eps * libm::pow(r, model.tau);
        let big = libm::pow(r, q - 1.0) * libm::expm1(gamma * rho);
        if !(big > 0.0) {
            continue;
        }
        kappa = kappa.max((g - small).max(0.0) / big);
        terms.push((g, small, big));
    }
    if terms.is_empty() {
        return Ok(None);
    }
    // guard against rounding in the quotient
    while terms.iter().any(|&(g, small, big)| g > small + kappa * big) {
        kappa = if kappa == 0.0 { f64::MIN_POSITIVE } else { kappa * (1.0 + 1e-12) };
    }
    Ok(Some(Envelope { eps, q, gamma, kappa }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> AuditSettings {
        AuditSettings { n_samples: 2000, ..AuditSettings::default() }
    }

    /// Re-evaluates a witness directly from the model formulas.
    fn violated(model: &NonlinearityModel, h: Hypothesis, w: &Witness) -> bool {
        let (u, v) = (w.u, w.v);
        match h {
            Hypothesis::H2 => {
                let th = model.theta * model.eval_h(u, v).unwrap();
                let (hu, hv) = model.eval_grad_h(u, v).unwrap();
                th > u * hu + v * hv || th <= 0.0
            }
            Hypothesis::H3 => {
                let (hu, hv) = model.eval_grad_h(u, v).unwrap();
                (v == 0.0 && hu != 0.0) || (u == 0.0 && hv != 0.0)
            }
            Hypothesis::H4 => {
                let (hu, hv) = model.eval_grad_h(u, v).unwrap();
                (u != 0.0 && hu * u <= 0.0) || (v != 0.0 && hv * v <= 0.0)
            }
            Hypothesis::H5 => {
                4.0 * model.eval_tilde_h(u, v).unwrap() > model.eval_tilde_pairing(u, v).unwrap()
            }
            Hypothesis::H6 => {
                let r = libm::sqrt(u * u + v * v);
                model.eval_h(u, v).unwrap() < model.mu * libm::pow(r, model.sigma) * (1.0 - 1e-9)
            }
            _ => true,
        }
    }

    #[test]
    fn additive_exp_fails_h3_at_unit_axis_point() {
        let m = NonlinearityModel::additive_exp(1.0, 6.0, 1.0).unwrap();
        let rep = audit_hypotheses(&m, &settings()).unwrap();
        let h3 = rep.result(Hypothesis::H3);
        assert_eq!(h3.verdict, Verdict::Fail);
        let w = h3.witnesses[0];
        assert_eq!((w.u, w.v), (1.0, 0.0));
        assert!(w.lhs != 0.0);
        assert!(violated(&m, Hypothesis::H3, &w));
        assert!(rep.any_failed());
    }

    #[test]
    fn pure_power_passes_h2_identically() {
        let m = NonlinearityModel::pure_power(1.0, 6.0).unwrap();
        for half_width in [0.5, 3.0, 10.0] {
            let rep = audit_hypotheses(&m, &AuditSettings { half_width, ..settings() }).unwrap();
            assert_eq!(rep.verdict(Hypothesis::H2), Verdict::Pass);
            assert_eq!(rep.verdict(Hypothesis::H1), Verdict::Pass);
            assert_eq!(rep.verdict(Hypothesis::H5), Verdict::Pass);
            assert_eq!(rep.verdict(Hypothesis::H6), Verdict::Pass);
            assert_eq!(rep.verdict(Hypothesis::H7), Verdict::NotApplicable);
        }
    }

    #[test]
    fn coupled_exp_strict_axis_testing_fails_h6_on_an_axis() {
        let m = NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap();
        let rep = audit_hypotheses(&m, &AuditSettings { axis_margin: 0.0, ..settings() }).unwrap();
        let h6 = rep.result(Hypothesis::H6);
        assert_eq!(h6.verdict, Verdict::Fail);
        let w = h6.witnesses[0];
        assert!(w.u == 0.0 || w.v == 0.0, "{w:?}");
        assert_eq!(w.rhs, 0.0);
        assert!(
            h6.witnesses
                .iter()
                .any(|w| (w.u.abs(), w.v.abs()) == (1.0, 0.0) || (w.u.abs(), w.v.abs()) == (0.0, 1.0))
                || w.lhs > 0.0
        );
    }

    #[test]
    fn coupled_exp_structural_verdicts() {
        let m = NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap();
        let rep = audit_hypotheses(&m, &settings()).unwrap();
        for h in
            [Hypothesis::H1, Hypothesis::H2, Hypothesis::H3, Hypothesis::H4, Hypothesis::H5, Hypothesis::H7]
        {
            assert_eq!(rep.verdict(h), Verdict::Pass, "{h:?}: {:?}", rep.result(h));
        }
    }

    #[test]
    fn witnesses_are_sound() {
        let models = [
            NonlinearityModel::pure_power(1.0, 6.0).unwrap(),
            NonlinearityModel::coupled_exp(1.0, 6.0, 1.0).unwrap(),
            NonlinearityModel::additive_exp(1.0, 6.0, 1.0).unwrap(),
        ];
        for m in models {
            for axis_margin in [0.0, 0.1] {
                let rep = audit_hypotheses(&m, &AuditSettings { axis_margin, ..settings() }).unwrap();
                for r in &rep.results {
                    if r.verdict == Verdict::Fail {
                        assert!(!r.witnesses.is_empty());
                        for w in &r.witnesses {
                            assert!(violated(&m, r.hypothesis, w), "{:?} {:?}", r.hypothesis, w);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn envelope_holds_at_every_sample() {
        let m = NonlinearityModel::coupled_exp(2.0, 6.0, 1.0).unwrap();
        let s = settings();
        let rep = audit_hypotheses(&m, &s).unwrap();
        let env = rep.envelope.unwrap();
        assert_eq!(env.q, 4.0);
        assert!((env.gamma - 1.1).abs() < 1e-15);
        for (u, v) in halton_points(&s) {
            let rho = u * u + v * v;
            let r = rho.sqrt();
            let g = grad_norm(&m, u, v).unwrap();
            let bound =
                env.eps * r.powf(m.tau) + env.kappa * r.powf(env.q - 1.0) * (env.gamma * rho).exp_m1();
            assert!(g <= bound * (1.0 + 1e-9));
        }
    }

    #[test]
    fn halton_sampling_is_deterministic_and_seeded() {
        let a = halton_points(&settings());
        let b = halton_points(&settings());
        assert_eq!(a, b);
        let c = halton_points(&AuditSettings { seed: 7, ..settings() });
        assert_ne!(a, c);
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn rejects_bad_settings() {
        let m = NonlinearityModel::pure_power(1.0, 6.0).unwrap();
        assert!(audit_hypotheses(&m, &AuditSettings { n_samples: 10, ..settings() }).is_err());
        assert!(audit_hypotheses(&m, &AuditSettings { axis_margin: 5.0, ..settings() }).is_err());
        // a margin that leaves almost nothing still works; one that empties the box does not
        let tight = AuditSettings { half_width: 1.0, axis_margin: 0.999, ..settings() };
        assert!(matches!(audit_hypotheses(&m, &tight), Err(Error::Config(_))));
    }
}
