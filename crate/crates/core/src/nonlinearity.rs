//! Couplings `H(u, v)` with closed-form partial derivatives.
//!
//! | kind           | `H(u, v)`                                  |
//! |----------------|--------------------------------------------|
//! | `pure_power`   | `μ (u² + v²)^{σ/2}`                        |
//! | `coupled_exp`  | `μ |uv|^{σ/2} e^{γ₀(u² + v²)}`             |
//! | `additive_exp` | `μ (|u|^σ + |v|^σ) e^{γ₀(u² + v²)}`        |
//!
//! All three satisfy `∇H·w = m(ρ) H` with `ρ = |w|²` and a model multiplier
//! `m`, which gives the factored forms `H̃ = (m − 2) H` and
//! `∇H̃·w = ((m − 2) m + 4γ₀ρ) H` used below without cancellation.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::EXP_ARG_LIMIT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PurePower,
    CoupledExp,
    AdditiveExp,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::PurePower => "pure_power",
            ModelKind::CoupledExp => "coupled_exp",
            ModelKind::AdditiveExp => "additive_exp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "pure_power" => Some(ModelKind::PurePower),
            "coupled_exp" => Some(ModelKind::CoupledExp),
            "additive_exp" => Some(ModelKind::AdditiveExp),
            _ => None,
        }
    }

    pub fn is_exponential(&self) -> bool {
        !matches!(self, ModelKind::PurePower)
    }
}

/// A parameterized coupling.
///
/// `theta` is the superlinearity constant used by the level bounds and `tau`
/// the small-amplitude exponent checked by the auditor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityModel {
    pub kind: ModelKind,
    pub mu: f64,
    pub sigma: f64,
    pub gamma0: f64,
    pub theta: f64,
    pub tau: f64,
}

impl NonlinearityModel {
    /// Model with `θ = σ` and `τ = (σ + 2)/2`.
    pub fn new(kind: ModelKind, mu: f64, sigma: f64, gamma0: f64) -> Result<Self> {
        Self::with_constants(kind, mu, sigma, gamma0, sigma, default_tau(sigma))
    }

    pub fn with_constants(
        kind: ModelKind,
        mu: f64,
        sigma: f64,
        gamma0: f64,
        theta: f64,
        tau: f64,
    ) -> Result<Self> {
        let m = Self { kind, mu, sigma, gamma0, theta, tau };
        m.validate()?;
        Ok(m)
    }

    pub fn pure_power(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(ModelKind::PurePower, mu, sigma, 1.0)
    }

    pub fn coupled_exp(mu: f64, sigma: f64, gamma0: f64) -> Result<Self> {
        Self::new(ModelKind::CoupledExp, mu, sigma, gamma0)
    }

    pub fn additive_exp(mu: f64, sigma: f64, gamma0: f64) -> Result<Self> {
        Self::new(ModelKind::AdditiveExp, mu, sigma, gamma0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{} ({})", what, self.kind.name())));
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return bad("mu must be positive");
        }
        if !(self.sigma > 4.0) || !self.sigma.is_finite() {
            return bad("sigma must exceed 4");
        }
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return bad("gamma0 must be positive");
        }
        if !(self.theta > 4.0) || !self.theta.is_finite() {
            return bad("theta must exceed 4");
        }
        if !(self.tau > 3.0) || !self.tau.is_finite() {
            return bad("tau must exceed 3");
        }
        Ok(())
    }

    /// Same model with a different coupling strength.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        let m = Self { mu, ..*self };
        m.validate()?;
        Ok(m)
    }

    /// Exponential rate actually used by the model (0 for pure powers).
    fn rate(&self) -> f64 {
        if self.kind.is_exponential() {
            self.gamma0
        } else {
            0.0
        }
    }

    #[inline]
    fn exp_factor(&self, rho: f64) -> Result<f64> {
        let arg = self.rate() * rho;
        if arg > EXP_ARG_LIMIT {
            return Err(Error::Range(format!("exponent argument {arg:.1} exceeds {EXP_ARG_LIMIT}")));
        }
        Ok(if arg == 0.0 { 1.0 } else { libm::exp(arg) })
    }

    /// `∇H·w / H` as a function of `ρ = |w|²`.
    #[inline]
    fn pairing_factor(&self, rho: f64) -> f64 {
        self.sigma + 2.0 * self.rate() * rho
    }

    pub fn eval_h(&self, u: f64, v: f64) -> Result<f64> {
        let rho = u * u + v * v;
        let e = self.exp_factor(rho)?;
        Ok(self.mu * e * self.algebraic(u, v, rho))
    }

    /// The non-exponential factor of `H / μ`.
    #[inline]
    fn algebraic(&self, u: f64, v: f64, rho: f64) -> f64 {
        let s = self.sigma;
        match self.kind {
            ModelKind::PurePower => powf_nonneg(rho, s / 2.0),
            ModelKind::CoupledExp => powf_nonneg((u * v).abs(), s / 2.0),
            ModelKind::AdditiveExp => powf_nonneg(u.abs(), s) + powf_nonneg(v.abs(), s),
        }
    }

    /// `(H_u, H_v)`.
    pub fn eval_grad_h(&self, u: f64, v: f64) -> Result<(f64, f64)> {
        let rho = u * u + v * v;
        let e = self.exp_factor(rho)?;
        let s = self.sigma;
        let g = 2.0 * self.rate();
        let (hu, hv) = match self.kind {
            ModelKind::PurePower => {
                let c = s * powf_nonneg(rho, s / 2.0 - 1.0);
                (c * u, c * v)
            }
            ModelKind::CoupledExp => {
                let p = s / 2.0;
                let (au, av) = (u.abs(), v.abs());
                // |v|^p |u|^{p-2} u (p + 2γ u²), written to stay finite on the axes
                let hu = powf_nonneg(av, p) * powf_nonneg(au, p - 1.0) * signum0(u) * (p + g * u * u);
                let hv = powf_nonneg(au, p) * powf_nonneg(av, p - 1.0) * signum0(v) * (p + g * v * v);
                (hu, hv)
            }
            ModelKind::AdditiveExp => {
                let sum = powf_nonneg(u.abs(), s) + powf_nonneg(v.abs(), s);
                let hu = s * powf_nonneg(u.abs(), s - 1.0) * signum0(u) + g * u * sum;
                let hv = s * powf_nonneg(v.abs(), s - 1.0) * signum0(v) + g * v * sum;
                (hu, hv)
            }
        };
        Ok((self.mu * e * hu, self.mu * e * hv))
    }

    /// `(H_uu, H_uv, H_vv)`.
    pub fn eval_hessian_h(&self, u: f64, v: f64) -> Result<(f64, f64, f64)> {
        let rho = u * u + v * v;
        let e = self.exp_factor(rho)?;
        let s = self.sigma;
        // H = μ e^{γρ} F with F the algebraic factor
        let (f, fu, fv, fuu, fuv, fvv) = match self.kind {
            ModelKind::PurePower => {
                let a = powf_nonneg(rho, s / 2.0 - 1.0);
                let b = s * (s - 2.0) * powf_nonneg(rho, s / 2.0 - 2.0);
                let f = powf_nonneg(rho, s / 2.0);
                (f, s * a * u, s * a * v, s * a + b * u * u, b * u * v, s * a + b * v * v)
            }
            ModelKind::CoupledExp => {
                let p = s / 2.0;
                let (au, av) = (u.abs(), v.abs());
                let (su, sv) = (signum0(u), signum0(v));
                let (pu, pv) = (powf_nonneg(au, p), powf_nonneg(av, p));
                let (pu1, pv1) = (powf_nonneg(au, p - 1.0), powf_nonneg(av, p - 1.0));
                let (pu2, pv2) = (powf_nonneg(au, p - 2.0), powf_nonneg(av, p - 2.0));
                (
                    pu * pv,
                    p * pu1 * su * pv,
                    p * pv1 * sv * pu,
                    p * (p - 1.0) * pu2 * pv,
                    p * p * pu1 * pv1 * su * sv,
                    p * (p - 1.0) * pv2 * pu,
                )
            }
            ModelKind::AdditiveExp => {
                let (au, av) = (u.abs(), v.abs());
                (
                    powf_nonneg(au, s) + powf_nonneg(av, s),
                    s * powf_nonneg(au, s - 1.0) * signum0(u),
                    s * powf_nonneg(av, s - 1.0) * signum0(v),
                    s * (s - 1.0) * powf_nonneg(au, s - 2.0),
                    0.0,
                    s * (s - 1.0) * powf_nonneg(av, s - 2.0),
                )
            }
        };
        let g = 2.0 * self.rate();
        let huu = fuu + g * f + 2.0 * g * u * fu + g * g * u * u * f;
        let hvv = fvv + g * f + 2.0 * g * v * fv + g * g * v * v * f;
        let huv = fuv + g * (u * fv + v * fu) + g * g * u * v * f;
        let c = self.mu * e;
        Ok((c * huu, c * huv, c * hvv))
    }

    /// `H̃ = ∇H·w − 2H`, evaluated as `(m(ρ) − 2) H`.
    pub fn eval_tilde_h(&self, u: f64, v: f64) -> Result<f64> {
        let rho = u * u + v * v;
        Ok((self.pairing_factor(rho) - 2.0) * self.eval_h(u, v)?)
    }

    /// `∇H·w`, evaluated as `m(ρ) H`.
    pub fn eval_pairing(&self, u: f64, v: f64) -> Result<f64> {
        let rho = u * u + v * v;
        Ok(self.pairing_factor(rho) * self.eval_h(u, v)?)
    }

    /// `∇H̃·w`.
    ///
    /// With `H̃ = (m − 2)H` and `m = σ + 2γρ`, the radial derivative gives
    /// `∇H̃·w = (m − 2) m H + 4γρ H`.
    pub fn eval_tilde_pairing(&self, u: f64, v: f64) -> Result<f64> {
        let rho = u * u + v * v;
        let m = self.pairing_factor(rho);
        let h = self.eval_h(u, v)?;
        Ok(((m - 2.0) * m + 4.0 * self.rate() * rho) * h)
    }

    /// Largest `|w|²` the overflow guard admits.
    pub fn max_rho(&self) -> f64 {
        if self.kind.is_exponential() {
            EXP_ARG_LIMIT / self.gamma0
        } else {
            f64::INFINITY
        }
    }
}

/// Default small-amplitude exponent: midway between 3 and `σ − 1`.
pub fn default_tau(sigma: f64) -> f64 {
    (sigma + 2.0) / 2.0
}

#[inline]
fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `x^p` for `x ≥ 0`, with `0^p = 0` for `p > 0` and exact small integer powers.
#[inline]
pub(crate) fn powf_nonneg(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        return if p == 0.0 { 1.0 } else { 0.0 };
    }
    if p == libm::trunc(p) && p.abs() <= 16.0 {
        return powi(x, p as i32);
    }
    libm::pow(x, p)
}

#[inline]
fn powi(x: f64, n: i32) -> f64 {
    let mut base = if n < 0 { 1.0 / x } else { x };
    let mut e = n.unsigned_abs();
    let mut acc = 1.0;
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}
