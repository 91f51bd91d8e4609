//! Heston forward lmgf and its real-axis finiteness analysis.

use super::{ForwardHorizon, Measure};
use crate::error::{Error, Result};
use crate::numeric::{h1, h1c};
use num_complex::Complex64;

/// Heston parameters under the risk-neutral measure:
/// dV = κ(θ − V)dt + ξ√V dW, d⟨W, B⟩ = ρ dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub v: f64,
    pub theta: f64,
    pub kappa: f64,
    pub xi: f64,
    pub rho: f64,
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        for (name, val) in [("v", self.v), ("theta", self.theta), ("kappa", self.kappa), ("xi", self.xi)] {
            if !val.is_finite() || val <= 0.0 {
                return Err(Error::InvalidParameter(format!("Heston {name} = {val} must be > 0")));
            }
        }
        if !self.rho.is_finite() || self.rho.abs() >= 1.0 {
            return Err(Error::InvalidParameter(format!("Heston rho = {} must lie in (-1, 1)", self.rho)));
        }
        Ok(())
    }

    /// ρ̄ = √(1 − ρ²) ∈ (0, 1].
    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    /// Mean reversion under the stopped-share-price (Type-II) measure.
    pub fn kappa_tilde(&self) -> f64 {
        self.kappa - self.xi * self.rho
    }
}

/// Spot-window coefficients A(z, τ), B(z, τ) with
/// log E[exp(z·(X_{s+τ} − X_s)) | V_s = w] = A(z, τ) + B(z, τ)·w.
///
/// Evaluated in the cancellation-free form built on h1(x) = (1 − e^{−x})/x:
/// with m = κ − ρξz, d = √(m² + ξ²z(1−z)) (principal root) and
/// D = m·τ·h1(dτ) + 1 + e^{−dτ} (equal to 2(1 − γe^{−dτ})/(1 − γ)),
///   A = (κθ/ξ²)·[(m − d)τ − 2·log(D/2)],   B = z(z−1)·τ·h1(dτ)/D.
/// Both are even in d, so the root choice cancels; with the principal root the
/// single log argument D/2 never crosses the negative real axis (Lord & Kahl
/// 2010), hence principal-branch evaluation coincides with continuous
/// continuation from the real axis.
pub(crate) fn heston_spot_ab(z: Complex64, tau: f64, p: &HestonParams) -> (Complex64, Complex64) {
    let m = p.kappa - p.rho * p.xi * z;
    let d = (m * m + p.xi * p.xi * z * (1.0 - z)).sqrt();
    let dt = d * tau;
    let h = h1c(dt);
    let denom = m * tau * h + 1.0 + (-dt).exp();
    let ktheta = p.kappa * p.theta / (p.xi * p.xi);
    let a = ktheta * ((m - d) * tau - 2.0 * (denom / 2.0).ln());
    let b = z * (z - 1.0) * tau * h / denom;
    (a, b)
}

/// Integrated-CIR composition constant β_t (Type-II: β̃_t with κ̃ = κ − ξρ).
pub(crate) fn beta_t(t: f64, kappa_eff: f64, xi: f64) -> f64 {
    0.25 * xi * xi * t * h1(kappa_eff * t)
}

/// Forward lmgf of X over [t, t+τ]:
///   A(z,τ) + B(z,τ)·v·e^{−κt}/(1 − 2β_t B(z,τ)) − (2κθ/ξ²)·log(1 − 2β_t B(z,τ)),
/// where Type II replaces κ by κ̃ = κ − ξρ inside β_t and the decay factor only.
pub fn heston_forward_lmgf(z: Complex64, h: &ForwardHorizon, p: &HestonParams, measure: Measure) -> Result<Complex64> {
    p.validate()?;
    h.validate()?;
    if !heston_is_real_finite(z.re, h, p, measure) {
        return Err(Error::Explosion { context: "Heston forward lmgf".into(), arg: z.re });
    }
    let kappa_eff = match measure {
        Measure::TypeI => p.kappa,
        Measure::TypeII => p.kappa_tilde(),
    };
    let (a, b) = heston_spot_ab(z, h.tau, p);
    let beta = beta_t(h.t, kappa_eff, p.xi);
    let w = 1.0 - 2.0 * beta * b;
    // Ridge property Re B(z) ≤ B(Re z) keeps Re w > 0, so the principal log is
    // the continuous branch here as well.
    let val = a + b * p.v * (-kappa_eff * h.t).exp() / w - (2.0 * p.kappa * p.theta / (p.xi * p.xi)) * w.ln();
    Ok(val)
}

/// Spot-window moment explosion time T*(u): the lmgf of X_{s+τ} − X_s at real
/// u is finite iff τ < T*(u).
pub(crate) fn heston_explosion_time(u: f64, p: &HestonParams) -> f64 {
    if u == 0.0 || u == 1.0 {
        return f64::INFINITY;
    }
    let m = p.kappa - p.rho * p.xi * u;
    let disc = m * m + p.xi * p.xi * u * (1.0 - u);
    if disc >= 0.0 {
        let d = disc.sqrt();
        if m >= 0.0 || d >= -m {
            f64::INFINITY
        } else {
            // m < 0 and d < |m|: 1 − γe^{−dτ} hits zero at finite τ.
            ((d - m) / (-d - m)).ln() / d
        }
    } else {
        let dt = (-disc).sqrt();
        2.0 * dt.atan2(p.rho * p.xi * u - p.kappa) / dt
    }
}

/// Finiteness of the forward lmgf at real u: the spot window must not have
/// exploded by τ, and the CIR composition over [0, t] must satisfy
/// 1 − 2β_t B(u, τ) > 0.
pub(crate) fn heston_is_real_finite(u: f64, h: &ForwardHorizon, p: &HestonParams, measure: Measure) -> bool {
    if u == 0.0 || u == 1.0 {
        return true;
    }
    if !u.is_finite() || h.tau >= heston_explosion_time(u, p) {
        return false;
    }
    if h.t == 0.0 {
        return true;
    }
    let kappa_eff = match measure {
        Measure::TypeI => p.kappa,
        Measure::TypeII => p.kappa_tilde(),
    };
    let (_, b) = heston_spot_ab(Complex64::from(u), h.tau, p);
    1.0 - 2.0 * beta_t(h.t, kappa_eff, p.xi) * b.re > 0.0
}
