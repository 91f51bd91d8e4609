//! Large-maturity coefficients for time-changed exponential Lévy models.
//!
//! With φ the Lévy exponent of the base process (φ(0) = φ(1) = 0), the three
//! clocks give:
//! - trivial: Λ0 = φ, Λ1 = Λ2 ≡ 0 on the strip of regularity;
//! - Feller: Λ0 = V̂ = (κθ/ξ²)(κ − d̂), d̂ = √(κ² − 2φξ²), on the closed set
//!   {φ ≤ κ²/(2ξ²)}, and
//!   Λ1 = Ĥ = V̂·v·e^{−κt}/(κθ − 2β_t V̂) − (2κθ/ξ²)·log((κθ − 2β_t V̂)/(κθ(1−γ)))
//!   with γ = (κ − d̂)/(κ + d̂); the Feller clock never saturates its own
//!   capacity (2β_t·V̂ ≤ (κθ/2)(1 − e^{−κt}) < κθ);
//! - Γ-OU: Λ0 = Ṽ = φλδ/(αλ − φ) on the open set {φ < αλ}, and
//!   Λ1 = H̃ = [λαδ/(αλ − φ)]·log(1 − φ/(αλ)) + φ·v·e^{−λt}/λ +
//!   δ·log((φ/E − αλ)/(φ − αλ)) with E = e^{λt}
//!   (the last log is the overflow-safe form of log((φ − αλE)/(E(φ − αλ)))).
//!
//! Λ2 ≡ 0 for all three: the remainders are exponentially small in τ.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{ClockSpec, LevySpec, Measure};
use crate::numeric::{brent_root, h1};

use super::{Boundary, CoeffKind, DomainInterval, Regime, RegimeCoefficients};

#[derive(Debug, Clone, Copy)]
pub(crate) struct TcLevyLmCoeffs {
    pub(crate) levy: LevySpec,
    pub(crate) clock: ClockSpec,
    pub(crate) t: f64,
}

/// Large-maturity coefficients of a time-changed exponential Lévy model.
pub fn tclevy_lm_coeffs(t: f64, levy: &LevySpec, clock: &ClockSpec) -> Result<RegimeCoefficients> {
    levy.validate()?;
    match clock {
        ClockSpec::Trivial => {}
        ClockSpec::Feller(c) => c.validate()?,
        ClockSpec::GammaOU(c) => c.validate()?,
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "forward-start date t = {t} must be finite and >= 0"
        )));
    }
    let c = TcLevyLmCoeffs { levy: *levy, clock: *clock, t };
    let phi1 = c.phi(1.0);
    if !phi1.is_finite() || phi1.abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "the share price is not a martingale: phi(1) = {phi1}"
        )));
    }
    let domain = c.domain()?;
    if !(domain.interior_contains(0.0) && domain.interior_contains(1.0)) {
        return Err(Error::InvalidParameter(format!(
            "the effective domain {domain} must contain [0, 1] in its interior"
        )));
    }
    Ok(RegimeCoefficients {
        regime: Regime::LargeMaturity { t },
        measure: Measure::TypeI,
        domain,
        kind: CoeffKind::TcLevyLm(c),
        lambda2_cache: Mutex::new(HashMap::new()),
    })
}

impl TcLevyLmCoeffs {
    /// Lévy exponent on the real axis, +∞ outside the strip of regularity.
    fn phi(&self, u: f64) -> f64 {
        self.levy
            .exponent(Complex64::new(u, 0.0))
            .map_or(f64::INFINITY, |z| z.re)
    }

    fn phi_prime(&self, u: f64) -> f64 {
        match &self.levy {
            LevySpec::VarianceGamma(vg) => {
                vg.mu() + vg.c * (1.0 / (vg.m - u) - 1.0 / (vg.g + u))
            }
            LevySpec::BrownianDrift { sigma } => sigma * sigma * (u - 0.5),
        }
    }

    pub(crate) fn lambda0(&self, u: f64) -> Result<f64> {
        let phi = self.phi(u);
        match &self.clock {
            ClockSpec::Trivial => Ok(phi),
            ClockSpec::Feller(c) => {
                let disc = c.kappa * c.kappa - 2.0 * phi * c.xi * c.xi;
                // The closed endpoint solves disc = 0; forgive its rounding.
                if disc < -1e-12 * c.kappa * c.kappa {
                    return Err(Error::Domain(format!(
                        "phi({u}) = {phi} exceeds the Feller clock threshold {}",
                         0.5 * c.kappa * c.kappa / (c.xi * c.xi)
                    )));
                }
                Ok(c.kappa * c.theta / (c.xi * c.xi) * (c.kappa - disc.max(0.0).sqrt()))
            }
            ClockSpec::GammaOU(c) => {
                let cap = c.alpha * c.lambda;
                if phi >= cap {
                    return Err(Error::Domain(format!(
                        "phi({u}) = {phi} reaches the Gamma-OU clock threshold alpha*lambda = {cap}"
                    )));
                }
                Ok(phi * c.lambda * c.delta / (cap - phi))
            }
        }
    }

    pub(crate) fn lambda0_complex(&self, z: Complex64) -> Result<Complex64> {
        let phi = self.levy.exponent(z)?;
        Ok(match &self.clock {
            ClockSpec::Trivial => phi,
            ClockSpec::Feller(c) => {
                let dhat = (c.kappa * c.kappa - 2.0 * phi * c.xi * c.xi).sqrt();
                c.kappa * c.theta / (c.xi * c.xi) * (c.kappa - dhat)
            }
            ClockSpec::GammaOU(c) => {
                let cap = c.alpha * c.lambda;
                phi * c.lambda * c.delta / (cap - phi)
            }
        })
    }

    pub(crate) fn lambda1(&self, u: f64) -> Result<f64> {
        let phi = self.phi(u);
        match &self.clock {
            ClockSpec::Trivial => Ok(0.0),
            ClockSpec::Feller(c) => {
                let ktheta = c.kappa * c.theta;
                let disc = c.kappa * c.kappa - 2.0 * phi * c.xi * c.xi;
                if disc <= 0.0 {
                    return Err(Error::Domain(format!(
                        "lambda1 diverges at the Feller clock threshold (u = {u})"
                    )));
                }
                let dhat = disc.sqrt();
                let vhat = ktheta / (c.xi * c.xi) * (c.kappa - dhat);
                let gamma = (c.kappa - dhat) / (c.kappa + dhat);
                let beta = 0.25 * c.xi * c.xi * self.t * h1(c.kappa * self.t);
                // den ≥ κθ(1 + e^{−κt})/2 > 0: the capacity never saturates.
                let den = ktheta - 2.0 * beta * vhat;
                Ok(vhat * c.v * (-c.kappa * self.t).exp() / den
                    - 2.0 * ktheta / (c.xi * c.xi) * (den / (ktheta * (1.0 - gamma))).ln())
            }
            ClockSpec::GammaOU(c) => {
                let cap = c.alpha * c.lambda;
                if phi >= cap {
                    return Err(Error::Domain(format!(
                        "lambda1 diverges at the Gamma-OU clock threshold (u = {u})"
                    )));
                }
                let e = (c.lambda * self.t).exp();
                Ok(c.lambda * c.alpha * c.delta / (cap - phi) * (1.0 - phi / cap).ln()
                    + phi * c.v / (c.lambda * e)
                    + c.delta * ((phi / e - cap) / (phi - cap)).ln())
            }
        }
    }

    /// (Λ0'(0), Λ0'(1)): the clock only rescales φ' at the martingale points.
    pub(crate) fn singular_strikes(&self) -> (f64, f64) {
        let w = match &self.clock {
            ClockSpec::Trivial => 1.0,
            ClockSpec::Feller(c) => c.theta,
            ClockSpec::GammaOU(c) => c.delta / c.alpha,
        };
        (w * self.phi_prime(0.0), w * self.phi_prime(1.0))
    }

    fn domain(&self) -> Result<DomainInterval> {
        match &self.clock {
            ClockSpec::Trivial => {
                let (lo, hi) = self.levy.real_domain();
                Ok(DomainInterval {
                    lo: if lo.is_finite() { Boundary::Open(lo) } else { Boundary::Unbounded },
                    hi: if hi.is_finite() { Boundary::Open(hi) } else { Boundary::Unbounded },
                })
            }
            ClockSpec::Feller(c) => {
                let thr = 0.5 * c.kappa * c.kappa / (c.xi * c.xi);
                let (lo, hi) = self.threshold_endpoints(thr)?;
                Ok(DomainInterval { lo: Boundary::Closed(lo), hi: Boundary::Closed(hi) })
            }
            ClockSpec::GammaOU(c) => {
                let (lo, hi) = self.threshold_endpoints(c.alpha * c.lambda)?;
                Ok(DomainInterval { lo: Boundary::Open(lo), hi: Boundary::Open(hi) })
            }
        }
    }

    /// Solve φ(u) = thr on each side of [0, 1]. φ is convex with
    /// φ(0) = φ(1) = 0 and blows up toward the strip edges, so there is
    /// exactly one root left of 0 and one right of 1.
    fn threshold_endpoints(&self, thr: f64) -> Result<(f64, f64)> {
        let (strip_lo, strip_hi) = self.levy.real_domain();
        let lo = self.root_toward(0.0, strip_lo, thr)?;
        let hi = self.root_toward(1.0, strip_hi, thr)?;
        Ok((lo, hi))
    }

    /// Root of φ = thr between `from` (φ(from) < thr) and the strip edge.
    fn root_toward(&self, from: f64, edge: f64, thr: f64) -> Result<f64> {
        let g = |u: f64| (self.phi(u) - thr).min(1e300);
        let far = if edge.is_finite() {
            // March the bracket toward the edge until φ crosses the threshold.
            let mut j = 1;
            loop {
                let cand = edge - (edge - from) * (2.0f64).powi(-j);
                if g(cand) > 0.0 {
                    break cand;
                }
                j += 1;
                if j > 60 {
                    return Err(Error::Numerical(format!(
                        "phi never reaches {thr} before the strip edge {edge}"
                    )));
                }
            }
        } else {
            let dir = if from >= 1.0 { 1.0 } else { -1.0 };
            let mut step = 1.0;
            loop {
                let cand = from + dir * step;
                if g(cand) > 0.0 {
                    break cand;
                }
                step *= 2.0;
                if step > 1e12 {
                    return Err(Error::Numerical(format!(
                        "phi never reaches {thr} in direction {dir}"
                    )));
                }
            }
        };
        brent_root(g, from.min(far), from.max(far), 1e-12, 0.0)
    }
}
