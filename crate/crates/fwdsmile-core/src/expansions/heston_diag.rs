//! Diagonal small-maturity coefficients for Heston.
//!
//! Λ0(u) = Ξ(u,t,τ) and Λ1(u) = L(u,t,τ) with
//!   Ξ(u,s,τ) = u·v·sin(ψu)/F(u,s),
//!   F(u,s) = ξρ̄·cos(ψu) − (ξρ + ξ²su/2)·sin(ψu),   ψu = ξρ̄τu/2,
//! on the capacity-constrained domain whose endpoints are the first roots of
//! F(·,t) on each side of zero (F(u,t)/F(u,0) = 1 − Ξ(u,0,τ)ξ²t/(2v), so a root
//! of F(·,t) is exactly where the time-change capacity saturates). L combines
//! two spot-start blocks L0, L1 with the composition terms:
//!   L = L0 + v·(F0/Ft)²·L1 − Ξt²·κξ²t²/(4v) − Ξt·κt − (2κθ/ξ²)·log(Ft/F0).
//!
//! L0 and L1 are evaluated in complex arithmetic with sign-dependent constants
//! (d0, d1, g0, g1 flip with sgn(u), keeping the expressions real-valued on
//! both half-lines); the imaginary residue is asserted to vanish.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{ForwardHorizon, HestonParams, Measure};
use crate::numeric::brent_root;

use super::{Boundary, CoeffKind, DomainInterval, Regime, RegimeCoefficients};

/// Imaginary parts above this bound indicate a transcription or branch error.
const IMAG_RESIDUE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub(crate) struct HestonDiagCoeffs {
    pub(crate) p: HestonParams,
    pub(crate) t: f64,
    pub(crate) tau: f64,
    /// κ under Type I, κ̃ = κ − ξρ under Type II; enters only the terms
    /// produced by the time-t variance law, never L0, L1, or the log prefactor.
    kappa_eff: f64,
}

/// Diagonal small-maturity coefficients: Λ0, Λ1 closed-form, Λ2 numerical.
pub fn heston_diag_coeffs(
    h: &ForwardHorizon,
    p: &HestonParams,
    measure: Measure,
) -> Result<RegimeCoefficients> {
    p.validate()?;
    h.validate()?;
    let kappa_eff = match measure {
        Measure::TypeI => p.kappa,
        Measure::TypeII => p.kappa_tilde(),
    };
    let c = HestonDiagCoeffs { p: *p, t: h.t, tau: h.tau, kappa_eff };
    let (lo, hi) = c.domain_endpoints()?;
    Ok(RegimeCoefficients {
        regime: Regime::DiagonalSmallMaturity { t: h.t, tau: h.tau },
        measure,
        domain: DomainInterval { lo: Boundary::Open(lo), hi: Boundary::Open(hi) },
        kind: CoeffKind::HestonDiag(c),
        lambda2_cache: Mutex::new(HashMap::new()),
    })
}

impl HestonDiagCoeffs {
    fn psi(&self, u: f64) -> f64 {
        0.5 * self.p.xi * self.p.rho_bar() * self.tau * u
    }

    fn big_f(&self, u: f64, s: f64) -> f64 {
        let psi = self.psi(u);
        self.p.xi * self.p.rho_bar() * psi.cos()
            - (self.p.xi * self.p.rho + 0.5 * self.p.xi * self.p.xi * s * u) * psi.sin()
    }

    pub(crate) fn lambda0(&self, u: f64) -> f64 {
        u * self.p.v * self.psi(u).sin() / self.big_f(u, self.t)
    }

    pub(crate) fn lambda0_complex(&self, z: Complex64) -> Complex64 {
        let psi = 0.5 * self.p.xi * self.p.rho_bar() * self.tau * z;
        let f = self.p.xi * self.p.rho_bar() * psi.cos()
            - (self.p.xi * self.p.rho + 0.5 * self.p.xi * self.p.xi * self.t * z) * psi.sin();
        z * self.p.v * psi.sin() / f
    }

    /// Spot-start blocks (L0, L1) with sgn(u)-dependent constants.
    fn l0_l1(&self, u: f64) -> (Complex64, Complex64) {
        let p = &self.p;
        let (xi, rho, rb, kappa) = (p.xi, p.rho, p.rho_bar(), p.kappa);
        let s = if u >= 0.0 { 1.0 } else { -1.0 };
        let i = Complex64::i();
        let d0 = rb * xi * s;
        let d1 = i * ((2.0 * kappa * rho - xi) * s / (2.0 * rb));
        let g0 = (i * rho - rb * s) / (i * rho + rb * s);
        let g1 = Complex64::from((2.0 * kappa - xi * rho) * s)
            / (xi * rb * (rb + i * (rho * s)).powi(2));
        let a = i * (xi * rho) - d0;
        let tu = self.tau * u;
        let th = d0 * tu;
        let emi = Complex64::new(0.0, -th).exp();
        let epi = Complex64::new(0.0, th).exp();
        let one = Complex64::new(1.0, 0.0);
        let denom = one - g0 * emi;
        let l0 = kappa * p.theta / (xi * xi) * (a * i * tu - 2.0 * (denom / (one - g0)).ln());
        let l1 = emi / (xi * xi * denom)
            * (a * i * d1 * tu
                + (d1 - kappa) * (one - epi)
                + a * (one - emi) * (g1 - i * d1 * g0 * tu) / denom);
        (l0, l1)
    }

    /// Λ1 together with the stray imaginary magnitude of the complex blocks.
    pub(crate) fn lambda1_with_residue(&self, u: f64) -> Result<(f64, f64)> {
        let p = &self.p;
        let f0 = self.big_f(u, 0.0);
        let ft = self.big_f(u, self.t);
        if f0 <= 0.0 || ft <= 0.0 {
            return Err(Error::Domain(format!(
                "u = {u} sits at or beyond the clock-capacity boundary (F0 = {f0}, Ft = {ft})"
            )));
        }
        let (l0, l1) = self.l0_l1(u);
        let r = f0 / ft;
        let xit = u * p.v * self.psi(u).sin() / ft;
        let combined = l0 + p.v * r * r * l1;
        let value = combined.re
            - xit * xit * self.kappa_eff * p.xi * p.xi * self.t * self.t / (4.0 * p.v)
            - xit * self.kappa_eff * self.t
            - 2.0 * p.kappa * p.theta / (p.xi * p.xi) * (ft / f0).ln();
        Ok((value, combined.im.abs()))
    }

    pub(crate) fn lambda1(&self, u: f64) -> Result<f64> {
        let (value, residue) = self.lambda1_with_residue(u)?;
        if residue > IMAG_RESIDUE_TOL {
            return Err(Error::Numerical(format!(
                "first-order block picked up an imaginary part {residue} at u = {u}"
            )));
        }
        Ok(value)
    }

    /// Domain endpoints at t = 0: the first zeros of F(·,0), in closed form.
    fn u_pm_t0(&self) -> (f64, f64) {
        let (xi, rho, rb) = (self.p.xi, self.p.rho, self.p.rho_bar());
        if rho == 0.0 {
            return (-PI / (xi * self.tau), PI / (xi * self.tau));
        }
        let a = 2.0 / (rb * xi * self.tau);
        let at = (rb / rho).atan();
        if rho < 0.0 {
            (a * at, a * (at + PI))
        } else {
            (a * (at - PI), a * at)
        }
    }

    /// Effective-domain endpoints: first roots of F(·,t) around zero. The
    /// t = 0 endpoints bracket them (F(0,t) = ξρ̄ > 0 while F(u±(0),t) =
    /// −(ξ²t·u±/2)·sin(ψ) < 0), so each side has exactly one sign change.
    fn domain_endpoints(&self) -> Result<(f64, f64)> {
        let (lo0, hi0) = self.u_pm_t0();
        if self.t == 0.0 {
            return Ok((lo0, hi0));
        }
        let f = |u: f64| self.big_f(u, self.t);
        let lo = brent_root(f, lo0, 0.0, 1e-12, 0.0)?;
        let hi = brent_root(f, 0.0, hi0, 1e-12, 0.0)?;
        Ok((lo, hi))
    }
}
