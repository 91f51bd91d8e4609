//! Forward lmgfs of Lévy processes run on integrated stochastic clocks.

use super::levy::LevySpec;
use super::ForwardHorizon;
use crate::error::{Error, Result};
use crate::numeric::{h1, h1c, l1c};
use num_complex::Complex64;

/// Feller (square-root) activity rate: dv = κ(θ − v)dt + ξ√v dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerClockParams {
    pub v: f64,
    pub theta: f64,
    pub kappa: f64,
    pub xi: f64,
}

impl FellerClockParams {
    pub fn validate(&self) -> Result<()> {
        for (name, val) in [("v", self.v), ("theta", self.theta), ("kappa", self.kappa), ("xi", self.xi)] {
            if !val.is_finite() || val <= 0.0 {
                return Err(Error::InvalidParameter(format!("Feller clock {name} = {val} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Γ-OU activity rate: dv = −λv dt + dZ_{λt} with Z a compound-Poisson
/// subordinator whose driver exponent is l(u) = λδu/(α − u), u < α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOUClockParams {
    pub v: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl GammaOUClockParams {
    pub fn validate(&self) -> Result<()> {
        for (name, val) in [
            ("v", self.v),
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("delta", self.delta),
        ] {
            if !val.is_finite() || val <= 0.0 {
                return Err(Error::InvalidParameter(format!("Gamma-OU clock {name} = {val} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Integrated-Feller transform coefficients, cancellation-free (see the Heston
/// spot coefficients for the identical algebraic rewrite with m = κ):
///   A(x, τ) = (κθ/ξ²)[(κ − d)τ − 2·log(D/2)],  B(x, τ) = 2xτ·h1(dτ)/D,
/// with d = √(κ² − 2xξ²) and D = κτ·h1(dτ) + 1 + e^{−dτ}.
fn feller_ab(x: Complex64, tau: f64, c: &FellerClockParams) -> (Complex64, Complex64) {
    let d = (c.kappa * c.kappa - 2.0 * c.xi * c.xi * x).sqrt();
    let dt = d * tau;
    let h = h1c(dt);
    let denom = c.kappa * tau * h + 1.0 + (-dt).exp();
    let ktheta = c.kappa * c.theta / (c.xi * c.xi);
    let a = ktheta * ((c.kappa - d) * tau - 2.0 * (denom / 2.0).ln());
    let b = 2.0 * x * tau * h / denom;
    (a, b)
}

/// Finiteness of the integrated-Feller composition at real x = φ(u).
pub(crate) fn feller_is_real_finite(x: f64, h: &ForwardHorizon, c: &FellerClockParams) -> bool {
    if !x.is_finite() {
        return false;
    }
    if x <= 0.0 {
        return true;
    }
    let disc = c.kappa * c.kappa - 2.0 * c.xi * c.xi * x;
    if disc < 0.0 {
        let dt = (-disc).sqrt();
        let tstar = 2.0 * dt.atan2(-c.kappa) / dt;
        if h.tau >= tstar {
            return false;
        }
    }
    if h.t == 0.0 {
        return true;
    }
    let (_, b) = feller_ab(Complex64::from(x), h.tau, c);
    1.0 - 0.5 * c.xi * c.xi * h.t * h1(c.kappa * h.t) * b.re > 0.0
}

/// Forward lmgf of a Lévy base time-changed by an integrated Feller clock:
///   A(φ(z), τ) + B·v·e^{−κt}/(1 − 2β_t B) − (2κθ/ξ²)·log(1 − 2β_t B),
/// with β_t = (ξ²/(4κ))(1 − e^{−κt}).
pub fn feller_tc_forward_lmgf(
    z: Complex64,
    h: &ForwardHorizon,
    levy: &LevySpec,
    clock: &FellerClockParams,
) -> Result<Complex64> {
    clock.validate()?;
    h.validate()?;
    let x_real = levy.exponent(Complex64::from(z.re))?.re;
    if !feller_is_real_finite(x_real, h, clock) {
        return Err(Error::Explosion { context: "Feller-clock forward lmgf".into(), arg: z.re });
    }
    let x = levy.exponent(z)?;
    let (a, b) = feller_ab(x, h.tau, clock);
    let beta = 0.25 * clock.xi * clock.xi * h.t * h1(clock.kappa * h.t);
    let w = 1.0 - 2.0 * beta * b;
    let ktheta = 2.0 * clock.kappa * clock.theta / (clock.xi * clock.xi);
    Ok(a + b * clock.v * (-clock.kappa * h.t).exp() / w - ktheta * w.ln())
}

/// Forward lmgf of a Lévy base time-changed by an integrated Γ-OU clock:
///   A(φ(z), τ) + B(φ(z), τ)·v·e^{−λt} + δ·log((B − αe^{λt})/(e^{λt}(B − α))),
/// with B(x, τ) = x(1 − e^{−λτ})/λ and
///   A(x, τ) = (λδ/(αλ − x))[xτ + α·log(1 − x(1 − e^{−λτ})/(αλ))],
/// the latter evaluated through log1p(w)/w with w = (αλ − x)(e^{λτ} − 1)/(αλ),
/// an exact rewrite whose singularity at x = αλ is removable.
pub fn gammaou_tc_forward_lmgf(
    z: Complex64,
    h: &ForwardHorizon,
    levy: &LevySpec,
    clock: &GammaOUClockParams,
) -> Result<Complex64> {
    clock.validate()?;
    h.validate()?;
    let albda = clock.alpha * clock.lambda;
    let x_real = levy.exponent(Complex64::from(z.re))?.re;
    if x_real >= albda {
        return Err(Error::Explosion { context: "Gamma-OU clock forward lmgf".into(), arg: z.re });
    }
    let x = levy.exponent(z)?;
    let q = (clock.lambda * h.tau).exp_m1() / albda;
    let a = clock.lambda * clock.delta * (clock.alpha * q * l1c((albda - x) * q) - h.tau);
    let b = x * (-(-clock.lambda * h.tau).exp_m1()) / clock.lambda;
    let elt = (clock.lambda * h.t).exp();
    // Both B − αe^{λt} and B − α have negative real part (Re B ≤ B(Re z) < α),
    // so their ratio stays off the negative real axis and the principal log is
    // the continuous branch.
    let ratio = (b - clock.alpha * elt) / ((b - clock.alpha) * elt);
    Ok(a + b * clock.v / elt + clock.delta * ratio.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{heston_forward_lmgf, HestonParams, Measure, VarianceGammaParams};

    fn gou_clock() -> GammaOUClockParams {
        GammaOUClockParams { v: 1.0, lambda: 1.8, alpha: 0.6, delta: 0.6 }
    }

    fn sample_vg() -> LevySpec {
        LevySpec::VarianceGamma(VarianceGammaParams::new(6.5, 11.1, 33.4).unwrap())
    }

    #[test]
    fn martingale_normalization_both_clocks() {
        let h = ForwardHorizon::new(1.0, 3.0).unwrap();
        let feller = FellerClockParams { v: 1.0, theta: 1.0, kappa: 1.3, xi: 0.4 };
        for u in [0.0, 1.0] {
            let z = Complex64::from(u);
            assert!(feller_tc_forward_lmgf(z, &h, &sample_vg(), &feller).unwrap().norm() < 1e-12);
            assert!(gammaou_tc_forward_lmgf(z, &h, &sample_vg(), &gou_clock()).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn brownian_feller_equals_uncorrelated_heston() {
        // A unit Brownian base on an integrated Feller clock is exactly Heston
        // with ρ = 0 and the clock's parameters.
        let clock = FellerClockParams { v: 0.07, theta: 0.08, kappa: 1.2, xi: 0.3 };
        let hp = HestonParams { v: 0.07, theta: 0.08, kappa: 1.2, xi: 0.3, rho: 0.0 };
        let bd = LevySpec::BrownianDrift { sigma: 1.0 };
        let h = ForwardHorizon::new(0.75, 2.5).unwrap();
        for &(re, im) in &[(0.0, 0.0), (1.0, 0.0), (1.8, 0.0), (-0.7, 0.0), (0.5, 4.0), (1.2, -11.0)] {
            let z = Complex64::new(re, im);
            let a = feller_tc_forward_lmgf(z, &h, &bd, &clock).unwrap();
            let b = heston_forward_lmgf(z, &h, &hp, Measure::TypeI).unwrap();
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "mismatch at z = {z}: {a} vs {b}");
        }
    }

    #[test]
    fn gammaou_domain_gate() {
        let h = ForwardHorizon::new(1.0, 3.0).unwrap();
        // φ grows to +∞ near u = M; find a u with φ(u) ≥ αλ = 1.08 and check rejection.
        let levy = sample_vg();
        let mut u = 1.0;
        while levy.exponent(Complex64::from(u)).unwrap().re < 1.08 {
            u += 0.5;
        }
        assert!(gammaou_tc_forward_lmgf(Complex64::from(u), &h, &levy, &gou_clock()).is_err());
        assert!(gammaou_tc_forward_lmgf(Complex64::from(1.5), &h, &levy, &gou_clock()).is_ok());
    }

    #[test]
    fn gammaou_a_is_smooth_through_alpha_lambda() {
        // The A coefficient has a removable singularity at φ = αλ; the lmgf
        // itself is gated before that, so probe A through the helper directly
        // by evaluating at complex arguments with real part just below the gate
        // and checking continuity of the full value across a fine grid.
        let h = ForwardHorizon::new(0.5, 2.0).unwrap();
        let levy = sample_vg();
        let clock = gou_clock();
        let mut prev: Option<Complex64> = None;
        for i in 0..=200 {
            let z = Complex64::new(1.5, -1.0 + 0.01 * i as f64);
            let v = gammaou_tc_forward_lmgf(z, &h, &levy, &clock).unwrap();
            if let Some(pv) = prev {
                assert!((v - pv).norm() < 0.1);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn branch_continuity_along_vertical_lines() {
        let h = ForwardHorizon::new(1.0, 3.0).unwrap();
        let levy = sample_vg();
        let gou = gou_clock();
        let feller = FellerClockParams { v: 1.0, theta: 1.0, kappa: 1.3, xi: 0.4 };
        for a in [0.5, 1.5] {
            let mut prev_g: Option<Complex64> = None;
            let mut prev_f: Option<Complex64> = None;
            let mut y = -50.0;
            while y <= 50.0 {
                let z = Complex64::new(a, y);
                let vg = gammaou_tc_forward_lmgf(z, &h, &levy, &gou).unwrap();
                let vf = feller_tc_forward_lmgf(z, &h, &levy, &feller).unwrap();
                if let Some(p) = prev_g {
                    assert!((vg - p).norm() < 0.5, "Gamma-OU jump at a = {a}, y = {y}");
                }
                if let Some(p) = prev_f {
                    assert!((vf - p).norm() < 0.5, "Feller jump at a = {a}, y = {y}");
                }
                prev_g = Some(vg);
                prev_f = Some(vf);
                y += 0.01;
            }
        }
    }
}
