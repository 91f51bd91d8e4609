//! Forward log-price moment generating functions for the supported models.
//!
//! All lmgfs are those of the forward log-return X over the window [t, t+τ],
//! started at zero, under a unit forward with zero rates: lmgf(0) = lmgf(1) = 0.

mod clocks;
mod heston;
mod levy;

pub use clocks::{feller_tc_forward_lmgf, gammaou_tc_forward_lmgf, FellerClockParams, GammaOUClockParams};
pub use heston::{heston_forward_lmgf, HestonParams};
pub(crate) use heston::beta_t;
pub use levy::{levy_exponent, LevySpec, VarianceGammaParams};

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Forward-start window: expansion point `t` (years, ≥ 0) and remaining
/// maturity `tau` (years, > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardHorizon {
    pub t: f64,
    pub tau: f64,
}

impl ForwardHorizon {
    pub fn new(t: f64, tau: f64) -> Result<Self> {
        let h = Self { t, tau };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::InvalidParameter(format!("forward-start date t = {} must be ≥ 0", self.t)));
        }
        if !self.tau.is_finite() || self.tau <= 0.0 {
            return Err(Error::InvalidParameter(format!("maturity tau = {} must be > 0", self.tau)));
        }
        Ok(())
    }
}

/// Pricing measure for the forward lmgf: Type I is the risk-neutral measure,
/// Type II the stopped-share-price measure (re-weighting by the share price at t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    #[default]
    TypeI,
    TypeII,
}

/// Stochastic clock applied to a Lévy base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClockSpec {
    /// Deterministic unit-rate clock: the Lévy process itself.
    Trivial,
    /// Integrated Feller (square-root) activity rate.
    Feller(FellerClockParams),
    /// Integrated Γ-OU activity rate.
    GammaOU(GammaOUClockParams),
}

/// Tagged union of the model families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    BlackScholes { sigma: f64 },
    Heston(HestonParams),
    TimeChangedLevy { levy: LevySpec, clock: ClockSpec },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::BlackScholes { sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::InvalidParameter(format!("sigma = {sigma} must be > 0")));
                }
                Ok(())
            }
            ModelSpec::Heston(p) => p.validate(),
            ModelSpec::TimeChangedLevy { levy, clock } => {
                levy.validate()?;
                match clock {
                    ClockSpec::Trivial => Ok(()),
                    ClockSpec::Feller(c) => c.validate(),
                    ClockSpec::GammaOU(c) => c.validate(),
                }
            }
        }
    }

    /// Forward lmgf z ↦ log E[exp(z·X)] over the window `h`, under `measure`.
    ///
    /// Branches of all complex logarithms and square roots agree with continuous
    /// continuation along the imaginary direction from the real axis; see the
    /// module implementations for why the principal-branch assemblies used here
    /// have that property.
    pub fn forward_lmgf(&self, z: Complex64, h: &ForwardHorizon, measure: Measure) -> Result<Complex64> {
        h.validate()?;
        self.validate()?;
        match self {
            ModelSpec::BlackScholes { sigma } => {
                // X ~ N(−Σ²τ/2, Σ²τ) independently of t, under either measure.
                Ok(0.5 * sigma * sigma * h.tau * z * (z - 1.0))
            }
            ModelSpec::Heston(p) => heston_forward_lmgf(z, h, p, measure),
            ModelSpec::TimeChangedLevy { levy, clock } => {
                if measure == Measure::TypeII {
                    return Err(Error::Unsupported(
                        "Type-II measure is only available for Black-Scholes and Heston".into(),
                    ));
                }
                match clock {
                    ClockSpec::Trivial => Ok(Complex64::from(h.tau) * levy_exponent(z, levy)?),
                    ClockSpec::Feller(c) => feller_tc_forward_lmgf(z, h, levy, c),
                    ClockSpec::GammaOU(c) => gammaou_tc_forward_lmgf(z, h, levy, c),
                }
            }
        }
    }

    /// Whether the forward lmgf is finite at the real argument `u`.
    pub fn is_real_finite(&self, u: f64, h: &ForwardHorizon, measure: Measure) -> bool {
        match self {
            ModelSpec::BlackScholes { .. } => true,
            ModelSpec::Heston(p) => heston::heston_is_real_finite(u, h, p, measure),
            ModelSpec::TimeChangedLevy { levy, clock } => {
                let (glo, ghi) = levy.real_domain();
                if u.is_nan() || u <= glo || u >= ghi {
                    return false;
                }
                match clock {
                    ClockSpec::Trivial => true,
                    ClockSpec::Feller(c) => {
                        let x = match levy_exponent(Complex64::from(u), levy) {
                            Ok(x) => x.re,
                            Err(_) => return false,
                        };
                        clocks::feller_is_real_finite(x, h, c)
                    }
                    ClockSpec::GammaOU(c) => {
                        let x = match levy_exponent(Complex64::from(u), levy) {
                            Ok(x) => x.re,
                            Err(_) => return false,
                        };
                        x < c.alpha * c.lambda
                    }
                }
            }
        }
    }

    /// Open interval of real arguments with finite forward lmgf at horizon `h`.
    /// Endpoints are located by bisection; infinite ends are reported as ±∞.
    pub fn real_domain_bounds(&self, h: &ForwardHorizon, measure: Measure) -> (f64, f64) {
        match self {
            ModelSpec::BlackScholes { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            _ => {
                let finite = |u: f64| self.is_real_finite(u, h, measure);
                let hi = expand_then_bisect(&finite, 1.0, 1.0, 1e12);
                let lo = expand_then_bisect(&finite, 0.0, -1.0, -1e12);
                (lo, hi)
            }
        }
    }
}

fn expand_then_bisect(finite: &impl Fn(f64) -> bool, start: f64, direction: f64, cap: f64) -> f64 {
    let mut good = start;
    let mut step = direction;
    loop {
        let candidate = good + step;
        if candidate.abs() >= cap.abs() {
            return if direction > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        if finite(candidate) {
            good = candidate;
            step *= 2.0;
        } else {
            return crate::numeric::bisect_predicate(finite, good, candidate, 80);
        }
    }
}
