//! Regime-rescaled lmgf expansions Λε = Λ0 + εΛ1 + ε²Λ2 + O(ε³).
//!
//! The two regimes share one rescaling template. With Y_ε the forward
//! log-price read through the regime's clock,
//! - diagonal small maturity: Y_ε = X^{(εt)}_{ετ}, Λε(u) = ε·lmgf(u/ε; εt, ετ),
//! - large maturity: Y_ε = X^{(t)}_{1/ε}, Λε(u) = ε·lmgf(u; t, 1/ε),
//!
//! and the expansion coefficients Λ0, Λ1, Λ2 are closed forms on an effective
//! domain D0 ∋ 0 (large maturity also 1) with Λ0 strictly convex, Λ0(0) = 0.
//! [`RegimeCoefficients`] carries the coefficient evaluators, the domain with
//! its boundary type, and enough structure (closed derivative chains, complex
//! continuation of Λ0) for the saddlepoint and tail-verification layers.

mod heston_diag;
mod heston_lm;
mod lambda2;
mod tclevy_lm;

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{ForwardHorizon, Measure, ModelSpec};
use crate::numeric::loglog_slope;

pub use heston_diag::heston_diag_coeffs;
pub use heston_lm::{heston_lm_coeffs, heston_lm_domain, HestonLmDomainReport, LmCase};
pub use tclevy_lm::tclevy_lm_coeffs;

pub(crate) use heston_diag::HestonDiagCoeffs;
pub(crate) use heston_lm::HestonLmCoeffs;
pub(crate) use tclevy_lm::TcLevyLmCoeffs;

/// Residuals below this magnitude are treated as floating-point noise when
/// fitting convergence slopes.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Asymptotic regime, carrying the fixed (non-rescaled) horizon data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// t ↦ εt, τ ↦ ετ with ε ↓ 0; ε is the scale of both dates.
    DiagonalSmallMaturity { t: f64, tau: f64 },
    /// τ ↦ 1/ε with ε ↓ 0 at fixed forward-start date t.
    LargeMaturity { t: f64 },
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regime::DiagonalSmallMaturity { t, tau } => ForwardHorizon::new(t, tau).map(|_| ()),
            Regime::LargeMaturity { t } => {
                if !t.is_finite() || t < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "forward-start date t = {t} must be finite and >= 0"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The constant c with f(ε)ε → c: 0 in the diagonal regime, 1 at large
    /// maturity. Λ0'(c) marks the upper singular strike of the price expansion.
    pub fn scaling_c(&self) -> f64 {
        match self {
            Regime::DiagonalSmallMaturity { .. } => 0.0,
            Regime::LargeMaturity { .. } => 1.0,
        }
    }
}

/// One side of the effective domain D0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Endpoint where Λ0 stays finite (clock-capacity or moment boundary hit
    /// with a square-root vanishing).
    Closed(f64),
    /// Endpoint where Λ0 blows up.
    Open(f64),
    Unbounded,
}

impl Boundary {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Boundary::Closed(x) | Boundary::Open(x) => Some(x),
            Boundary::Unbounded => None,
        }
    }
}

/// Effective domain of Λ0, an interval around 0 with typed endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainInterval {
    pub lo: Boundary,
    pub hi: Boundary,
}

impl DomainInterval {
    /// Lower endpoint as a float, −∞ when unbounded.
    pub fn lo_value(&self) -> f64 {
        self.lo.value().unwrap_or(f64::NEG_INFINITY)
    }

    /// Upper endpoint as a float, +∞ when unbounded.
    pub fn hi_value(&self) -> f64 {
        self.hi.value().unwrap_or(f64::INFINITY)
    }

    /// Membership, honoring the open/closed endpoint types.
    pub fn contains(&self, u: f64) -> bool {
        let lo_ok = match self.lo {
            Boundary::Closed(a) => u >= a,
            Boundary::Open(a) => u > a,
            Boundary::Unbounded => true,
        };
        let hi_ok = match self.hi {
            Boundary::Closed(b) => u <= b,
            Boundary::Open(b) => u < b,
            Boundary::Unbounded => true,
        };
        lo_ok && hi_ok
    }

    /// Strict interior membership.
    pub fn interior_contains(&self, u: f64) -> bool {
        u > self.lo_value() && u < self.hi_value()
    }
}

impl fmt::Display for DomainInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lo {
            Boundary::Closed(a) => write!(f, "[{a}, ")?,
            Boundary::Open(a) => write!(f, "({a}, ")?,
            Boundary::Unbounded => write!(f, "(-inf, ")?,
        }
        match self.hi {
            Boundary::Closed(b) => write!(f, "{b}]"),
            Boundary::Open(b) => write!(f, "{b})"),
            Boundary::Unbounded => write!(f, "inf)"),
        }
    }
}

/// Model-specific coefficient evaluators.
#[derive(Debug)]
pub(crate) enum CoeffKind {
    BsDiag { sigma: f64, tau: f64 },
    BsLm { sigma: f64 },
    HestonDiag(HestonDiagCoeffs),
    HestonLm(HestonLmCoeffs),
    TcLevyLm(TcLevyLmCoeffs),
}

/// Expansion coefficients Λ0, Λ1, Λ2 of one model in one regime.
///
/// Immutable after construction; the only interior state is a cache for the
/// numerically extracted Λ2 (diagonal Heston), so shared references are safe
/// across threads.
#[derive(Debug)]
pub struct RegimeCoefficients {
    pub(crate) regime: Regime,
    pub(crate) measure: Measure,
    pub(crate) domain: DomainInterval,
    pub(crate) kind: CoeffKind,
    pub(crate) lambda2_cache: Mutex<HashMap<u64, f64>>,
}

impl RegimeCoefficients {
    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    pub fn domain(&self) -> DomainInterval {
        self.domain
    }

    /// False only for diagonal Heston, where Λ2 is a numerical Richardson
    /// limit rather than a closed form.
    pub fn lambda2_is_exact(&self) -> bool {
        !matches!(self.kind, CoeffKind::HestonDiag(_))
    }

    fn check_domain(&self, u: f64) -> Result<()> {
        if !u.is_finite() || !self.domain.contains(u) {
            return Err(Error::Domain(format!(
                "u = {u} lies outside the effective domain {}",
                self.domain
            )));
        }
        Ok(())
    }

    /// Λ0(u), the limiting rescaled lmgf.
    pub fn lambda0(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        match &self.kind {
            CoeffKind::BsDiag { sigma, tau } => Ok(0.5 * sigma * sigma * tau * u * u),
            CoeffKind::BsLm { sigma } => Ok(0.5 * sigma * sigma * u * (u - 1.0)),
            CoeffKind::HestonDiag(c) => Ok(c.lambda0(u)),
            CoeffKind::HestonLm(c) => Ok(c.lambda0(u)),
            CoeffKind::TcLevyLm(c) => c.lambda0(u),
        }
    }

    /// Λ0 continued to complex argument (real part must lie in the domain).
    pub fn lambda0_complex(&self, z: Complex64) -> Result<Complex64> {
        self.check_domain(z.re)?;
        match &self.kind {
            CoeffKind::BsDiag { sigma, tau } => Ok(0.5 * sigma * sigma * tau * z * z),
            CoeffKind::BsLm { sigma } => Ok(0.5 * sigma * sigma * z * (z - 1.0)),
            CoeffKind::HestonDiag(c) => Ok(c.lambda0_complex(z)),
            CoeffKind::HestonLm(c) => Ok(c.lambda0_complex(z)),
            CoeffKind::TcLevyLm(c) => c.lambda0_complex(z),
        }
    }

    /// Λ1(u), the first-order correction.
    pub fn lambda1(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        match &self.kind {
            CoeffKind::BsDiag { sigma, tau } => Ok(-0.5 * sigma * sigma * tau * u),
            CoeffKind::BsLm { .. } => Ok(0.0),
            CoeffKind::HestonDiag(c) => c.lambda1(u),
            CoeffKind::HestonLm(c) => c.lambda1(u),
            CoeffKind::TcLevyLm(c) => c.lambda1(u),
        }
    }

    /// Λ2(u), the second-order correction. Identically zero except for
    /// diagonal Heston, where it is extracted numerically and cached.
    pub fn lambda2(&self, u: f64) -> Result<f64> {
        self.check_domain(u)?;
        match &self.kind {
            CoeffKind::HestonDiag(_) => {
                let key = u.to_bits();
                if let Some(&cached) = self.lambda2_cache.lock().unwrap().get(&key) {
                    return Ok(cached);
                }
                let value = lambda2::extract_lambda2(self, u)?;
                self.lambda2_cache.lock().unwrap().insert(key, value);
                Ok(value)
            }
            _ => Ok(0.0),
        }
    }

    /// (Λ0'(0), Λ0'(c)): the strikes where the payoff trichotomy degenerates.
    pub fn singular_strikes(&self) -> Result<(f64, f64)> {
        match &self.kind {
            CoeffKind::BsDiag { .. } | CoeffKind::HestonDiag(_) => Ok((0.0, 0.0)),
            CoeffKind::BsLm { sigma } => Ok((-0.5 * sigma * sigma, 0.5 * sigma * sigma)),
            CoeffKind::HestonLm(c) => Ok((c.v_derivs(0.0)?[0], c.v_derivs(1.0)?[0])),
            CoeffKind::TcLevyLm(c) => Ok(c.singular_strikes()),
        }
    }

    /// Closed [Λ0', Λ0'', Λ0''', Λ0''''] when the model admits one, `None`
    /// otherwise (callers fall back to finite differences).
    pub fn lambda0_derivatives_closed(&self, u: f64) -> Option<[f64; 4]> {
        if !self.domain.contains(u) {
            return None;
        }
        match &self.kind {
            CoeffKind::BsDiag { sigma, tau } => {
                let s = sigma * sigma * tau;
                Some([s * u, s, 0.0, 0.0])
            }
            CoeffKind::BsLm { sigma } => {
                let s = sigma * sigma;
                Some([s * (u - 0.5), s, 0.0, 0.0])
            }
            CoeffKind::HestonLm(c) => c.v_derivs(u).ok(),
            _ => None,
        }
    }

    /// Λε(u): the finite-ε rescaled lmgf the coefficients approximate.
    pub fn rescaled_lmgf(&self, u: f64, eps: f64) -> Result<f64> {
        rescaled_lmgf(&self.model_spec(), self.regime, self.measure, u, eps)
    }

    fn model_spec(&self) -> ModelSpec {
        match &self.kind {
            CoeffKind::BsDiag { sigma, .. } | CoeffKind::BsLm { sigma } => {
                ModelSpec::BlackScholes { sigma: *sigma }
            }
            CoeffKind::HestonDiag(c) => ModelSpec::Heston(c.p),
            CoeffKind::HestonLm(c) => ModelSpec::Heston(c.p),
            CoeffKind::TcLevyLm(c) => ModelSpec::TimeChangedLevy { levy: c.levy, clock: c.clock },
        }
    }
}

/// Black-Scholes coefficients: Λ0 quadratic, Λ1 linear (diagonal) or zero
/// (large maturity), Λ2 ≡ 0, unbounded domain.
pub fn bs_coeffs(sigma: f64, regime: Regime) -> Result<RegimeCoefficients> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!("sigma = {sigma} must be finite and > 0")));
    }
    regime.validate()?;
    let kind = match regime {
        Regime::DiagonalSmallMaturity { tau, .. } => CoeffKind::BsDiag { sigma, tau },
        Regime::LargeMaturity { .. } => CoeffKind::BsLm { sigma },
    };
    Ok(RegimeCoefficients {
        regime,
        measure: Measure::TypeI,
        domain: DomainInterval { lo: Boundary::Unbounded, hi: Boundary::Unbounded },
        kind,
        lambda2_cache: Mutex::new(HashMap::new()),
    })
}

/// Build the expansion coefficients for any supported model/regime pair.
pub fn coefficients(model: &ModelSpec, regime: Regime, measure: Measure) -> Result<RegimeCoefficients> {
    regime.validate()?;
    match (model, regime) {
        (ModelSpec::BlackScholes { sigma }, _) => bs_coeffs(*sigma, regime),
        (ModelSpec::Heston(p), Regime::DiagonalSmallMaturity { t, tau }) => {
            heston_diag_coeffs(&ForwardHorizon::new(t, tau)?, p, measure)
        }
        (ModelSpec::Heston(p), Regime::LargeMaturity { t }) => heston_lm_coeffs(t, p, measure),
        (ModelSpec::TimeChangedLevy { levy, clock }, Regime::LargeMaturity { t }) => {
            if measure == Measure::TypeII {
                return Err(Error::Unsupported(
                    "Type-II coefficients are only available for Black-Scholes and Heston".into(),
                ));
            }
            tclevy_lm_coeffs(t, levy, clock)
        }
        (ModelSpec::TimeChangedLevy { .. }, Regime::DiagonalSmallMaturity { .. }) => Err(
            Error::Unsupported("time-changed Levy models admit the large-maturity regime only".into()),
        ),
    }
}

/// Λε(u) for a model/regime pair at finite ε > 0, via the full forward lmgf.
pub fn rescaled_lmgf(
    model: &ModelSpec,
    regime: Regime,
    measure: Measure,
    u: f64,
    eps: f64,
) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} must be finite and > 0")));
    }
    match regime {
        Regime::DiagonalSmallMaturity { t, tau } => {
            let h = ForwardHorizon::new(eps * t, eps * tau)?;
            Ok(eps * model.forward_lmgf(Complex64::new(u / eps, 0.0), &h, measure)?.re)
        }
        Regime::LargeMaturity { t } => {
            let h = ForwardHorizon::new(t, 1.0 / eps)?;
            Ok(eps * model.forward_lmgf(Complex64::new(u, 0.0), &h, measure)?.re)
        }
    }
}

/// One sample of the expansion residual r(ε) = Λε(u) − Λ0 − εΛ1 − ε²Λ2.
#[derive(Debug, Clone, Copy)]
pub struct ResidualEntry {
    pub epsilon: f64,
    pub lambda_eps: f64,
    pub residual: f64,
}

/// Residual table over an ε grid with a fitted log-log convergence slope.
#[derive(Debug, Clone)]
pub struct ResidualTable {
    pub entries: Vec<ResidualEntry>,
    /// Slope of log|r| against log ε over entries above [`RESIDUAL_FLOOR`];
    /// `None` when fewer than two survive (residuals at machine noise).
    pub slope: Option<f64>,
}

/// Measure how fast Λε − (Λ0 + εΛ1 + ε²Λ2) vanishes along an ε grid.
pub fn expansion_residual(
    model: &ModelSpec,
    regime: Regime,
    u: f64,
    eps_grid: &[f64],
) -> Result<ResidualTable> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("epsilon grid is empty".into()));
    }
    let coeffs = coefficients(model, regime, Measure::TypeI)?;
    let l0 = coeffs.lambda0(u)?;
    let l1 = coeffs.lambda1(u)?;
    let l2 = coeffs.lambda2(u)?;
    let mut entries = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let lambda_eps = coeffs.rescaled_lmgf(u, eps)?;
        let residual = lambda_eps - l0 - eps * l1 - eps * eps * l2;
        entries.push(ResidualEntry { epsilon: eps, lambda_eps, residual });
    }
    let xs: Vec<f64> = entries.iter().map(|e| e.epsilon).collect();
    let ys: Vec<f64> = entries.iter().map(|e| e.residual).collect();
    let slope = loglog_slope(&xs, &ys, RESIDUAL_FLOOR);
    Ok(ResidualTable { entries, slope })
}

/// Re Λ0 along the vertical line p_r + i·p_i.
#[derive(Debug, Clone, Copy)]
pub struct TailSample {
    pub p_i: f64,
    pub re_lambda0: f64,
}

/// Vertical-line profile of Re Λ0 used to verify the tail-integral bound.
#[derive(Debug, Clone)]
pub struct TailProfile {
    pub p_r: f64,
    pub samples: Vec<TailSample>,
    /// True when the profile is finite across the grid, peaks at the sample
    /// nearest p_i = 0, and decays by a strictly positive margin at both edges.
    pub max_on_real_axis: bool,
}

/// Sample Re Λ0(p_r + i·p_i) over `p_i_grid` and test that the real axis
/// dominates, the condition under which the saddlepoint contour estimate
/// controls the tails.
pub fn tail_profile(
    coeffs: &RegimeCoefficients,
    p_r: f64,
    p_i_grid: &[f64],
) -> Result<TailProfile> {
    if p_r == 0.0 {
        return Err(Error::InvalidParameter(
            "p_r = 0 does not separate the tails; pick a nonzero real part".into(),
        ));
    }
    if !coeffs.domain.interior_contains(p_r) {
        return Err(Error::Domain(format!(
            "p_r = {p_r} lies outside the interior of the effective domain {}",
            coeffs.domain
        )));
    }
    if p_i_grid.len() < 3 {
        return Err(Error::InvalidParameter("p_i grid needs at least three points".into()));
    }
    let mut samples = Vec::with_capacity(p_i_grid.len());
    let mut finite = true;
    for &p_i in p_i_grid {
        let re_lambda0 = coeffs
            .lambda0_complex(Complex64::new(p_r, p_i))
            .map(|z| z.re)
            .unwrap_or(f64::NAN);
        finite &= re_lambda0.is_finite();
        samples.push(TailSample { p_i, re_lambda0 });
    }
    let mut max_on_real_axis = finite;
    if finite {
        let center = samples
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.p_i.abs().total_cmp(&b.1.p_i.abs()))
            .map(|(i, _)| i)
            .unwrap();
        let peak = samples[center].re_lambda0;
        let tol = 1e-12 * peak.abs().max(1.0);
        for s in &samples {
            if s.re_lambda0 > peak + tol {
                max_on_real_axis = false;
            }
        }
        let first = samples.first().unwrap().re_lambda0;
        let last = samples.last().unwrap().re_lambda0;
        if !(peak - first > tol && peak - last > tol) {
            max_on_real_axis = false;
        }
    }
    Ok(TailProfile { p_r, samples, max_on_real_axis })
}
