//! Forward implied-volatility smile expansions.
//!
//! Diagonal small maturity: the implied variance of the (εt, ετ) forward smile
//! at log-strike k expands as σ² = v0 + v1·ε + v2·ε², with coefficients built
//! from the rate function and the saddlepoint data at k. Large maturity: at
//! log-strike kτ the implied variance expands as σ² = v0∞ + v1∞/τ + v2∞/τ²,
//! with a branch switch in v0∞ across the singular strikes Λ0'(0), Λ0'(1) and
//! a closed continuity limit for v1∞ at those points. Heston additionally
//! admits closed at-the-money polynomials (both regimes, Type I/II), so the
//! diagonal guard band around k = 0 is covered there by `heston_atm_diag`.

use crate::error::{Error, Result};
use crate::expansions::{coefficients, heston_lm_domain, LmCase, Regime, RegimeCoefficients};
use crate::models::{ForwardHorizon, HestonParams, Measure, ModelSpec};
use crate::oracle::{reference_vol, QuadratureConfig};
use crate::pricing::upsilon;
use crate::saddle::{derivative_bundle, solve_saddle, DerivativeRequest};

/// Half-width of the at-the-money guard band for the diagonal smile: the v_i
/// displays degenerate as k → 0, so direct evaluation is refused inside it.
/// Coincides with the pricing guard since both diagonal singular strikes sit
/// at the origin.
pub const ATM_GUARD_BAND: f64 = 1e-3;

/// Half-width of the band around Λ0'(0) and Λ0'(1) where the large-maturity
/// v1∞ is evaluated by its closed continuity limit instead of the generic
/// display (which is 0/0 there). No such limit is available for v2∞.
pub const BOUNDARY_LIMIT_BAND: f64 = 1e-4;

/// Tolerance on Λ0'(0) for the diagonal regularity precondition.
const REGULARITY_TOL: f64 = 1e-8;

/// Tolerance on Λ0(1) for the large-maturity martingale normalisation.
const MARTINGALE_TOL: f64 = 1e-10;

fn validate_order(order: usize) -> Result<()> {
    if order > 2 {
        return Err(Error::InvalidParameter(format!("expansion order {order} exceeds the supported maximum 2")));
    }
    Ok(())
}

/// Diagonal variance coefficients [v0, v1, v2] at log-strike k.
///
/// v0 = k²/(2τΛ*(k)), v1 and v2 per the second and third smile displays with
/// Υ(0,k); all saddle quantities at u*(k). Requires |k| ≥ `ATM_GUARD_BAND`
/// and the regularity condition Λ0'(0) = 0.
pub fn smallmat_variance_coeffs(coeffs: &RegimeCoefficients, k: f64) -> Result<[f64; 3]> {
    let Regime::DiagonalSmallMaturity { tau, .. } = coeffs.regime() else {
        return Err(Error::InvalidParameter(
            "small-maturity smile needs diagonal-regime coefficients".into(),
        ));
    };
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!("log-strike k = {k} must be finite")));
    }
    if k.abs() < ATM_GUARD_BAND {
        return Err(Error::Domain(format!(
            "k = {k} lies in the at-the-money guard band |k| < {ATM_GUARD_BAND}; \
             use the dedicated ATM expansion (Heston) or move the strike"
        )));
    }
    let drift = derivative_bundle(coeffs, 0.0, DerivativeRequest { lambda0_orders: 1, lambda1_orders: 0 })?;
    if drift.d0[0].abs() > REGULARITY_TOL {
        return Err(Error::Domain(format!(
            "Λ0'(0) = {:.3e} violates the smile regularity condition Λ0'(0) = 0",
            drift.d0[0]
        )));
    }
    let s = solve_saddle(coeffs, k)?;
    if s.lambda_star.is_nan() || s.lambda_star <= 0.0 {
        return Err(Error::Numerical(format!(
            "rate function Λ*({k}) = {} is not positive away from the money",
            s.lambda_star
        )));
    }
    let v0 = k * k / (2.0 * tau * s.lambda_star);
    let u = s.u_star;
    let l02 = s.d0[1];
    // log(k² e^{Λ1} / (u*² √Λ0,2 (τ v0)^{3/2})), assembled in log space; the
    // squares make |·| safe for k < 0 (where u* < 0 as well).
    let log_term =
        s.l1 + 2.0 * k.abs().ln() - 2.0 * u.abs().ln() - 0.5 * l02.ln() - 1.5 * (tau * v0).ln();
    let v1 = v0 * v0 * tau / k * (1.0 + 2.0 / k * log_term);
    let ups = upsilon(0.0, &s)?;
    let k2 = k * k;
    let v2 = 2.0 * tau * tau * v0.powi(3) / k2 * (3.0 / k2 + 0.125)
        + 2.0 * tau * v0 * v0 / k2 * (ups + 1.0 / u)
        + v1 * v1 / v0
        - 3.0 * tau * v0 * v1 / k2;
    let out = [v0, v1, v2];
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(format!("diagonal variance coefficients {out:?} at k = {k} are not finite")));
    }
    Ok(out)
}

/// Diagonal forward smile: implied variance of the (εt, ετ) smile at
/// log-strike k, truncated at `order` ∈ {0, 1, 2}.
pub fn smallmat_smile(coeffs: &RegimeCoefficients, k: f64, epsilon: f64, order: usize) -> Result<f64> {
    validate_order(order)?;
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be finite and > 0")));
    }
    let v = smallmat_variance_coeffs(coeffs, k)?;
    let mut total = v[0];
    if order >= 1 {
        total += epsilon * v[1];
    }
    if order >= 2 {
        total += epsilon * epsilon * v[2];
    }
    Ok(total)
}

/// Large-maturity variance coefficients at scaled log-strike k.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargematCoeffs {
    pub v0: f64,
    pub v1: f64,
    /// None within the boundary band, where only v1's continuity limit exists.
    pub v2: Option<f64>,
    /// v1 came from the closed boundary limit rather than the generic display.
    pub boundary_limit: bool,
}

/// Large-maturity variance coefficients (v0∞, v1∞, v2∞) at scaled log-strike
/// k (actual log-strike kτ).
///
/// v0∞ uses the branch 2(2Λ* − k − 2√(Λ*(Λ*−k))) outside [Λ0'(0), Λ0'(1)] and
/// the + branch inside; v1∞ and v2∞ follow the large-maturity displays with
/// Υ(1,k). Within `BOUNDARY_LIMIT_BAND` of a singular strike, v1∞ switches to
/// its closed continuity limit and v2∞ is unavailable.
pub fn largemat_variance_coeffs(coeffs: &RegimeCoefficients, k: f64) -> Result<LargematCoeffs> {
    let Regime::LargeMaturity { .. } = coeffs.regime() else {
        return Err(Error::InvalidParameter(
            "large-maturity smile needs large-maturity coefficients".into(),
        ));
    };
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!("log-strike k = {k} must be finite")));
    }
    if !coeffs.domain().interior_contains(1.0) {
        return Err(Error::Domain(format!(
            "u = 1 is not interior to the limiting domain {}; the share-measure change underlying \
             the smile expansion is unavailable",
            coeffs.domain()
        )));
    }
    let l0_at_one = coeffs.lambda0(1.0)?;
    if l0_at_one.abs() > MARTINGALE_TOL {
        return Err(Error::Domain(format!(
            "martingale normalisation fails: Λ0(1) = {l0_at_one:.3e} (must vanish)"
        )));
    }
    let (p0, p1) = coeffs.singular_strikes()?;
    let s = solve_saddle(coeffs, k)?;
    // Λ* ≥ max(0, k) with equality exactly at the singular strikes, so the
    // radicand is non-negative up to rounding; clamp the rounding.
    let root = (s.lambda_star * (s.lambda_star - k)).max(0.0).sqrt();
    let inside = k > p0 && k < p1;
    let v0 = 2.0 * (2.0 * s.lambda_star - k + if inside { 2.0 * root } else { -2.0 * root });
    if v0.is_nan() || v0 <= 0.0 {
        return Err(Error::Numerical(format!("v0∞({k}) = {v0} is not positive")));
    }
    if (k - p0).abs() < BOUNDARY_LIMIT_BAND || (k - p1).abs() < BOUNDARY_LIMIT_BAND {
        let (p, up) = if (k - p0).abs() <= (k - p1).abs() { (p0, 0.0) } else { (p1, 1.0) };
        let v1 = largemat_v1_limit(coeffs, p, up)?;
        return Ok(LargematCoeffs { v0, v1, v2: None, boundary_limit: true });
    }
    let u = s.u_star;
    let l02 = s.d0[1];
    let dd = 4.0 * k * k - v0 * v0;
    // Outside [p0, p1] both dd and u*(u*−1) are positive; inside both are
    // negative, so the log argument is positive on either side.
    let ratio = dd / (4.0 * (u - 1.0) * u * v0.powf(1.5) * l02.sqrt());
    if ratio.is_nan() || ratio <= 0.0 {
        return Err(Error::Numerical(format!("v1∞ log argument {ratio} at k = {k} is not positive")));
    }
    let v1 = 8.0 * v0 * v0 / dd * (s.l1 + ratio.ln());
    let ups = upsilon(1.0, &s)?;
    let md = v0 * v0 - 4.0 * k * k;
    let bracket = 8.0 * k.powi(4) * v1 * v0 * v0 * (v1 + 6.0)
        - 16.0 * k.powi(6) * v1 * v1
        - 2.0 * ups * v0.powi(3) * md * md
        - k * k * v0.powi(4) * (96.0 + v1 * v1 + 8.0 * v1)
        - v0.powi(6) * (v1 + 8.0);
    let v2 = 4.0 / (v0 * md.powi(3)) * bracket;
    if !v1.is_finite() || !v2.is_finite() {
        return Err(Error::Numerical(format!(
            "large-maturity coefficients (v1, v2) = ({v1}, {v2}) at k = {k} are not finite"
        )));
    }
    Ok(LargematCoeffs { v0, v1, v2: Some(v2), boundary_limit: false })
}

/// Closed continuity limit of v1∞ at a singular strike p ∈ {Λ0'(0), Λ0'(1)},
/// with all derivatives at the corresponding saddle u*(p) ∈ {0, 1}.
fn largemat_v1_limit(coeffs: &RegimeCoefficients, p: f64, up: f64) -> Result<f64> {
    let b = derivative_bundle(coeffs, up, DerivativeRequest { lambda0_orders: 3, lambda1_orders: 1 })?;
    let l02 = b.d0[1];
    if l02.is_nan() || l02 <= 0.0 {
        return Err(Error::Numerical(format!("Λ0''({up}) = {l02} must be positive for the boundary limit")));
    }
    // v0∞ at the boundary: 2Λ0'(1) at the upper strike, −2Λ0'(0) at the lower.
    let v0p = 2.0 * p.abs();
    let sgn = if p >= 0.0 { 1.0 } else { -1.0 };
    Ok(2.0 - 2.0 * (v0p / l02).sqrt() * (1.0 + sgn * (b.d0[2] / (6.0 * l02) - b.d1[0])))
}

/// Large-maturity forward smile: implied variance at log-strike kτ,
/// truncated at `order` ∈ {0, 1, 2}; the order-1 and order-2 terms enter as
/// v1∞/τ and v2∞/τ².
pub fn largemat_smile(coeffs: &RegimeCoefficients, k: f64, tau: f64, order: usize) -> Result<f64> {
    validate_order(order)?;
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::InvalidParameter(format!("tau = {tau} must be finite and > 0")));
    }
    let c = largemat_variance_coeffs(coeffs, k)?;
    let mut total = c.v0;
    if order >= 1 {
        total += c.v1 / tau;
    }
    if order >= 2 {
        let v2 = c.v2.ok_or_else(|| {
            Error::Unsupported(format!(
                "order-2 term is unavailable within {BOUNDARY_LIMIT_BAND:e} of a singular strike; \
                 request order ≤ 1"
            ))
        })?;
        total += v2 / (tau * tau);
    }
    Ok(total)
}

/// Heston ATM polynomial coefficients (ν0, ν1, ν2), with the Type-II
/// substitutions applied when requested.
fn heston_atm_nu(h: &ForwardHorizon, p: &HestonParams, measure: Measure) -> (f64, f64, f64) {
    let (t, tau) = (h.t, h.tau);
    let (v, th, ka, xi, rho) = (p.v, p.theta, p.kappa, p.xi, p.rho);
    let nu0 = tau / 48.0 * (24.0 * ka * th + xi * xi * (rho * rho - 4.0) + 12.0 * v * (xi * rho - 2.0 * ka))
        - t / 4.0 * (xi * xi + 4.0 * ka * (v - th));
    let nu1 = rho * xi * tau / (24.0 * v)
        * (xi * xi * (1.0 - rho * rho) - 2.0 * ka * (v + th) + xi * rho * v)
        + rho * xi.powi(3) * t / (8.0 * v);
    let nu2 = (80.0 * ka * th * (13.0 * rho * rho - 6.0)
        + xi * xi * (521.0 * rho.powi(4) - 712.0 * rho * rho + 176.0)
        + 40.0 * rho * rho * v * (xi * rho - 2.0 * ka))
        * xi
        * xi
        * tau
        / (7680.0 * v * v)
        - xi * xi * t / (192.0 * v * v)
            * (4.0 * ka * th * (16.0 - 7.0 * rho * rho) + (7.0 * rho * rho - 4.0) * (9.0 * xi * xi + 4.0 * ka * v))
        + xi * xi * t * t / (32.0 * tau * v * v) * (4.0 * ka * (v - 3.0 * th) + 9.0 * xi * xi);
    match measure {
        Measure::TypeI => (nu0, nu1, nu2),
        Measure::TypeII => (
            nu0 + xi * rho * v * t,
            nu1,
            nu2 + rho * xi.powi(3) * t * (7.0 * rho * rho - 4.0) / (48.0 * v)
                - rho * xi.powi(3) * t * t / (8.0 * v * tau),
        ),
    }
}

/// ε⁰ and ε¹ parts of the Heston diagonal ATM variance polynomial at k.
pub(crate) fn heston_atm_diag_parts(
    k: f64,
    h: &ForwardHorizon,
    p: &HestonParams,
    measure: Measure,
) -> (f64, f64) {
    let (nu0, nu1, nu2) = heston_atm_nu(h, p, measure);
    let (v, xi, rho) = (p.v, p.xi, p.rho);
    let c2 = (4.0 - 7.0 * rho * rho) * xi * xi / (48.0 * v) + xi * xi * h.t / (4.0 * h.tau * v);
    (v + rho * xi / 2.0 * k + c2 * k * k, nu0 + nu1 * k + nu2 * k * k)
}

/// Heston diagonal ATM variance polynomial:
/// v + εν0 + (ρξ/2 + εν1)k + (c2 + εν2)k², intended for |k| within the
/// guard band where the generic diagonal displays degenerate.
pub fn heston_atm_diag(
    k: f64,
    h: &ForwardHorizon,
    epsilon: f64,
    p: &HestonParams,
    measure: Measure,
) -> Result<f64> {
    p.validate()?;
    h.validate()?;
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be finite and ≥ 0")));
    }
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!("log-strike k = {k} must be finite")));
    }
    let (e0, e1) = heston_atm_diag_parts(k, h, p, measure);
    Ok(e0 + epsilon * e1)
}

/// Heston diagonal ATM skew and convexity in k at k = 0 (Type I), each to
/// first order in ε.
pub fn heston_atm_skew_convexity(h: &ForwardHorizon, epsilon: f64, p: &HestonParams) -> Result<(f64, f64)> {
    p.validate()?;
    h.validate()?;
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be finite and ≥ 0")));
    }
    let (nu0, nu1, nu2) = heston_atm_nu(h, p, Measure::TypeI);
    let (t, tau) = (h.t, h.tau);
    let (v, xi, rho) = (p.v, p.xi, p.rho);
    let sv = v.sqrt();
    let skew = xi * rho / (4.0 * sv) + epsilon * (4.0 * nu1 * v - xi * rho * nu0) / (8.0 * v * sv);
    let convexity = xi * xi * ((2.0 - 5.0 * rho * rho) * tau + 6.0 * t) / (24.0 * tau * v * sv)
        - epsilon
            * (nu0 * xi * xi * (3.0 * t + (1.0 - 4.0 * rho * rho) * tau)
                + 6.0 * tau * v * (rho * xi * nu1 - 4.0 * nu2 * v))
            / (24.0 * tau * v * v * sv);
    Ok((skew, convexity))
}

/// Heston large-maturity ATM variance coefficients (v0∞(0), v1∞(0,t)), by
/// the closed displays. Case III only.
pub fn heston_lm_atm(t: f64, p: &HestonParams) -> Result<(f64, f64)> {
    p.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!("forward-start date t = {t} must be ≥ 0")));
    }
    let report = heston_lm_domain(t, p)?;
    if report.case != LmCase::III {
        return Err(Error::Unsupported(format!(
            "the at-the-money large-maturity display covers case III only; rho = {} falls in case {}",
            p.rho, report.case
        )));
    }
    let (v, th, ka, xi, rho) = (p.v, p.theta, p.kappa, p.xi, p.rho);
    let r2 = 1.0 - rho * rho;
    let eta = (xi * xi * r2 + (2.0 * ka - rho * xi).powi(2)).sqrt();
    let v0 = 4.0 * th * ka * (eta - 2.0 * ka + xi * rho) / (xi * xi * r2);
    let ekt = (ka * t).exp();
    let delta = 2.0 * ka * (1.0 + ekt * (1.0 - 2.0 * rho * rho)) - (1.0 - ekt) * (rho * xi + eta);
    let arg2 = delta * (-ka * t).exp() * (2.0 * ka - xi * rho + (1.0 - 2.0 * rho * rho) * eta)
        / (8.0 * ka * r2 * r2 * eta);
    let arg3 = xi * r2.powf(1.5) * (eta * (2.0 * xi * rho - 4.0 * ka + 2.0 * eta)).sqrt()
        / ((xi * (1.0 - 2.0 * rho * rho) - rho * (eta - 2.0 * ka)) * (rho * (eta - 2.0 * ka) + xi));
    if arg2.is_nan() || arg2 <= 0.0 || arg3.is_nan() || arg3 <= 0.0 {
        return Err(Error::Numerical(format!(
            "logarithm arguments ({arg2}, {arg3}) in v1∞(0,{t}) are not positive"
        )));
    }
    let v1 = 16.0 * ka * v * (rho * xi - 2.0 * ka + eta) / (delta * xi * xi)
        + 16.0 * ka * th / (xi * xi) * arg2.ln()
        - 8.0 * arg3.ln();
    if !v0.is_finite() || !v1.is_finite() {
        return Err(Error::Numerical(format!("ATM large-maturity values ({v0}, {v1}) are not finite")));
    }
    Ok((v0, v1))
}

/// Numerical residuals of the three combinations whose vanishing is exactly
/// what the k → 0 limits of v1 and v2 need:
/// [Λ0'(0), 2Λ1'(0) + Λ0''(0), 6Λ2'(0) + 3Λ1''(0) + Λ0'''(0)].
///
/// For a true martingale these vanish identically, so the returned numbers
/// measure the numerical residual of the coefficient pipeline; they are
/// reported, never asserted. The Λ2'(0) entry is a central difference of the
/// extracted Λ2 and is the noisiest of the three.
pub fn atm_limit_diagnostics(coeffs: &RegimeCoefficients) -> Result<[f64; 3]> {
    let b = derivative_bundle(coeffs, 0.0, DerivativeRequest { lambda0_orders: 3, lambda1_orders: 2 })?;
    let d = coeffs.domain();
    let hh = 1e-2_f64.min(d.hi_value().abs() / 16.0).min(d.lo_value().abs() / 16.0);
    let l21 = (coeffs.lambda2(hh)? - coeffs.lambda2(-hh)?) / (2.0 * hh);
    Ok([b.d0[0], 2.0 * b.d1[0] + b.d0[1], 6.0 * l21 + 3.0 * b.d1[1] + b.d0[2]])
}

/// Which asymptotic family a smile curve was built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    SmallMaturity,
    LargeMaturity,
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegimeKind::SmallMaturity => "small",
            RegimeKind::LargeMaturity => "large",
        })
    }
}

/// Per-point annotations of a smile curve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PointFlags {
    /// Diagonal Heston point inside the ATM guard band, served by the closed
    /// ATM polynomial (v1 then carries the whole ε-coefficient and v2 = 0).
    pub atm_polynomial: bool,
    /// Large-maturity point inside the boundary band: v1 is the continuity
    /// limit, v2 unavailable.
    pub boundary_limit: bool,
    /// Diagonal non-Heston point inside the ATM guard band: no values.
    pub guard_band: bool,
    /// Some truncated variance was non-positive; its vol is absent, never
    /// clamped.
    pub invalid_variance: bool,
    /// The oracle reference failed at this strike; the expansion values stand.
    pub oracle_failed: bool,
}

impl PointFlags {
    pub fn is_clean(&self) -> bool {
        *self == PointFlags::default()
    }
}

impl std::fmt::Display for PointFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_clean() {
            return f.write_str("ok");
        }
        let mut tags = Vec::new();
        if self.atm_polynomial {
            tags.push("atm-polynomial");
        }
        if self.boundary_limit {
            tags.push("boundary-limit");
        }
        if self.guard_band {
            tags.push("guard-band");
        }
        if self.invalid_variance {
            tags.push("invalid-variance");
        }
        if self.oracle_failed {
            tags.push("oracle-failed");
        }
        f.write_str(&tags.join("|"))
    }
}

/// One smile grid point: variance coefficients, per-order implied vols,
/// optional oracle reference and absolute vol errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SmilePoint {
    pub k: f64,
    /// [v0, v1, v2]; None where unavailable (guard band, boundary order cap).
    pub v: [Option<f64>; 3],
    /// Implied vol of the order-truncated variance; None where the coefficient
    /// is missing or the truncated variance is not positive.
    pub sigma: [Option<f64>; 3],
    pub sigma_ref: Option<f64>,
    /// |sigma[i] − sigma_ref|.
    pub err: [Option<f64>; 3],
    pub flags: PointFlags,
}

/// A smile computed over a strike grid in one regime.
#[derive(Debug, Clone, PartialEq)]
pub struct SmileCurve {
    pub regime: RegimeKind,
    /// Truncation order the curve was requested at (all orders ≤ 2 are still
    /// tabulated per point).
    pub order: usize,
    pub points: Vec<SmilePoint>,
}

fn vol_from(var: f64) -> Option<f64> {
    (var.is_finite() && var > 0.0).then(|| var.sqrt())
}

/// One assembled smile point. `coeffs` must come from `(model, measure)` and
/// the regime matching `kind` over `h`; `smile_from_expansion` is the
/// one-call wrapper, this entry point exists so callers can parallelise over
/// strikes.
pub fn smile_point(
    model: &ModelSpec,
    coeffs: &RegimeCoefficients,
    kind: RegimeKind,
    measure: Measure,
    h: &ForwardHorizon,
    k: f64,
    reference: Option<&QuadratureConfig>,
) -> Result<SmilePoint> {
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!("log-strike k = {k} must be finite")));
    }
    let mut flags = PointFlags::default();
    let mut v: [Option<f64>; 3] = [None; 3];
    let mut sigma: [Option<f64>; 3] = [None; 3];
    match kind {
        RegimeKind::SmallMaturity => {
            if k.abs() < ATM_GUARD_BAND {
                if let ModelSpec::Heston(p) = model {
                    flags.atm_polynomial = true;
                    let (e0, e1) = heston_atm_diag_parts(k, h, p, measure);
                    v = [Some(e0), Some(e1), Some(0.0)];
                    sigma = [vol_from(e0), vol_from(e0 + e1), vol_from(e0 + e1)];
                } else {
                    flags.guard_band = true;
                }
            } else {
                let vc = smallmat_variance_coeffs(coeffs, k)?;
                v = [Some(vc[0]), Some(vc[1]), Some(vc[2])];
                sigma = [
                    vol_from(vc[0]),
                    vol_from(vc[0] + vc[1]),
                    vol_from(vc[0] + vc[1] + vc[2]),
                ];
            }
        }
        RegimeKind::LargeMaturity => {
            let tau = h.tau;
            let c = largemat_variance_coeffs(coeffs, k)?;
            flags.boundary_limit = c.boundary_limit;
            v = [Some(c.v0), Some(c.v1), c.v2];
            sigma = [
                vol_from(c.v0),
                vol_from(c.v0 + c.v1 / tau),
                c.v2.and_then(|v2| vol_from(c.v0 + c.v1 / tau + v2 / (tau * tau))),
            ];
        }
    }
    flags.invalid_variance = v.iter().zip(&sigma).any(|(vi, si)| vi.is_some() && si.is_none());
    let mut sigma_ref = None;
    let mut err: [Option<f64>; 3] = [None; 3];
    if let Some(cfg) = reference {
        let log_strike = match kind {
            RegimeKind::SmallMaturity => k,
            RegimeKind::LargeMaturity => k * h.tau,
        };
        match reference_vol(model, h, log_strike, measure, cfg) {
            Ok(sr) => {
                sigma_ref = Some(sr);
                for (e, s) in err.iter_mut().zip(&sigma) {
                    *e = s.map(|x| (x - sr).abs());
                }
            }
            Err(_) => flags.oracle_failed = true,
        }
    }
    Ok(SmilePoint { k, v, sigma, sigma_ref, err, flags })
}

/// Compute a smile curve over `k_grid` for a model in the given regime over
/// the horizon `h` (diagonal: the smile at (t, τ) itself; large maturity:
/// scaled strikes with τ = h.tau). `reference` turns on the Fourier oracle
/// columns; a failed oracle strike is flagged and skipped, not fatal.
pub fn smile_from_expansion(
    model: &ModelSpec,
    kind: RegimeKind,
    measure: Measure,
    h: &ForwardHorizon,
    k_grid: &[f64],
    order: usize,
    reference: Option<&QuadratureConfig>,
) -> Result<SmileCurve> {
    validate_order(order)?;
    model.validate()?;
    h.validate()?;
    let regime = match kind {
        RegimeKind::SmallMaturity => Regime::DiagonalSmallMaturity { t: h.t, tau: h.tau },
        RegimeKind::LargeMaturity => Regime::LargeMaturity { t: h.t },
    };
    let coeffs = coefficients(model, regime, measure)?;
    let points = k_grid
        .iter()
        .map(|&k| smile_point(model, &coeffs, kind, measure, h, k, reference))
        .collect::<Result<Vec<_>>>()?;
    Ok(SmileCurve { regime: kind, order, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansions::bs_coeffs;
    use crate::models::{ClockSpec, FellerClockParams, GammaOUClockParams, LevySpec, VarianceGammaParams};
    use crate::numeric::loglog_slope;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn hest_diag_params() -> HestonParams {
        HestonParams { v: 0.07, theta: 0.07, kappa: 1.0, xi: 0.34, rho: -0.8 }
    }

    fn hest_lm_params() -> HestonParams {
        HestonParams { v: 0.07, theta: 0.07, kappa: 1.5, xi: 0.34, rho: -0.25 }
    }

    fn diag_horizon() -> ForwardHorizon {
        ForwardHorizon::new(0.5, 1.0 / 12.0).unwrap()
    }

    fn hest_diag_coeffs_sample() -> RegimeCoefficients {
        coefficients(
            &ModelSpec::Heston(hest_diag_params()),
            Regime::DiagonalSmallMaturity { t: 0.5, tau: 1.0 / 12.0 },
            Measure::TypeI,
        )
        .unwrap()
    }

    fn hest_lm_coeffs_sample(t: f64) -> RegimeCoefficients {
        coefficients(&ModelSpec::Heston(hest_lm_params()), Regime::LargeMaturity { t }, Measure::TypeI).unwrap()
    }

    fn lm_v1(coeffs: &RegimeCoefficients, k: f64) -> f64 {
        let c = largemat_variance_coeffs(coeffs, k).unwrap();
        c.v1
    }

    #[test]
    fn bs_smallmat_smile_is_flat() {
        let sigma = 0.2;
        let var = sigma * sigma;
        let coeffs = bs_coeffs(sigma, Regime::DiagonalSmallMaturity { t: 0.5, tau: 0.25 }).unwrap();
        for &k in &[-0.4, -0.2, -0.1, -0.05, 0.05, 0.1, 0.2, 0.4] {
            let v = smallmat_variance_coeffs(&coeffs, k).unwrap();
            assert_relative_eq!(v[0], var, max_relative = 1e-12);
            assert!(v[1].abs() < 1e-10 * var, "v1 = {} at k = {k}", v[1]);
            assert!(v[2].abs() < 1e-10 * var, "v2 = {} at k = {k}", v[2]);
            let total = smallmat_smile(&coeffs, k, 0.3, 2).unwrap();
            assert_relative_eq!(total, var, max_relative = 1e-10);
        }
    }

    #[test]
    fn bs_largemat_smile_is_flat_including_boundary_band() {
        let sigma = 0.2;
        let var = sigma * sigma;
        let coeffs = bs_coeffs(sigma, Regime::LargeMaturity { t: 0.0 }).unwrap();
        for &k in &[-0.6, -0.3, -0.12, -0.08, -0.05, 0.05, 0.08, 0.12, 0.3, 0.6] {
            let c = largemat_variance_coeffs(&coeffs, k).unwrap();
            assert!(!c.boundary_limit);
            assert_relative_eq!(c.v0, var, max_relative = 1e-12);
            assert!(c.v1.abs() < 1e-10 * var, "v1 = {} at k = {k}", c.v1);
            assert!(c.v2.unwrap().abs() < 1e-10 * var, "v2 = {:?} at k = {k}", c.v2);
        }
        // the singular strikes sit at ±Σ²/2 = ±0.02; inside the band the
        // continuity limit also reproduces the flat smile
        for &k in &[0.02 + 5e-5, 0.02 - 5e-5, -0.02 + 5e-5] {
            let c = largemat_variance_coeffs(&coeffs, k).unwrap();
            assert!(c.boundary_limit);
            assert!(c.v2.is_none());
            assert_abs_diff_eq!(c.v0, var, epsilon = 1e-10);
            assert!(c.v1.abs() < 1e-9, "boundary v1 = {} at k = {k}", c.v1);
            let total = largemat_smile(&coeffs, k, 5.0, 1).unwrap();
            assert_abs_diff_eq!(total, var, epsilon = 1e-9);
            let err = largemat_smile(&coeffs, k, 5.0, 2).unwrap_err();
            assert!(matches!(err, Error::Unsupported(_)), "got {err}");
        }
    }

    #[test]
    fn smallmat_guard_and_validation_errors() {
        let coeffs = hest_diag_coeffs_sample();
        let err = smallmat_smile(&coeffs, 5e-4, 0.1, 2).unwrap_err();
        assert!(matches!(&err, Error::Domain(m) if m.contains("guard band")), "got {err}");
        let err = smallmat_smile(&coeffs, 0.05, 0.0, 2).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "got {err}");
        let err = smallmat_smile(&coeffs, 0.05, 0.1, 3).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "got {err}");
        let lm = hest_lm_coeffs_sample(1.0);
        let err = smallmat_smile(&lm, 0.05, 0.1, 2).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "got {err}");
        let err = largemat_smile(&coeffs, 0.05, 5.0, 2).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)), "got {err}");
    }

    #[test]
    fn heston_diag_smile_tracks_oracle_at_representative_strike() {
        let coeffs = hest_diag_coeffs_sample();
        let total = smallmat_smile(&coeffs, 0.05, 1.0, 2).unwrap();
        assert!(total > 0.0);
        let vol = total.sqrt();
        let reference = reference_vol(
            &ModelSpec::Heston(hest_diag_params()),
            &diag_horizon(),
            0.05,
            Measure::TypeI,
            &QuadratureConfig::default(),
        )
        .unwrap();
        assert!(
            (vol - reference).abs() < 1e-2,
            "order-2 vol {vol} vs oracle {reference} differ by {}",
            (vol - reference).abs()
        );
    }

    #[test]
    fn heston_diag_atm_polynomial_values() {
        let p = hest_diag_params();
        let h = diag_horizon();
        // ν0 at Fig-3 parameters: τ/48·(24κθ + ξ²(ρ²−4) + 12v(ξρ−2κ)) − t/4·ξ²
        // (v = θ kills the second t-term); hand value −0.01552.
        let nu0 = heston_atm_diag(0.0, &h, 1.0, &p, Measure::TypeI).unwrap()
            - heston_atm_diag(0.0, &h, 0.0, &p, Measure::TypeI).unwrap();
        assert_abs_diff_eq!(nu0, -0.01552, epsilon = 1e-5);
        let expected = (1.0 / 12.0) / 48.0 * (-0.616896) - 0.125 * 0.1156;
        assert_relative_eq!(nu0, expected, max_relative = 1e-12);
        // ATM level: heston_atm_diag at k = 0 is v + εν0
        let eps = 0.3;
        assert_relative_eq!(
            heston_atm_diag(0.0, &h, eps, &p, Measure::TypeI).unwrap(),
            p.v + eps * nu0,
            max_relative = 1e-12
        );
        // Type-I and Type-II coincide at ρ = 0 and at t = 0
        let mut p0 = p;
        p0.rho = 0.0;
        for &k in &[-0.05, 0.0, 0.04] {
            let a = heston_atm_diag(k, &h, 0.7, &p0, Measure::TypeI).unwrap();
            let b = heston_atm_diag(k, &h, 0.7, &p0, Measure::TypeII).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        let h0 = ForwardHorizon::new(0.0, 0.25).unwrap();
        for &k in &[-0.05, 0.0, 0.04] {
            let a = heston_atm_diag(k, &h0, 0.7, &p, Measure::TypeI).unwrap();
            let b = heston_atm_diag(k, &h0, 0.7, &p, Measure::TypeII).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        // and they differ away from those special cases
        let a = heston_atm_diag(0.0, &h, 0.7, &p, Measure::TypeI).unwrap();
        let b = heston_atm_diag(0.0, &h, 0.7, &p, Measure::TypeII).unwrap();
        assert!((a - b).abs() > 1e-4, "Type I {a} vs Type II {b}");
        // v0(k) → v as k → 0: the generic diagonal coefficient approaches the
        // ATM polynomial level at the guard-band edge
        let coeffs = hest_diag_coeffs_sample();
        let v0 = smallmat_variance_coeffs(&coeffs, 1e-3).unwrap()[0];
        assert!((v0 - p.v).abs() < 3e-4, "v0(1e-3) = {v0} vs v = {}", p.v);
    }

    #[test]
    fn heston_diag_atm_consistency_slope() {
        let p = hest_diag_params();
        let h = diag_horizon();
        let coeffs = hest_diag_coeffs_sample();
        let eps = 1e-4;
        let ks: Vec<f64> = (0..7).map(|i| 1e-3 * (10f64).powf(i as f64 / 6.0)).collect();
        let mut diffs = Vec::new();
        for &k in &ks {
            let general = smallmat_smile(&coeffs, k, eps, 2).unwrap();
            let atm = heston_atm_diag(k, &h, eps, &p, Measure::TypeI).unwrap();
            diffs.push((general - atm).abs());
        }
        let slope = loglog_slope(&ks, &diffs, 1e-30).unwrap();
        assert!(slope >= 2.7, "ATM consistency slope {slope} < 2.7; diffs {diffs:?}");
    }

    #[test]
    fn heston_skew_convexity_identities() {
        let p = hest_diag_params();
        let h = diag_horizon();
        // zeroth-order skew vanishes at ρ = 0
        let mut p0 = p;
        p0.rho = 0.0;
        let (skew0, _) = heston_atm_skew_convexity(&h, 0.0, &p0).unwrap();
        assert_abs_diff_eq!(skew0, 0.0, epsilon = 1e-15);
        // order-0 skew level ξρ/(4√v)
        let (skew, _) = heston_atm_skew_convexity(&h, 0.0, &p).unwrap();
        assert_relative_eq!(skew, 0.34 * (-0.8) / (4.0 * 0.07f64.sqrt()), max_relative = 1e-14);
        // forward convexity exceeds spot convexity by ξ²t/(4τv^{3/2}) at order 0
        let h0 = ForwardHorizon::new(0.0, h.tau).unwrap();
        let (_, conv_fwd) = heston_atm_skew_convexity(&h, 0.0, &p).unwrap();
        let (_, conv_spot) = heston_atm_skew_convexity(&h0, 0.0, &p).unwrap();
        let expected = p.xi * p.xi * h.t / (4.0 * h.tau * p.v * p.v.sqrt());
        assert_relative_eq!(conv_fwd - conv_spot, expected, max_relative = 1e-12);
        // ATM forward-vs-spot vol level: σ_{εt,ετ}(0) − σ_{0,ετ}(0) =
        // −εt(ξ² + 4κ(v−θ))/(8√v) + O(ε²)
        let eps = 1e-5;
        let fwd = heston_atm_diag(0.0, &h, eps, &p, Measure::TypeI).unwrap().sqrt();
        let spot = heston_atm_diag(0.0, &h0, eps, &p, Measure::TypeI).unwrap().sqrt();
        let expected = -eps * h.t * (p.xi * p.xi + 4.0 * p.kappa * (p.v - p.theta)) / (8.0 * p.v.sqrt());
        assert_abs_diff_eq!(fwd - spot, expected, epsilon = 1e-11);
    }

    #[test]
    fn heston_lm_atm_display_matches_generic_machinery() {
        let p = hest_lm_params();
        for &t in &[0.0, 1.0] {
            let (v0, v1) = heston_lm_atm(t, &p).unwrap();
            assert!(v0 > 0.0 && v1.is_finite());
            let coeffs = hest_lm_coeffs_sample(t);
            let generic = largemat_smile(&coeffs, 0.0, 5.0, 0).unwrap();
            assert_abs_diff_eq!(v0, generic, epsilon = 1e-8);
        }
        // case gate: rho below rho_minus is case I/II territory
        let mut bad = p;
        bad.rho = -0.9;
        let err = heston_lm_atm(1.0, &bad).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)), "got {err}");
    }

    #[test]
    fn heston_lm_atm_small_t_slope_at_rho_zero() {
        let p = HestonParams { v: 0.05, theta: 0.1, kappa: 1.5, xi: 0.34, rho: 0.0 };
        let slope = 2.0 * p.theta / (1.0 + (1.0 + p.xi * p.xi / (4.0 * p.kappa * p.kappa)).sqrt()) - p.v;
        let (_, v1_at_0) = heston_lm_atm(0.0, &p).unwrap();
        let fd = |t: f64| (heston_lm_atm(t, &p).unwrap().1 - v1_at_0) / t;
        let errs: Vec<f64> = [0.05, 0.025, 0.0125, 0.00625].iter().map(|&t| (fd(t) - slope).abs()).collect();
        assert!(errs[3] < errs[0], "no convergence towards the slope: {errs:?}");
        assert!(errs[3] <= 0.05 * slope.abs(), "slope mismatch: fd errs {errs:?} vs slope {slope}");
    }

    #[test]
    fn largemat_boundary_limit_extends_v1_continuously() {
        let coeffs = hest_lm_coeffs_sample(1.0);
        let (p0, p1) = coeffs.singular_strikes().unwrap();
        for &(p, up) in &[(p0, 0.0), (p1, 1.0)] {
            let lim = largemat_v1_limit(&coeffs, p, up).unwrap();
            for &k in &[p - 1e-3, p + 1e-3] {
                let v1 = lm_v1(&coeffs, k);
                assert!(
                    (v1 - lim).abs() <= 1e-3,
                    "v1∞({k}) = {v1} vs boundary limit {lim} at p = {p}"
                );
            }
            // inside the band the limit is what largemat_smile returns
            let k_in = p + 5e-5;
            let tau = 5.0;
            let o0 = largemat_smile(&coeffs, k_in, tau, 0).unwrap();
            let o1 = largemat_smile(&coeffs, k_in, tau, 1).unwrap();
            assert_abs_diff_eq!((o1 - o0) * tau, lim, epsilon = 1e-12);
        }
    }

    #[test]
    fn largemat_branch_continuity_bounds_and_t_independence() {
        let coeffs = hest_lm_coeffs_sample(1.0);
        let (p0, p1) = coeffs.singular_strikes().unwrap();
        let v0_at = |k: f64| largemat_variance_coeffs(&coeffs, k).unwrap().v0;
        // one-sided limits at the branch switch, Richardson-extrapolated to
        // remove the O(δ) slope drift
        let limit = |p: f64, sgn: f64| {
            let d = 1e-6;
            2.0 * v0_at(p + sgn * d) - v0_at(p + sgn * 2.0 * d)
        };
        assert_abs_diff_eq!(limit(p1, 1.0), limit(p1, -1.0), epsilon = 1e-8);
        assert_abs_diff_eq!(limit(p0, 1.0), limit(p0, -1.0), epsilon = 1e-8);
        assert_abs_diff_eq!(limit(p1, 1.0), 2.0 * p1, epsilon = 1e-7);
        assert_abs_diff_eq!(limit(p0, -1.0), -2.0 * p0, epsilon = 1e-7);
        for &k in &[p0 - 0.05, p0 - 0.02, p1 + 0.02, p1 + 0.05] {
            let v0 = v0_at(k);
            assert!(0.0 < v0 && v0 < 2.0 * k.abs(), "outside bound fails: v0({k}) = {v0}");
        }
        for &k in &[0.6 * p0, 0.0, 0.6 * p1] {
            let v0 = v0_at(k);
            assert!(v0 > 2.0 * k.abs(), "inside bound fails: v0({k}) = {v0}");
        }
        let grid = [p0 - 0.04, -0.01, 0.0, 0.02, p1 + 0.04];
        let others = [hest_lm_coeffs_sample(0.0), hest_lm_coeffs_sample(0.5)];
        for &k in &grid {
            let base = v0_at(k);
            for c in &others {
                let v0 = largemat_variance_coeffs(c, k).unwrap().v0;
                assert_abs_diff_eq!(v0, base, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gamma_ou_vg_lm_coefficients_are_sane() {
        let model = ModelSpec::TimeChangedLevy {
            levy: LevySpec::VarianceGamma(VarianceGammaParams::new(6.5, 11.1, 33.4).unwrap()),
            clock: ClockSpec::GammaOU(GammaOUClockParams { v: 1.0, lambda: 1.8, alpha: 0.6, delta: 0.6 }),
        };
        let coeffs = coefficients(&model, Regime::LargeMaturity { t: 1.0 }, Measure::TypeI).unwrap();
        let (p0, p1) = coeffs.singular_strikes().unwrap();
        assert!(p0 < 0.0 && p1 > 0.0);
        for &k in &[p0 - 0.1, p0 - 0.02, 0.0, p1 + 0.02, p1 + 0.1] {
            let c = largemat_variance_coeffs(&coeffs, k).unwrap();
            assert!(c.v0 > 0.0 && c.v1.is_finite() && c.v2.unwrap().is_finite());
            let inside = k > p0 && k < p1;
            if inside {
                assert!(c.v0 > 2.0 * k.abs());
            } else {
                assert!(c.v0 < 2.0 * k.abs());
            }
        }
    }

    #[test]
    fn feller_clock_forward_level_is_below_spot_level() {
        // initial rate above its mean: v1∞(t, k) ≤ v1∞(0, k) strictly inside
        // the singular-strike interval
        let levy = LevySpec::VarianceGamma(VarianceGammaParams::new(58.12, 50.5, 69.37).unwrap());
        let clock = ClockSpec::Feller(FellerClockParams { v: 1.0, theta: 0.9, kappa: 1.23, xi: 1.6 });
        let model = ModelSpec::TimeChangedLevy { levy, clock };
        let at = |t: f64| coefficients(&model, Regime::LargeMaturity { t }, Measure::TypeI).unwrap();
        let spot = at(0.0);
        let (p0, p1) = spot.singular_strikes().unwrap();
        let ks: Vec<f64> = (1..5).map(|i| p0 + (p1 - p0) * i as f64 / 5.0).collect();
        for &t in &[0.05, 0.1] {
            let fwd = at(t);
            for &k in &ks {
                if (k - p0).abs() < BOUNDARY_LIMIT_BAND || (k - p1).abs() < BOUNDARY_LIMIT_BAND {
                    continue;
                }
                let v1_fwd = lm_v1(&fwd, k);
                let v1_spot = lm_v1(&spot, k);
                assert!(
                    v1_fwd <= v1_spot + 1e-12,
                    "v1∞({t}, {k}) = {v1_fwd} exceeds spot level {v1_spot}"
                );
            }
        }
    }

    #[test]
    fn atm_limit_diagnostics_vanish_for_martingale_models() {
        let bs = bs_coeffs(0.2, Regime::DiagonalSmallMaturity { t: 0.5, tau: 0.25 }).unwrap();
        let d = atm_limit_diagnostics(&bs).unwrap();
        for (i, x) in d.iter().enumerate() {
            assert!(x.abs() < 1e-12, "BS diagnostic {i} = {x}");
        }
        let heston = hest_diag_coeffs_sample();
        let d = atm_limit_diagnostics(&heston).unwrap();
        assert!(d[0].abs() < 1e-8, "Λ0'(0) residual {}", d[0]);
        assert!(d[1].abs() < 1e-6, "first martingale combination residual {}", d[1]);
        assert!(d[2].abs() < 1e-3, "second martingale combination residual {}", d[2]);
        // on large-maturity coefficients the first entry reports the singular
        // strike Λ0'(0), a genuinely nonzero number
        let lm = hest_lm_coeffs_sample(1.0);
        let d = atm_limit_diagnostics(&lm).unwrap();
        let (p0, _) = lm.singular_strikes().unwrap();
        assert_abs_diff_eq!(d[0], p0, epsilon = 1e-9);
    }

    #[test]
    fn smile_curve_assembly_flags_and_reference() {
        let cfg = QuadratureConfig::default();
        // empty grid is fine
        let model = ModelSpec::BlackScholes { sigma: 0.2 };
        let h = ForwardHorizon::new(0.5, 0.25).unwrap();
        let curve =
            smile_from_expansion(&model, RegimeKind::SmallMaturity, Measure::TypeI, &h, &[], 2, None).unwrap();
        assert!(curve.points.is_empty());
        // BS diagonal: flat smile, guard-band point flagged with no values
        let curve = smile_from_expansion(
            &model,
            RegimeKind::SmallMaturity,
            Measure::TypeI,
            &h,
            &[-0.1, 5e-4, 0.1],
            2,
            Some(&cfg),
        )
        .unwrap();
        assert_eq!(curve.regime, RegimeKind::SmallMaturity);
        for p in [&curve.points[0], &curve.points[2]] {
            assert!(p.flags.is_clean());
            assert_relative_eq!(p.sigma[2].unwrap(), 0.2, max_relative = 1e-10);
            assert!(p.err[2].unwrap() < 1e-7, "err {:?}", p.err);
        }
        let guarded = &curve.points[1];
        assert!(guarded.flags.guard_band && guarded.v[0].is_none() && guarded.sigma[2].is_none());
        assert_eq!(guarded.flags.to_string(), "guard-band");
        // Heston diagonal: ATM point redirected to the closed polynomial
        let hm = ModelSpec::Heston(hest_diag_params());
        let h3 = diag_horizon();
        let curve = smile_from_expansion(
            &hm,
            RegimeKind::SmallMaturity,
            Measure::TypeI,
            &h3,
            &[0.0, 0.05],
            2,
            None,
        )
        .unwrap();
        let atm = &curve.points[0];
        assert!(atm.flags.atm_polynomial);
        assert_eq!(atm.v[2], Some(0.0));
        let expected = heston_atm_diag(0.0, &h3, 1.0, &hest_diag_params(), Measure::TypeI).unwrap();
        assert_relative_eq!(atm.sigma[2].unwrap(), expected.sqrt(), max_relative = 1e-12);
        assert!(curve.points[1].flags.is_clean() && curve.points[1].v[2].is_some());
        // Heston large maturity: boundary-band point keeps orders 0 and 1
        let lm = ModelSpec::Heston(hest_lm_params());
        let h4 = ForwardHorizon::new(1.0, 5.0).unwrap();
        let coeffs = hest_lm_coeffs_sample(1.0);
        let (_, p1) = coeffs.singular_strikes().unwrap();
        let curve = smile_from_expansion(
            &lm,
            RegimeKind::LargeMaturity,
            Measure::TypeI,
            &h4,
            &[0.0, p1 + 5e-5],
            2,
            None,
        )
        .unwrap();
        let boundary = &curve.points[1];
        assert!(boundary.flags.boundary_limit);
        assert!(boundary.v[2].is_none() && boundary.sigma[2].is_none());
        assert!(boundary.sigma[1].is_some());
        assert_eq!(boundary.flags.to_string(), "boundary-limit");
        // determinism: identical inputs give identical curves
        let again = smile_from_expansion(
            &lm,
            RegimeKind::LargeMaturity,
            Measure::TypeI,
            &h4,
            &[0.0, p1 + 5e-5],
            2,
            None,
        )
        .unwrap();
        assert_eq!(curve, again);
    }

    #[test]
    fn smile_curve_flags_negative_truncated_variance() {
        // exaggerated vol-of-vol pushes the order-2 diagonal truncation
        // negative in the far wing; the point must be flagged, not clamped
        let p = HestonParams { v: 0.04, theta: 0.04, kappa: 1.0, xi: 1.2, rho: -0.9 };
        let model = ModelSpec::Heston(p);
        let h = ForwardHorizon::new(0.5, 0.5).unwrap();
        let coeffs =
            coefficients(&model, Regime::DiagonalSmallMaturity { t: 0.5, tau: 0.5 }, Measure::TypeI).unwrap();
        let mut flagged = 0;
        for &k in &[-0.2, 0.2] {
            let point =
                smile_point(&model, &coeffs, RegimeKind::SmallMaturity, Measure::TypeI, &h, k, None).unwrap();
            let sums: Vec<Option<f64>> = (0..3)
                .map(|o| point.v[..=o].iter().try_fold(0.0, |acc, v| v.map(|x| acc + x)))
                .collect();
            for (o, sum) in sums.iter().enumerate() {
                match sum {
                    Some(s) if *s > 0.0 => assert!(point.sigma[o].is_some()),
                    Some(_) => {
                        assert!(point.sigma[o].is_none(), "clamped vol at k = {k} order {o}");
                        assert!(point.flags.invalid_variance);
                    }
                    None => {}
                }
            }
            if point.flags.invalid_variance {
                flagged += 1;
            }
        }
        assert!(flagged > 0, "probe grid produced no negative truncated variance; widen it");
    }
}
