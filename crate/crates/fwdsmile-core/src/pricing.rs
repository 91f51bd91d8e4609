//! Sharp large-deviations price expansions for forward-start options.
//!
//! For k away from the singular strikes Λ0'(0) and Λ0'(c), the out-of-the-money
//! (or covered) forward-start payoff admits
//!
//!   exp(−Λ*(k)/ε + k·f(ε) + Λ1(u*)) · Ā_c(k,ε) · (A_c(k,ε) + O(ε²)),
//!
//! where the payoff is a call for k > Λ0'(c), a put for k < Λ0'(0), and the
//! negative of a covered expectation E[e^{f(ε)Y} ∧ e^{k f(ε)}] in between.
//! Ā_c carries the ε^{3/2}f(ε) (c = 0) or c√ε (c > 0) small-noise prefactor
//! and A_c = 1 + Υ(c,k)ε + (scaling defect) the second-order correction.
//! Black-Scholes collapses to closed forms in both regimes; those are exposed
//! as independent references for the general machinery.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expansions::{Regime, RegimeCoefficients};
use crate::saddle::{derivative_bundle, DerivativeRequest, SaddleData};

/// Half-width of the strike guard band around Λ0'(0) and Λ0'(c): the expansion
/// is refused inside it rather than evaluated where it degenerates.
pub const SINGULAR_STRIKE_GUARD: f64 = 1e-3;

/// Payoff regime of a quoted expansion, decided by k against the singular
/// strikes: call above Λ0'(c), put below Λ0'(0), covered in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Call,
    Put,
    Covered,
}

impl fmt::Display for PayoffKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PayoffKind::Call => "call",
            PayoffKind::Put => "put",
            PayoffKind::Covered => "covered",
        };
        f.write_str(s)
    }
}

/// The strike-rescaling map f and its limit constant c, with f(ε)·ε = c + O(ε).
/// The two regimes use the exact maps f ≡ 1 (c = 0) and f(ε) = 1/ε (c = 1);
/// generic maps are admitted for exercising the scaling-defect terms.
pub struct ScalingFunction {
    /// Limit constant of ε·f(ε); fixes the payoff trichotomy via Λ0'(c).
    pub c: f64,
    map: ScaleMap,
}

enum ScaleMap {
    Unit,
    Inverse,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.map {
            ScaleMap::Unit => "1",
            ScaleMap::Inverse => "1/eps",
            ScaleMap::Custom(_) => "custom",
        };
        write!(f, "ScalingFunction {{ c: {}, f: {} }}", self.c, tag)
    }
}

impl ScalingFunction {
    /// Diagonal small-maturity scaling: f ≡ 1, c = 0.
    pub fn small_maturity() -> Self {
        Self { c: 0.0, map: ScaleMap::Unit }
    }

    /// Large-maturity scaling: f(ε) = 1/ε, c = 1, so that ε·f(ε) = 1 exactly.
    pub fn large_maturity() -> Self {
        Self { c: 1.0, map: ScaleMap::Inverse }
    }

    /// Generic scaling for tests of the defect terms; caller asserts
    /// ε·f(ε) = c + O(ε).
    pub fn custom(c: f64, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { c, map: ScaleMap::Custom(Arc::new(f)) }
    }

    /// The exact map for a regime.
    pub fn for_regime(regime: &Regime) -> Self {
        match regime {
            Regime::DiagonalSmallMaturity { .. } => Self::small_maturity(),
            Regime::LargeMaturity { .. } => Self::large_maturity(),
        }
    }

    /// f(ε).
    pub fn f_of_eps(&self, eps: f64) -> f64 {
        match &self.map {
            ScaleMap::Unit => 1.0,
            ScaleMap::Inverse => 1.0 / eps,
            ScaleMap::Custom(f) => f(eps),
        }
    }
}

/// One expansion quote. `order_terms[m]` is the signed price at truncation
/// order m: 0 keeps the prefactor alone, 1 adds Λ1 to the exponent, 2 applies
/// the full A_c correction; `price = order_terms[2]`. For a covered payoff
/// the quote is the (negative) signed expansion value, `leading` stores the
/// positive magnitude of the order-1 prefactor, and `price = −leading·correction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceQuote {
    /// Log-strike coordinate (actual log-strike is k·f(ε)).
    pub k: f64,
    /// Expansion parameter.
    pub epsilon: f64,
    /// Payoff regime of k.
    pub payoff_kind: PayoffKind,
    /// exp(−Λ*/ε + k·f(ε) + Λ1) · |Ā_c| > 0.
    pub leading: f64,
    /// A_c = 1 + Υ(c,k)ε + scaling defect.
    pub correction: f64,
    /// Signed order-2 price.
    pub price: f64,
    /// Signed prices at truncation orders 0, 1, 2.
    pub order_terms: [f64; 3],
}

impl PriceQuote {
    /// Per-order prices of the plain forward-start call at the same strike,
    /// by put-call parity: adds E[e^{f(ε)Y}] = exp(Λε(f(ε)ε)/ε) for covered
    /// and put regimes and subtracts exp(k·f(ε)) for the put regime.
    pub fn plain_call_terms(
        &self,
        coeffs: &RegimeCoefficients,
        scaling: &ScalingFunction,
    ) -> Result<[f64; 3]> {
        let f_eps = scaling.f_of_eps(self.epsilon);
        let forward_mass = || -> Result<f64> {
            let lam = coeffs.rescaled_lmgf(self.epsilon * f_eps, self.epsilon)?;
            Ok((lam / self.epsilon).exp())
        };
        let add = match self.payoff_kind {
            PayoffKind::Call => 0.0,
            PayoffKind::Covered => forward_mass()?,
            PayoffKind::Put => forward_mass()? - (self.k * f_eps).exp(),
        };
        Ok([
            self.order_terms[0] + add,
            self.order_terms[1] + add,
            self.order_terms[2] + add,
        ])
    }
}

/// The second-order functional Υ(b,k), all Λ derivatives taken at u*(k):
///
///   Υ = Λ2 − 5Λ0,3²/(24Λ0,2³) + (4Λ1,1Λ0,3 + Λ0,4)/(8Λ0,2²)
///       − (Λ1,1² + Λ1,2)/(2Λ0,2) − Λ0,3/(2u*Λ0,2²) − Λ0,3/(2(u*−b)Λ0,2²)
///       − (Λ1,1(b − 2u*) + 3)/(u*(u*−b)Λ0,2) − b²/(u*²(u*−b)²Λ0,2).
///
/// Finite for u* ∉ {0, b}; diverges toward the singular strikes.
pub fn upsilon(b: f64, s: &SaddleData) -> Result<f64> {
    if !b.is_finite() || b < 0.0 {
        return Err(Error::InvalidParameter(format!("upsilon pole b = {b} must be finite and >= 0")));
    }
    let us = s.u_star;
    if us == 0.0 || us == b {
        return Err(Error::Domain(format!(
            "singular strike: u*(k) = {us} coincides with a pole of Upsilon (b = {b})"
        )));
    }
    let l02 = s.d0[1];
    if l02.is_nan() || l02 <= 0.0 {
        return Err(Error::Numerical(format!(
            "Upsilon needs a strictly convex saddle: Lambda_0''(u*) = {l02}"
        )));
    }
    let (l03, l04) = (s.d0[2], s.d0[3]);
    let (l11, l12) = (s.d1[0], s.d1[1]);
    let ub = us - b;
    Ok(s.l2 - 5.0 * l03 * l03 / (24.0 * l02.powi(3))
        + (4.0 * l11 * l03 + l04) / (8.0 * l02 * l02)
        - (l11 * l11 + l12) / (2.0 * l02)
        - l03 / (2.0 * us * l02 * l02)
        - l03 / (2.0 * ub * l02 * l02)
        - (l11 * (b - 2.0 * us) + 3.0) / (us * ub * l02)
        - b * b / (us * us * ub * ub * l02))
}

/// Λ0'(0) and Λ0'(c) for the trichotomy; recomputed at c when the scaling's
/// limit constant differs from the regime's canonical one.
fn trichotomy_strikes(coeffs: &RegimeCoefficients, c: f64) -> Result<(f64, f64)> {
    let (p0, pc) = coeffs.singular_strikes()?;
    let canonical = match coeffs.regime() {
        Regime::DiagonalSmallMaturity { .. } => 0.0,
        Regime::LargeMaturity { .. } => 1.0,
    };
    if c == canonical {
        return Ok((p0, pc));
    }
    let req = DerivativeRequest { lambda0_orders: 1, lambda1_orders: 0 };
    Ok((p0, derivative_bundle(coeffs, c, req)?.d0[0]))
}

/// Price expansion at the saddle data `s` (solved on the same coefficients):
/// classifies the payoff, assembles Ā_c and A_c, and quotes the signed prices
/// at truncation orders 0, 1, 2. Strikes within [`SINGULAR_STRIKE_GUARD`] of
/// Λ0'(0) or Λ0'(c) are refused.
pub fn fso_price_expansion(
    coeffs: &RegimeCoefficients,
    s: &SaddleData,
    scaling: &ScalingFunction,
    epsilon: f64,
) -> Result<PriceQuote> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be finite and > 0")));
    }
    let c = scaling.c;
    let domain = coeffs.domain();
    if !c.is_finite() || c < 0.0 || !domain.interior_contains(c) {
        return Err(Error::InvalidParameter(format!(
            "limit constant c = {c} must be >= 0 and interior to the domain {domain}"
        )));
    }
    let k = s.k;
    let (p0, pc) = trichotomy_strikes(coeffs, c)?;
    if (k - p0).abs() < SINGULAR_STRIKE_GUARD || (k - pc).abs() < SINGULAR_STRIKE_GUARD {
        return Err(Error::Domain(format!(
            "singular strike: k = {k} lies within {SINGULAR_STRIKE_GUARD} of \
             Lambda_0'(0) = {p0:.6e} or Lambda_0'(c) = {pc:.6e}"
        )));
    }
    let payoff_kind = if k > pc {
        PayoffKind::Call
    } else if k < p0 {
        PayoffKind::Put
    } else {
        PayoffKind::Covered
    };
    let f_eps = scaling.f_of_eps(epsilon);
    if !f_eps.is_finite() {
        return Err(Error::InvalidParameter(format!("f(eps) = {f_eps} at eps = {epsilon}")));
    }
    let u_eff = epsilon * f_eps;
    if !domain.interior_contains(u_eff) {
        return Err(Error::Domain(format!(
            "rescaled argument f(eps)*eps = {u_eff} leaves the domain interior {domain}"
        )));
    }
    let us = s.u_star;
    let l02 = s.d0[1];
    if l02.is_nan() || l02 <= 0.0 {
        return Err(Error::Numerical(format!(
            "price expansion needs a strictly convex saddle: Lambda_0''(u*) = {l02}"
        )));
    }
    let numerator = if c > 0.0 { c * epsilon.sqrt() } else { epsilon.powf(1.5) * f_eps };
    let abar = numerator / (us * (us - c) * (2.0 * PI * l02).sqrt());
    let defect = if c > 0.0 { us * (u_eff - c) / ((us - c) * c) } else { u_eff / us };
    let correction = 1.0 + upsilon(c, s)? * epsilon + defect;
    let exponent = -s.lambda_star / epsilon + k * f_eps;
    let order0 = exponent.exp() * abar;
    let order1 = (exponent + s.l1).exp() * abar;
    let order2 = order1 * correction;
    for v in [order0, order1, order2] {
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "price expansion overflowed at k = {k}, eps = {epsilon} (exponent {exponent:.3e})"
            )));
        }
    }
    let leading = if payoff_kind == PayoffKind::Covered { -order1 } else { order1 };
    Ok(PriceQuote {
        k,
        epsilon,
        payoff_kind,
        leading,
        correction,
        price: order2,
        order_terms: [order0, order1, order2],
    })
}

/// Closed-form out-of-the-money forward-start price in Black-Scholes under the
/// diagonal small-maturity scaling (k > 0 call, k < 0 put):
///
///   exp(k/2 − k²/(2Σ²τε)) · (Σ²τε)^{3/2} / (k²√(2π)) · [1 − (3/k² + 1/8)Σ²τε].
pub fn bs_smallmat_price_closed(k: f64, sigma: f64, tau: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("sigma", sigma), ("tau", tau), ("epsilon", epsilon)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and > 0")));
        }
    }
    if k == 0.0 || !k.is_finite() {
        return Err(Error::Domain("k = 0 is the singular strike of the small-maturity expansion".into()));
    }
    let var = sigma * sigma * tau * epsilon;
    let prefactor = var.powf(1.5) / (k * k * (2.0 * PI).sqrt());
    let bracket = 1.0 - (3.0 / (k * k) + 0.125) * var;
    Ok((0.5 * k - k * k / (2.0 * var)).exp() * prefactor * bracket)
}

/// Closed-form forward-start price in Black-Scholes under the large-maturity
/// scaling, with the payoff trichotomy at k = ±Σ²/2:
///
///   exp(−τ((k + Σ²/2)²/(2Σ²) − k)) · 4Σ³/((4k² − Σ⁴)√(2πτ))
///     · [1 − 4Σ²(Σ⁴ + 12k²)/((4k² − Σ⁴)²τ)],
///
/// quoted with its natural sign (negative of the covered expectation for
/// |k| < Σ²/2).
pub fn bs_largemat_price_closed(k: f64, sigma: f64, tau: f64) -> Result<(f64, PayoffKind)> {
    for (name, v) in [("sigma", sigma), ("tau", tau)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and > 0")));
        }
    }
    let half_var = 0.5 * sigma * sigma;
    // Pole detection up to rounding in ±Σ²/2 itself (relative band 1e-9).
    if !k.is_finite() || (k.abs() - half_var).abs() <= 1e-9 * half_var {
        return Err(Error::Domain(format!(
            "k = {k} sits on a singular strike of the large-maturity expansion (±{half_var})"
        )));
    }
    let payoff_kind = if k > half_var {
        PayoffKind::Call
    } else if k < -half_var {
        PayoffKind::Put
    } else {
        PayoffKind::Covered
    };
    let sig2 = sigma * sigma;
    let denom = 4.0 * k * k - sig2 * sig2;
    let rate = (k + half_var).powi(2) / (2.0 * sig2) - k;
    let prefactor = 4.0 * sigma.powi(3) / (denom * (2.0 * PI * tau).sqrt());
    let bracket = 1.0 - 4.0 * sig2 * (sig2 * sig2 + 12.0 * k * k) / (denom * denom * tau);
    Ok(((-tau * rate).exp() * prefactor * bracket, payoff_kind))
}
