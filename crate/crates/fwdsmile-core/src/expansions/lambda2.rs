//! Numerical extraction of Λ2 where no closed form exists (diagonal Heston).
//!
//! The residual (Λε − Λ0 − εΛ1)/ε² tends to Λ2 as ε ↓ 0 with an O(ε) error
//! term carrying its own regular expansion, so Richardson extrapolation over a
//! halving ε grid removes the leading error orders. Three elimination rounds
//! over ε = 2⁻⁶ … 2⁻¹¹ leave an extraction error near 1e−8, far below the ε²
//! prefactor the coefficient multiplies.

use crate::error::Result;
use crate::numeric::richardson_halving;

use super::RegimeCoefficients;

const EPS_POWS: std::ops::Range<i32> = 6..12;

pub(crate) fn extract_lambda2(coeffs: &RegimeCoefficients, u: f64) -> Result<f64> {
    let l0 = coeffs.lambda0(u)?;
    let l1 = coeffs.lambda1(u)?;
    let mut vals = Vec::with_capacity(EPS_POWS.len());
    for k in EPS_POWS {
        let eps = (2.0f64).powi(-k);
        let lam = coeffs.rescaled_lmgf(u, eps)?;
        vals.push((lam - l0 - eps * l1) / (eps * eps));
    }
    Ok(richardson_halving(&vals, 3))
}
