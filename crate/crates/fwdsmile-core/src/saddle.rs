//! Saddlepoint u*(k), the rate function Λ*(k), and derivative bundles at u*.
//!
//! Λ0 is strictly convex on its domain interior, so Λ0' is strictly increasing
//! and u*(k) is the unique root of Λ0'(u) = k. The solver brackets the root by
//! geometric probes toward each boundary (doubling steps on unbounded sides)
//! and polishes with a bracketed bisection/secant hybrid. Closed-form
//! saddlepoints are provided where available: the Heston large-maturity q*
//! and the Variance Gamma exponent root.
//!
//! Derivatives are Richardson-extrapolated central differences with per-order
//! steps h_m = max(1e-4, 1e-3|u|)·scale_m, scale = [1, 100, 100, 500], clamped
//! to the boundary clearance. The enlarged high-order steps keep the rounding
//! noise eps·|Λ0|/h^m far below the derivative magnitudes (the Λ are analytic
//! with smoothness scales of several u-units, so the h² Richardson residual
//! stays negligible); Black-Scholes and Heston large-maturity bypass finite
//! differences entirely through closed derivative chains.

use crate::error::{Error, Result};
use crate::expansions::RegimeCoefficients;
use crate::models::{HestonParams, Measure, VarianceGammaParams};
use crate::numeric::brent_root;

/// Relative half-width of the singular-strike annotation band around
/// Λ0'(0) and Λ0'(c).
const SINGULAR_BAND: f64 = 1e-9;

/// Per-order multipliers on the base step max(1e-4, 1e-3|u|), index = order−1.
const ORDER_STEP_SCALE: [f64; 4] = [1.0, 100.0, 100.0, 500.0];

/// Saddlepoint solution and the Λ derivatives entering the order-0/1/2
/// expansions, all evaluated at u*(k).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleData {
    /// Log-strike coordinate the saddle was solved for.
    pub k: f64,
    /// Saddlepoint in the domain interior: Λ0'(u*) = k.
    pub u_star: f64,
    /// Rate function Λ*(k) = u*·k − Λ0(u*).
    pub lambda_star: f64,
    /// Λ0 derivatives of orders 1..=4 at u* (d0[i] is order i+1).
    pub d0: [f64; 4],
    /// Λ1 derivatives of orders 1..=2 at u* (d1[i] is order i+1).
    pub d1: [f64; 2],
    /// Λ1(u*).
    pub l1: f64,
    /// Λ2(u*).
    pub l2: f64,
    /// Whether k sits on a singular strike Λ0'(0) or Λ0'(c) (relative band
    /// 1e-9). The saddle is still solvable there; pricing and smile layers
    /// reject such strikes.
    pub at_singular_strike: bool,
}

/// Derivative orders to compute: Λ0 up to `lambda0_orders` (≤ 4) and Λ1 up to
/// `lambda1_orders` (≤ 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivativeRequest {
    pub lambda0_orders: usize,
    pub lambda1_orders: usize,
}

impl DerivativeRequest {
    /// Everything the order-2 expansions need: Λ0 to order 4, Λ1 to order 2.
    pub fn full() -> Self {
        Self { lambda0_orders: 4, lambda1_orders: 2 }
    }
}

/// Derivatives of Λ0 and Λ1 at one point; entries beyond the requested
/// orders are left at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivativeBundle {
    /// Λ0 derivatives of orders 1..=4.
    pub d0: [f64; 4],
    /// Λ1 derivatives of orders 1..=2.
    pub d1: [f64; 2],
}

/// Distance from `u` to the nearest domain endpoint (+∞ when unbounded).
fn clearance(coeffs: &RegimeCoefficients, u: f64) -> f64 {
    let d = coeffs.domain();
    (u - d.lo_value()).min(d.hi_value() - u)
}

fn base_step(u: f64) -> f64 {
    (1e-3 * u.abs()).max(1e-4)
}

/// Λ0' at an interior point: the closed derivative chain when the model has
/// one, otherwise Richardson-extrapolated central differences with the step
/// clamped to a fifth of the boundary clearance.
fn lambda0_prime(coeffs: &RegimeCoefficients, u: f64) -> Result<f64> {
    if let Some(d) = coeffs.lambda0_derivatives_closed(u) {
        return Ok(d[0]);
    }
    let c = clearance(coeffs, u);
    if c.is_nan() || c <= 0.0 {
        return Err(Error::Domain(format!("u = {u} is not in the domain interior")));
    }
    let h = base_step(u).min(0.2 * c);
    let slope = |h: f64| -> Result<f64> {
        Ok((coeffs.lambda0(u + h)? - coeffs.lambda0(u - h)?) / (2.0 * h))
    };
    Ok((4.0 * slope(0.5 * h)? - slope(h)?) / 3.0)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// March from `from` toward one domain side until Λ0'(u) − k attains the sign
/// that side must carry (negative toward the lower boundary, positive toward
/// the upper). Finite edges are approached geometrically, unbounded sides by
/// doubling steps.
fn march_to_sign(
    coeffs: &RegimeCoefficients,
    from: f64,
    side: Side,
    k: f64,
) -> Result<f64> {
    let d = coeffs.domain();
    let (edge, want_positive) = match side {
        Side::Lower => (d.lo_value(), false),
        Side::Upper => (d.hi_value(), true),
    };
    let attained = |g: f64| if want_positive { g > 0.0 } else { g < 0.0 };
    let side_name = match side {
        Side::Lower => "lower",
        Side::Upper => "upper",
    };
    let mut last_g = f64::NAN;
    if edge.is_finite() {
        for j in 1..=45 {
            let u = edge - (edge - from) * 0.5f64.powi(j);
            // Stop before the probe spacing degenerates to rounding noise.
            if (edge - u).abs() < 64.0 * f64::EPSILON * u.abs().max(1.0) {
                break;
            }
            match lambda0_prime(coeffs, u) {
                Ok(g) if attained(g - k) => return Ok(u),
                Ok(g) => last_g = g,
                Err(_) => break,
            }
        }
    } else {
        let mut step = 1.0;
        while step <= 1e12 {
            let u = match side {
                Side::Lower => from - step,
                Side::Upper => from + step,
            };
            match lambda0_prime(coeffs, u) {
                Ok(g) if attained(g - k) => return Ok(u),
                Ok(g) => last_g = g,
                Err(_) => break,
            }
            step *= 2.0;
        }
    }
    Err(Error::Numerical(format!(
        "saddle equation saturates at the {side_name} domain boundary: \
         Λ0' reaches {last_g:.6e} there, short of k = {k:.6e}"
    )))
}

/// An interior point to start bracketing from.
fn interior_start(coeffs: &RegimeCoefficients) -> f64 {
    let d = coeffs.domain();
    if d.interior_contains(0.0) {
        return 0.0;
    }
    match (d.lo_value().is_finite(), d.hi_value().is_finite()) {
        (true, true) => 0.5 * (d.lo_value() + d.hi_value()),
        (true, false) => d.lo_value() + 1.0,
        (false, true) => d.hi_value() - 1.0,
        (false, false) => 0.0,
    }
}

/// Solve Λ0'(u*) = k over the domain interior and assemble the full
/// derivative bundle at the saddle.
///
/// The root is bracketed by monotone probes (Λ0' is strictly increasing) and
/// refined to a residual near the evaluation noise floor; the result is
/// rejected if |Λ0'(u*) − k| exceeds 1e-10·max(1, |k|).
pub fn solve_saddle(coeffs: &RegimeCoefficients, k: f64) -> Result<SaddleData> {
    if !k.is_finite() {
        return Err(Error::InvalidParameter(format!("log-strike k = {k} must be finite")));
    }
    let start = interior_start(coeffs);
    let g_start = lambda0_prime(coeffs, start)? - k;
    let u_star = if g_start == 0.0 {
        start
    } else {
        let (a, b) = if g_start > 0.0 {
            (march_to_sign(coeffs, start, Side::Lower, k)?, start)
        } else {
            (start, march_to_sign(coeffs, start, Side::Upper, k)?)
        };
        let scale = a.abs().max(b.abs()).max(1.0);
        let g = |u: f64| lambda0_prime(coeffs, u).map_or(f64::NAN, |d| d - k);
        brent_root(g, a, b, 1e-17 * scale, 0.0)?
    };
    // Brent stops on its step-size floor, which on difference-chain models can
    // leave the residual a shade above the gate; a Newton step on Λ0'(u) − k
    // closes the last decade.
    let mut u_star = u_star;
    let mut residual = lambda0_prime(coeffs, u_star)? - k;
    for _ in 0..2 {
        if residual.abs() <= 1e-10 * k.abs().max(1.0) {
            break;
        }
        let d2 = derivative_bundle(coeffs, u_star, DerivativeRequest { lambda0_orders: 2, lambda1_orders: 0 })?
            .d0[1];
        if d2.is_nan() || d2 <= 0.0 {
            break;
        }
        let next = u_star - residual / d2;
        if !coeffs.domain().interior_contains(next) {
            break;
        }
        u_star = next;
        residual = lambda0_prime(coeffs, u_star)? - k;
    }
    let residual = residual.abs();
    if residual > 1e-10 * k.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "saddle residual |Λ0'(u*) - k| = {residual:.3e} at k = {k} exceeds 1e-10·max(1, |k|)"
        )));
    }
    let bundle = derivative_bundle(coeffs, u_star, DerivativeRequest::full())?;
    if bundle.d0[1].is_nan() || bundle.d0[1] <= 0.0 {
        return Err(Error::Numerical(format!(
            "Λ0''(u*) = {:.3e} is not positive at u* = {u_star}; Λ0 is numerically non-convex there",
            bundle.d0[1]
        )));
    }
    let (p0, pc) = coeffs.singular_strikes()?;
    let near = |p: f64| (k - p).abs() <= SINGULAR_BAND * p.abs().max(1.0);
    Ok(SaddleData {
        k,
        u_star,
        lambda_star: k * u_star - coeffs.lambda0(u_star)?,
        d0: bundle.d0,
        d1: bundle.d1,
        l1: coeffs.lambda1(u_star)?,
        l2: coeffs.lambda2(u_star)?,
        at_singular_strike: near(p0) || near(pc),
    })
}

/// Closed-form Heston large-maturity saddlepoint: (q*(k), V*(k)).
///
/// q*(k) = [ξ − 2κρ + (κθρ + kξ)·η/√(k²ξ² + 2kκθρξ + κ²θ²)] / (2ξ(1−ρ²))
/// with η = √(ξ²(1−ρ²) + (2κ−ρξ)²). The radicand is a positive-definite
/// quadratic in k (its discriminant is 4κ²θ²ξ²(ρ²−1) < 0), so no guard is
/// needed. V* = q*k − V(q*), with V evaluated through the t = 0 regime
/// coefficients (V does not depend on t).
pub fn heston_lm_saddle_closed(k: f64, p: &HestonParams) -> Result<(f64, f64)> {
    let coeffs = crate::expansions::heston_lm_coeffs(0.0, p, Measure::TypeI)?;
    let (kappa, theta, xi, rho) = (p.kappa, p.theta, p.xi, p.rho);
    let eta = (xi * xi * (1.0 - rho * rho) + (2.0 * kappa - rho * xi).powi(2)).sqrt();
    let root = (k * k * xi * xi + 2.0 * k * kappa * theta * rho * xi + kappa * kappa * theta * theta).sqrt();
    let q = (xi - 2.0 * kappa * rho + (kappa * theta * rho + k * xi) * eta / root)
        / (2.0 * xi * (1.0 - rho * rho));
    let v = coeffs.lambda0(q)?;
    Ok((q, k * q - v))
}

/// Closed-form Variance Gamma saddlepoint (u*, Λ*) for the trivial clock,
/// where Λ0 = φ.
///
/// The quadratic root is rationalized to
/// u* = 2(GMx − C(G−M)) / (S + 2C + (G−M)x), x = k − μ,
/// S = √(4C² + (G+M)²x²), which is exact at x = 0 (value (M−G)/2) and has a
/// strictly positive denominator: S² − (G−M)²x² = 4C² + 4GMx² > 0, so
/// S + (G−M)x > 0 and the +2C only helps. The root always satisfies
/// −G < u* < M.
pub fn vg_saddle_closed(k: f64, vg: &VarianceGammaParams) -> (f64, f64) {
    let (c, g, m, mu) = (vg.c, vg.g, vg.m, vg.mu());
    let x = k - mu;
    let s = (4.0 * c * c + (g + m) * (g + m) * x * x).sqrt();
    let u = 2.0 * (g * m * x - c * (g - m)) / (s + 2.0 * c + (g - m) * x);
    let phi = mu * u + c * (g * m / ((m - u) * (g + u))).ln();
    (u, k * u - phi)
}

/// Derivatives of Λ0 (orders 1..=`lambda0_orders`) and Λ1 (orders
/// 1..=`lambda1_orders`) at an interior point `u`.
///
/// Closed chains are used for Λ0 when the model provides them; otherwise each
/// order is a Richardson pair of central stencils at its per-order step. The
/// step is halved up to 4 times if 10·h exceeds the boundary clearance, after
/// which a boundary-clearance error is returned.
pub fn derivative_bundle(
    coeffs: &RegimeCoefficients,
    u: f64,
    req: DerivativeRequest,
) -> Result<DerivativeBundle> {
    if req.lambda0_orders > 4 {
        return Err(Error::InvalidParameter(format!(
            "lambda0_orders = {} exceeds the supported maximum 4",
            req.lambda0_orders
        )));
    }
    if req.lambda1_orders > 2 {
        return Err(Error::InvalidParameter(format!(
            "lambda1_orders = {} exceeds the supported maximum 2",
            req.lambda1_orders
        )));
    }
    if !coeffs.domain().interior_contains(u) {
        return Err(Error::Domain(format!("u = {u} is not in the domain interior {}", coeffs.domain())));
    }
    let mut out = DerivativeBundle::default();
    if req.lambda0_orders > 0 {
        if let Some(closed) = coeffs.lambda0_derivatives_closed(u) {
            out.d0[..req.lambda0_orders].copy_from_slice(&closed[..req.lambda0_orders]);
        } else {
            for order in 1..=req.lambda0_orders {
                out.d0[order - 1] = fd_derivative(&|x| coeffs.lambda0(x), coeffs, u, order)?;
            }
        }
    }
    for order in 1..=req.lambda1_orders {
        out.d1[order - 1] = fd_derivative(&|x| coeffs.lambda1(x), coeffs, u, order)?;
    }
    Ok(out)
}

/// One Richardson-extrapolated central-difference derivative of the given
/// order, with the per-order step shrunk to respect the 10·h clearance rule.
fn fd_derivative(
    f: &dyn Fn(f64) -> Result<f64>,
    coeffs: &RegimeCoefficients,
    u: f64,
    order: usize,
) -> Result<f64> {
    let c = clearance(coeffs, u);
    let mut h = base_step(u) * ORDER_STEP_SCALE[order - 1];
    let mut shrinks = 0;
    while 10.0 * h > c {
        if shrinks == 4 {
            return Err(Error::Domain(format!(
                "boundary clearance {c:.3e} at u = {u} is below 10 steps of h = {h:.3e} \
                 (order-{order} stencil, after 4 halvings)"
            )));
        }
        h *= 0.5;
        shrinks += 1;
    }
    let d_h = central_stencil(f, u, order, h)?;
    let d_h2 = central_stencil(f, u, order, 0.5 * h)?;
    Ok((4.0 * d_h2 - d_h) / 3.0)
}

fn central_stencil(f: &dyn Fn(f64) -> Result<f64>, u: f64, order: usize, h: f64) -> Result<f64> {
    Ok(match order {
        1 => (f(u + h)? - f(u - h)?) / (2.0 * h),
        2 => (f(u + h)? - 2.0 * f(u)? + f(u - h)?) / (h * h),
        3 => (f(u + 2.0 * h)? - 2.0 * f(u + h)? + 2.0 * f(u - h)? - f(u - 2.0 * h)?) / (2.0 * h * h * h),
        4 => {
            (f(u + 2.0 * h)? - 4.0 * f(u + h)? + 6.0 * f(u)? - 4.0 * f(u - h)? + f(u - 2.0 * h)?)
                / (h * h * h * h)
        }
        _ => unreachable!("orders are validated to 1..=4"),
    })
}
