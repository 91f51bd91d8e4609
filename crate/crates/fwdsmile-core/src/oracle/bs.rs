//! Black-Scholes pricing and implied-volatility inversion (unit forward, zero rates).

use crate::error::{Error, Result};
use crate::numeric::{brent_root, norm_cdf};

/// Forward call price N(d+) − e^k·N(d−) with d± = −k/(Σ√τ) ± Σ√τ/2.
pub fn bs_call(k: f64, sigma: f64, tau: f64) -> f64 {
    let sv = sigma * tau.sqrt();
    let dp = -k / sv + 0.5 * sv;
    norm_cdf(dp) - k.exp() * norm_cdf(dp - sv)
}

/// Price from a vol quote; the put side is produced via parity.
pub fn bs_price_from_vol(k: f64, sigma: f64, tau: f64, call: bool) -> f64 {
    let c = bs_call(k, sigma, tau);
    if call {
        c
    } else {
        c - 1.0 + k.exp()
    }
}

/// Implied-volatility query for a forward call on a unit forward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedVolQuery {
    pub price: f64,
    pub k: f64,
    pub tau: f64,
    /// Vol search bracket; the upper bound is expanded once to 10.0 if needed.
    pub bracket: [f64; 2],
}

impl ImpliedVolQuery {
    pub fn new(price: f64, k: f64, tau: f64) -> Self {
        Self { price, k, tau, bracket: [1e-4, 5.0] }
    }
}

/// Invert bs_call for the vol: bracketed solve to |Δσ| < 1e−10 (the Brent
/// abscissa tolerance) with an exact-residual early exit.
pub fn implied_vol(q: &ImpliedVolQuery) -> Result<f64> {
    if !q.tau.is_finite() || q.tau <= 0.0 {
        return Err(Error::InvalidParameter(format!("tau = {} must be > 0", q.tau)));
    }
    let intrinsic = (1.0 - q.k.exp()).max(0.0);
    if q.price.is_nan() || q.price <= intrinsic || q.price >= 1.0 {
        return Err(Error::Domain(format!(
            "price {} outside the open no-arbitrage band ({intrinsic}, 1) at k = {}",
            q.price, q.k
        )));
    }
    let f = |sigma: f64| bs_call(q.k, sigma, q.tau) - q.price;
    let (lo, mut hi) = (q.bracket[0], q.bracket[1]);
    if f(lo) > 0.0 {
        return Err(Error::Domain(format!(
            "price {} below the bracket floor value at k = {}",
            q.price, q.k
        )));
    }
    if f(hi) < 0.0 {
        hi = 10.0;
        if f(hi) < 0.0 {
            return Err(Error::Numerical(format!(
                "implied vol bracket exhausted at k = {}, price = {}",
                q.k, q.price
            )));
        }
    }
    brent_root(f, lo, hi, 1e-10, 0.0)
}
