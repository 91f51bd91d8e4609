//! Closed-form asymptotic expansions of forward-start option prices and
//! forward implied-volatility smiles, with an independent Fourier oracle.
//!
//! The crate is organized bottom-up:
//! - [`models`]: forward log-price moment generating functions (Black-Scholes,
//!   Heston, time-changed Lévy), evaluable at complex arguments.
//! - [`expansions`]: regime-rescaled lmgf limits (Λ0, Λ1, Λ2) per model in the
//!   diagonal small-maturity and large-maturity regimes.
//! - [`saddle`]: saddlepoint u*(k), rate function Λ*(k), and derivative bundles.
//! - [`pricing`]: order-0/1/2 price expansions and Black-Scholes closed forms.
//! - [`smile`]: forward implied-variance expansions per regime.
//! - [`oracle`]: damped Fourier reference pricer and implied-vol inversion.

pub mod error;
pub mod expansions;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod pricing;
pub mod saddle;
pub mod smile;

pub use error::{Error, Result};
