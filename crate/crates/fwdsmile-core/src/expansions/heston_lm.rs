//! Large-maturity coefficients for Heston (forward start at fixed t).
//!
//! Λ0(u) = V(u) = (κθ/ξ²)·(κ − ρξu − d(u)), d = √q, q(u) = (κ − ρξu)² + ξ²u(1−u),
//! on [u−, u+] (the roots of q), and
//!   Λ1(u) = H(u) = V·v·e^{−κt}/(κθ − 2β_t V) − (2κθ/ξ²)·log((κθ − 2β_t V)/(κθ(1−γ))),
//!   γ = (κ − ρξu − d)/(κ − ρξu + d),   β_t = (ξ²/4κ)(1 − e^{−κt}),
//! while Λ2 ≡ 0 (the remainder is exponentially small in τ).
//!
//! Whether V stays below the time-change capacity κθ/(2β_t) on all of [u−, u+]
//! depends on the correlation: the thresholds ρ± (roots of a quadratic in ρ)
//! split the admissible set into case I (ρ < ρ−, capacity binds on the right at
//! u*+), case II (ρ > ρ+, binds on the left at u*−) and case III (full [u−, u+]).
//! Only case III supports the smile/pricing expansion here; the report still
//! describes the other two.
//!
//! Type II replaces κ by κ̃ = κ − ξρ inside β_t and the decay factor e^{−κt}
//! only; V, γ, and the 2κθ/ξ² prefactor keep κ (κθ is measure-invariant).

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::models::{beta_t, HestonParams, Measure};

use super::{Boundary, CoeffKind, DomainInterval, Regime, RegimeCoefficients};

/// Capacity layout of the large-maturity Heston expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmCase {
    I,
    II,
    III,
}

impl fmt::Display for LmCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LmCase::I => write!(f, "I"),
            LmCase::II => write!(f, "II"),
            LmCase::III => write!(f, "III"),
        }
    }
}

/// Admissibility report for the large-maturity Heston regime.
#[derive(Debug, Clone)]
pub struct HestonLmDomainReport {
    /// Correlation thresholds: case III holds iff ρ− ≤ ρ ≤ min(ρ+, κ/ξ).
    pub rho_minus: f64,
    pub rho_plus: f64,
    /// Moment-explosion endpoints u± (roots of q).
    pub u_minus: f64,
    pub u_plus: f64,
    /// Clock-capacity bounds (defined when t > 0 and the discriminant ν² ≥ 0);
    /// the binding one is u*+ in case I and u*− in case II.
    pub u_star_minus: Option<f64>,
    pub u_star_plus: Option<f64>,
    pub case: LmCase,
    /// Effective domain of Λ0.
    pub interval: DomainInterval,
}

/// Classify the large-maturity domain for a forward start at `t`.
pub fn heston_lm_domain(t: f64, p: &HestonParams) -> Result<HestonLmDomainReport> {
    p.validate()?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "forward-start date t = {t} must be finite and >= 0"
        )));
    }
    if p.kappa <= p.rho * p.xi {
        return Err(Error::InvalidParameter(format!(
            "large-maturity asymptotics require kappa > rho*xi; got kappa = {} <= rho*xi = {}",
            p.kappa,
            p.rho * p.xi
        )));
    }
    let (kappa, xi, rho) = (p.kappa, p.xi, p.rho);
    let eta = (xi * xi * (1.0 - rho * rho) + (2.0 * kappa - rho * xi).powi(2)).sqrt();
    let u_minus = (xi - 2.0 * kappa * rho - eta) / (2.0 * xi * (1.0 - rho * rho));
    let u_plus = (xi - 2.0 * kappa * rho + eta) / (2.0 * xi * (1.0 - rho * rho));

    let (rho_minus, rho_plus, u_star_minus, u_star_plus) = if t == 0.0 {
        (-1.0, 1.0, None, None)
    } else {
        let e = (kappa * t).exp();
        // ρ± solve 4κe^{2κt}ρ² + ξ(1 − e^{2κt})ρ − κ(1 + e^{κt})² = 0.
        let disc = (e + 1.0) * (16.0 * kappa * kappa * e * e + xi * xi * (1.0 - e).powi(2)).sqrt();
        let rho_m = (xi * (e * e - 1.0) - disc) / (8.0 * kappa * e * e);
        let rho_p = (xi * (e * e - 1.0) + disc) / (8.0 * kappa * e * e);
        let psi = xi * (e - 1.0) - 4.0 * kappa * rho * e;
        let nu_sq = psi * psi - 16.0 * kappa * kappa * e;
        let (usm, usp) = if nu_sq >= 0.0 {
            let nu = nu_sq.sqrt();
            (
                Some((psi - nu) / (2.0 * xi * (e - 1.0))),
                Some((psi + nu) / (2.0 * xi * (e - 1.0))),
            )
        } else {
            (None, None)
        };
        (rho_m, rho_p, usm, usp)
    };

    let case = if rho < rho_minus {
        LmCase::I
    } else if rho > rho_plus {
        LmCase::II
    } else {
        LmCase::III
    };
    let interval = match (case, u_star_minus, u_star_plus) {
        (LmCase::III, _, _) => {
            DomainInterval { lo: Boundary::Closed(u_minus), hi: Boundary::Closed(u_plus) }
        }
        (LmCase::I, _, Some(usp)) => {
            DomainInterval { lo: Boundary::Closed(u_minus), hi: Boundary::Open(usp) }
        }
        (LmCase::II, Some(usm), _) => {
            DomainInterval { lo: Boundary::Open(usm), hi: Boundary::Closed(u_plus) }
        }
        _ => {
            return Err(Error::Numerical(
                "capacity bound undefined in a capacity-limited case".into(),
            ))
        }
    };
    Ok(HestonLmDomainReport {
        rho_minus,
        rho_plus,
        u_minus,
        u_plus,
        u_star_minus,
        u_star_plus,
        case,
        interval,
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HestonLmCoeffs {
    pub(crate) p: HestonParams,
    pub(crate) t: f64,
    kappa_eff: f64,
    beta: f64,
}

/// Case-III large-maturity coefficients: Λ0 = V, Λ1 = H, Λ2 ≡ 0.
pub fn heston_lm_coeffs(t: f64, p: &HestonParams, measure: Measure) -> Result<RegimeCoefficients> {
    let report = heston_lm_domain(t, p)?;
    if report.case != LmCase::III {
        return Err(Error::Unsupported(format!(
            "large-maturity expansion covers case III only; rho = {} at t = {t} falls in case {} \
             (case III needs rho in [{}, {}])",
            p.rho,
            report.case,
            report.rho_minus,
            report.rho_plus.min(p.kappa / p.xi)
        )));
    }
    let kappa_eff = match measure {
        Measure::TypeI => p.kappa,
        Measure::TypeII => p.kappa_tilde(),
    };
    let c = HestonLmCoeffs { p: *p, t, kappa_eff, beta: beta_t(t, kappa_eff, p.xi) };
    if measure == Measure::TypeII && t > 0.0 {
        // β̃_t > β_t when ρ > 0, so the Type-II capacity can bind inside a
        // Type-I case-III window; V peaks at the interval ends.
        let cap = p.kappa * p.theta / (2.0 * c.beta);
        let vmax = c.lambda0(report.u_minus).max(c.lambda0(report.u_plus));
        if vmax >= cap {
            return Err(Error::Unsupported(format!(
                "Type-II clock capacity saturates on [{}, {}]: max V = {vmax} >= {cap}",
                report.u_minus, report.u_plus
            )));
        }
    }
    Ok(RegimeCoefficients {
        regime: Regime::LargeMaturity { t },
        measure,
        domain: report.interval,
        kind: CoeffKind::HestonLm(c),
        lambda2_cache: Mutex::new(HashMap::new()),
    })
}

impl HestonLmCoeffs {
    fn q(&self, u: f64) -> f64 {
        let m = self.p.kappa - self.p.rho * self.p.xi * u;
        m * m + self.p.xi * self.p.xi * u * (1.0 - u)
    }

    pub(crate) fn lambda0(&self, u: f64) -> f64 {
        let m = self.p.kappa - self.p.rho * self.p.xi * u;
        // q can round to a tiny negative at the closed endpoints.
        let d = self.q(u).max(0.0).sqrt();
        self.p.kappa * self.p.theta / (self.p.xi * self.p.xi) * (m - d)
    }

    pub(crate) fn lambda0_complex(&self, z: Complex64) -> Complex64 {
        let m = self.p.kappa - self.p.rho * self.p.xi * z;
        let d = (m * m + self.p.xi * self.p.xi * z * (1.0 - z)).sqrt();
        self.p.kappa * self.p.theta / (self.p.xi * self.p.xi) * (m - d)
    }

    pub(crate) fn lambda1(&self, u: f64) -> Result<f64> {
        let p = &self.p;
        let q = self.q(u);
        if q <= 0.0 {
            return Err(Error::Domain(format!(
                "lambda1 diverges at the moment-explosion boundary (u = {u})"
            )));
        }
        let d = q.sqrt();
        let m = p.kappa - p.rho * p.xi * u;
        let ktheta = p.kappa * p.theta;
        let v0 = ktheta / (p.xi * p.xi) * (m - d);
        let gamma = (m - d) / (m + d);
        let den = ktheta - 2.0 * self.beta * v0;
        if den <= 0.0 {
            return Err(Error::Domain(format!(
                "clock capacity saturated at u = {u}: kappa*theta - 2*beta_t*V = {den}"
            )));
        }
        Ok(v0 * p.v * (-self.kappa_eff * self.t).exp() / den
            - 2.0 * ktheta / (p.xi * p.xi) * (den / (ktheta * (1.0 - gamma))).ln())
    }

    /// Closed [V', V'', V''', V''''] via d' = q'/(2d) and the downward chain
    /// that repeated differentiation of d² = q yields.
    pub(crate) fn v_derivs(&self, u: f64) -> Result<[f64; 4]> {
        let p = &self.p;
        let q = self.q(u);
        if q <= 0.0 {
            return Err(Error::Domain(format!(
                "V derivatives are singular at the moment-explosion boundary (u = {u})"
            )));
        }
        let d = q.sqrt();
        let a = p.xi * p.xi * (p.rho * p.rho - 1.0);
        let b = p.xi * p.xi - 2.0 * p.kappa * p.rho * p.xi;
        let q1 = 2.0 * a * u + b;
        let d1 = q1 / (2.0 * d);
        let d2 = (2.0 * a - 2.0 * d1 * d1) / (2.0 * d);
        let d3 = -3.0 * d1 * d2 / d;
        let d4 = -(3.0 * d2 * d2 + 4.0 * d1 * d3) / d;
        let c = p.kappa * p.theta / (p.xi * p.xi);
        Ok([c * (-p.rho * p.xi - d1), -c * d2, -c * d3, -c * d4])
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use crate::models::heston_forward_lmgf;
    use crate::models::ForwardHorizon;

    use super::*;

    fn hest_lm() -> HestonParams {
        HestonParams { v: 0.07, theta: 0.07, kappa: 1.5, xi: 0.34, rho: -0.25 }
    }

    #[test]
    fn spot_start_is_always_case_iii_with_unit_thresholds() {
        let rep = heston_lm_domain(0.0, &hest_lm()).unwrap();
        assert_eq!(rep.rho_minus, -1.0);
        assert_eq!(rep.rho_plus, 1.0);
        assert_eq!(rep.case, LmCase::III);
        assert!(rep.u_minus < 0.0 && rep.u_plus > 1.0);
        assert_eq!(rep.interval.lo, Boundary::Closed(rep.u_minus));
        assert_eq!(rep.interval.hi, Boundary::Closed(rep.u_plus));
    }

    #[test]
    fn lm_correlation_thresholds() {
        let rep = heston_lm_domain(1.0, &hest_lm()).unwrap();
        // Quadratic identity satisfied by both thresholds.
        let p = hest_lm();
        let e = (p.kappa * 1.0f64).exp();
        for r in [rep.rho_minus, rep.rho_plus] {
            let q = 4.0 * p.kappa * e * e * r * r + p.xi * (1.0 - e * e) * r
                - p.kappa * (1.0 + e) * (1.0 + e);
            assert!(q.abs() < 1e-9, "threshold {r} violates its quadratic by {q}");
        }
        assert_abs_diff_eq!(rep.rho_minus, -0.585_234_697_454_276, epsilon = 1e-10);
        assert!(rep.rho_minus > -1.0 && rep.rho_minus < 0.0);
        assert!(rep.rho_plus > 0.5);
        assert_eq!(rep.case, LmCase::III);
        assert!(rep.u_minus < 0.0 && rep.u_plus > 1.0);
    }

    #[test]
    fn zero_correlation_is_case_iii_at_any_start_date() {
        let p = HestonParams { rho: 0.0, ..hest_lm() };
        for t in [0.0, 0.3, 1.0, 5.0] {
            let rep = heston_lm_domain(t, &p).unwrap();
            assert_eq!(rep.case, LmCase::III, "t = {t}");
        }
    }

    #[test]
    fn strong_negative_correlation_falls_in_case_i() {
        let p = HestonParams { rho: -0.8, ..hest_lm() };
        let rep = heston_lm_domain(1.0, &p).unwrap();
        assert_eq!(rep.case, LmCase::I);
        let usp = rep.u_star_plus.unwrap();
        assert!(usp > 1.0 && usp < rep.u_plus, "u*+ = {usp} vs u+ = {}", rep.u_plus);
        assert_eq!(rep.interval.lo, Boundary::Closed(rep.u_minus));
        assert_eq!(rep.interval.hi, Boundary::Open(usp));
        let err = heston_lm_coeffs(1.0, &p, Measure::TypeI).unwrap_err();
        assert!(matches!(&err, Error::Unsupported(msg) if msg.contains("case I")), "{err}");
    }

    #[test]
    fn strong_positive_correlation_falls_in_case_ii() {
        let p = HestonParams { rho: 0.7, ..hest_lm() };
        let rep = heston_lm_domain(1.0, &p).unwrap();
        assert_eq!(rep.case, LmCase::II);
        let usm = rep.u_star_minus.unwrap();
        assert!(usm < 0.0 && usm > rep.u_minus, "u*- = {usm} vs u- = {}", rep.u_minus);
        assert_eq!(rep.interval.lo, Boundary::Open(usm));
        assert_eq!(rep.interval.hi, Boundary::Closed(rep.u_plus));
        let err = heston_lm_coeffs(1.0, &p, Measure::TypeI).unwrap_err();
        assert!(matches!(&err, Error::Unsupported(msg) if msg.contains("case II")), "{err}");
    }

    #[test]
    fn mean_reversion_must_dominate_correlation() {
        let p = HestonParams { v: 0.07, theta: 0.07, kappa: 0.1, xi: 0.5, rho: 0.9 };
        assert!(matches!(heston_lm_domain(1.0, &p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rate_function_vanishes_at_zero_and_one() {
        let c = heston_lm_coeffs(1.0, &hest_lm(), Measure::TypeI).unwrap();
        assert!(c.lambda0(0.0).unwrap().abs() < 1e-15);
        assert!(c.lambda0(1.0).unwrap().abs() < 1e-15);
        // H(1) = 0 as well: Λτ(1) = 0 for every τ (share price is a martingale).
        assert!(c.lambda1(1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn spot_start_first_order_block_reduces() {
        let p = hest_lm();
        let c = heston_lm_coeffs(0.0, &p, Measure::TypeI).unwrap();
        let kind = match &c.kind {
            CoeffKind::HestonLm(h) => h,
            _ => unreachable!(),
        };
        for u in [-1.0, 0.5, 2.0] {
            let v0 = kind.lambda0(u);
            let d = kind.q(u).sqrt();
            let m = p.kappa - p.rho * p.xi * u;
            let gamma = (m - d) / (m + d);
            let expected = v0 * p.v / (p.kappa * p.theta)
                - 2.0 * p.kappa * p.theta / (p.xi * p.xi) * (1.0 / (1.0 - gamma)).ln();
            assert_abs_diff_eq!(kind.lambda1(u).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn first_order_block_matches_the_lmgf_at_large_maturity() {
        let p = hest_lm();
        for measure in [Measure::TypeI, Measure::TypeII] {
            let c = heston_lm_coeffs(1.0, &p, measure).unwrap();
            let tau = 40.0;
            let h = ForwardHorizon::new(1.0, tau).unwrap();
            for u in [-0.5, 0.5, 2.0] {
                let lmgf =
                    heston_forward_lmgf(Complex64::new(u, 0.0), &h, &p, measure).unwrap().re;
                let gap = lmgf - tau * c.lambda0(u).unwrap() - c.lambda1(u).unwrap();
                assert!(gap.abs() < 1e-6, "{measure:?} gap {gap} at u = {u}");
            }
        }
    }

    #[test]
    fn lmgf_consistency_tightens_with_maturity() {
        let p = hest_lm();
        let c = heston_lm_coeffs(1.0, &p, Measure::TypeI).unwrap();
        for u in [-0.5, 0.5, 2.0] {
            let mut prev = f64::INFINITY;
            for tau in [10.0, 15.0, 20.0] {
                let h = ForwardHorizon::new(1.0, tau).unwrap();
                let lmgf = heston_forward_lmgf(Complex64::new(u, 0.0), &h, &p, Measure::TypeI)
                    .unwrap()
                    .re;
                let gap = (lmgf - tau * c.lambda0(u).unwrap() - c.lambda1(u).unwrap()).abs();
                assert!(gap < prev, "gap {gap} did not shrink at tau = {tau}, u = {u}");
                prev = gap;
            }
        }
    }

    #[test]
    fn type_ii_equals_type_i_without_correlation_or_forward_start() {
        let zero_rho = HestonParams { rho: 0.0, ..hest_lm() };
        let a = heston_lm_coeffs(1.0, &zero_rho, Measure::TypeI).unwrap();
        let b = heston_lm_coeffs(1.0, &zero_rho, Measure::TypeII).unwrap();
        assert_eq!(a.lambda1(2.0).unwrap(), b.lambda1(2.0).unwrap());

        let a = heston_lm_coeffs(0.0, &hest_lm(), Measure::TypeI).unwrap();
        let b = heston_lm_coeffs(0.0, &hest_lm(), Measure::TypeII).unwrap();
        assert_eq!(a.lambda1(2.0).unwrap(), b.lambda1(2.0).unwrap());

        let a = heston_lm_coeffs(1.0, &hest_lm(), Measure::TypeI).unwrap();
        let b = heston_lm_coeffs(1.0, &hest_lm(), Measure::TypeII).unwrap();
        assert_eq!(a.lambda0(2.0).unwrap(), b.lambda0(2.0).unwrap());
        assert!((a.lambda1(2.0).unwrap() - b.lambda1(2.0).unwrap()).abs() > 1e-8);
    }

    #[test]
    fn closed_derivatives_match_finite_differences() {
        let c = heston_lm_coeffs(1.0, &hest_lm(), Measure::TypeI).unwrap();
        let kind = match &c.kind {
            CoeffKind::HestonLm(h) => h,
            _ => unreachable!(),
        };
        let h = 1e-4;
        for u in [-1.0, 0.5, 2.0] {
            let d = kind.v_derivs(u).unwrap();
            let fd1 = (kind.lambda0(u + h) - kind.lambda0(u - h)) / (2.0 * h);
            let fd2 =
                (kind.lambda0(u + h) - 2.0 * kind.lambda0(u) + kind.lambda0(u - h)) / (h * h);
            assert_abs_diff_eq!(d[0], fd1, epsilon = 1e-7 * d[0].abs().max(1.0));
            assert_abs_diff_eq!(d[1], fd2, epsilon = 1e-5 * d[1].abs().max(1.0));
        }
    }
}
