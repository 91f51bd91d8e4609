//! Lévy exponents of the jump bases available for time-changing.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Variance-Gamma parameters. The drift `mu` is derived from (C, G, M) so that
/// the exponent satisfies φ(1) = 0 (unit-forward martingale normalization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceGammaParams {
    pub c: f64,
    pub g: f64,
    pub m: f64,
    mu: f64,
}

impl VarianceGammaParams {
    pub fn new(c: f64, g: f64, m: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParameter(format!("VG C = {c} must be > 0")));
        }
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::InvalidParameter(format!("VG G = {g} must be > 0")));
        }
        if !m.is_finite() || m <= 1.0 {
            return Err(Error::InvalidParameter(format!("VG M = {m} must be > 1")));
        }
        let mu = -c * ((g * m) / ((m - 1.0) * (g + 1.0))).ln();
        Ok(Self { c, g, m, mu })
    }

    /// Martingale drift μ = −C·log(GM/((M−1)(G+1))).
    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Lévy base of the time change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevySpec {
    VarianceGamma(VarianceGammaParams),
    /// Arithmetic Brownian motion with the martingale drift: φ(z) = Σ²z(z−1)/2.
    BrownianDrift { sigma: f64 },
}

impl LevySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevySpec::VarianceGamma(p) => {
                // Construction via `new` already validated; re-check for safety.
                VarianceGammaParams::new(p.c, p.g, p.m).map(|_| ())
            }
            LevySpec::BrownianDrift { sigma } => {
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(Error::InvalidParameter(format!("BrownianDrift sigma = {sigma} must be > 0")));
                }
                Ok(())
            }
        }
    }

    /// Strip of regularity of φ on the real axis.
    pub fn real_domain(&self) -> (f64, f64) {
        match self {
            LevySpec::VarianceGamma(p) => (-p.g, p.m),
            LevySpec::BrownianDrift { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Lévy exponent φ(z) = log E[e^{z·N_1}] per unit time.
    pub fn exponent(&self, z: Complex64) -> Result<Complex64> {
        match self {
            LevySpec::VarianceGamma(p) => {
                if z.re.is_nan() || z.re <= -p.g || z.re >= p.m {
                    return Err(Error::Explosion { context: "VG exponent".into(), arg: z.re });
                }
                // log(GM/((M−z)(G+z))) split into logs of right-half-plane
                // arguments, so the principal branch is continuous on the strip.
                let log_term = (p.g * p.m).ln() - (p.m - z).ln() - (p.g + z).ln();
                Ok(p.mu * z + p.c * log_term)
            }
            LevySpec::BrownianDrift { sigma } => Ok(0.5 * sigma * sigma * z * (z - 1.0)),
        }
    }
}

/// Free-function form of the exponent evaluation.
pub fn levy_exponent(z: Complex64, spec: &LevySpec) -> Result<Complex64> {
    spec.exponent(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample_vg() -> VarianceGammaParams {
        VarianceGammaParams::new(6.5, 11.1, 33.4).unwrap()
    }

    #[test]
    fn martingale_normalization() {
        let spec = LevySpec::VarianceGamma(sample_vg());
        assert!(spec.exponent(Complex64::from(0.0)).unwrap().norm() < 1e-15);
        assert!(spec.exponent(Complex64::from(1.0)).unwrap().norm() < 1e-14);
        let bd = LevySpec::BrownianDrift { sigma: 1.3 };
        assert!(bd.exponent(Complex64::from(1.0)).unwrap().norm() < 1e-15);
    }

    #[test]
    fn domain_is_enforced() {
        let spec = LevySpec::VarianceGamma(sample_vg());
        assert!(spec.exponent(Complex64::from(33.4)).is_err());
        assert!(spec.exponent(Complex64::from(-11.2)).is_err());
        assert!(spec.exponent(Complex64::new(40.0, 3.0)).is_err());
        assert!(spec.exponent(Complex64::new(33.3, 100.0)).is_ok());
    }

    #[test]
    fn conjugation_and_branch_continuity() {
        let spec = LevySpec::VarianceGamma(sample_vg());
        let z = Complex64::new(2.0, 37.0);
        let a = spec.exponent(z).unwrap();
        let b = spec.exponent(z.conj()).unwrap();
        assert!((a.conj() - b).norm() < 1e-12 * (1.0 + a.norm()));
        let mut prev: Option<Complex64> = None;
        let mut y = -50.0;
        while y <= 50.0 {
            let v = spec.exponent(Complex64::new(2.0, y)).unwrap();
            if let Some(pv) = prev {
                assert!((v - pv).norm() < 0.5, "jump at y = {y}");
            }
            prev = Some(v);
            y += 0.01;
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(VarianceGammaParams::new(0.0, 11.1, 33.4).is_err());
        assert!(VarianceGammaParams::new(6.5, -1.0, 33.4).is_err());
        assert!(VarianceGammaParams::new(6.5, 11.1, 1.0).is_err());
    }

    #[test]
    fn vg_drift_value() {
        // μ = −C·log(GM/((M−1)(G+1))) for (6.5, 11.1, 33.4).
        let p = sample_vg();
        let direct = -6.5 * ((11.1_f64 * 33.4) / (32.4 * 12.1)).ln();
        assert_abs_diff_eq!(p.mu(), direct, epsilon = 1e-15);
    }
}
