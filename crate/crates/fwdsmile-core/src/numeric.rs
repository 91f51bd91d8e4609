//! Shared scalar and complex numerical utilities.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal CDF, evaluated through the complementary error function so
/// that the deep tails keep full relative accuracy.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// (1 − e^{−x})/x, extended continuously through x = 0.
pub fn h1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Complex (1 − e^{−z})/z; series near the origin where the difference cancels.
pub fn h1c(z: Complex64) -> Complex64 {
    if z.norm_sqr() < 1e-6 {
        // 1 − z/2 + z²/6 − z³/24 + z⁴/120; next term is below 1e-18 for |z| < 1e-3.
        let c = Complex64::new(1.0, 0.0);
        c + z * (-0.5 + z * (1.0 / 6.0 + z * (-1.0 / 24.0 + z * (1.0 / 120.0))))
    } else {
        (-(-z).exp() + 1.0) / z
    }
}

/// log(1+x)/x for real x > −1, extended continuously through x = 0.
pub fn l1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.ln_1p() / x
    }
}

/// Complex log(1+w)/w on the principal branch; series near the origin.
/// Callers must keep 1+w away from the negative real axis.
pub fn l1c(w: Complex64) -> Complex64 {
    if w.norm_sqr() < 1e-6 {
        // 1 − w/2 + w²/3 − w³/4 + w⁴/5; next term below 2e-16 for |w| < 1e-3.
        let c = Complex64::new(1.0, 0.0);
        c + w * (-0.5 + w * (1.0 / 3.0 + w * (-0.25 + w * 0.2)))
    } else {
        (w + 1.0).ln() / w
    }
}

/// Brent's method on a sign-changing bracket [a, b].
///
/// Converges to `xtol_abs + xtol_rel·|x|` in the abscissa; the inverse
/// quadratic / secant steps make the result exact (one step) for affine `f`.
pub fn brent_root(f: impl Fn(f64) -> f64, a: f64, b: f64, xtol_abs: f64, xtol_rel: f64) -> Result<f64> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Numerical(format!(
            "root bracket [{a}, {b}] has no sign change (f = {fa}, {fb})"
        )));
    }
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if fb.abs() > fc.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * (xtol_abs + xtol_rel * b.abs());
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() < tol || fa.abs() <= fb.abs() {
            d = m;
            e = m;
        } else {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)), (q - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol * m.signum() };
        fb = f(b);
        if fb.signum() * fc.signum() > 0.0 {
            c = a;
            fc = fa;
            e = b - a;
            d = e;
        }
    }
    Err(Error::Numerical("Brent iteration did not converge".into()))
}

/// Bisect for the boundary of a predicate that holds at `good` and fails at `bad`,
/// returning the last point where it still holds.
pub fn bisect_predicate(pred: impl Fn(f64) -> bool, good: f64, bad: f64, iters: usize) -> f64 {
    let (mut good, mut bad) = (good, bad);
    for _ in 0..iters {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Richardson extrapolation to the h → 0 limit of samples f(h₀/2ⁱ), assuming an
/// error expansion in integer powers of h. `depth` caps the table (noise guard).
pub fn richardson_halving(values: &[f64], depth: usize) -> f64 {
    let n = values.len();
    assert!(n >= 1);
    let depth = depth.min(n - 1);
    let mut row = values.to_vec();
    for j in 1..=depth {
        let w = (1u64 << j) as f64;
        for i in (j..n).rev() {
            row[i] = (w * row[i] - row[i - 1]) / (w - 1.0);
        }
    }
    row[n - 1]
}

/// Least-squares slope of log|y| against log x over pairs with |y| > floor.
/// Returns None when fewer than two pairs survive (signal at machine noise).
pub fn loglog_slope(xs: &[f64], ys: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| y.abs() > floor && **x > 0.0)
        .map(|(x, y)| (x.ln(), y.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
