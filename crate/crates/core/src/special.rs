//! Special functions: log-gamma, digamma, trigamma and the regularized
//! incomplete beta function.
//!
//! Digamma and trigamma shift the argument upward with the recurrences
//! `ψ(x) = ψ(x+1) − 1/x` and `ψ'(x) = ψ'(x+1) + 1/x²` until `x ≥ 8`, then
//! apply the Bernoulli asymptotic series, which is accurate to well below
//! `1e-14` in that range.

use crate::error::{Error, Result};

const ASYMPTOTIC_FROM: f64 = 8.0;

/// Natural log of the gamma function for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// `ln B(a, b)`.
#[inline]
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Digamma function ψ(x) = d/dx ln Γ(x), defined for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "digamma",
            value: x,
        });
    }
    Ok(psi(x))
}

/// Trigamma function ψ'(x), defined for `x > 0`.
pub fn trigamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            function: "trigamma",
            value: x,
        });
    }
    Ok(psi1(x))
}

/// Unchecked digamma; callers guarantee `x > 0`.
pub(crate) fn psi(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_FROM {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // B_2k / (2k x^2k), k = 1..7
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2
                                        * (1.0 / 132.0
                                            - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    shift + x.ln() - 0.5 * inv - series
}

/// Unchecked trigamma; callers guarantee `x > 0`.
pub(crate) fn psi1(mut x: f64) -> f64 {
    let mut shift = 0.0;
    while x < ASYMPTOTIC_FROM {
        shift += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x²) + Σ B_2k / x^(2k+1)
    let series = inv
        * inv2
        * (1.0 / 6.0
            - inv2
                * (1.0 / 30.0
                    - inv2
                        * (1.0 / 42.0
                            - inv2
                                * (1.0 / 30.0
                                    - inv2 * (5.0 / 66.0 - inv2 * (691.0 / 2730.0 - inv2 * 7.0 / 6.0))))));
    shift + inv + 0.5 * inv2 + series
}

const CF_MAX_ITER: usize = 10_000;
const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction (modified Lentz), evaluated on whichever side of the
/// mode converges faster.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Domain {
            function: "reg_inc_beta",
            value: a.min(b),
        });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            function: "reg_inc_beta",
            value: x,
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a)? / b)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!(
        "incomplete beta continued fraction did not converge (x={x}, a={a}, b={b})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    /// Independent oracle: ψ(x) = −γ + Σ_{k≥0} [1/(k+1) − 1/(k+x)], summed with
    /// a large cutoff plus the Euler–Maclaurin tail.
    fn digamma_series(x: f64) -> f64 {
        let n = 200_000usize;
        let mut s = 0.0;
        for k in (0..n).rev() {
            let k = k as f64;
            s += 1.0 / (k + 1.0) - 1.0 / (k + x);
        }
        // integral tail plus the half-term correction
        let nf = n as f64;
        let tail = ((x - 1.0) / (nf + 1.0)).ln_1p() + 0.5 * (x - 1.0) / ((nf + 1.0) * (nf + x));
        -EULER_GAMMA + s + tail
    }

    #[test]
    fn digamma_recurrence() {
        for &x in &[0.3, 1.0, 7.0] {
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert_relative_eq!(lhs, 1.0 / x, max_relative = 1e-12);
        }
    }

    #[test]
    fn digamma_known_values() {
        assert_relative_eq!(digamma(1.0).unwrap(), -EULER_GAMMA, max_relative = 1e-13);
        let half = -EULER_GAMMA - 2.0 * 2f64.ln();
        assert_relative_eq!(digamma(0.5).unwrap(), half, max_relative = 1e-13);
        assert_relative_eq!(digamma(0.5).unwrap(), -1.963_510_026_021_423_5, max_relative = 1e-13);
    }

    #[test]
    fn digamma_matches_series_oracle() {
        for &x in &[0.05, 0.5, 1.0, 2.5, 7.9, 8.1, 30.0] {
            let oracle = digamma_series(x);
            assert_relative_eq!(psi(x), oracle, max_relative = 1e-10, epsilon = 1e-11);
        }
    }

    #[test]
    fn trigamma_known_values() {
        let z2 = PI * PI / 6.0;
        assert_relative_eq!(trigamma(1.0).unwrap(), z2, max_relative = 1e-13);
        assert_relative_eq!(trigamma(2.0).unwrap(), z2 - 1.0, max_relative = 1e-13);
        // ψ'(x) = Σ_{k≥0} 1/(k+x)²
        let oracle: f64 = (0..2_000_000).rev().map(|k| 1.0 / (k as f64 + 0.3).powi(2)).sum::<f64>()
            + 1.0 / (2_000_000.0 + 0.3 - 0.5);
        assert_relative_eq!(trigamma(0.3).unwrap(), oracle, max_relative = 1e-10);
        assert_relative_eq!(trigamma(0.3).unwrap(), 12.245365, max_relative = 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(trigamma(0.0).is_err());
        assert!(trigamma(f64::NAN).is_err());
    }

    #[test]
    fn recurrence_on_grid() {
        let mut x = 0.05;
        while x <= 50.0 {
            let lhs = psi(x + 1.0);
            let rhs = psi(x) + 1.0 / x;
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "x = {x}");
            x += 0.05;
        }
    }

    #[test]
    fn trigamma_is_derivative_of_digamma() {
        let h = 1e-5;
        let mut x: f64 = 0.1;
        while x <= 50.0 {
            let fd = (psi(x + h) - psi(x - h)) / (2.0 * h);
            assert_relative_eq!(psi1(x), fd, max_relative = 1e-5);
            x *= 1.1;
        }
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // Beta(1,1) is uniform; Beta(2,2) has CDF 3x² − 2x³.
        for &x in &[0.01, 0.25, 0.5, 0.9] {
            assert_relative_eq!(reg_inc_beta(x, 1.0, 1.0).unwrap(), x, max_relative = 1e-14);
            let cdf = 3.0 * x * x - 2.0 * x * x * x;
            assert_relative_eq!(reg_inc_beta(x, 2.0, 2.0).unwrap(), cdf, max_relative = 1e-13);
        }
        // Beta(a,1): x^a
        assert_relative_eq!(reg_inc_beta(0.3, 2.5, 1.0).unwrap(), 0.3f64.powf(2.5), max_relative = 1e-13);
    }

    #[test]
    fn incomplete_beta_against_statrs() {
        use statrs::distribution::{Beta, ContinuousCDF};
        for &(a, b) in &[(20.0, 20.0), (2.0, 38.0), (100.0, 20.0), (0.5, 0.7)] {
            let dist = Beta::new(a, b).unwrap();
            for &x in &[0.05, 0.3, 0.5, 0.7, 0.95] {
                let ours = reg_inc_beta(x, a, b).unwrap();
                assert!((ours - dist.cdf(x)).abs() < 1e-12, "a={a} b={b} x={x}");
            }
        }
    }
}
