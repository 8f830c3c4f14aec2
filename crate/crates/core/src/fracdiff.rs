//! Fractional-differencing weights and the MA(∞) coefficients of
//! `(1−z)^{−d} θ(z)`, with their derivatives in `d` and `θ`.

/// Truncated coefficient sets for a given `d`, `θ` and truncation `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct FracCoeffs {
    pub d: f64,
    pub theta: Vec<f64>,
    pub m: usize,
    /// π_0..π_m
    pub pi: Vec<f64>,
    /// ∂π_k/∂d
    pub dpi: Vec<f64>,
    /// c_0..c_m
    pub c: Vec<f64>,
    /// ∂c_k/∂d
    pub dc: Vec<f64>,
}

impl FracCoeffs {
    pub fn new(d: f64, theta: &[f64], m: usize) -> Self {
        let pi = pi_coeffs(d, m);
        let dpi = dpi_dd(d, m);
        let c = convolve_theta(theta, &pi);
        let dc = convolve_theta(theta, &dpi);
        Self {
            d,
            theta: theta.to_vec(),
            m,
            pi,
            dpi,
            c,
            dc,
        }
    }
}

/// π_k of `(1−L)^{−d} = Σ π_k L^k` for k = 0..m, by the running product
/// `π_k = π_{k−1}(k−1+d)/k`.
pub fn pi_coeffs(d: f64, m: usize) -> Vec<f64> {
    let mut pi = Vec::with_capacity(m + 1);
    pi.push(1.0);
    for k in 1..=m {
        let kf = k as f64;
        pi.push(pi[k - 1] * (kf - 1.0 + d) / kf);
    }
    pi
}

/// ∂π_k/∂d for k = 0..m.
///
/// Differentiates the product recursion directly,
/// `π'_k = [π'_{k−1}(k−1+d) + π_{k−1}] / k`, which equals
/// `π_k[ψ(d+k) − ψ(d)]` for `d ≠ 0` and gives the limit `1/k` at `d = 0`.
pub fn dpi_dd(d: f64, m: usize) -> Vec<f64> {
    let mut pi = 1.0;
    let mut dpi = Vec::with_capacity(m + 1);
    dpi.push(0.0);
    for k in 1..=m {
        let kf = k as f64;
        let next = (dpi[k - 1] * (kf - 1.0 + d) + pi) / kf;
        dpi.push(next);
        pi *= (kf - 1.0 + d) / kf;
    }
    dpi
}

/// c_k = Σ_{i=0}^{min(k,q)} θ_i π_{k−i}, θ_0 = 1.
pub fn c_coeffs(theta: &[f64], d: f64, m: usize) -> Vec<f64> {
    convolve_theta(theta, &pi_coeffs(d, m))
}

/// ∂c_k/∂d.
pub fn dc_dd(theta: &[f64], d: f64, m: usize) -> Vec<f64> {
    convolve_theta(theta, &dpi_dd(d, m))
}

/// ∂c_k/∂θ_s = π_{k−s}·1{k ≥ s}, for s in 1..=q.
pub fn dc_dtheta(d: f64, m: usize, s: usize) -> Vec<f64> {
    let pi = pi_coeffs(d, m);
    (0..=m).map(|k| if k >= s { pi[k - s] } else { 0.0 }).collect()
}

fn convolve_theta(theta: &[f64], seq: &[f64]) -> Vec<f64> {
    let q = theta.len();
    (0..seq.len())
        .map(|k| {
            let mut acc = seq[k];
            for i in 1..=q.min(k) {
                acc += theta[i - 1] * seq[k - i];
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{ln_gamma, psi};
    use approx::assert_relative_eq;

    /// Γ(k+d)/(Γ(k+1)Γ(d)) evaluated in log space with the sign of Γ(d).
    fn pi_gamma_ratio(d: f64, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        let kf = k as f64;
        let sign = if d < 0.0 { -1.0 } else { 1.0 };
        let ln_abs_gamma_d = if d < 0.0 {
            // Γ(d) = Γ(d+1)/d
            ln_gamma(d + 1.0) - (-d).ln()
        } else {
            ln_gamma(d)
        };
        sign * (ln_gamma(kf + d) - ln_gamma(kf + 1.0) - ln_abs_gamma_d).exp()
    }

    #[test]
    fn pi_small_cases() {
        assert_eq!(pi_coeffs(0.0, 3), vec![1.0, 0.0, 0.0, 0.0]);
        let pi = pi_coeffs(0.3, 2);
        assert_relative_eq!(pi[1], 0.3);
        assert_relative_eq!(pi[2], 0.195, max_relative = 1e-15);
    }

    #[test]
    fn pi_matches_gamma_ratio() {
        let pi = pi_coeffs(0.45, 5);
        for (k, v) in pi.iter().enumerate() {
            assert!((v - pi_gamma_ratio(0.45, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn pi_positive_for_positive_d() {
        for &d in &[0.01, 0.2, 0.49] {
            assert!(pi_coeffs(d, 500).iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn dpi_small_cases() {
        let dpi = dpi_dd(0.3, 2);
        assert_eq!(dpi[0], 0.0);
        assert_relative_eq!(dpi[1], 1.0, max_relative = 1e-15);
        assert_relative_eq!(dpi[2], 0.8, max_relative = 1e-15);
        for &d in &[-0.3, 0.0, 0.45] {
            assert_relative_eq!(dpi_dd(d, 4)[1], 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn dpi_limit_at_zero() {
        let dpi = dpi_dd(0.0, 10);
        for k in 1..=10 {
            assert_relative_eq!(dpi[k], 1.0 / k as f64, max_relative = 1e-14);
        }
    }

    #[test]
    fn dpi_matches_digamma_form() {
        for &d in &[-0.4, -0.1, 0.1, 0.25, 0.45] {
            let pi = pi_coeffs(d, 200);
            let dpi = dpi_dd(d, 200);
            for k in 1..=200 {
                let expected = pi[k] * (psi(d + k as f64) - psi_signed(d));
                assert_relative_eq!(dpi[k], expected, max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }

    // ψ on (−1, 0) through the reflection-free shift ψ(d) = ψ(d+1) − 1/d.
    fn psi_signed(d: f64) -> f64 {
        if d > 0.0 {
            psi(d)
        } else {
            psi(d + 1.0) - 1.0 / d
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-6;
        let theta = [-0.3];
        for &d in &[-0.4, -0.1, 0.1, 0.25, 0.45] {
            let dpi = dpi_dd(d, 200);
            let up = pi_coeffs(d + h, 200);
            let dn = pi_coeffs(d - h, 200);
            let dc = dc_dd(&theta, d, 200);
            let cup = c_coeffs(&theta, d + h, 200);
            let cdn = c_coeffs(&theta, d - h, 200);
            for k in 1..=200 {
                let fd = (up[k] - dn[k]) / (2.0 * h);
                assert_relative_eq!(dpi[k], fd, max_relative = 1e-5, epsilon = 1e-9);
                let fdc = (cup[k] - cdn[k]) / (2.0 * h);
                assert_relative_eq!(dc[k], fdc, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn c_degenerate_cases() {
        let c = c_coeffs(&[], 0.0, 4);
        assert_eq!(c, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        let c = c_coeffs(&[0.7, -0.2], 0.0, 5);
        assert_eq!(c, vec![1.0, 0.7, -0.2, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn c_power_series_product() {
        // (1−z)^{−0.15} = 1 + 0.15 z + 0.08625 z² + …, times (1 − 0.3 z)
        let c = c_coeffs(&[-0.3], 0.15, 2);
        let pi2 = 0.15 * 1.15 / 2.0;
        assert_relative_eq!(c[1], -0.15, max_relative = 1e-14);
        assert_relative_eq!(c[2], pi2 - 0.3 * 0.15, max_relative = 1e-14);
        assert_relative_eq!(c[2], 0.04125, max_relative = 1e-12);
    }

    #[test]
    fn dc_dtheta_is_shifted_pi() {
        assert_eq!(dc_dtheta(0.3, 2, 1), vec![0.0, 1.0, 0.3]);
        assert_eq!(dc_dd(&[], 0.2, 20), dpi_dd(0.2, 20));
    }

    #[test]
    fn coeffs_bundle_is_consistent() {
        let fc = FracCoeffs::new(0.2, &[0.4, -0.1], 30);
        assert_eq!(fc.pi[0], 1.0);
        assert_eq!(fc.c[0], 1.0);
        for k in 0..=30 {
            let mut expect = fc.pi[k];
            if k >= 1 {
                expect += 0.4 * fc.pi[k - 1];
            }
            if k >= 2 {
                expect += -0.1 * fc.pi[k - 2];
            }
            assert_relative_eq!(fc.c[k], expect, max_relative = 1e-15, epsilon = 1e-18);
        }
    }
}
