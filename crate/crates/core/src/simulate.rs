//! Sample generation by the model recursion with a discarded burn-in.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fracdiff::c_coeffs;
use crate::model::{dot, guard_y, ModelSpec, ParamVector, Sample};
use crate::special::{ln_beta, reg_inc_beta};

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub spec: ModelSpec,
    pub params: ParamVector,
    pub n: usize,
    /// Discarded leading observations; must exceed the truncation `m`.
    pub burn_in: usize,
    pub seed: u64,
    /// Covariate rows for the whole path, `burn_in + n` of them, row `i`
    /// playing the role of `x_{t−1}` at `t = i + 1`. Required when `l > 0`.
    pub covariates: Option<Vec<Vec<f64>>>,
}

impl SimConfig {
    pub fn new(spec: ModelSpec, params: ParamVector, n: usize, seed: u64) -> Self {
        Self {
            spec,
            params,
            n,
            burn_in: DEFAULT_BURN_IN,
            seed,
            covariates: None,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_covariates(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.covariates = Some(rows);
        self
    }
}

/// Generates `n` observations.
///
/// For `t ≤ m` the error terms are zero and `μ_t = g⁻¹(α + x'_{t−1}β)`; from
/// `t = m+1` on, `η_t` follows the model recursion, `y_t` is drawn from the
/// beta law by inversion and `r_t = g(y_t) − η_t`. The last `n` values are
/// returned together with their covariate rows.
pub fn simulate(config: &SimConfig) -> Result<Sample> {
    let spec = &config.spec;
    let params = &config.params;
    spec.validate()?;
    params.validate(spec)?;
    if config.n == 0 {
        return Err(Error::InvalidSpec("sample size must be positive".into()));
    }
    if config.burn_in <= spec.m {
        return Err(Error::InvalidSpec(format!(
            "burn-in {} must exceed the truncation point {}",
            config.burn_in, spec.m
        )));
    }
    let total = config.burn_in + config.n;
    let rows: Vec<Vec<f64>> = match (&config.covariates, spec.l) {
        (_, 0) => vec![Vec::new(); total],
        (Some(rows), l) => {
            if rows.len() != total || rows.iter().any(|r| r.len() != l) {
                return Err(Error::InvalidSpec(format!(
                    "covariates must have {total} rows of {l} columns"
                )));
            }
            rows.clone()
        }
        (None, l) => return Err(Error::InvalidSpec(format!("model has {l} covariates but none were supplied"))),
    };

    let link = spec.link;
    let m = spec.m;
    let c = c_coeffs(&params.theta, params.d, m);
    let xb: Vec<f64> = rows.iter().map(|r| dot(r, &params.beta)).collect();
    let mut gy = vec![0.0; total];
    let mut r = vec![0.0; total];
    let mut y = vec![0.0; total];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for i in 0..total {
        let mut eta = params.alpha + xb[i];
        if i >= m {
            for (j, phi) in params.phi.iter().enumerate() {
                let lag = i - j - 1;
                eta += phi * (gy[lag] - xb[lag]);
            }
            for k in 1..=m {
                eta += c[k] * r[i - k];
            }
        }
        if !eta.is_finite() {
            return Err(Error::Recursion { t: i + 1 });
        }
        let mu = link.inverse(eta);
        let u = loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                break u;
            }
        };
        let draw = beta_inverse_cdf(u, mu * params.nu, (1.0 - mu) * params.nu)?;
        y[i] = draw;
        gy[i] = link.forward(guard_y(draw));
        if i >= m {
            r[i] = gy[i] - eta;
        }
    }

    let start = config.burn_in;
    let kept_rows = if spec.l == 0 { Vec::new() } else { rows[start..].to_vec() };
    Sample::new(y[start..].to_vec(), kept_rows)
}

/// Maps `y ∈ (0,1)` to `a + (b − a) y`.
pub fn rescale(y: &[f64], a: f64, b: f64) -> Vec<f64> {
    y.iter().map(|&v| a + (b - a) * v).collect()
}

const INV_TOL: f64 = 1e-13;
const INV_MAX_ITER: usize = 400;

/// Quantile of Beta(a, b): the `x` with `I_x(a, b) = u`.
///
/// Newton steps on the regularized incomplete beta, safeguarded by a
/// shrinking bracket; upper-half probabilities are solved on the reflected
/// problem `1 − x ~ Beta(b, a)` for accuracy near 1. The result lies strictly
/// inside (0, 1).
pub fn beta_inverse_cdf(u: f64, a: f64, b: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain {
            function: "beta_inverse_cdf",
            value: u,
        });
    }
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(Error::Domain {
            function: "beta_inverse_cdf",
            value: a.min(b),
        });
    }
    let x = if u > 0.5 {
        1.0 - lower_quantile(1.0 - u, b, a)?
    } else {
        lower_quantile(u, a, b)?
    };
    Ok(x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

fn lower_quantile(u: f64, a: f64, b: f64) -> Result<f64> {
    let lnb = ln_beta(a, b);
    // Lower tail: I_x(a, b) = x^a / (a B(a, b)) (1 + O(b x)).
    let tail = ((u.ln() + a.ln() + lnb) / a).exp();
    if tail * (b + 1.0) < 1e-12 {
        return Ok(tail);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mean = a / (a + b);
    let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
    // Normal-approximation start, pulled inside the bracket.
    let z = Normal::standard().inverse_cdf(u);
    let mut x = (mean + z * sd).clamp(1e-6 * mean, 1.0 - 1e-6 * (1.0 - mean));
    for _ in 0..INV_MAX_ITER {
        let f = reg_inc_beta(x, a, b)? - u;
        if f.abs() <= INV_TOL * u.max(1e-300).min(1.0) || f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let ln_density = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - lnb;
        let density = ln_density.exp();
        let mut next = x - f / density;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::Numeric(format!("beta quantile did not converge (u = {u}, a = {a}, b = {b})")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::Link;

    #[test]
    fn quantile_closed_forms() {
        assert!((beta_inverse_cdf(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((beta_inverse_cdf(0.3, 1.0, 1.0).unwrap() - 0.3).abs() < 1e-12);
        for &a in &[0.3, 2.0, 20.0, 300.0] {
            assert!((beta_inverse_cdf(0.5, a, a).unwrap() - 0.5).abs() < 1e-10);
        }
        // Beta(a,1): F(x) = x^a
        let x = beta_inverse_cdf(0.2, 3.0, 1.0).unwrap();
        assert!((x - 0.2_f64.powf(1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn quantile_with_vanishing_shape() {
        // Beta(a,1): x = u^(1/a), which underflows for tiny a
        let x = beta_inverse_cdf(0.25, 0.02, 1.0).unwrap();
        assert!((x / 0.25_f64.powf(50.0) - 1.0).abs() < 1e-8);
        let x = beta_inverse_cdf(0.25, 1.5e-12, 100.0).unwrap();
        assert!(x > 0.0 && x < 1e-300);
        let x = beta_inverse_cdf(0.75, 100.0, 1.5e-12).unwrap();
        assert!(x < 1.0 && x > 0.5);
    }

    #[test]
    fn quantile_beta22_by_bisection_on_cubic() {
        // F(x) = 3x² − 2x³
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 3.0 * mid * mid - 2.0 * mid.powi(3) < 0.25 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = beta_inverse_cdf(0.25, 2.0, 2.0).unwrap();
        assert!((x - lo).abs() < 1e-10);
        assert!((x - 0.326351).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf_over_grid() {
        for &(a, b) in &[(0.5, 0.5), (2.0, 38.0), (30.0, 10.0), (0.05, 3.0), (400.0, 500.0)] {
            for k in 1..40 {
                let u = k as f64 / 40.0;
                let x = beta_inverse_cdf(u, a, b).unwrap();
                assert!(x > 0.0 && x < 1.0);
                let back = reg_inc_beta(x, a, b).unwrap();
                assert!((back - u).abs() < 1e-10, "a={a} b={b} u={u} x={x} back={back}");
            }
        }
    }

    #[test]
    fn quantile_rejects_bad_input() {
        assert!(beta_inverse_cdf(0.0, 1.0, 1.0).is_err());
        assert!(beta_inverse_cdf(1.0, 1.0, 1.0).is_err());
        assert!(beta_inverse_cdf(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn symmetric_iid_moments() {
        let spec = ModelSpec::new(0, 0, 0).with_truncation(1);
        let params = ParamVector::new(40.0, 0.0, 0.0, vec![], vec![], vec![]);
        let sample = simulate(&SimConfig::new(spec, params, 5000, 42)).unwrap();
        let n = sample.len() as f64;
        let mean = sample.y().iter().sum::<f64>() / n;
        let var = sample.y().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = (0.25_f64 / 41.0).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sd / n.sqrt());
        assert!((var / (0.25 / 41.0) - 1.0).abs() < 0.2);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let spec = ModelSpec::new(1, 1, 0).with_truncation(50);
        let params = ParamVector::new(40.0, 0.15, 0.05, vec![], vec![0.2], vec![-0.3]);
        let a = simulate(&SimConfig::new(spec.clone(), params.clone(), 300, 9)).unwrap();
        let b = simulate(&SimConfig::new(spec.clone(), params.clone(), 300, 9)).unwrap();
        let c = simulate(&SimConfig::new(spec, params, 300, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.y().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn covariates_are_carried_and_checked() {
        let spec = ModelSpec::new(0, 0, 1).with_truncation(10);
        let params = ParamVector::new(50.0, 0.0, 0.0, vec![1.0], vec![], vec![]);
        let base = SimConfig::new(spec, params, 50, 1).with_burn_in(20);
        assert!(simulate(&base).is_err());
        let rows: Vec<Vec<f64>> = (0..70).map(|i| vec![if i % 2 == 0 { 2.0 } else { -2.0 }]).collect();
        let sample = simulate(&base.clone().with_covariates(rows.clone())).unwrap();
        assert_eq!(sample.x_row(0), &rows[20][..]);
        let high: f64 = (0..50).filter(|i| i % 2 == 0).map(|i| sample.y()[i]).sum::<f64>() / 25.0;
        assert!(high > Link::Logit.inverse(1.0));
    }

    #[test]
    fn burn_in_must_exceed_truncation() {
        let spec = ModelSpec::new(0, 0, 0).with_truncation(100);
        let params = ParamVector::new(10.0, 0.1, 0.0, vec![], vec![], vec![]);
        assert!(simulate(&SimConfig::new(spec, params, 10, 1).with_burn_in(100)).is_err());
    }

    #[test]
    fn rescale_maps_interval() {
        assert_eq!(rescale(&[0.0, 0.5, 1.0], 10.0, 20.0), vec![10.0, 15.0, 20.0]);
    }
}
