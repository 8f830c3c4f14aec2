//! Residuals, deviance, information criteria, residual autocorrelation and
//! the Ljung-Box portmanteau test.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::inference::{chi_square_sf, TestKind, TestReport};
use crate::likelihood::log_density;
use crate::link::MU_GUARD;
use crate::model::{forward_recursion, guard_y, Sample};
use crate::special::{psi, psi1};

/// Residuals for `t = p+1..n`; `None` where `μ̂_t` sits on the guard boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSet {
    /// 1-based time indices.
    pub t: Vec<usize>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    /// `(y − μ̂) / sqrt(μ̂(1−μ̂)/(1+ν̂))`
    pub standardized: Vec<Option<f64>>,
    /// `(y* − μ̂*) / sqrt(ψ'(μ̂ν̂) + ψ'((1−μ̂)ν̂))`
    pub weighted: Vec<Option<f64>>,
}

impl ResidualSet {
    pub fn standardized_values(&self) -> Vec<f64> {
        self.standardized.iter().flatten().copied().collect()
    }

    pub fn weighted_values(&self) -> Vec<f64> {
        self.weighted.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn interior(mu: f64) -> bool {
    mu > MU_GUARD && mu < 1.0 - MU_GUARD
}

pub fn standardized_residual(y: f64, mu: f64, nu: f64) -> Option<f64> {
    interior(mu).then(|| (y - mu) / (mu * (1.0 - mu) / (1.0 + nu)).sqrt())
}

pub fn weighted_residual(y: f64, mu: f64, nu: f64) -> Option<f64> {
    if !interior(mu) {
        return None;
    }
    let y = guard_y(y);
    let ystar = (y / (1.0 - y)).ln();
    let a = mu * nu;
    let b = (1.0 - mu) * nu;
    let mustar = psi(a) - psi(b);
    Some((ystar - mustar) / (psi1(a) + psi1(b)).sqrt())
}

pub fn residuals(fit: &FitResult, sample: &Sample) -> Result<ResidualSet> {
    let spec = &fit.spec;
    let state = forward_recursion(spec, &fit.params_hat, sample)?;
    let nu = fit.params_hat.nu;
    let range = spec.p..sample.len();
    let y: Vec<f64> = range.clone().map(|i| sample.y()[i]).collect();
    let mu: Vec<f64> = range.clone().map(|i| state.mu[i]).collect();
    Ok(ResidualSet {
        t: range.map(|i| i + 1).collect(),
        standardized: y.iter().zip(&mu).map(|(&y, &m)| standardized_residual(y, m, nu)).collect(),
        weighted: y.iter().zip(&mu).map(|(&y, &m)| weighted_residual(y, m, nu)).collect(),
        y,
        mu,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Deviance {
    pub value: f64,
    pub df: i64,
}

/// `D = 2 Σ_t [ℓ_t(y_t, ν̂) − ℓ_t(μ̂_t, ν̂)]` over `t = p+1..n`; the saturated
/// model sets `μ̃_t = y_t` and keeps `ν̂`. `df = (n − p) − k`.
pub fn deviance(fit: &FitResult, sample: &Sample) -> Result<Deviance> {
    let spec = &fit.spec;
    let state = forward_recursion(spec, &fit.params_hat, sample)?;
    let nu = fit.params_hat.nu;
    let mut d = 0.0;
    for i in spec.p..sample.len() {
        let y = guard_y(sample.y()[i]);
        d += log_density(y, y, nu) - log_density(y, state.mu[i], nu);
    }
    Ok(Deviance {
        value: 2.0 * d,
        df: (sample.len() - spec.p) as i64 - fit.n_free() as i64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InformationCriteria {
    pub aic: f64,
    pub bic: f64,
    pub hq: f64,
    pub k: usize,
    pub n: usize,
}

impl InformationCriteria {
    /// `AIC = −2ℓ + 2k`, `BIC = −2ℓ + k ln n`, `HQ = −2ℓ + k ln ln n`.
    pub fn from_loglik(loglik: f64, k: usize, n: usize) -> Self {
        let kf = k as f64;
        let nf = n as f64;
        Self {
            aic: -2.0 * loglik + 2.0 * kf,
            bic: -2.0 * loglik + nf.ln() * kf,
            hq: -2.0 * loglik + nf.ln().ln() * kf,
            k,
            n,
        }
    }
}

/// Criteria with `k` the number of estimated parameters and `n` the number of
/// likelihood terms.
pub fn information_criteria(fit: &FitResult) -> InformationCriteria {
    InformationCriteria::from_loglik(fit.loglik, fit.n_free(), fit.n_obs)
}

/// `ρ̂(h)` for `h = 0..=max_lag`, with numerator and denominator both summed
/// over `t = 1..n−h` around the full-sample mean.
pub fn residual_acf(residuals: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = residuals.len();
    if max_lag >= n {
        return Err(Error::Request(format!("max lag {max_lag} needs more than {n} residuals")));
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = residuals.iter().map(|r| r - mean).collect();
    // Deviations at rounding level of the data count as zero.
    let floor = 1e-24 * residuals.iter().map(|r| r * r).sum::<f64>();
    (0..=max_lag)
        .map(|h| {
            let num: f64 = (0..n - h).map(|t| dev[t] * dev[t + h]).sum();
            let den: f64 = dev[..n - h].iter().map(|v| v * v).sum();
            if !(den > floor) {
                return Err(Error::Degenerate(format!("residuals are constant over the first {} values", n - h)));
            }
            Ok(num / den)
        })
        .collect()
}

/// `Q = n(n+2) Σ_{k=1}^{h} ρ̂(k)²/(n−k)` against `χ²_{h − df_adjust}`. `acf`
/// starts at lag 0.
pub fn ljung_box(acf: &[f64], n: usize, h: usize, df_adjust: usize) -> Result<TestReport> {
    if h == 0 || h <= df_adjust {
        return Err(Error::Request(format!("need h > df_adjust, got h = {h}, df_adjust = {df_adjust}")));
    }
    if acf.len() <= h || n <= h {
        return Err(Error::Request(format!("{h} lags requested from {} autocorrelations of {n} values", acf.len())));
    }
    let nf = n as f64;
    let q = nf * (nf + 2.0) * (1..=h).map(|k| acf[k] * acf[k] / (nf - k as f64)).sum::<f64>();
    let df = h - df_adjust;
    Ok(TestReport {
        kind: TestKind::LjungBox,
        statistic: q,
        df,
        p_value: chi_square_sf(q, df),
        restriction: format!("no residual autocorrelation up to lag {h}"),
    })
}

/// Everything the diagnostics produce for one fit.
#[derive(Clone, Debug)]
pub struct DiagnosticReport {
    pub residuals: ResidualSet,
    pub acf: Vec<f64>,
    pub ljung_box: TestReport,
    pub deviance: Deviance,
    pub criteria: InformationCriteria,
}

/// Diagnostics on the standardized residuals with `lags` autocorrelations.
pub fn diagnose(fit: &FitResult, sample: &Sample, lags: usize) -> Result<DiagnosticReport> {
    let res = residuals(fit, sample)?;
    let values = res.standardized_values();
    let acf = residual_acf(&values, lags)?;
    let lb = ljung_box(&acf, values.len(), lags, 0)?;
    Ok(DiagnosticReport {
        deviance: deviance(fit, sample)?,
        criteria: information_criteria(fit),
        residuals: res,
        acf,
        ljung_box: lb,
    })
}

impl DiagnosticReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.criteria;
        let _ = writeln!(s, "Deviance: {:.4} (df = {})", self.deviance.value, self.deviance.df);
        let _ = writeln!(s, "AIC: {:.4}  BIC: {:.4}  HQ: {:.4}", c.aic, c.bic, c.hq);
        let _ = writeln!(
            s,
            "Ljung-Box: Q = {:.4}, df = {}, p-value = {:.4}",
            self.ljung_box.statistic, self.ljung_box.df, self.ljung_box.p_value
        );
        let _ = writeln!(s, "Residual ACF:");
        for (h, r) in self.acf.iter().enumerate().skip(1) {
            let _ = writeln!(s, "  lag {h:>3}: {r:>8.4}");
        }
        s
    }

    /// Writes `t,y,mu,standardized,weighted` rows.
    pub fn write_residuals_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "y", "mu", "standardized", "weighted"])?;
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let r = &self.residuals;
        for i in 0..r.len() {
            w.write_record([
                r.t[i].to_string(),
                r.y[i].to_string(),
                r.mu[i].to_string(),
                fmt(r.standardized[i]),
                fmt(r.weighted[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `lag,acf` rows.
    pub fn write_acf_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lag", "acf"])?;
        for (h, r) in self.acf.iter().enumerate() {
            w.write_record([h.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
