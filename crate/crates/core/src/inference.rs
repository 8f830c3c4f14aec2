//! Likelihood-ratio, Wald, Rao score and z tests.

use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimation::{free_inverse, FitResult};
use crate::likelihood::{evaluate, quadratic_form_inverse, Order};
use crate::model::{ModelSpec, Sample};

/// Tolerance below zero accepted for `LR` before the pair is declared not nested.
pub const LR_NESTING_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    LikelihoodRatio,
    Wald,
    Score,
    Z,
    LjungBox,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::LikelihoodRatio => "LR",
            TestKind::Wald => "Wald",
            TestKind::Score => "Score",
            TestKind::Z => "z",
            TestKind::LjungBox => "Ljung-Box",
        })
    }
}

/// A single restriction `T(γ) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Restriction {
    /// `γ_index = value`.
    Coordinate { index: usize, value: f64 },
    /// `a'γ = value`.
    Linear { weights: Vec<f64>, value: f64 },
}

impl Restriction {
    pub fn coordinate(index: usize, value: f64) -> Self {
        Restriction::Coordinate { index, value }
    }

    /// `d = 0`.
    pub fn no_long_memory(spec: &ModelSpec) -> Self {
        Restriction::Coordinate {
            index: spec.index_d(),
            value: 0.0,
        }
    }

    fn jacobian(&self, dim: usize) -> Vec<f64> {
        match self {
            Restriction::Coordinate { index, .. } => {
                let mut j = vec![0.0; dim];
                j[*index] = 1.0;
                j
            }
            Restriction::Linear { weights, .. } => weights.clone(),
        }
    }

    fn value_at(&self, gamma: &[f64]) -> f64 {
        match self {
            Restriction::Coordinate { index, value } => gamma[*index] - value,
            Restriction::Linear { weights, value } => weights.iter().zip(gamma).map(|(a, b)| a * b).sum::<f64>() - value,
        }
    }

    pub fn describe(&self, names: &[String]) -> String {
        match self {
            Restriction::Coordinate { index, value } => format!("{} = {}", names[*index], value),
            Restriction::Linear { weights, value } => {
                let terms: Vec<String> = weights
                    .iter()
                    .zip(names)
                    .filter(|(w, _)| **w != 0.0)
                    .map(|(w, n)| format!("{w}·{n}"))
                    .collect();
                format!("{} = {}", terms.join(" + "), value)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestReport {
    pub kind: TestKind,
    pub statistic: f64,
    /// Degrees of freedom of the χ² reference; 0 for the normal-referenced z.
    pub df: usize,
    pub p_value: f64,
    pub restriction: String,
}

impl TestReport {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64).expect("positive degrees of freedom").sf(x)
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    (2.0 * Normal::standard().sf(z.abs())).min(1.0)
}

fn restricted_names(free: &FitResult, restricted: &FitResult) -> String {
    let names = free.spec.param_names();
    let values = restricted.params_hat.to_vec();
    let parts: Vec<String> = (0..free.free.len())
        .filter(|&i| free.free[i] && !restricted.free[i])
        .map(|i| format!("{} = {}", names[i], values[i]))
        .collect();
    parts.join(", ")
}

/// `LR = 2[ℓ(γ̂) − ℓ(γ̃)]` referred to `χ²` with as many degrees of freedom
/// as coordinates fixed by the restriction.
pub fn lr_test(free: &FitResult, restricted: &FitResult) -> Result<TestReport> {
    let kf = free.n_free();
    let kr = restricted.n_free();
    if kf <= kr || free.free.len() != restricted.free.len() {
        return Err(Error::TestUnavailable(format!(
            "restricted model has {kr} free parameters, free model {kf}"
        )));
    }
    let df = kf - kr;
    let lr = 2.0 * (free.loglik - restricted.loglik);
    if lr < -LR_NESTING_TOL || !lr.is_finite() {
        return Err(Error::NotNested { lr });
    }
    let lr = lr.max(0.0);
    Ok(TestReport {
        kind: TestKind::LikelihoodRatio,
        statistic: lr,
        df,
        p_value: chi_square_sf(lr, df),
        restriction: restricted_names(free, restricted),
    })
}

/// `W = T(γ̂)² / (J' G_n(γ̂)⁻¹ J)` for a single restriction; the inverse is
/// taken over the fit's free coordinates.
pub fn wald_test(fit: &FitResult, restriction: &Restriction) -> Result<TestReport> {
    let dim = fit.free.len();
    let jac = restriction.jacobian(dim);
    if jac.len() != dim {
        return Err(Error::TestUnavailable(format!("restriction has {} weights for {dim} parameters", jac.len())));
    }
    if jac.iter().enumerate().any(|(i, &w)| w != 0.0 && !fit.free[i]) {
        return Err(Error::TestUnavailable("restriction involves a fixed parameter".into()));
    }
    let inv = free_inverse(&fit.info_matrix, &fit.free)
        .ok_or_else(|| Error::TestUnavailable("information matrix is singular".into()))?;
    let mut bracket = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            bracket += jac[i] * inv[(i, j)] * jac[j];
        }
    }
    if !(bracket > 0.0 && bracket.is_finite()) {
        return Err(Error::TestUnavailable("restriction variance is not positive".into()));
    }
    let t = restriction.value_at(&fit.params_hat.to_vec());
    let w = t * t / bracket;
    Ok(TestReport {
        kind: TestKind::Wald,
        statistic: w,
        df: 1,
        p_value: chi_square_sf(w, 1),
        restriction: restriction.describe(&fit.spec.param_names()),
    })
}

/// `S = U(γ̃)' G_n(γ̃)⁻¹ U(γ̃)` with score and information of the full model
/// evaluated at the restricted estimate.
pub fn rao_score_test(spec: &ModelSpec, sample: &Sample, restricted: &FitResult) -> Result<TestReport> {
    let mut full_free = vec![true; spec.dim()];
    if !spec.include_intercept {
        full_free[spec.index_alpha()] = false;
    }
    if restricted.free.len() != full_free.len() {
        return Err(Error::TestUnavailable("restricted fit has a different parameter layout".into()));
    }
    let df = (0..full_free.len()).filter(|&i| full_free[i] && !restricted.free[i]).count();
    if df == 0 {
        return Err(Error::TestUnavailable("restricted fit fixes no parameter".into()));
    }
    let ev = evaluate(spec, &restricted.params_hat, sample, Order::Information)?;
    let u = ev.score.expect("score requested");
    let g = ev.info.expect("information requested");
    let s = quadratic_form_inverse(&g, &u, &full_free)
        .ok_or_else(|| Error::TestUnavailable("information matrix is singular at the restricted estimate".into()))?
        .max(0.0);
    let names = spec.param_names();
    let values = restricted.params_hat.to_vec();
    let restriction = (0..full_free.len())
        .filter(|&i| full_free[i] && !restricted.free[i])
        .map(|i| format!("{} = {}", names[i], values[i]))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(TestReport {
        kind: TestKind::Score,
        statistic: s,
        df,
        p_value: chi_square_sf(s, df),
        restriction,
    })
}

/// `z = (estimate − null) / se` with a two-sided normal p-value.
pub fn z_test(estimate: f64, std_error: f64, null: f64, label: &str) -> TestReport {
    let z = (estimate - null) / std_error;
    TestReport {
        kind: TestKind::Z,
        statistic: z,
        df: 0,
        p_value: normal_two_sided_p(z),
        restriction: format!("{label} = {null}"),
    }
}

/// Per-coordinate z tests against zero; `None` where no standard error exists.
pub fn z_statistics(fit: &FitResult) -> Vec<Option<TestReport>> {
    let names = fit.spec.param_names();
    let est = fit.params_hat.to_vec();
    fit.std_errors
        .iter()
        .enumerate()
        .map(|(i, se)| se.map(|se| z_test(est[i], se, 0.0, &names[i])))
        .collect()
}
