//! Out-of-sample forecasts.

use std::path::Path;

use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::fracdiff::c_coeffs;
use crate::model::{dot, forward_recursion, ModelSpec, ParamVector, Sample};

#[derive(Clone, Debug, PartialEq)]
pub struct ForecastRequest {
    pub horizon: usize,
    /// Row `j` is the covariate vector entering step `j + 1`, i.e. `x_{n+j}`.
    /// Needs at least `horizon` rows when the model has covariates.
    pub future_covariates: Vec<Vec<f64>>,
    /// Overrides the model's truncation point when set.
    pub truncation: Option<usize>,
}

impl ForecastRequest {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            future_covariates: Vec::new(),
            truncation: None,
        }
    }

    pub fn with_covariates(mut self, rows: Vec<Vec<f64>>) -> Self {
        self.future_covariates = rows;
        self
    }
}

/// Forecasts `ŷ_n(1..=h)` from a fitted model.
pub fn forecast(fit: &FitResult, sample: &Sample, request: &ForecastRequest) -> Result<Vec<f64>> {
    forecast_with(&fit.spec, &fit.params_hat, sample, request)
}

/// Forecasts from explicit parameters.
///
/// Unknown future `g(y)` are replaced by `g(ŷ)`; in-sample errors are the
/// recursion's `r_t`, and errors at forecast times are zero because the
/// forecast is its own conditional mean.
pub fn forecast_with(spec: &ModelSpec, params: &ParamVector, sample: &Sample, request: &ForecastRequest) -> Result<Vec<f64>> {
    let spec = match request.truncation {
        Some(m) => spec.clone().with_truncation(m),
        None => spec.clone(),
    };
    let h = request.horizon;
    if h == 0 {
        return Err(Error::Request("forecast horizon must be at least 1".into()));
    }
    if spec.l > 0 {
        if request.future_covariates.len() < h {
            return Err(Error::Request(format!(
                "{} future covariate rows supplied, horizon {h} needs {h}",
                request.future_covariates.len()
            )));
        }
        if let Some(j) = request.future_covariates[..h].iter().position(|r| r.len() != spec.l) {
            return Err(Error::Request(format!("future covariate row {} does not have {} columns", j + 1, spec.l)));
        }
    }
    let state = forward_recursion(&spec, params, sample)?;
    let c = c_coeffs(&params.theta, params.d, spec.m);
    let n = sample.len();
    let link = spec.link;

    let mut gy = state.gy;
    let mut xb = state.xb;
    let mut r = state.r;
    let mut out = Vec::with_capacity(h);
    for step in 0..h {
        let i = n + step;
        let xb_i = if spec.l > 0 { dot(&request.future_covariates[step], &params.beta) } else { 0.0 };
        let mut eta = params.alpha + xb_i;
        for (j, phi) in params.phi.iter().enumerate() {
            let lag = i - j - 1;
            eta += phi * (gy[lag] - xb[lag]);
        }
        for k in 1..=spec.m.min(i) {
            eta += c[k] * r[i - k];
        }
        if !eta.is_finite() {
            return Err(Error::Recursion { t: i + 1 });
        }
        let yhat = link.inverse(eta);
        out.push(yhat);
        gy.push(link.forward(yhat));
        xb.push(xb_i);
        r.push(0.0);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForecastAccuracy {
    pub rmse: f64,
    pub mae: f64,
    /// Percent; `None` when some actual value is zero.
    pub mape: Option<f64>,
}

pub fn forecast_accuracy(pred: &[f64], actual: &[f64]) -> Result<ForecastAccuracy> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::Request(format!(
            "{} predictions against {} actual values",
            pred.len(),
            actual.len()
        )));
    }
    let n = pred.len() as f64;
    let err: Vec<f64> = pred.iter().zip(actual).map(|(p, a)| p - a).collect();
    let rmse = (err.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mae = err.iter().map(|e| e.abs()).sum::<f64>() / n;
    let mape = if actual.iter().any(|&a| a == 0.0) {
        None
    } else {
        Some(100.0 * err.iter().zip(actual).map(|(e, a)| (e / a).abs()).sum::<f64>() / n)
    };
    Ok(ForecastAccuracy { rmse, mae, mape })
}

/// Writes `step,prediction` rows.
pub fn write_forecast_csv(path: &Path, predictions: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "prediction"])?;
    for (j, p) in predictions.iter().enumerate() {
        w.write_record([(j + 1).to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
