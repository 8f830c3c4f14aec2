//! Beta autoregressive fractionally integrated moving average models.
//!
//! A βARFIMA(p,d,q) process models a series on the unit interval whose
//! conditional distribution is beta with mean `μ_t` and precision `ν`, and
//! whose link-scale mean follows a long-memory ARFIMA recursion with optional
//! covariates. The crate covers simulation, partial maximum likelihood
//! estimation with an analytic score and conditional Fisher information,
//! likelihood-ratio / Wald / score / z tests, residual diagnostics,
//! forecasting, and a Monte Carlo harness.
//!
//! ```
//! use barfima::{fit, simulate, FitOptions, ModelSpec, ParamVector, SimConfig};
//!
//! let spec = ModelSpec::new(0, 0, 0).with_truncation(20);
//! let truth = ParamVector::new(40.0, 0.2, 0.0, vec![], vec![], vec![]);
//! let sample = simulate(&SimConfig::new(spec.clone(), truth, 300, 7)).unwrap();
//! let fitted = fit(&spec, &sample, &FitOptions::default()).unwrap();
//! assert!(fitted.converged);
//! ```

pub mod diagnostics;
pub mod error;
pub mod estimation;
pub mod forecast;
pub mod fracdiff;
pub mod inference;
pub mod io;
pub mod likelihood;
pub mod link;
pub mod mc;
pub mod model;
pub mod optim;
pub mod simulate;
pub mod special;

pub use diagnostics::{
    deviance, information_criteria, ljung_box, residual_acf, residuals, InformationCriteria,
    ResidualSet,
};
pub use error::{Error, Result};
pub use estimation::{fit, fit_from, fit_nested, initialize, FitOptions, FitResult, Termination};
pub use forecast::{forecast, forecast_accuracy, ForecastAccuracy, ForecastRequest};
pub use inference::{
    lr_test, rao_score_test, wald_test, z_statistics, Restriction, TestKind, TestReport,
};
pub use likelihood::{fisher_info, loglik, score, Evaluation};
pub use link::Link;
pub use model::{forward_recursion, ModelSpec, ParamVector, RecursionState, Sample};
pub use simulate::{beta_inverse_cdf, simulate, SimConfig};
