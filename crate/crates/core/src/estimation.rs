//! Partial maximum likelihood estimation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::likelihood::{evaluate, Order};
use crate::model::{check_inputs, guard_y, ModelSpec, ParamVector, Sample};
use crate::optim::{minimize, BoxBounds, MinimizeOptions, Status};

/// Starting value of `d` for free-`d` fits.
pub const D_START: f64 = 0.001;

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Tolerance on the projected-gradient ∞-norm, relative to `1 + |ℓ|`.
    pub gradient_tolerance: f64,
    pub nu_bounds: (f64, f64),
    pub d_bounds: (f64, f64),
    /// Overrides the model's truncation point when set.
    pub truncation: Option<usize>,
    /// Fit the short-memory submodel with `d = 0`.
    pub fix_d_at_zero: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            nu_bounds: (1e-4, 1e6),
            d_bounds: (-0.49, 0.49),
            truncation: None,
            fix_d_at_zero: false,
        }
    }
}

impl FitOptions {
    pub fn restricted(&self) -> Self {
        Self {
            fix_d_at_zero: true,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailed { iterations: usize },
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub spec: ModelSpec,
    pub params_hat: ParamVector,
    /// Which coordinates were estimated; fixed ones keep their value.
    pub free: Vec<bool>,
    pub loglik: f64,
    pub initial_loglik: f64,
    /// Full-length score at the estimate.
    pub score_at_opt: Vec<f64>,
    /// Full `G_n(γ̂)`.
    pub info_matrix: DMatrix<f64>,
    /// `sqrt(diag(G_n(γ̂)⁻¹))` over the free block; `None` for fixed
    /// coordinates or when the block is singular.
    pub std_errors: Vec<Option<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub projected_gradient_norm: f64,
    /// Number of likelihood terms, `n − p`.
    pub n_obs: usize,
}

impl FitResult {
    pub fn n_free(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.params_hat.to_vec()
    }
}

fn free_mask(spec: &ModelSpec, fix_d: bool) -> Vec<bool> {
    let mut free = vec![true; spec.dim()];
    if fix_d {
        free[spec.index_d()] = false;
    }
    if !spec.include_intercept {
        free[spec.index_alpha()] = false;
    }
    free
}

/// Starting values: `(α, β, φ)` by least squares of `g(y_t)` on
/// `[1, x'_{t−1}, g(y_{t−1}), …, g(y_{t−p})]` for `t = p+1..n`; `θ = 0`;
/// `d = 0.001`; `ν` by moment matching on the link-scale residual variance.
pub fn initialize(spec: &ModelSpec, sample: &Sample) -> Result<ParamVector> {
    let probe = ParamVector::new(1.0, 0.0, 0.0, vec![0.0; spec.l], vec![0.0; spec.p], vec![0.0; spec.q]);
    check_inputs(spec, &probe, sample)?;
    let link = spec.link;
    let (p, l) = (spec.p, spec.l);
    let n = sample.len();
    let gy: Vec<f64> = sample.y().iter().map(|&y| link.forward(guard_y(y))).collect();
    let offset = usize::from(spec.include_intercept);
    let cols = offset + l + p;
    let rows = n - p;

    let fallback = || {
        let ybar = sample.y().iter().sum::<f64>() / n as f64;
        let alpha = if spec.include_intercept { link.forward(guard_y(ybar)) } else { 0.0 };
        let mean_g = gy.iter().sum::<f64>() / n as f64;
        let var_g = gy.iter().map(|v| (v - mean_g).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        let mu = link.inverse(alpha);
        let nu = moment_nu(&[mu], var_g, spec);
        ParamVector::new(nu, D_START, alpha, vec![0.0; l], vec![0.0; p], vec![0.0; spec.q])
    };

    if rows <= cols {
        return Ok(fallback());
    }
    let design = DMatrix::from_fn(rows, cols, |r, c| {
        let i = r + p;
        if c < offset {
            1.0
        } else if c < offset + l {
            sample.x_row(i)[c - offset]
        } else {
            gy[i - (c - offset - l) - 1]
        }
    });
    let response = DVector::from_iterator(rows, (p..n).map(|i| gy[i]));
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank_tol = smax * 1e-10 * rows as f64;
    if svd.singular_values.iter().any(|&s| s <= rank_tol) {
        return Ok(fallback());
    }
    let Ok(coef) = svd.solve(&response, rank_tol) else {
        return Ok(fallback());
    };
    let fitted = &design * &coef;
    let resid = &response - &fitted;
    let sigma2 = resid.norm_squared() / (rows - cols) as f64;
    let mus: Vec<f64> = fitted.iter().map(|&e| link.inverse(e)).collect();
    let nu = moment_nu(&mus, sigma2, spec);

    let alpha = if spec.include_intercept { coef[0] } else { 0.0 };
    let beta = (0..l).map(|s| coef[offset + s]).collect();
    let phi = (0..p).map(|s| coef[offset + l + s]).collect();
    Ok(ParamVector::new(nu, D_START, alpha, beta, phi, vec![0.0; spec.q]))
}

/// ν₀ = max(1, mean(μ(1−μ)/σ²_t) − 1) with σ²_t the link-scale variance
/// carried back by the delta method.
fn moment_nu(mus: &[f64], link_var: f64, spec: &ModelSpec) -> f64 {
    if !(link_var > 0.0) {
        return 1.0;
    }
    let ratio = mus
        .iter()
        .map(|&mu| {
            let dg = spec.link.derivative(mu);
            mu * (1.0 - mu) * dg * dg / link_var
        })
        .sum::<f64>()
        / mus.len() as f64;
    (ratio - 1.0).max(1.0)
}

pub fn fit(spec: &ModelSpec, sample: &Sample, options: &FitOptions) -> Result<FitResult> {
    let spec = effective_spec(spec, options);
    let start = initialize(&spec, sample)?;
    fit_inner(&spec, sample, options, start)
}

/// Fit starting from a caller-supplied parameter vector.
pub fn fit_from(spec: &ModelSpec, sample: &Sample, options: &FitOptions, start: &ParamVector) -> Result<FitResult> {
    let spec = effective_spec(spec, options);
    fit_inner(&spec, sample, options, start.clone())
}

/// Fits the `d = 0` submodel and the free-`d` model. The submodel is refitted
/// from the free estimate with `d` set to zero, and when the free fit lands
/// below the restricted optimum it is restarted from the restricted estimate,
/// so the returned pair always satisfies `ℓ(free) ≥ ℓ(restricted)` up to the
/// optimizer tolerance.
pub fn fit_nested(spec: &ModelSpec, sample: &Sample, options: &FitOptions) -> Result<(FitResult, FitResult)> {
    let free_opts = FitOptions {
        fix_d_at_zero: false,
        ..options.clone()
    };
    let mut restricted = fit(spec, sample, &options.restricted())?;
    let mut free = fit(spec, sample, &free_opts)?;
    let mut start = free.params_hat.clone();
    start.d = 0.0;
    let retry = fit_from(spec, sample, &options.restricted(), &start)?;
    if better(&retry, &restricted) {
        restricted = retry;
    }
    if free.loglik < restricted.loglik {
        let mut start = restricted.params_hat.clone();
        start.d = D_START;
        let retry = fit_from(spec, sample, &free_opts, &start)?;
        if better(&retry, &free) {
            free = retry;
        }
    }
    Ok((free, restricted))
}

fn better(candidate: &FitResult, current: &FitResult) -> bool {
    (candidate.converged || !current.converged) && candidate.loglik > current.loglik
}

fn effective_spec(spec: &ModelSpec, options: &FitOptions) -> ModelSpec {
    match options.truncation {
        Some(m) => spec.clone().with_truncation(m),
        None => spec.clone(),
    }
}

fn fit_inner(spec: &ModelSpec, sample: &Sample, options: &FitOptions, mut start: ParamVector) -> Result<FitResult> {
    spec.validate()?;
    if sample.len() <= spec.p + spec.q + 1 {
        return Err(Error::InvalidSample(format!(
            "need more than p + q + 1 = {} observations, got {}",
            spec.p + spec.q + 1,
            sample.len()
        )));
    }
    let fix_d = options.fix_d_at_zero;
    if fix_d {
        start.d = 0.0;
    }
    if !spec.include_intercept {
        start.alpha = 0.0;
    }
    start.nu = start.nu.clamp(options.nu_bounds.0, options.nu_bounds.1);
    if !fix_d {
        start.d = start.d.clamp(options.d_bounds.0, options.d_bounds.1);
    }
    let free = free_mask(spec, fix_d);
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let base = start.to_vec();

    let assemble = |x: &[f64]| -> Vec<f64> {
        let mut full = base.clone();
        for (k, &i) in idx.iter().enumerate() {
            full[i] = x[k];
        }
        full
    };

    let mut lower = Vec::with_capacity(idx.len());
    let mut upper = Vec::with_capacity(idx.len());
    for &i in &idx {
        let (lo, hi) = match i {
            0 => options.nu_bounds,
            1 => options.d_bounds,
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        lower.push(lo);
        upper.push(hi);
    }
    let bounds = BoxBounds { lower, upper };
    let x0: Vec<f64> = idx.iter().map(|&i| base[i]).collect();

    let initial_loglik = evaluate(spec, &start, sample, Order::Value)?.loglik;

    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let params = ParamVector::from_slice(spec, &assemble(x)).ok()?;
        let ev = evaluate(spec, &params, sample, Order::Score).ok()?;
        let u = ev.score?;
        Some((-ev.loglik, idx.iter().map(|&i| -u[i]).collect()))
    };
    // Inverse Fisher information over the free block.
    let mut metric = |x: &[f64]| -> Option<DMatrix<f64>> {
        let params = ParamVector::from_slice(spec, &assemble(x)).ok()?;
        let g = evaluate(spec, &params, sample, Order::Information).ok()?.info?;
        Some(submatrix(&g, &idx).cholesky()?.inverse())
    };
    let mopts = MinimizeOptions {
        max_iterations: options.max_iterations,
        gradient_tolerance: options.gradient_tolerance,
        ..Default::default()
    };
    let min = minimize(objective, Some(&mut metric), &x0, &bounds, &mopts)
        .ok_or_else(|| Error::Numeric("objective undefined at the starting point".into()))?;

    let params_hat = ParamVector::from_slice(spec, &assemble(&min.x))?;
    let at_opt = evaluate(spec, &params_hat, sample, Order::Information)?;
    let info = at_opt.info.expect("information requested");
    let std_errors = standard_errors(&info, &free);
    let termination = match min.status {
        Status::Converged => Termination::Converged,
        Status::MaxIterations => Termination::MaxIterations,
        Status::LineSearchFailed => Termination::LineSearchFailed {
            iterations: min.iterations,
        },
    };
    Ok(FitResult {
        spec: spec.clone(),
        params_hat,
        free,
        loglik: at_opt.loglik,
        initial_loglik,
        score_at_opt: at_opt.score.expect("score requested"),
        info_matrix: info,
        std_errors,
        iterations: min.iterations,
        converged: min.status == Status::Converged,
        termination,
        projected_gradient_norm: min.projected_gradient_norm,
        n_obs: sample.len() - spec.p,
    })
}

pub(crate) fn submatrix(g: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])])
}

/// Inverse of the free block of `G`, embedded in a full-size matrix with
/// zeros on fixed rows and columns.
pub(crate) fn free_inverse(g: &DMatrix<f64>, free: &[bool]) -> Option<DMatrix<f64>> {
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let inv = submatrix(g, &idx).cholesky()?.inverse();
    let mut full = DMatrix::zeros(free.len(), free.len());
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            full[(i, j)] = inv[(a, b)];
        }
    }
    Some(full)
}

fn standard_errors(g: &DMatrix<f64>, free: &[bool]) -> Vec<Option<f64>> {
    match free_inverse(g, free) {
        Some(inv) => (0..free.len())
            .map(|i| {
                let v = inv[(i, i)];
                (free[i] && v > 0.0 && v.is_finite()).then(|| v.sqrt())
            })
            .collect(),
        None => vec![None; free.len()],
    }
}
