//! Partial log-likelihood, analytic score and conditional Fisher information.
//!
//! All three sum over `t = p+1..n`. The score for every coordinate other
//! than `ν` follows the chain rule
//! `∂ℓ/∂γ_j = Σ_t ν(y*_t − μ*_t)/g'(μ_t) · ∂η_t/∂γ_j`, with the `∂η_t/∂γ_j`
//! sequences computed by their own truncated recursions
//! (see [`ScoreWorkspace`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fracdiff::FracCoeffs;
use crate::model::{check_inputs, guard_y, run_recursion, ModelSpec, ParamVector, RecursionState, Sample};
use crate::special::{ln_gamma, psi, psi1};

/// Which quantities [`evaluate`] should produce.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Score,
    Information,
}

/// Derivative sequences shared by the score and the information matrix.
#[derive(Clone, Debug)]
pub struct ScoreWorkspace {
    /// y*_t = log(y_t / (1 − y_t))
    pub ystar: Vec<f64>,
    /// μ*_t = ψ(μ_t ν) − ψ((1 − μ_t) ν)
    pub mustar: Vec<f64>,
    /// 1 / g'(μ_t)
    pub t_diag: Vec<f64>,
    /// Row-major `n × (dim − 1)`: column 0 is ∂η/∂d, 1 is ∂η/∂α, then
    /// ∂η/∂β (the M matrix), ∂η/∂φ (P) and ∂η/∂θ (Q).
    pub deta: Vec<f64>,
    pub width: usize,
}

impl ScoreWorkspace {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.deta[i * self.width..(i + 1) * self.width]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.deta.iter().skip(j).step_by(self.width).copied().collect()
    }
}

/// Per-observation information weights `(w_t, v_t, S_t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfoWeights {
    pub w: f64,
    pub v: f64,
    pub s: f64,
}

pub fn info_weights(mu: f64, nu: f64) -> InfoWeights {
    let t1 = psi1(mu * nu);
    let t2 = psi1((1.0 - mu) * nu);
    InfoWeights {
        w: nu * nu * (t1 + t2),
        v: nu * (t1 * mu - t2 * (1.0 - mu)),
        s: t1 * mu * mu + t2 * (1.0 - mu) * (1.0 - mu) - psi1(nu),
    }
}

/// Beta log-density in the mean/precision parameterization.
#[inline]
pub fn log_density(y: f64, mu: f64, nu: f64) -> f64 {
    let a = mu * nu;
    let b = (1.0 - mu) * nu;
    ln_gamma(nu) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * y.ln() + (b - 1.0) * (-y).ln_1p()
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub loglik: f64,
    /// Full-length score `(U_ν, U_d, U_α, U_β', U_φ', U_θ')`, when requested.
    pub score: Option<Vec<f64>>,
    /// Conditional information `G_n`, when requested.
    pub info: Option<DMatrix<f64>>,
    pub state: RecursionState,
    pub workspace: Option<ScoreWorkspace>,
}

pub fn evaluate(spec: &ModelSpec, params: &ParamVector, sample: &Sample, order: Order) -> Result<Evaluation> {
    check_inputs(spec, params, sample)?;
    let coeffs = FracCoeffs::new(params.d, &params.theta, spec.m);
    let state = run_recursion(spec, params, sample, &coeffs.c)?;
    let n = sample.len();
    let p = spec.p;
    let nu = params.nu;

    let mut loglik = 0.0;
    for i in p..n {
        let term = log_density(guard_y(sample.y()[i]), state.mu[i], nu);
        if !term.is_finite() {
            return Err(Error::Evaluation { t: i + 1 });
        }
        loglik += term;
    }
    if order == Order::Value {
        return Ok(Evaluation {
            loglik,
            score: None,
            info: None,
            state,
            workspace: None,
        });
    }

    let ws = score_workspace(spec, params, sample, &state, &coeffs);
    let dim = spec.dim();
    let width = ws.width;

    let psi_nu = psi(nu);
    let mut score = vec![0.0; dim];
    for i in p..n {
        let mu = state.mu[i];
        let y = guard_y(sample.y()[i]);
        let resid = ws.ystar[i] - ws.mustar[i];
        score[0] += mu * resid + (-y).ln_1p() - psi((1.0 - mu) * nu) + psi_nu;
        let scale = nu * resid * ws.t_diag[i];
        for (u, dj) in score[1..].iter_mut().zip(ws.row(i)) {
            *u += scale * dj;
        }
    }
    if let Some(t) = score.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite score coordinate {t}")));
    }

    let info = if order == Order::Information {
        let mut g = DMatrix::<f64>::zeros(dim, dim);
        for i in p..n {
            let wts = info_weights(state.mu[i], nu);
            let tt = ws.t_diag[i];
            let big_w = wts.w * tt * tt;
            let row = ws.row(i);
            g[(0, 0)] += wts.s;
            for a in 0..width {
                g[(0, a + 1)] += wts.v * tt * row[a];
                let wa = big_w * row[a];
                for b in a..width {
                    g[(a + 1, b + 1)] += wa * row[b];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        Some(g)
    } else {
        None
    };

    Ok(Evaluation {
        loglik,
        score: Some(score),
        info,
        state,
        workspace: Some(ws),
    })
}

fn score_workspace(
    spec: &ModelSpec,
    params: &ParamVector,
    sample: &Sample,
    state: &RecursionState,
    coeffs: &FracCoeffs,
) -> ScoreWorkspace {
    let n = sample.len();
    let (p, q, l, m) = (spec.p, spec.q, spec.l, spec.m);
    let nu = params.nu;
    let link = spec.link;
    let width = spec.dim() - 1;

    let mut ystar = Vec::with_capacity(n);
    let mut mustar = Vec::with_capacity(n);
    let mut t_diag = Vec::with_capacity(n);
    for i in 0..n {
        let y = guard_y(sample.y()[i]);
        let mu = state.mu[i];
        ystar.push(y.ln() - (-y).ln_1p());
        mustar.push(psi(mu * nu) - psi((1.0 - mu) * nu));
        t_diag.push(1.0 / link.derivative(mu));
    }

    let col_beta = 2;
    let col_phi = 2 + l;
    let col_theta = 2 + l + p;
    let r = &state.r;
    let mut deta = vec![0.0; n * width];
    let mut row = vec![0.0; width];
    for i in p..n {
        let kmax = m.min(i);
        row.iter_mut().for_each(|v| *v = 0.0);

        let mut dd = 0.0;
        for k in 1..=kmax {
            dd += coeffs.dc[k] * r[i - k];
        }
        row[0] = dd;
        row[1] = 1.0;
        let xi = sample.x_row(i);
        for s in 0..l {
            let mut v = xi[s];
            for (j, phi) in params.phi.iter().enumerate() {
                v -= phi * sample.x_row(i - j - 1)[s];
            }
            row[col_beta + s] = v;
        }
        for s in 1..=p {
            row[col_phi + s - 1] = state.gy[i - s] - state.xb[i - s];
        }
        for s in 1..=q {
            let mut v = 0.0;
            for k in s..=kmax {
                v += coeffs.pi[k - s] * r[i - k];
            }
            row[col_theta + s - 1] = v;
        }
        for k in 1..=kmax {
            let ck = coeffs.c[k];
            if ck == 0.0 {
                continue;
            }
            let prev = &deta[(i - k) * width..(i - k + 1) * width];
            for (a, b) in row.iter_mut().zip(prev) {
                *a -= ck * b;
            }
        }
        deta[i * width..(i + 1) * width].copy_from_slice(&row);
    }

    ScoreWorkspace {
        ystar,
        mustar,
        t_diag,
        deta,
        width,
    }
}

/// Partial log-likelihood `Σ_{t>p} ℓ_t(μ_t, ν)`.
pub fn loglik(spec: &ModelSpec, params: &ParamVector, sample: &Sample) -> Result<f64> {
    Ok(evaluate(spec, params, sample, Order::Value)?.loglik)
}

/// Analytic score vector in `(ν, d, α, β', φ', θ')` order.
pub fn score(spec: &ModelSpec, params: &ParamVector, sample: &Sample) -> Result<Vec<f64>> {
    Ok(evaluate(spec, params, sample, Order::Score)?.score.expect("score requested"))
}

/// Conditional Fisher information `G_n(γ)`.
pub fn fisher_info(spec: &ModelSpec, params: &ParamVector, sample: &Sample) -> Result<DMatrix<f64>> {
    Ok(evaluate(spec, params, sample, Order::Information)?.info.expect("information requested"))
}

/// Quadratic form `u' G⁻¹ u` restricted to the coordinates in `free`.
pub(crate) fn quadratic_form_inverse(g: &DMatrix<f64>, u: &[f64], free: &[bool]) -> Option<f64> {
    let idx: Vec<usize> = (0..free.len()).filter(|&i| free[i]).collect();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| g[(idx[a], idx[b])]);
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| u[i]));
    let sol = sub.cholesky()?.solve(&rhs);
    Some(rhs.dot(&sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::Link;
    use crate::special::psi;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn uniform_density_is_zero() {
        for &y in &[0.1, 0.5, 0.93] {
            assert!(log_density(y, 0.5, 2.0).abs() < 1e-14);
        }
        // Beta(2,2) at 0.5: 6·0.25 = 1.5
        assert_relative_eq!(log_density(0.5, 0.5, 4.0), 1.5f64.ln(), max_relative = 1e-13);
        assert_relative_eq!(log_density(0.5, 0.5, 4.0), 0.405465, max_relative = 1e-6);
    }

    #[test]
    fn info_weights_at_symmetric_mean() {
        let w = info_weights(0.5, 2.0);
        assert_eq!(w.v, 0.0);
        let z2 = PI * PI / 6.0;
        assert_relative_eq!(w.s, 0.5 * z2 - (z2 - 1.0), max_relative = 1e-13);
        assert_relative_eq!(w.s, 0.177533, max_relative = 1e-5);
        assert!(w.w > 0.0);
    }

    #[test]
    fn two_parameter_score_by_hand() {
        // p = q = 0, d = 0, no covariates: three observations, μ constant.
        let spec = ModelSpec::new(0, 0, 0).with_truncation(3);
        let y = vec![0.3, 0.55, 0.8];
        let sample = Sample::univariate(y.clone()).unwrap();
        let params = ParamVector::new(7.0, 0.0, 0.4, vec![], vec![], vec![]);
        let u = score(&spec, &params, &sample).unwrap();
        let mu = Link::Logit.inverse(0.4);
        let nu = 7.0;
        let mustar = psi(mu * nu) - psi((1.0 - mu) * nu);
        let mut u_nu = 0.0;
        let mut u_alpha = 0.0;
        for &yt in &y {
            let ys = (yt / (1.0 - yt)).ln();
            u_nu += mu * (ys - mustar) + (1.0 - yt).ln() - psi((1.0 - mu) * nu) + psi(nu);
            u_alpha += nu * (ys - mustar) * mu * (1.0 - mu);
        }
        assert_relative_eq!(u[0], u_nu, max_relative = 1e-13);
        assert_relative_eq!(u[2], u_alpha, max_relative = 1e-13);
    }

    #[test]
    fn info_nu_row_vanishes_at_half() {
        let spec = ModelSpec::new(1, 1, 0).with_truncation(10);
        let sample = Sample::univariate((0..50).map(|i| 0.3 + 0.4 * ((i * 7 % 11) as f64) / 11.0).collect()).unwrap();
        // α = 0, φ = 0, θ = 0, d = 0 keeps μ_t ≡ 0.5
        let params = ParamVector::new(2.0, 0.0, 0.0, vec![], vec![0.0], vec![0.0]);
        let g = fisher_info(&spec, &params, &sample).unwrap();
        for j in 1..spec.dim() {
            assert_eq!(g[(0, j)], 0.0);
        }
        assert_relative_eq!(g[(0, 0)], 49.0 * info_weights(0.5, 2.0).s, max_relative = 1e-12);
    }
}
