//! Model shape, parameter vector, observed sample and the forward recursion
//! producing `η_t`, `μ_t` and `r_t`.
//!
//! Time is 0-based in code: observation `i` is `y_{i+1}`. Row `i` of the
//! covariate matrix is the vector entering `η` at that observation, i.e.
//! `x_{t−1}` for `t = i+1`. With this alignment every lag the recursion
//! needs for `i ≥ p` is in range.

use crate::error::{Error, Result};
use crate::fracdiff::FracCoeffs;
use crate::link::Link;

/// Guard applied to observations before taking logs or the link.
pub const Y_GUARD: f64 = 1e-12;

pub const DEFAULT_TRUNCATION: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub p: usize,
    pub q: usize,
    /// Number of covariates.
    pub l: usize,
    pub link: Link,
    /// Truncation point of the MA(∞) sums.
    pub m: usize,
    pub include_intercept: bool,
}

impl ModelSpec {
    pub fn new(p: usize, q: usize, l: usize) -> Self {
        Self {
            p,
            q,
            l,
            link: Link::Logit,
            m: DEFAULT_TRUNCATION.max(p).max(q),
            include_intercept: true,
        }
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    pub fn with_truncation(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.include_intercept = false;
        self
    }

    /// Length of the full parameter vector `(ν, d, α, β', φ', θ')`.
    pub fn dim(&self) -> usize {
        self.p + self.q + self.l + 3
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < self.p.max(self.q).max(1) {
            return Err(Error::InvalidSpec(format!(
                "truncation m = {} must be at least max(p, q, 1) = {}",
                self.m,
                self.p.max(self.q).max(1)
            )));
        }
        Ok(())
    }

    pub fn index_nu(&self) -> usize {
        0
    }
    pub fn index_d(&self) -> usize {
        1
    }
    pub fn index_alpha(&self) -> usize {
        2
    }
    pub fn index_beta(&self, s: usize) -> usize {
        3 + s
    }
    pub fn index_phi(&self, s: usize) -> usize {
        3 + self.l + s
    }
    pub fn index_theta(&self, s: usize) -> usize {
        3 + self.l + self.p + s
    }

    /// Coordinate names in vector order, e.g. `nu, d, alpha, beta1, phi1, theta1`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["nu".to_string(), "d".to_string(), "alpha".to_string()];
        names.extend((1..=self.l).map(|s| format!("beta{s}")));
        names.extend((1..=self.p).map(|s| format!("phi{s}")));
        names.extend((1..=self.q).map(|s| format!("theta{s}")));
        names
    }
}

/// Parameters `(ν, d, α, β', φ', θ')`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub nu: f64,
    pub d: f64,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
}

impl ParamVector {
    pub fn new(nu: f64, d: f64, alpha: f64, beta: Vec<f64>, phi: Vec<f64>, theta: Vec<f64>) -> Self {
        Self {
            nu,
            d,
            alpha,
            beta,
            phi,
            theta,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + self.beta.len() + self.phi.len() + self.theta.len());
        v.push(self.nu);
        v.push(self.d);
        v.push(self.alpha);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.phi);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn from_slice(spec: &ModelSpec, v: &[f64]) -> Result<Self> {
        if v.len() != spec.dim() {
            return Err(Error::InvalidParams(format!(
                "expected {} coordinates, got {}",
                spec.dim(),
                v.len()
            )));
        }
        let (l, p) = (spec.l, spec.p);
        Ok(Self {
            nu: v[0],
            d: v[1],
            alpha: v[2],
            beta: v[3..3 + l].to_vec(),
            phi: v[3 + l..3 + l + p].to_vec(),
            theta: v[3 + l + p..].to_vec(),
        })
    }

    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.beta.len() != spec.l || self.phi.len() != spec.p || self.theta.len() != spec.q {
            return Err(Error::InvalidParams(format!(
                "dimensions (l={}, p={}, q={}) do not match the model (l={}, p={}, q={})",
                self.beta.len(),
                self.phi.len(),
                self.theta.len(),
                spec.l,
                spec.p,
                spec.q
            )));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParams(format!("precision ν = {} must be positive", self.nu)));
        }
        if !(self.d > -0.5 && self.d < 0.5) {
            return Err(Error::InvalidParams(format!("d = {} outside (−0.5, 0.5)", self.d)));
        }
        if self.to_vec().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite coordinate".into()));
        }
        Ok(())
    }
}

/// Observed series with its covariate rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    y: Vec<f64>,
    /// Row-major `n × l`.
    x: Vec<f64>,
    l: usize,
}

impl Sample {
    pub fn new(y: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidSample("empty series".into()));
        }
        if rows.len() != n && !(rows.is_empty()) {
            return Err(Error::InvalidSample(format!(
                "{} covariate rows for {} observations",
                rows.len(),
                n
            )));
        }
        let l = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(n * l);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != l {
                return Err(Error::InvalidSample(format!("covariate row {} has {} columns, expected {l}", i + 1, row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSample(format!("non-finite covariate in row {}", i + 1)));
            }
            x.extend_from_slice(row);
        }
        if let Some((i, v)) = y.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
            return Err(Error::InvalidSample(format!("y[{}] = {v} is not inside (0, 1)", i + 1)));
        }
        Ok(Self { y, x, l })
    }

    pub fn univariate(y: Vec<f64>) -> Result<Self> {
        Self::new(y, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn covariate_count(&self) -> usize {
        self.l
    }

    /// Covariate row `i` (0-based), or an empty slice when `l = 0`.
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.l..(i + 1) * self.l]
    }

    pub fn x_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.x_row(i).to_vec()).collect()
    }
}

#[inline]
pub(crate) fn guard_y(y: f64) -> f64 {
    y.clamp(Y_GUARD, 1.0 - Y_GUARD)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursionState {
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    /// r_t = g(y_t) − g(μ_t); zero for t ≤ p.
    pub r: Vec<f64>,
    /// g(y_t) on guarded observations.
    pub gy: Vec<f64>,
    /// x'_{t−1} β
    pub xb: Vec<f64>,
}

pub(crate) fn check_inputs(spec: &ModelSpec, params: &ParamVector, sample: &Sample) -> Result<()> {
    spec.validate()?;
    params.validate(spec)?;
    if sample.covariate_count() != spec.l {
        return Err(Error::InvalidSample(format!(
            "sample has {} covariates, model expects {}",
            sample.covariate_count(),
            spec.l
        )));
    }
    if sample.len() <= spec.p {
        return Err(Error::InvalidSample(format!(
            "need more than p = {} observations, got {}",
            spec.p,
            sample.len()
        )));
    }
    Ok(())
}

/// Runs the model recursion over the sample.
///
/// For `t ≤ p`: `r_t = 0` and `μ_t = g⁻¹(α + x'_{t−1}β)`. For `t > p`:
///
/// `η_t = α + x'_{t−1}β + Σ_j φ_j (g(y_{t−j}) − x'_{t−j−1}β) + Σ_{k=1}^{m} c_k r_{t−k}`
///
/// with pre-sample `r` equal to zero.
pub fn forward_recursion(spec: &ModelSpec, params: &ParamVector, sample: &Sample) -> Result<RecursionState> {
    check_inputs(spec, params, sample)?;
    let coeffs = FracCoeffs::new(params.d, &params.theta, spec.m);
    run_recursion(spec, params, sample, &coeffs.c)
}

pub(crate) fn run_recursion(spec: &ModelSpec, params: &ParamVector, sample: &Sample, c: &[f64]) -> Result<RecursionState> {
    let n = sample.len();
    let link = spec.link;
    let gy: Vec<f64> = sample.y().iter().map(|&y| link.forward(guard_y(y))).collect();
    let xb: Vec<f64> = (0..n).map(|i| dot(sample.x_row(i), &params.beta)).collect();
    let mut eta = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut r = vec![0.0; n];
    for i in 0..n {
        let mut e = params.alpha + xb[i];
        if i >= spec.p {
            for (j, phi) in params.phi.iter().enumerate() {
                let lag = i - j - 1;
                e += phi * (gy[lag] - xb[lag]);
            }
            let kmax = spec.m.min(i);
            for k in 1..=kmax {
                e += c[k] * r[i - k];
            }
        }
        if !e.is_finite() {
            return Err(Error::Recursion { t: i + 1 });
        }
        eta[i] = e;
        mu[i] = link.inverse(e);
        if i >= spec.p {
            r[i] = gy[i] - e;
        }
    }
    Ok(RecursionState { eta, mu, r, gy, xb })
}
