//! Box-constrained quasi-Newton minimizer.
//!
//! Projected BFGS with a dense inverse-Hessian approximation, suited to the
//! small parameter dimensions of these models. Coordinates sitting on a bound
//! with the gradient pushing outward are frozen for the iteration; the rest
//! take a quasi-Newton step, and the trial point is projected back into the
//! box before an Armijo backtracking test along the projected path.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    /// ∞-norm of `P(x − g) − x`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| ((xi - g[i]).clamp(self.lower[i], self.upper[i]) - xi).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Converged when the projected-gradient ∞-norm is at most
    /// `gradient_tolerance · (1 + |f|)`.
    pub gradient_tolerance: f64,
    pub max_backtracks: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            max_backtracks: 60,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub projected_gradient_norm: f64,
}

const ARMIJO_C1: f64 = 1e-4;
const BOUND_EPS: f64 = 1e-12;
const FLAT_NOISE: f64 = 1e3;
const ROOT_BACKTRACKS: usize = 8;
const DIFF_STEP: f64 = 1e-6;

/// Minimizes `objective` over the box. The objective returns `None` where it
/// is undefined; such points are treated as infinitely bad by the line search.
///
/// `metric` supplies an inverse-Hessian approximation at a point. It seeds the
/// quasi-Newton matrix and replaces it whenever the update stops producing
/// descent; the identity is used when it is absent or returns `None`.
pub fn minimize<F>(
    mut objective: F,
    mut metric: Option<&mut dyn FnMut(&[f64]) -> Option<DMatrix<f64>>>,
    x0: &[f64],
    bounds: &BoxBounds,
    opts: &MinimizeOptions,
) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut f, mut g) = objective(&x)?;
    let mut evaluations = 1;
    let mut fresh = |x: &[f64]| -> DMatrix<f64> {
        metric
            .as_mut()
            .and_then(|m| m(x))
            .filter(|h| h.nrows() == n && h.ncols() == n && h.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| DMatrix::identity(n, n))
    };
    let mut h = fresh(&x);
    let mut iterations = 0;
    let mut fresh_metric = true;

    loop {
        let pg = bounds.projected_gradient_norm(&x, &g);
        if pg <= opts.gradient_tolerance * (1.0 + f.abs()) {
            return Some(Minimum {
                x,
                f,
                gradient: g,
                iterations,
                evaluations,
                status: Status::Converged,
                projected_gradient_norm: pg,
            });
        }
        if iterations >= opts.max_iterations {
            return Some(Minimum {
                x,
                f,
                gradient: g,
                iterations,
                evaluations,
                status: Status::MaxIterations,
                projected_gradient_norm: pg,
            });
        }

        let active: Vec<bool> = (0..n)
            .map(|i| {
                (x[i] <= bounds.lower[i] + BOUND_EPS && g[i] > 0.0)
                    || (x[i] >= bounds.upper[i] - BOUND_EPS && g[i] < 0.0)
            })
            .collect();
        let mut dir = free_direction(&h, &g, &active);
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = fresh(&x);
            fresh_metric = true;
            dir = free_direction(&h, &g, &active);
            slope = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                dir = (0..n).map(|i| if active[i] { 0.0 } else { -g[i] }).collect();
            }
        }

        // Below the rounding error of f the line search cannot tell steps
        // apart; switch to scoring steps that drive the gradient to zero.
        let noise = FLAT_NOISE * f64::EPSILON * (1.0 + f.abs());
        let flat = -slope <= noise;
        let accepted = if flat {
            if !fresh_metric {
                h = fresh(&x);
                fresh_metric = true;
                dir = free_direction(&h, &g, &active);
            }
            let newton = difference_newton(&mut objective, &mut evaluations, &x, &g, &active, bounds);
            newton
                .and_then(|nd| root_search(&mut objective, &mut evaluations, &x, f, &nd, pg, bounds))
                .or_else(|| root_search(&mut objective, &mut evaluations, &x, f, &dir, pg, bounds))
        } else {
            let found = armijo_search(&mut objective, &mut evaluations, &x, (f, pg, noise), &g, &dir, bounds, opts.max_backtracks);
            if found.is_none() && !fresh_metric {
                h = fresh(&x);
                fresh_metric = true;
                continue;
            }
            found
        };
        let Some((xn, fn_, gn)) = accepted else {
            return Some(Minimum {
                projected_gradient_norm: pg,
                x,
                f,
                gradient: g,
                iterations,
                evaluations,
                status: Status::LineSearchFailed,
            });
        };

        if flat {
            x = xn;
            f = fn_;
            g = gn;
            h = fresh(&x);
            iterations += 1;
            continue;
        }
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        let yv = DVector::from_iterator(n, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() && sy > 0.0 {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H ← H − ρ(H y s' + s y' H) + (ρ² y'Hy + ρ) s s'
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh_metric = false;
        }
        x = xn;
        f = fn_;
        g = gn;
        iterations += 1;
    }
}

type Trial = Option<(Vec<f64>, f64, Vec<f64>)>;

#[allow(clippy::too_many_arguments)]
fn armijo_search<F>(
    objective: &mut F,
    evaluations: &mut usize,
    x: &[f64],
    (f, pg, noise): (f64, f64, f64),
    g: &[f64],
    dir: &[f64],
    bounds: &BoxBounds,
    max_backtracks: usize,
) -> Trial
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let mut step = 1.0;
    for _ in 0..max_backtracks {
        let mut trial: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + step * b).collect();
        bounds.project(&mut trial);
        let decrease: f64 = trial.iter().zip(x).zip(g).map(|((t, xi), gi)| gi * (t - xi)).sum();
        *evaluations += 1;
        if let Some((ft, gt)) = objective(&trial) {
            let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
            if finite
                && ft <= f + ARMIJO_C1 * decrease
                && (f - ft > noise || bounds.projected_gradient_norm(&trial, &gt) < pg)
            {
                return Some((trial, ft, gt));
            }
        }
        step *= 0.5;
    }
    None
}

/// Accepts a step that leaves f unchanged up to rounding and shrinks the
/// projected gradient.
fn root_search<F>(objective: &mut F, evaluations: &mut usize, x: &[f64], f: f64, dir: &[f64], pg: f64, bounds: &BoxBounds) -> Trial
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let noise = FLAT_NOISE * f64::EPSILON * (1.0 + f.abs());
    let mut step = 1.0;
    for _ in 0..ROOT_BACKTRACKS {
        let mut trial: Vec<f64> = x.iter().zip(dir).map(|(a, b)| a + step * b).collect();
        bounds.project(&mut trial);
        *evaluations += 1;
        if let Some((ft, gt)) = objective(&trial) {
            if ft.is_finite()
                && gt.iter().all(|v| v.is_finite())
                && ft <= f + noise
                && bounds.projected_gradient_norm(&trial, &gt) < pg
            {
                return Some((trial, ft, gt));
            }
        }
        step *= 0.5;
    }
    None
}

/// Newton direction from a Hessian formed by central differences of the
/// gradient over the free coordinates; `None` unless it is positive definite.
fn difference_newton<F>(objective: &mut F, evaluations: &mut usize, x: &[f64], g: &[f64], active: &[bool], bounds: &BoxBounds) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let idx: Vec<usize> = (0..x.len()).filter(|&i| !active[i]).collect();
    let k = idx.len();
    if k == 0 {
        return None;
    }
    let mut hess = DMatrix::zeros(k, k);
    for (c, &j) in idx.iter().enumerate() {
        let h = DIFF_STEP * x[j].abs().max(1.0);
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[j] = (x[j] + h).min(bounds.upper[j]);
        down[j] = (x[j] - h).max(bounds.lower[j]);
        let width = up[j] - down[j];
        if width <= 0.0 {
            return None;
        }
        *evaluations += 2;
        let (_, gu) = objective(&up)?;
        let (_, gd) = objective(&down)?;
        for (r, &i) in idx.iter().enumerate() {
            hess[(r, c)] = (gu[i] - gd[i]) / width;
        }
    }
    let sym = (&hess + hess.transpose()) * 0.5;
    let chol = sym.cholesky()?;
    let rhs = DVector::from_iterator(k, idx.iter().map(|&i| -g[i]));
    let step = chol.solve(&rhs);
    let mut dir = vec![0.0; x.len()];
    for (r, &i) in idx.iter().enumerate() {
        dir[i] = step[r];
    }
    dir.iter().all(|v| v.is_finite()).then_some(dir)
}

/// Quasi-Newton step over the free coordinates. With `B = H⁻¹`, the step
/// uses `(B_FF)⁻¹ = H_FF − H_FA H_AA⁻¹ H_AF`, the inverse of the Hessian
/// restricted to the free face.
fn free_direction(h: &DMatrix<f64>, g: &[f64], active: &[bool]) -> Vec<f64> {
    let n = g.len();
    let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
    let fixed: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let block = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |r, c| h[(rows[r], cols[c])]);
    let mut reduced = block(&free, &free);
    if !fixed.is_empty() {
        let cross = block(&free, &fixed);
        if let Some(inv) = block(&fixed, &fixed).try_inverse() {
            let schur = &reduced - &cross * inv * cross.transpose();
            if schur.iter().all(|v| v.is_finite()) {
                reduced = schur;
            }
        }
    }
    let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
    let step = -(reduced * gf);
    let mut dir = vec![0.0; n];
    for (r, &i) in free.iter().enumerate() {
        dir[i] = step[r];
    }
    dir
}
