//! Gradient-based maximization: BFGS with Armijo backtracking, finished by
//! Newton steps on a finite-difference Hessian when the line search stalls
//! short of the gradient tolerance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub max_iter: usize,
    /// Stop once `|grad|_inf <= min(abs_tol, rel_tol * max(1, |f|))`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of Newton polishing steps after BFGS.
    pub polish_steps: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self { max_iter: 2000, rel_tol: 1e-6, abs_tol: 1e-5, polish_steps: 25 }
    }
}

impl OptConfig {
    pub fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.min(self.rel_tol * value.abs().max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Objective returning the value and, when the value is finite, the gradient.
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Option<Vec<f64>>)>;
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> Result<(f64, Option<Vec<f64>>)>,
{
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Option<Vec<f64>>)> {
        self(x)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn finite_point<O: Objective>(f: &mut O, x: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
    match f.eval(x)? {
        (v, Some(g)) if v.is_finite() && g.iter().all(|c| c.is_finite()) => Ok(Some((v, g))),
        _ => Ok(None),
    }
}

/// Maximizes `f` from `x0`. Fails if `f(x0)` is not finite.
pub fn maximize<O: Objective>(mut f: O, x0: &[f64], cfg: &OptConfig) -> Result<OptOutcome> {
    let n = x0.len();
    let (mut fx, mut g) = finite_point(&mut f, x0)?
        .ok_or_else(|| Error::Fit("objective is not finite at the initial point".into()))?;
    let mut x = DVector::from_column_slice(x0);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < cfg.max_iter && inf_norm(&g) > cfg.tolerance(fx) {
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut p = &h * &gv;
        let mut slope = p.dot(&gv);
        if !(slope > 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            p = gv.clone();
            slope = p.dot(&gv);
        }
        let mut alpha = if fresh { (1.0 / inf_norm(&g)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        let x_scale = 1.0 + x.amax();
        for _ in 0..60 {
            // Steps below the resolution of x cannot make progress.
            if alpha * p.amax() <= 1e-15 * x_scale {
                break;
            }
            let xn = &x + &p * alpha;
            if let Some((fnew, gnew)) = finite_point(&mut f, xn.as_slice())? {
                if fnew >= fx + 1e-4 * alpha * slope {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                break;
            }
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        stalled = if fnew - fx <= 1e-15 * fx.abs().max(1.0) { stalled + 1 } else { 0 };
        let s = &xn - &x;
        // y is the change in the gradient of -f.
        let y = DVector::from_column_slice(&g) - DVector::from_column_slice(&gnew);
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let a = &eye - &s * y.transpose() * rho;
            h = &a * &h * a.transpose() + &s * s.transpose() * rho;
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gnew;
        if stalled >= 3 {
            break;
        }
    }

    let mut x: Vec<f64> = x.iter().copied().collect();
    if inf_norm(&g) > cfg.tolerance(fx) {
        newton_polish(&mut f, &mut x, &mut fx, &mut g, cfg)?;
    }
    let grad_norm = inf_norm(&g);
    Ok(OptOutcome {
        converged: grad_norm <= cfg.tolerance(fx),
        x,
        value: fx,
        grad: g,
        grad_norm,
        iterations,
    })
}

fn newton_polish<O: Objective>(
    f: &mut O,
    x: &mut Vec<f64>,
    fx: &mut f64,
    g: &mut Vec<f64>,
    cfg: &OptConfig,
) -> Result<()> {
    for _ in 0..cfg.polish_steps {
        if inf_norm(g) <= cfg.tolerance(*fx) {
            return Ok(());
        }
        let Some(hess) = hessian_fd(|p| Ok(finite_point(f, p)?.map(|(_, g)| g)), x)? else {
            return Ok(());
        };
        let neg = -hess;
        let n = x.len();
        let mut step = None;
        let mut damping = 0.0;
        for _ in 0..12 {
            let m = &neg + DMatrix::<f64>::identity(n, n) * damping;
            if let Some(ch) = m.cholesky() {
                step = Some(ch.solve(&DVector::from_column_slice(g)));
                break;
            }
            damping = if damping == 0.0 { 1e-8 * neg.diagonal().abs().max().max(1.0) } else { damping * 10.0 };
        }
        let Some(step) = step else { return Ok(()) };
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..10 {
            let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + scale * s).collect();
            if let Some((fnew, gnew)) = finite_point(f, &xn)? {
                if inf_norm(&gnew) < inf_norm(g) && fnew >= *fx - 1e-8 * fx.abs().max(1.0) {
                    *x = xn;
                    *fx = fnew;
                    *g = gnew;
                    improved = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !improved {
            return Ok(());
        }
    }
    Ok(())
}

/// Symmetrized central-difference Jacobian of `grad` at `x`, or `None` if a
/// probe point leaves the support.
pub fn hessian_fd<G>(mut grad: G, x: &[f64]) -> Result<Option<DMatrix<f64>>>
where
    G: FnMut(&[f64]) -> Result<Option<Vec<f64>>>,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for k in 0..n {
        let step = 1e-4 * x[k].abs().max(1.0);
        probe[k] = x[k] + step;
        let Some(gp) = grad(&probe)? else { return Ok(None) };
        probe[k] = x[k] - step;
        let Some(gm) = grad(&probe)? else { return Ok(None) };
        probe[k] = x[k];
        for j in 0..n {
            h[(j, k)] = (gp[j] - gm[j]) / (2.0 * step);
        }
    }
    Ok(Some((&h + h.transpose()) * 0.5))
}
