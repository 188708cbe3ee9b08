//! MAP fitting, adaptive Metropolis posterior sampling, convergence
//! diagnostics and posterior-predictive sampling for the determinantal model.

mod diagnostics;
mod mcmc;
mod predict;

pub use diagnostics::{diagnostics, ess, split_rhat, Diagnostics};
pub use mcmc::{adaptive_metropolis, adaptive_mh, McmcConfig, PosteriorChains};
pub use predict::{posterior_predict, predict_from_draws, ParamDraws, Prediction, RhatGate};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use crate::prior::PriorSpec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{FeatureLayout, ModelParams};
use crate::likelihood::{first_impossible_observation, log_posterior_and_grad, LikelihoodConfig};
use crate::optim::{hessian_fd, maximize, OptConfig};

/// Settings for [`map_fit`].
#[derive(Debug, Clone, Default)]
pub struct MapConfig {
    pub opt: OptConfig,
    pub likelihood: LikelihoodConfig,
    /// Starting point; defaults to beta = 0, log-lengthscales = 0.
    pub init: Option<ModelParams>,
    /// Optimize beta only, holding the initial lengthscales.
    pub fix_lengthscales: bool,
}

/// A point estimate with its optimizer record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: ModelParams,
    pub log_posterior: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub provenance: String,
}

const INIT_SHRINK_STEPS: usize = 60;

/// Starting parameters with a finite log posterior. Lengthscales are
/// shrunk (similarity pushed towards the identity) until every
/// observation has positive probability.
fn feasible_start(
    data: &Dataset,
    layout: &FeatureLayout,
    priors: &PriorSpec,
    cfg: &MapConfig,
) -> Result<ModelParams> {
    let mut params = cfg.init.clone().unwrap_or_else(|| ModelParams::zeros(layout.clone()));
    params.check_shape()?;
    if params.layout != *layout {
        return Err(Error::Argument("initial parameters use a different feature layout".into()));
    }
    priors.validate(params.beta.len(), params.log_lengthscales.len())?;
    for _ in 0..INIT_SHRINK_STEPS {
        match first_impossible_observation(&params, data, &cfg.likelihood)? {
            None => return Ok(params),
            Some(_) if cfg.fix_lengthscales || params.log_lengthscales.is_empty() => break,
            Some(_) => params.log_lengthscales.iter_mut().for_each(|v| *v -= 1.0),
        }
    }
    let id = first_impossible_observation(&params, data, &cfg.likelihood)?.unwrap_or_default();
    Err(Error::Fit(format!(
        "observation {id} has zero probability under every tried lengthscale; \
         its chosen items are indistinguishable to the similarity model"
    )))
}

/// Maximum a posteriori estimate of `(beta, log_lengthscales)`.
pub fn map_fit(data: &Dataset, priors: &PriorSpec, cfg: &MapConfig) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::Argument("map_fit needs a nonempty dataset".into()));
    }
    let layout = data.layout();
    let start = feasible_start(data, &layout, priors, cfg)?;
    let d = start.beta.len();
    let fixed_ls = start.log_lengthscales.clone();

    let to_params = |theta: &[f64]| -> ModelParams {
        if cfg.fix_lengthscales {
            ModelParams { beta: theta.to_vec(), log_lengthscales: fixed_ls.clone(), layout: layout.clone() }
        } else {
            ModelParams {
                beta: theta[..d].to_vec(),
                log_lengthscales: theta[d..].to_vec(),
                layout: layout.clone(),
            }
        }
    };
    let objective = |theta: &[f64]| -> Result<(f64, Option<Vec<f64>>)> {
        let p = to_params(theta);
        match log_posterior_and_grad(&p, data, priors, &cfg.likelihood) {
            Ok((v, Some(mut g))) => {
                if cfg.fix_lengthscales {
                    g.truncate(d);
                }
                Ok((v, Some(g)))
            }
            Ok((v, None)) => Ok((v, None)),
            // A finite-difference probe that leaves the support is a rejected step.
            Err(Error::Domain(_)) => Ok((f64::NEG_INFINITY, None)),
            Err(e) => Err(e),
        }
    };
    let x0 = if cfg.fix_lengthscales { start.beta.clone() } else { start.to_vec() };
    let out = maximize(objective, &x0, &cfg.opt)?;
    Ok(FitResult {
        params: to_params(&out.x),
        log_posterior: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        provenance: format!(
            "map_fit: BFGS + Newton polish, max_iter {}, tol min({:e}, {:e}*max(1,|lp|)), \
             fixed lengthscales: {}",
            cfg.opt.max_iter, cfg.opt.abs_tol, cfg.opt.rel_tol, cfg.fix_lengthscales
        ),
    })
}

/// Inverse of the negative finite-difference Hessian of the log posterior
/// at `params`, or `None` if it is not positive definite.
pub fn laplace_covariance(
    params: &ModelParams,
    data: &Dataset,
    priors: &PriorSpec,
    likelihood: &LikelihoodConfig,
) -> Result<Option<DMatrix<f64>>> {
    let layout = params.layout.clone();
    let grad = |theta: &[f64]| -> Result<Option<Vec<f64>>> {
        let p = ModelParams::from_vec(&layout, theta)?;
        match log_posterior_and_grad(&p, data, priors, likelihood) {
            Ok((_, g)) => Ok(g),
            Err(Error::Domain(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let Some(h) = hessian_fd(grad, &params.to_vec())? else { return Ok(None) };
    Ok((-h).cholesky().map(|c| c.inverse()))
}
