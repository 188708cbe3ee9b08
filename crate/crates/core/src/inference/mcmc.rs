use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{laplace_covariance, map_fit, MapConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{FeatureLayout, ModelParams};
use crate::likelihood::{dataset_log_posterior_with, LikelihoodConfig};
use crate::prior::PriorSpec;
use crate::rng::RngState;

#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub chains: usize,
    pub warmup: usize,
    pub steps: usize,
    /// Acceptance rate the global proposal scale is steered towards during warmup.
    pub target_accept: f64,
    /// Initial points are `center + overdispersion * chol(cov) * z`.
    pub overdispersion: f64,
    /// Warmup iterations before the empirical covariance replaces the initial one.
    pub adapt_start: usize,
    /// Warmup iterations between covariance refreshes.
    pub adapt_every: usize,
    pub likelihood: LikelihoodConfig,
    pub map: MapConfig,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chains: 25,
            warmup: 2000,
            steps: 5000,
            target_accept: 0.234,
            overdispersion: 2.0,
            adapt_start: 200,
            adapt_every: 50,
            likelihood: LikelihoodConfig::default(),
            map: MapConfig::default(),
        }
    }
}

/// Kept draws, indexed `[chain][step][parameter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChains {
    pub layout: FeatureLayout,
    pub draws: Vec<Vec<Vec<f64>>>,
    pub acceptance_rates: Vec<f64>,
    pub warmup: usize,
}

impl PosteriorChains {
    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_steps(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.layout.n_params()
    }

    /// Draws of parameter `k`, one vector per chain.
    pub fn param_chains(&self, k: usize) -> Vec<Vec<f64>> {
        self.draws.iter().map(|c| c.iter().map(|t| t[k]).collect()).collect()
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        let mut count = 0usize;
        for t in self.draws.iter().flatten() {
            count += 1;
            for (a, b) in m.iter_mut().zip(t) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= count.max(1) as f64);
        m
    }
}

struct ChainOutput {
    kept: Vec<Vec<f64>>,
    warmup_accepts: usize,
    kept_accepts: usize,
}

fn scaled_chol(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let dim = cov.nrows();
    let c = cov * (2.38f64.powi(2) / dim as f64);
    let ridge = 1e-10 * c.diagonal().abs().max().max(1e-300);
    (c + DMatrix::identity(dim, dim) * ridge).cholesky().map(|ch| ch.l())
}

fn run_chain<F>(
    target: &F,
    center: &[f64],
    cov0: &DMatrix<f64>,
    cfg: &McmcConfig,
    state: RngState,
) -> Result<ChainOutput>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let dim = center.len();
    let mut rng = state.rng();
    let init_l = cov0.clone().cholesky().map(|c| c.l()).ok_or_else(|| {
        Error::Tuning("initial proposal covariance is not positive definite".into())
    })?;
    let normal = |rng: &mut crate::rng::StreamRng| -> DVector<f64> {
        DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal))
    };

    let c = DVector::from_column_slice(center);
    let mut theta = c.clone();
    let mut lp = target(center)?;
    for _ in 0..100 {
        let cand = &c + &init_l * normal(&mut rng) * cfg.overdispersion;
        let v = target(cand.as_slice())?;
        if v.is_finite() {
            theta = cand;
            lp = v;
            break;
        }
    }
    if !lp.is_finite() {
        return Err(Error::Tuning("no finite starting point near the center".into()));
    }

    let mut prop = scaled_chol(cov0).ok_or_else(|| Error::Tuning("degenerate initial covariance".into()))?;
    let mut log_scale = 0.0f64;
    let mut mean = DVector::<f64>::zeros(dim);
    let mut m2 = DMatrix::<f64>::zeros(dim, dim);
    let mut seen = 0usize;
    let mut out = ChainOutput { kept: Vec::with_capacity(cfg.steps), warmup_accepts: 0, kept_accepts: 0 };

    for t in 0..cfg.warmup + cfg.steps {
        let cand = &theta + &prop * normal(&mut rng) * log_scale.exp();
        let lp_new = target(cand.as_slice())?;
        let log_ratio = lp_new - lp;
        let accept_prob = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        let u: f64 = rng.random();
        let accepted = u < accept_prob;
        if accepted {
            theta = cand;
            lp = lp_new;
        }
        if t < cfg.warmup {
            out.warmup_accepts += accepted as usize;
            seen += 1;
            let delta = &theta - &mean;
            mean += &delta / seen as f64;
            m2 += &delta * (&theta - &mean).transpose();
            log_scale += (accept_prob - cfg.target_accept) / ((t + 1) as f64).powf(0.6);
            log_scale = log_scale.clamp(-15.0, 5.0);
            let n = t + 1;
            if n >= cfg.adapt_start && n % cfg.adapt_every.max(1) == 0 && seen > dim + 1 {
                if let Some(l) = scaled_chol(&(&m2 / (seen - 1) as f64)) {
                    prop = l;
                }
            }
        } else {
            out.kept_accepts += accepted as usize;
            out.kept.push(theta.iter().copied().collect());
        }
    }
    if cfg.warmup > 0 && out.warmup_accepts == 0 {
        return Err(Error::Tuning(format!(
            "no proposal accepted during {} warmup iterations (final log-scale {log_scale:.2}, \
             log posterior at start {lp:.4})",
            cfg.warmup
        )));
    }
    Ok(out)
}

/// Adaptive random-walk Metropolis on an arbitrary log density. Chain `c`
/// uses the random stream `rng.derive(&[c])`.
pub fn adaptive_metropolis<F>(
    target: F,
    layout: FeatureLayout,
    center: &[f64],
    cov0: &DMatrix<f64>,
    cfg: &McmcConfig,
    rng: &RngState,
) -> Result<PosteriorChains>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if cfg.chains == 0 || cfg.steps == 0 {
        return Err(Error::Argument("need at least one chain and one kept step".into()));
    }
    if !(cfg.target_accept > 0.0 && cfg.target_accept < 1.0) {
        return Err(Error::Argument("target acceptance must lie in (0, 1)".into()));
    }
    if layout.n_params() != center.len() {
        return Err(Error::Argument("layout does not match the parameter dimension".into()));
    }
    if cov0.nrows() != center.len() || cov0.ncols() != center.len() {
        return Err(Error::Argument("initial covariance does not match the parameter dimension".into()));
    }
    let outputs: Vec<Result<ChainOutput>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(&target, center, cov0, cfg, rng.derive(&[c as u64])))
        .collect();
    let mut draws = Vec::with_capacity(cfg.chains);
    let mut acceptance_rates = Vec::with_capacity(cfg.chains);
    for out in outputs {
        let out = out?;
        acceptance_rates.push(out.kept_accepts as f64 / cfg.steps as f64);
        draws.push(out.kept);
    }
    Ok(PosteriorChains { layout, draws, acceptance_rates, warmup: cfg.warmup })
}

/// Posterior sampling for the determinantal model, started around the MAP
/// with a Laplace-approximation proposal.
pub fn adaptive_mh(
    data: &Dataset,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    rng: &RngState,
) -> Result<PosteriorChains> {
    let layout = data.layout();
    priors.validate(layout.n_quality(), layout.n_lengthscales())?;
    let (center, laplace) = if data.is_empty() {
        (priors.mean_vec(), None)
    } else {
        let map_cfg = MapConfig { likelihood: cfg.likelihood.clone(), ..cfg.map.clone() };
        let fit = map_fit(data, priors, &map_cfg)?;
        let cov = laplace_covariance(&fit.params, data, priors, &cfg.likelihood)?;
        (fit.params.to_vec(), cov)
    };
    let cov0 = laplace.unwrap_or_else(|| {
        let sd = priors.sd_vec();
        DMatrix::from_diagonal(&DVector::from_iterator(sd.len(), sd.iter().map(|s| 0.01 * s * s)))
    });
    let target = |theta: &[f64]| -> Result<f64> {
        let p = ModelParams::from_vec(&layout, theta)?;
        dataset_log_posterior_with(&p, data, priors, &cfg.likelihood)
    };
    adaptive_metropolis(target, layout.clone(), &center, &cov0, cfg, rng)
}
