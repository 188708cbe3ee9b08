use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{diagnostics, PosteriorChains};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{build_kernel_jittered, FeatureLayout, ModelParams};
use crate::likelihood::LikelihoodConfig;
use crate::rng::RngState;
use crate::sampling::SpectralSampler;
use crate::subset::SubsetIndex;

/// Convergence requirement checked before predicting from chains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhatGate {
    pub max_rhat: f64,
    /// Predict anyway when the gate fails.
    pub allow_override: bool,
}

impl Default for RhatGate {
    fn default() -> Self {
        Self { max_rhat: 1.05, allow_override: false }
    }
}

/// A pool of parameter vectors to predict from.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDraws {
    pub layout: FeatureLayout,
    pub draws: Vec<Vec<f64>>,
}

impl ParamDraws {
    pub fn from_chains(chains: &PosteriorChains) -> Self {
        Self { layout: chains.layout.clone(), draws: chains.draws.iter().flatten().cloned().collect() }
    }

    pub fn point(params: &ModelParams) -> Self {
        Self { layout: params.layout.clone(), draws: vec![params.to_vec()] }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub observation: String,
    pub draw: usize,
    pub chosen: SubsetIndex,
}

/// `n_draws` rounds of: pick a parameter vector uniformly from the pool, then
/// sample one subset for every evaluation assortment. Round `k` uses the
/// stream `rng.derive(&[k])`. Output is ordered by round, then observation.
pub fn predict_from_draws(
    data: &Dataset,
    pool: &ParamDraws,
    likelihood: &LikelihoodConfig,
    rng: &RngState,
    n_draws: usize,
) -> Result<Vec<Prediction>> {
    if pool.draws.is_empty() {
        return Err(Error::Argument("no parameter draws to predict from".into()));
    }
    if pool.layout != data.layout() {
        return Err(Error::Argument("parameter layout does not match the evaluation dataset".into()));
    }
    let params: Vec<ModelParams> =
        pool.draws.iter().map(|t| ModelParams::from_vec(&pool.layout, t)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n_draws * data.len());
    for k in 0..n_draws {
        let mut r = rng.derive(&[k as u64]).rng();
        let p = &params[r.random_range(0..params.len())];
        for obs in &data.observations {
            let bundle = build_kernel_jittered(p, &obs.assortment, &likelihood.mode, likelihood.jitter)?;
            let chosen = SpectralSampler::new(&bundle.l)?.sample(&mut r);
            out.push(Prediction { observation: obs.id.clone(), draw: k, chosen });
        }
    }
    Ok(out)
}

/// Posterior-predictive subsets from MCMC output, after the R̂ gate.
pub fn posterior_predict(
    data: &Dataset,
    chains: &PosteriorChains,
    likelihood: &LikelihoodConfig,
    rng: &RngState,
    n_draws: usize,
    gate: &RhatGate,
) -> Result<Vec<Prediction>> {
    if !gate.allow_override {
        let diag = diagnostics(chains)?;
        let worst = diag.max_rhat();
        if !(worst <= gate.max_rhat) {
            return Err(Error::Diagnostics(format!(
                "max split-R-hat {worst:.4} exceeds the gate {}; rhat per parameter {:?}",
                gate.max_rhat, diag.rhat
            )));
        }
    }
    predict_from_draws(data, &ParamDraws::from_chains(chains), likelihood, rng, n_draws)
}
