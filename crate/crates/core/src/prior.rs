use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::kernel::{FeatureLayout, ModelParams};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Independent Gaussian priors on beta and on the log-lengthscales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta_mean: Vec<f64>,
    pub beta_sd: Vec<f64>,
    pub loglen_mean: Vec<f64>,
    pub loglen_sd: Vec<f64>,
}

impl PriorSpec {
    pub fn isotropic(d: usize, beta_sd: f64, d_len: usize, loglen_sd: f64) -> Self {
        Self {
            beta_mean: vec![0.0; d],
            beta_sd: vec![beta_sd; d],
            loglen_mean: vec![0.0; d_len],
            loglen_sd: vec![loglen_sd; d_len],
        }
    }

    /// beta ~ N(0, 2^2), log-lengthscale ~ N(0, 1).
    pub fn default_for(layout: &FeatureLayout) -> Self {
        Self::isotropic(layout.n_quality(), 2.0, layout.n_lengthscales(), 1.0)
    }

    pub fn validate(&self, d: usize, d_len: usize) -> Result<()> {
        if self.beta_mean.len() != d || self.beta_sd.len() != d {
            return arg(format!("beta prior has wrong length, expected {d}"));
        }
        if self.loglen_mean.len() != d_len || self.loglen_sd.len() != d_len {
            return arg(format!("lengthscale prior has wrong length, expected {d_len}"));
        }
        if self.beta_sd.iter().chain(&self.loglen_sd).any(|&s| !(s > 0.0 && s.is_finite())) {
            return arg("prior standard deviations must be positive and finite");
        }
        if self.beta_mean.iter().chain(&self.loglen_mean).any(|m| !m.is_finite()) {
            return arg("prior means must be finite");
        }
        Ok(())
    }

    /// Sum of the Gaussian log densities, normalizing constants included.
    pub fn log_density(&self, params: &ModelParams) -> f64 {
        gaussian_log_density(&params.beta, &self.beta_mean, &self.beta_sd)
            + gaussian_log_density(&params.log_lengthscales, &self.loglen_mean, &self.loglen_sd)
    }

    /// Gradient of [`Self::log_density`] in `(beta, log_lengthscales)` order.
    pub fn grad(&self, params: &ModelParams) -> Vec<f64> {
        let b = params.beta.iter().zip(&self.beta_mean).zip(&self.beta_sd);
        let l = params.log_lengthscales.iter().zip(&self.loglen_mean).zip(&self.loglen_sd);
        b.chain(l).map(|((x, m), s)| -(x - m) / (s * s)).collect()
    }

    /// Means in `(beta, log_lengthscales)` order.
    pub fn mean_vec(&self) -> Vec<f64> {
        self.beta_mean.iter().chain(&self.loglen_mean).copied().collect()
    }

    pub fn sd_vec(&self) -> Vec<f64> {
        self.beta_sd.iter().chain(&self.loglen_sd).copied().collect()
    }
}

pub(crate) fn gaussian_log_density(x: &[f64], mean: &[f64], sd: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(sd)
        .map(|((x, m), s)| {
            let z = (x - m) / s;
            -0.5 * z * z - s.ln() - LN_SQRT_2PI
        })
        .sum()
}
