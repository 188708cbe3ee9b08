//! Rank-normalized split-R̂ and bulk effective sample size.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::PosteriorChains;
use crate::error::{Error, Result};

pub const MIN_CHAINS: usize = 2;
pub const MIN_STEPS: usize = 100;

/// Per-parameter convergence summary; `rhat` is `+inf` for a constant parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub ess: Vec<f64>,
    pub rhat: Vec<f64>,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().fold(f64::NEG_INFINITY, |a, &b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().fold(f64::INFINITY, |a, &b| a.min(b))
    }
}

pub fn diagnostics(chains: &PosteriorChains) -> Result<Diagnostics> {
    if chains.n_chains() < MIN_CHAINS || chains.n_steps() < MIN_STEPS {
        return Err(Error::Diagnostics(format!(
            "need at least {MIN_CHAINS} chains of {MIN_STEPS} kept steps, got {} x {}",
            chains.n_chains(),
            chains.n_steps()
        )));
    }
    let mut ess_v = Vec::with_capacity(chains.dim());
    let mut rhat_v = Vec::with_capacity(chains.dim());
    for k in 0..chains.dim() {
        let c = chains.param_chains(k);
        rhat_v.push(split_rhat(&c)?);
        ess_v.push(ess(&c)?);
    }
    Ok(Diagnostics { ess: ess_v, rhat: rhat_v })
}

fn check_shape(chains: &[Vec<f64>]) -> Result<usize> {
    let n = chains.first().map_or(0, Vec::len);
    if chains.is_empty() || n < 8 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Diagnostics("chains must be nonempty, of equal length >= 8".into()));
    }
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Diagnostics("chains contain non-finite draws".into()));
    }
    Ok(n)
}

/// Each chain cut into two halves (the middle draw dropped for odd lengths).
fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let half = chains[0].len() / 2;
    let off = chains[0].len() - half;
    chains.iter().flat_map(|c| [c[..half].to_vec(), c[off..].to_vec()]).collect()
}

fn is_constant(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().flatten().all(|&v| v == first)
}

/// Normal scores of the pooled ranks (average ranks for ties).
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = chains[0].len();
    let total = n * chains.len();
    let mut idx: Vec<(f64, usize)> =
        chains.iter().flatten().copied().enumerate().map(|(i, v)| (v, i)).collect();
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let std = Normal::standard();
    let mut z = vec![0.0; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j + 1 < total && idx[j + 1].0 == idx[i].0 {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let score = std.inverse_cdf((rank - 0.375) / (total as f64 + 0.25));
        for item in &idx[i..=j] {
            z[item.1] = score;
        }
        i = j + 1;
    }
    z.chunks(n).map(<[f64]>::to_vec).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)
}

fn plain_rhat(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_var(c)).collect::<Vec<_>>());
    let b = n * sample_var(&means);
    let var_plus = (n - 1.0) / n * w + b / n;
    if w == 0.0 {
        return f64::INFINITY;
    }
    (var_plus / w).sqrt()
}

/// Rank-normalized split-R̂: the larger of the bulk and folded values.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    if is_constant(chains) {
        return Ok(f64::INFINITY);
    }
    let s = split(chains);
    let bulk = plain_rhat(&rank_normalize(&s));
    let mut pooled: Vec<f64> = s.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let m = pooled.len();
    let median = if m % 2 == 1 { pooled[m / 2] } else { 0.5 * (pooled[m / 2 - 1] + pooled[m / 2]) };
    let folded: Vec<Vec<f64>> = s.iter().map(|c| c.iter().map(|v| (v - median).abs()).collect()).collect();
    let tail = plain_rhat(&rank_normalize(&folded));
    Ok(bulk.max(tail))
}

/// Biased autocovariance at every lag, via zero-padded FFT.
fn autocovariance(x: &[f64], planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    planner.plan_fft_forward(size).process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Bulk effective sample size: multi-chain autocorrelation on rank-normalized
/// split chains, truncated by Geyer's initial monotone sequence.
pub fn ess(chains: &[Vec<f64>]) -> Result<f64> {
    check_shape(chains)?;
    if is_constant(chains) {
        return Ok(0.0);
    }
    Ok(ess_raw(&rank_normalize(&split(chains))))
}

fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let mut planner = FftPlanner::new();
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c, &mut planner)).collect();
    let chain_var: Vec<f64> = acov.iter().map(|a| a[0] * n as f64 / (n as f64 - 1.0)).collect();
    let w = mean(&chain_var);
    let mut var_plus = w * (n as f64 - 1.0) / n as f64;
    if m > 1 {
        var_plus += sample_var(&chains.iter().map(|c| mean(c)).collect::<Vec<_>>());
    }
    if var_plus <= 0.0 {
        return 0.0;
    }
    let rho = |t: usize| 1.0 - (w - acov.iter().map(|a| a[t]).sum::<f64>() / m as f64) / var_plus;

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut t = 1;
    while t + 4 < n && even + odd > 0.0 {
        even = rho(t + 1);
        odd = rho(t + 2);
        if even + odd >= 0.0 {
            rho_hat[t + 1] = even;
            rho_hat[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 {
        rho_hat[max_t + 1] = even;
    }
    // Enforce a monotone sequence of paired sums.
    let mut t = 1;
    while t + 3 <= max_t {
        if rho_hat[t + 1] + rho_hat[t + 2] > rho_hat[t - 1] + rho_hat[t] {
            rho_hat[t + 1] = (rho_hat[t - 1] + rho_hat[t]) / 2.0;
            rho_hat[t + 2] = rho_hat[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + rho_hat[max_t + 1]).max(1.0 / total.log10());
    total / tau
}
