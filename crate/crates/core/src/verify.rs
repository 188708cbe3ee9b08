//! Self-checks of the model's structural identities on random instances:
//! the normalizer identity, the Gumbel random-utility representation, the
//! utility decomposition, the logistic and MNL special cases, and the
//! spectral sampler.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::{logistic_log_likelihood, mnl_log_likelihood};
use crate::error::Result;
use crate::kernel::{build_kernel, Assortment, FeatureLayout, ModelParams, SimilarityMode};
use crate::likelihood::{enumerate_pmf, implied_utility, log_normalizer, subset_log_likelihood};
use crate::rng::{RngState, StreamRng};
use crate::sampling::{empirical_pmf, total_variation, GumbelRumSampler, SpectralSampler};
use crate::subset::SubsetIndex;

pub const NORMALIZER_TOL: f64 = 1e-8;
pub const SAMPLER_TV_TOL: f64 = 0.02;
pub const DECOMPOSITION_TOL: f64 = 1e-9;
pub const CORRECTION_MAX: f64 = 1e-12;
pub const EQUIVALENCE_TOL: f64 = 1e-9;
pub const LIMIT_TV_TOL: f64 = 1e-6;
pub const ALL_ONES_MASS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Instances per check; `None` uses each check's full-size default.
    pub trials: Option<usize>,
    pub draws: usize,
    /// Flips the sign of the similarity correction, so the decomposition check must fail.
    pub inject_fault: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { trials: None, draws: 100_000, inject_fault: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// The worst instance when the check failed, enough to replay it.
    pub failing_instance: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

struct Tracker {
    name: &'static str,
    tolerance: f64,
    instances: usize,
    worst: f64,
    worst_instance: Option<Value>,
    failed: bool,
}

impl Tracker {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, instances: 0, worst: 0.0, worst_instance: None, failed: false }
    }

    /// Records one instance; NaN deviations count as failures.
    fn record(&mut self, deviation: f64, instance: impl FnOnce() -> Value) {
        self.record_with(deviation, deviation <= self.tolerance, instance);
    }

    fn record_with(&mut self, deviation: f64, ok: bool, instance: impl FnOnce() -> Value) {
        self.instances += 1;
        let ok = ok && !deviation.is_nan();
        if !ok && !self.failed {
            self.failed = true;
            self.worst_instance = Some(instance());
        }
        if deviation > self.worst || deviation.is_nan() {
            self.worst = if deviation.is_nan() { f64::INFINITY } else { deviation };
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: !self.failed,
            instances: self.instances,
            max_deviation: self.worst,
            tolerance: self.tolerance,
            failing_instance: self.worst_instance,
        }
    }
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!((0..m.nrows()).map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn random_psd(n: usize, rng: &mut StreamRng) -> DMatrix<f64> {
    let b = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    &b * b.transpose() / n as f64
}

/// Random model instance: `n` items with `d` standard normal features,
/// every feature in both models, one lengthscale per feature.
fn random_instance(n: usize, d: usize, rng: &mut StreamRng) -> (ModelParams, Assortment) {
    let rows = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let a = Assortment::from_rows(rows).expect("finite rows");
    let beta = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let ll = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
    (ModelParams::new(beta, ll, FeatureLayout::all(d)).expect("consistent shapes"), a)
}

fn random_subset(n: usize, rng: &mut StreamRng) -> SubsetIndex {
    SubsetIndex::from_mask(rng.random_range(0..1u64 << n), n)
}

pub fn check_normalizer(trials: usize, rng: &RngState) -> Result<CheckResult> {
    let mut t = Tracker::new("normalizer_identity", NORMALIZER_TOL);
    for k in 0..trials {
        let mut r = rng.derive(&[k as u64]).rng();
        let n = 1 + k % 10;
        let l = random_psd(n, &mut r);
        let pmf = enumerate_pmf(&l)?;
        let sum: f64 = pmf.weights.iter().sum();
        let det = log_normalizer(&l)?.exp();
        t.record((sum - det).abs() / det, || json!({ "kernel": matrix_json(&l) }));
    }
    Ok(t.finish())
}

pub fn check_gumbel_rum(trials: usize, draws: usize, rng: &RngState) -> Result<CheckResult> {
    let mut t = Tracker::new("gumbel_rum_equivalence", SAMPLER_TV_TOL);
    for k in 0..trials {
        let mut r = rng.derive(&[k as u64]).rng();
        let n = 1 + k % 5;
        let (p, a) = random_instance(n, 2, &mut r);
        let l = build_kernel(&p, &a, &SimilarityMode::Rbf)?.l;
        let pmf = enumerate_pmf(&l)?;
        let sampler = GumbelRumSampler::new(&l)?;
        let emp = empirical_pmf(n, draws, || sampler.sample(&mut r));
        t.record(total_variation(&emp, &pmf.probs), || json!({ "kernel": matrix_json(&l), "draws": draws }));
    }
    Ok(t.finish())
}

pub fn check_decomposition(trials: usize, rng: &RngState, inject_fault: bool) -> Result<CheckResult> {
    let mut t = Tracker::new("utility_decomposition", DECOMPOSITION_TOL);
    for k in 0..trials {
        let mut r = rng.derive(&[k as u64]).rng();
        let n = 1 + k % 8;
        let (p, a) = random_instance(n, 3, &mut r);
        let b = build_kernel(&p, &a, &SimilarityMode::Rbf)?;
        let c = random_subset(n, &mut r);
        let u = implied_utility(&b, &c)?;
        let correction = if inject_fault { -u.correction } else { u.correction };
        let dev = if u.total == f64::NEG_INFINITY && correction == f64::NEG_INFINITY {
            0.0
        } else {
            (u.total - (u.additive_part + correction)).abs()
        };
        let ok = dev <= DECOMPOSITION_TOL && correction <= CORRECTION_MAX;
        t.record_with(dev, ok, || {
            json!({ "kernel": matrix_json(&b.l), "similarity": matrix_json(&b.s), "subset": c.indices(),
                    "correction": correction })
        });
    }
    Ok(t.finish())
}

/// Identity similarity equals the logistic product likelihood; a vanishing
/// lengthscale approaches it in distribution.
pub fn check_logistic(trials: usize, rng: &RngState) -> Result<CheckResult> {
    let mut t = Tracker::new("logistic_special_case", EQUIVALENCE_TOL);
    for k in 0..trials {
        let mut r = rng.derive(&[k as u64]).rng();
        let n = 1 + k % 6;
        let (p, a) = random_instance(n, 2, &mut r);
        let c = random_subset(n, &mut r);
        let det = subset_log_likelihood(&build_kernel(&p, &a, &SimilarityMode::Identity)?, &c)?;
        let logit = logistic_log_likelihood(&p.beta, &a, &c)?;
        t.record((det - logit).abs(), || json!({ "params": p, "items": a.rows().collect::<Vec<_>>(), "subset": c.indices() }));

        let min_dist = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| a.row(i).iter().zip(a.row(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        if min_dist.is_finite() && min_dist > 0.0 {
            let tiny = ModelParams { log_lengthscales: vec![(1e-3 * min_dist).ln(); 2], ..p.clone() };
            let limit = enumerate_pmf(&build_kernel(&tiny, &a, &SimilarityMode::Rbf)?.l)?;
            let exact = enumerate_pmf(&build_kernel(&p, &a, &SimilarityMode::Identity)?.l)?;
            let tv = total_variation(&limit.probs, &exact.probs);
            // Reported against the equivalence tolerance scale, judged against its own.
            t.record_with(tv * EQUIVALENCE_TOL / LIMIT_TV_TOL, tv <= LIMIT_TV_TOL, || {
                json!({ "params": tiny, "items": a.rows().collect::<Vec<_>>(), "tv": tv })
            });
        }
    }
    Ok(t.finish())
}

/// An all-ones similarity puts no mass on subsets of two or more items and
/// matches MNL elsewhere.
pub fn check_mnl(trials: usize, rng: &RngState) -> Result<CheckResult> {
    let mut t = Tracker::new("mnl_special_case", EQUIVALENCE_TOL);
    for k in 0..trials {
        let mut r = rng.derive(&[k as u64]).rng();
        let n = 1 + k % 6;
        let (p, a) = random_instance(n, 2, &mut r);
        let pmf = enumerate_pmf(&build_kernel(&p, &a, &SimilarityMode::AllOnes)?.l)?;
        for (c, prob) in pmf.iter() {
            if c.len() >= 2 {
                t.record_with(prob, prob <= ALL_ONES_MASS_TOL, || {
                    json!({ "params": p, "items": a.rows().collect::<Vec<_>>(), "subset": c.indices() })
                });
            } else {
                let want = mnl_log_likelihood(&p.beta, &a, &c)?.exp();
                t.record((prob - want).abs(), || {
                    json!({ "params": p, "items": a.rows().collect::<Vec<_>>(), "subset": c.indices() })
                });
            }
        }
    }
    Ok(t.finish())
}

pub fn check_spectral(trials: usize, draws: usize, rng: &RngState) -> Result<CheckResult> {
    let mut t = Tracker::new("spectral_sampler", SAMPLER_TV_TOL);
    for k in 0..trials {
        let mut r = rng.derive(&[k as u64]).rng();
        let l = random_psd(4, &mut r);
        let pmf = enumerate_pmf(&l)?;
        let sampler = SpectralSampler::new(&l)?;
        let emp = empirical_pmf(4, draws, || sampler.sample(&mut r));
        t.record(total_variation(&emp, &pmf.probs), || json!({ "kernel": matrix_json(&l), "draws": draws }));
    }
    Ok(t.finish())
}

/// Runs every check family. Family `f` uses the stream `derive(&[f])` of `seed`.
pub fn run_all(cfg: &VerifyConfig, seed: u64) -> Result<VerifyReport> {
    let root = RngState::new(seed);
    let n = |full: usize| cfg.trials.unwrap_or(full);
    let checks = vec![
        check_normalizer(n(200), &root.derive(&[0]))?,
        check_gumbel_rum(n(20), cfg.draws, &root.derive(&[1]))?,
        check_decomposition(n(1000), &root.derive(&[2]), cfg.inject_fault)?,
        check_logistic(n(100), &root.derive(&[3]))?,
        check_mnl(n(100), &root.derive(&[4]))?,
        check_spectral(n(10), cfg.draws, &root.derive(&[5]))?,
    ];
    Ok(VerifyReport { seed, passed: checks.iter().all(|c| c.passed), checks })
}
