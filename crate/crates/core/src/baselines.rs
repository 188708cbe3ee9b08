//! Logistic-regression and multinomial-logit reference models.
//!
//! Both use the linear utility `z_i = beta . x_i` over the quality features.
//! Logistic regression labels every item independently; MNL picks at most
//! one item, with an outside option of utility zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::error::{arg, Error, Result};
use crate::kernel::Assortment;
use crate::optim::{maximize, OptConfig};
use crate::prior::gaussian_log_density;
use crate::prior::PriorSpec;
use crate::rng::open_unit;
use crate::subset::SubsetIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineModel {
    Logistic,
    Mnl,
}

impl BaselineModel {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineModel::Logistic => "logistic",
            BaselineModel::Mnl => "mnl",
        }
    }
}

/// How MNL training treats observations that chose two or more items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiChoicePolicy {
    /// Data error.
    Reject,
    /// Each chosen item contributes its own singleton-choice likelihood.
    SplitSingletons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFitConfig {
    pub opt: OptConfig,
    pub multi_choice: MultiChoicePolicy,
}

impl Default for BaselineFitConfig {
    fn default() -> Self {
        Self { opt: OptConfig::default(), multi_choice: MultiChoicePolicy::Reject }
    }
}

/// MAP fit of a baseline model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineFit {
    pub model: BaselineModel,
    pub beta: Vec<f64>,
    pub log_posterior: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub provenance: String,
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + sum_j e^{z_j})`.
fn log1p_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(0.0f64, f64::max);
    m + ((-m).exp() + z.iter().map(|v| (v - m).exp()).sum::<f64>()).ln()
}

fn utilities(beta: &[f64], a: &Assortment) -> Result<Vec<f64>> {
    if beta.len() != a.dim() {
        return arg(format!("beta has length {}, features have length {}", beta.len(), a.dim()));
    }
    Ok(a.rows().map(|x| beta.iter().zip(x).map(|(b, v)| b * v).sum()).collect())
}

fn quality_utilities(beta: &[f64], quality: &[usize], a: &Assortment) -> Vec<f64> {
    a.rows().map(|x| quality.iter().zip(beta).map(|(&k, b)| b * x[k]).sum()).collect()
}

fn logistic_ll(z: &[f64], c: &SubsetIndex) -> f64 {
    z.iter()
        .enumerate()
        .map(|(i, &zi)| if c.contains(i) { -softplus(-zi) } else { -softplus(zi) })
        .sum()
}

fn mnl_ll(z: &[f64], c: &SubsetIndex) -> f64 {
    let lse = log1p_sum_exp(z);
    match c.indices() {
        [] => -lse,
        [i] => z[*i] - lse,
        _ => f64::NEG_INFINITY,
    }
}

/// Independent-label likelihood, `sum_{i in C} log s(z_i) + sum_{j not in C} log(1 - s(z_j))`.
pub fn logistic_log_likelihood(beta: &[f64], a: &Assortment, c: &SubsetIndex) -> Result<f64> {
    c.check_bounds(a.len())?;
    Ok(logistic_ll(&utilities(beta, a)?, c))
}

/// Multinomial-logit likelihood with a zero-utility outside option;
/// `-inf` for choices of two or more items.
pub fn mnl_log_likelihood(beta: &[f64], a: &Assortment, c: &SubsetIndex) -> Result<f64> {
    c.check_bounds(a.len())?;
    Ok(mnl_ll(&utilities(beta, a)?, c))
}

/// Log-likelihood and gradient in beta for one observation.
fn observation_terms(
    model: BaselineModel,
    policy: MultiChoicePolicy,
    beta: &[f64],
    quality: &[usize],
    obs: &Observation,
) -> (f64, Vec<f64>) {
    let z = quality_utilities(beta, quality, &obs.assortment);
    let mut grad = vec![0.0; beta.len()];
    let mut add = |w: f64, x: &[f64]| {
        for (g, &k) in grad.iter_mut().zip(quality) {
            *g += w * x[k];
        }
    };
    let c = &obs.chosen;
    let value = match model {
        BaselineModel::Logistic => {
            for (i, &zi) in z.iter().enumerate() {
                let y = if c.contains(i) { 1.0 } else { 0.0 };
                add(y - sigmoid(zi), obs.assortment.row(i));
            }
            logistic_ll(&z, c)
        }
        BaselineModel::Mnl => {
            let lse = log1p_sum_exp(&z);
            let p: Vec<f64> = z.iter().map(|v| (v - lse).exp()).collect();
            let picks: &[usize] = match (c.len(), policy) {
                (0 | 1, _) | (_, MultiChoicePolicy::SplitSingletons) => c.indices(),
                (_, MultiChoicePolicy::Reject) => return (f64::NEG_INFINITY, grad),
            };
            // The empty choice still counts once.
            let weight = picks.len().max(1) as f64;
            for &i in picks {
                add(1.0, obs.assortment.row(i));
            }
            for (i, pi) in p.iter().enumerate() {
                add(-weight * pi, obs.assortment.row(i));
            }
            picks.iter().map(|&i| z[i]).sum::<f64>() - weight * lse
        }
    };
    (value, grad)
}

/// Baseline log posterior and gradient over a dataset's quality features.
pub fn baseline_log_posterior(
    model: BaselineModel,
    policy: MultiChoicePolicy,
    beta: &[f64],
    data: &Dataset,
    priors: &PriorSpec,
) -> (f64, Vec<f64>) {
    let quality = &data.schema.quality_mask;
    let mut value = gaussian_log_density(beta, &priors.beta_mean, &priors.beta_sd);
    let mut grad: Vec<f64> = beta
        .iter()
        .zip(&priors.beta_mean)
        .zip(&priors.beta_sd)
        .map(|((b, m), s)| -(b - m) / (s * s))
        .collect();
    for obs in &data.observations {
        let (v, g) = observation_terms(model, policy, beta, quality, obs);
        value += v;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    (value, grad)
}

/// MAP fit with the Gaussian beta prior from `priors`.
pub fn fit_baseline(
    model: BaselineModel,
    data: &Dataset,
    priors: &PriorSpec,
    cfg: &BaselineFitConfig,
) -> Result<BaselineFit> {
    let d = data.schema.quality_mask.len();
    if priors.beta_mean.len() != d || priors.beta_sd.len() != d {
        return arg(format!("beta prior must have length {d}"));
    }
    if model == BaselineModel::Mnl && cfg.multi_choice == MultiChoicePolicy::Reject {
        if let Some(obs) = data.observations.iter().find(|o| o.chosen.len() > 1) {
            return Err(Error::Data(format!(
                "observation {} chose {} items; MNL allows at most one (enable split-singletons to override)",
                obs.id,
                obs.chosen.len()
            )));
        }
    }
    let objective = |beta: &[f64]| -> Result<(f64, Option<Vec<f64>>)> {
        let (v, g) = baseline_log_posterior(model, cfg.multi_choice, beta, data, priors);
        Ok((v, v.is_finite().then_some(g)))
    };
    let out = maximize(objective, &priors.beta_mean, &cfg.opt)?;
    let provenance = match (model, cfg.multi_choice) {
        (BaselineModel::Mnl, MultiChoicePolicy::SplitSingletons) => {
            "mnl MAP; multi-item choices split into independent singleton choices".to_string()
        }
        (m, _) => format!("{} MAP", m.name()),
    };
    Ok(BaselineFit {
        model,
        beta: out.x,
        log_posterior: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        provenance,
    })
}

/// Samples a predicted subset; `quality` selects the feature columns beta applies to.
pub fn baseline_predict<R: Rng + ?Sized>(
    model: BaselineModel,
    beta: &[f64],
    quality: &[usize],
    a: &Assortment,
    rng: &mut R,
) -> SubsetIndex {
    let z = quality_utilities(beta, quality, a);
    match model {
        BaselineModel::Logistic => SubsetIndex::from_labels(
            &z.iter().map(|&zi| rng.random::<f64>() < sigmoid(zi)).collect::<Vec<_>>(),
        ),
        BaselineModel::Mnl => {
            let lse = log1p_sum_exp(&z);
            let mut u = open_unit(rng) - (-lse).exp();
            if u <= 0.0 {
                return SubsetIndex::empty();
            }
            for (i, zi) in z.iter().enumerate() {
                u -= (zi - lse).exp();
                if u <= 0.0 {
                    return SubsetIndex::from_unsorted(vec![i]);
                }
            }
            // Rounding left a sliver of mass; give it to the likeliest item.
            let best = z
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            SubsetIndex::from_unsorted(vec![best])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetSchema;
    use crate::rng::RngState;

    fn a2() -> Assortment {
        Assortment::from_rows(vec![vec![1.0, 0.5], vec![-0.3, 2.0]]).unwrap()
    }

    fn s(v: &[usize]) -> SubsetIndex {
        SubsetIndex::from_unsorted(v.to_vec())
    }

    #[test]
    fn logistic_examples() {
        for c in [vec![], vec![0], vec![1], vec![0, 1]] {
            let v = logistic_log_likelihood(&[0.0, 0.0], &a2(), &s(&c)).unwrap();
            assert!((v - 0.25f64.ln()).abs() < 1e-14);
        }
        let a = Assortment::from_rows(vec![vec![3f64.ln()]]).unwrap();
        let v = logistic_log_likelihood(&[1.0], &a, &s(&[0])).unwrap();
        assert!((v - 0.75f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn mnl_examples() {
        let v = mnl_log_likelihood(&[0.0, 0.0], &a2(), &s(&[0])).unwrap();
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert_eq!(mnl_log_likelihood(&[0.0, 0.0], &a2(), &s(&[0, 1])).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn large_utilities_do_not_overflow() {
        let a = Assortment::from_rows(vec![vec![700.0], vec![-700.0]]).unwrap();
        let l = logistic_log_likelihood(&[1.0], &a, &s(&[1])).unwrap();
        assert!((l - (-1400.0)).abs() < 1e-9, "{l}");
        let m = mnl_log_likelihood(&[1.0], &a, &s(&[0])).unwrap();
        assert!(m.is_finite() && m.abs() < 1e-12);
        let m = mnl_log_likelihood(&[1.0], &a, &SubsetIndex::empty()).unwrap();
        assert!((m + 700.0).abs() < 1e-9);
    }

    #[test]
    fn mnl_iia_ratio() {
        let beta = [0.4, -1.1];
        let a3 = Assortment::from_rows(vec![vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.2, 0.2]]).unwrap();
        let r2 = mnl_log_likelihood(&beta, &a2(), &s(&[0])).unwrap()
            - mnl_log_likelihood(&beta, &a2(), &s(&[1])).unwrap();
        let r3 = mnl_log_likelihood(&beta, &a3, &s(&[0])).unwrap()
            - mnl_log_likelihood(&beta, &a3, &s(&[1])).unwrap();
        assert!((r2 - r3).abs() < 1e-12);
    }

    fn dataset(obs: Vec<(Vec<Vec<f64>>, Vec<usize>)>) -> Dataset {
        let d = obs[0].0[0].len();
        let schema = DatasetSchema::plain((0..d).map(|k| format!("x{k}")).collect());
        let observations = obs
            .into_iter()
            .enumerate()
            .map(|(k, (rows, c))| {
                Observation::new(format!("o{k}"), Assortment::from_rows(rows).unwrap(), s(&c)).unwrap()
            })
            .collect();
        Dataset::new(schema, observations).unwrap()
    }

    #[test]
    fn separable_data_with_prior_gives_finite_fit() {
        let data = dataset(vec![
            (vec![vec![1.0, 2.0], vec![1.0, -2.0]], vec![0]),
            (vec![vec![1.0, 3.0], vec![1.0, -1.0]], vec![0]),
        ]);
        let priors = PriorSpec::isotropic(2, 1.0, 0, 1.0);
        for model in [BaselineModel::Logistic, BaselineModel::Mnl] {
            let fit = fit_baseline(model, &data, &priors, &BaselineFitConfig::default()).unwrap();
            assert!(fit.converged, "{model:?}");
            assert!(fit.beta.iter().all(|b| b.is_finite() && b.abs() < 10.0));
        }
    }

    #[test]
    fn mnl_rejects_multi_choice_unless_split() {
        let data = dataset(vec![(vec![vec![1.0], vec![2.0]], vec![0, 1])]);
        let priors = PriorSpec::isotropic(1, 1.0, 0, 1.0);
        let err = fit_baseline(BaselineModel::Mnl, &data, &priors, &BaselineFitConfig::default());
        assert!(matches!(err, Err(Error::Data(m)) if m.contains("o0")));
        let cfg = BaselineFitConfig { multi_choice: MultiChoicePolicy::SplitSingletons, ..Default::default() };
        let fit = fit_baseline(BaselineModel::Mnl, &data, &priors, &cfg).unwrap();
        assert!(fit.converged);
        assert!(fit.provenance.contains("singleton"));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = dataset(vec![
            (vec![vec![1.0, 0.2], vec![1.0, -0.7], vec![1.0, 1.5]], vec![0, 2]),
            (vec![vec![1.0, 0.1], vec![1.0, 0.9]], vec![1]),
            (vec![vec![1.0, -1.0]], vec![]),
        ]);
        let priors = PriorSpec::isotropic(2, 2.0, 0, 1.0);
        let beta = [0.3, -0.8];
        for (model, policy) in [
            (BaselineModel::Logistic, MultiChoicePolicy::Reject),
            (BaselineModel::Mnl, MultiChoicePolicy::SplitSingletons),
        ] {
            let (_, g) = baseline_log_posterior(model, policy, &beta, &data, &priors);
            for k in 0..2 {
                let h = 1e-5;
                let mut bp = beta;
                bp[k] += h;
                let mut bm = beta;
                bm[k] -= h;
                let fd = (baseline_log_posterior(model, policy, &bp, &data, &priors).0
                    - baseline_log_posterior(model, policy, &bm, &data, &priors).0)
                    / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6 * fd.abs().max(1.0), "{model:?} {k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn predictions() {
        let mut rng = RngState::new(5).rng();
        let a = Assortment::from_rows(vec![vec![-800.0], vec![-900.0]]).unwrap();
        for _ in 0..100 {
            assert!(baseline_predict(BaselineModel::Logistic, &[1.0], &[0], &a, &mut rng).is_empty());
        }
        let a = a2();
        for _ in 0..1000 {
            assert!(baseline_predict(BaselineModel::Mnl, &[0.5, 0.5], &[0, 1], &a, &mut rng).len() <= 1);
        }
    }

    #[test]
    fn logistic_marginals_match_sigmoid() {
        let a = Assortment::from_rows(vec![vec![0.3], vec![-1.2], vec![2.0]]).unwrap();
        let beta = [1.0];
        let draws = 50_000;
        let mut rng = RngState::new(8).rng();
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            for i in baseline_predict(BaselineModel::Logistic, &beta, &[0], &a, &mut rng).iter() {
                counts[i] += 1;
            }
        }
        for i in 0..3 {
            let p = sigmoid(a.row(i)[0]);
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((counts[i] as f64 / draws as f64 - p).abs() <= 3.0 * se);
        }
    }
}
