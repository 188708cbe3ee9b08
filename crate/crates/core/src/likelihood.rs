//! Exact determinantal likelihoods, implied utilities and gradients.
//!
//! `P(C) = det(L_C) / det(I + L)`. Chosen-subset determinants use LU with
//! partial pivoting so that singular submatrices (identical items under an
//! all-ones similarity) come out as a clean zero probability; the
//! normalizer uses a Cholesky factorization of `I + L`, which is always
//! positive definite for a PSD kernel.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::data::{Dataset, Observation};
use crate::error::{arg, Error, Result};
use crate::kernel::{build_kernel_jittered, KernelBundle, ModelParams, SimilarityMode};
use crate::prior::PriorSpec;
use crate::subset::SubsetIndex;

/// Largest assortment that brute-force enumeration accepts by default.
pub const ENUMERATION_CAP: usize = 15;

/// Positive determinants at or below this are treated as zero.
pub const DET_FLOOR: f64 = 1e-300;

/// Negative determinants with `|det| <= NEG_DET_RTOL * prod max(1, M_ii)`
/// are rounding noise and are treated as zero.
pub const NEG_DET_RTOL: f64 = 1e-10;

/// Implied utility of a subset split into its additive and similarity parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityDecomposition {
    pub total: f64,
    pub additive_part: f64,
    pub correction: f64,
}

/// Brute-force distribution over all `2^n` subsets, indexed by bit mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPmf {
    pub n: usize,
    /// `det(L_C)` for every mask, clamped at zero.
    pub weights: Vec<f64>,
    pub normalizer: f64,
    pub probs: Vec<f64>,
}

impl SubsetPmf {
    pub fn prob(&self, c: &SubsetIndex) -> f64 {
        self.probs[c.to_mask() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SubsetIndex, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(m, &p)| (SubsetIndex::from_mask(m as u64, self.n), p))
    }

    /// Probability that each item is included.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, &p) in self.probs.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                if m >> i & 1 == 1 {
                    *o += p;
                }
            }
        }
        out
    }
}

/// How `log det` and its gradient are evaluated over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodConfig {
    pub mode: SimilarityMode,
    pub jitter: f64,
    pub lengthscale_gradient: LengthscaleGradient,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            mode: SimilarityMode::Rbf,
            jitter: 0.0,
            lengthscale_gradient: LengthscaleGradient::FiniteDifference,
        }
    }
}

impl LikelihoodConfig {
    pub fn with_mode(mode: SimilarityMode) -> Self {
        Self { mode, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LengthscaleGradient {
    /// Central differences with step `1e-5 * max(1, |theta|)`.
    FiniteDifference,
    Analytic,
}

fn submatrix(m: &DMatrix<f64>, c: &SubsetIndex) -> DMatrix<f64> {
    let idx = c.indices();
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Sign (-1, 0, 1) and log-absolute-determinant by LU with partial pivoting.
fn signed_log_det(m: DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let lu = m.lu();
    let mut sign = lu.p().determinant::<f64>();
    let mut logabs = 0.0;
    let u = lu.u();
    for i in 0..n {
        let d = u[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return (0.0, f64::NEG_INFINITY);
        }
        if d < 0.0 {
            sign = -sign;
        }
        logabs += d.abs().ln();
    }
    (sign, logabs)
}

/// Applies the zero-determinant conventions; returns `log det` or `-inf`.
fn floor_log_det(sign: f64, logabs: f64, scale: f64) -> Result<f64> {
    if sign == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if sign < 0.0 {
        if logabs <= NEG_DET_RTOL.ln() + scale.ln() {
            return Ok(f64::NEG_INFINITY);
        }
        return Err(Error::Numerical(format!(
            "submatrix has a negative determinant (-exp({logabs:.3})); kernel is not PSD"
        )));
    }
    if logabs <= DET_FLOOR.ln() {
        Ok(f64::NEG_INFINITY)
    } else {
        Ok(logabs)
    }
}

fn diag_scale(m: &DMatrix<f64>, c: &SubsetIndex) -> f64 {
    c.iter().map(|i| m[(i, i)].max(1.0)).product()
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return arg(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols()));
    }
    Ok(())
}

/// `log det(M_C)`; 0 for the empty subset, `-inf` for a (numerically) singular one.
pub fn log_det_submatrix(m: &DMatrix<f64>, c: &SubsetIndex) -> Result<f64> {
    check_square(m)?;
    c.check_bounds(m.nrows())?;
    if c.is_empty() {
        return Ok(0.0);
    }
    let (sign, logabs) = signed_log_det(submatrix(m, c));
    floor_log_det(sign, logabs, diag_scale(m, c))
}

fn cholesky_of_shifted(l: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    check_square(l)?;
    let n = l.nrows();
    let shifted = l + DMatrix::<f64>::identity(n, n);
    Cholesky::new(shifted).ok_or_else(|| {
        let min_diag = (0..n).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        let max_abs = l.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (l[(i, j)] - l[(j, i)]).abs())
            .fold(0.0f64, f64::max);
        Error::Numerical(format!(
            "Cholesky of I + L failed (n = {n}, min L_ii = {min_diag:e}, max |L_ij| = {max_abs:e}, \
             max asymmetry = {asym:e})"
        ))
    })
}

/// `log det(I + L)`.
pub fn log_normalizer(l: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky_of_shifted(l)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `log det(L_C) - log det(I + L)`.
pub fn subset_log_likelihood(bundle: &KernelBundle, c: &SubsetIndex) -> Result<f64> {
    let num = log_det_submatrix(&bundle.l, c)?;
    if num == f64::NEG_INFINITY {
        c.check_bounds(bundle.len())?;
        return Ok(num);
    }
    Ok(num - log_normalizer(&bundle.l)?)
}

/// `sum_{i in C} 2 log q_i + log det(S_C) - log det(I + L)`.
pub fn subset_log_likelihood_decomposed(bundle: &KernelBundle, c: &SubsetIndex) -> Result<f64> {
    let u = implied_utility(bundle, c)?;
    if u.correction == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(u.additive_part + u.correction - log_normalizer(&bundle.l)?)
}

/// Total, additive and similarity parts of the implied utility `log det(L_C)`.
pub fn implied_utility(bundle: &KernelBundle, c: &SubsetIndex) -> Result<UtilityDecomposition> {
    c.check_bounds(bundle.len())?;
    let total = log_det_submatrix(&bundle.l, c)?;
    let additive_part = c.iter().map(|i| 2.0 * bundle.q[i].ln()).sum();
    let correction = log_det_submatrix(&bundle.s, c)?;
    Ok(UtilityDecomposition { total, additive_part, correction })
}

/// Brute-force pmf over all subsets, up to [`ENUMERATION_CAP`] items.
pub fn enumerate_pmf(l: &DMatrix<f64>) -> Result<SubsetPmf> {
    enumerate_pmf_capped(l, ENUMERATION_CAP)
}

pub fn enumerate_pmf_capped(l: &DMatrix<f64>, cap: usize) -> Result<SubsetPmf> {
    check_square(l)?;
    let n = l.nrows();
    if n > cap || n >= 63 {
        return Err(Error::Capacity { n, cap });
    }
    let total = 1usize << n;
    let mut weights = Vec::with_capacity(total);
    for mask in 0..total {
        let c = SubsetIndex::from_mask(mask as u64, n);
        let w = if c.is_empty() {
            1.0
        } else {
            let (sign, logabs) = signed_log_det(submatrix(l, &c));
            let ld = floor_log_det(sign, logabs, diag_scale(l, &c))?;
            ld.exp()
        };
        weights.push(w);
    }
    let normalizer: f64 = weights.iter().sum();
    let probs = weights.iter().map(|w| w / normalizer).collect();
    Ok(SubsetPmf { n, weights, normalizer, probs })
}

/// Per-observation log-likelihood plus, optionally, its gradient.
struct ObservationTerms {
    loglik: f64,
    grad_beta: Vec<f64>,
    grad_loglen: Vec<f64>,
}

fn observation_terms(
    params: &ModelParams,
    obs: &Observation,
    cfg: &LikelihoodConfig,
    want_grad: bool,
) -> Result<ObservationTerms> {
    let bundle = build_kernel_jittered(params, &obs.assortment, &cfg.mode, cfg.jitter)?;
    let c = &obs.chosen;
    c.check_bounds(bundle.len())?;
    let num = log_det_submatrix(&bundle.l, c)?;
    let d = params.beta.len();
    let g = params.log_lengthscales.len();
    if num == f64::NEG_INFINITY {
        return Ok(ObservationTerms {
            loglik: num,
            grad_beta: Vec::new(),
            grad_loglen: Vec::new(),
        });
    }
    let chol = cholesky_of_shifted(&bundle.l)?;
    let lognorm = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mut out = ObservationTerms {
        loglik: num - lognorm,
        grad_beta: vec![0.0; d],
        grad_loglen: vec![0.0; g],
    };
    if !want_grad {
        return Ok(out);
    }

    // K = L (I + L)^{-1} = I - (I + L)^{-1}
    let m = chol.inverse();
    let n = bundle.len();
    let qidx = &params.layout.quality;
    for i in 0..n {
        let x = obs.assortment.row(i);
        let w = if c.contains(i) { 1.0 } else { 0.0 } - (1.0 - m[(i, i)]);
        for (gk, &k) in out.grad_beta.iter_mut().zip(qidx) {
            *gk += w * x[k];
        }
    }

    if cfg.lengthscale_gradient == LengthscaleGradient::Analytic
        && matches!(cfg.mode, SimilarityMode::Rbf)
        && g > 0
    {
        let s_c_inv = if c.len() > 1 {
            Some(submatrix(&bundle.s, c).lu().try_inverse().ok_or_else(|| {
                Error::Numerical("chosen similarity submatrix is singular".into())
            })?)
        } else {
            None
        };
        let ls = &params.log_lengthscales;
        let sidx = &params.layout.similarity;
        let groups = &params.layout.lengthscale_groups;
        let inv_l2: Vec<f64> = ls.iter().map(|v| (-2.0 * v).exp()).collect();
        let mut dist = vec![0.0; g];
        let chosen = c.indices();
        for i in 0..n {
            let xi = obs.assortment.row(i);
            for j in 0..i {
                let xj = obs.assortment.row(j);
                dist.iter_mut().for_each(|v| *v = 0.0);
                for (&k, &grp) in sidx.iter().zip(groups) {
                    let z = xi[k] - xj[k];
                    dist[grp] += z * z * inv_l2[grp];
                }
                // dS_ij / d log l_g = S_ij * dist_g; the pair (i, j) appears twice.
                let s_ij = bundle.s[(i, j)];
                for (grp, dv) in dist.iter().enumerate() {
                    if *dv == 0.0 {
                        continue;
                    }
                    let ds = s_ij * dv;
                    let mut contrib = -2.0 * m[(i, j)] * bundle.q[i] * bundle.q[j] * ds;
                    if let Some(inv) = &s_c_inv {
                        if let (Ok(a), Ok(b)) = (chosen.binary_search(&i), chosen.binary_search(&j)) {
                            contrib += 2.0 * inv[(a, b)] * ds;
                        }
                    }
                    out.grad_loglen[grp] += contrib;
                }
            }
        }
    }
    Ok(out)
}

fn check_dataset_mode(cfg: &LikelihoodConfig) -> Result<()> {
    if matches!(cfg.mode, SimilarityMode::Fixed(_)) {
        return arg("a fixed similarity matrix cannot be shared across a dataset");
    }
    Ok(())
}

/// Sum of per-observation log-likelihoods; `-inf` as soon as one is zero.
pub fn dataset_log_likelihood(params: &ModelParams, data: &Dataset, cfg: &LikelihoodConfig) -> Result<f64> {
    check_dataset_mode(cfg)?;
    let mut total = 0.0;
    for obs in &data.observations {
        let t = observation_terms(params, obs, cfg, false)?;
        if t.loglik == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        total += t.loglik;
    }
    Ok(total)
}

/// Log-likelihood under the RBF similarity model plus the log prior.
pub fn dataset_log_posterior(params: &ModelParams, data: &Dataset, priors: &PriorSpec) -> Result<f64> {
    dataset_log_posterior_with(params, data, priors, &LikelihoodConfig::default())
}

pub fn dataset_log_posterior_with(
    params: &ModelParams,
    data: &Dataset,
    priors: &PriorSpec,
    cfg: &LikelihoodConfig,
) -> Result<f64> {
    priors.validate(params.beta.len(), params.log_lengthscales.len())?;
    let ll = dataset_log_likelihood(params, data, cfg)?;
    Ok(ll + priors.log_density(params))
}

/// Id of the first observation with zero likelihood at `params`, if any.
pub fn first_impossible_observation(
    params: &ModelParams,
    data: &Dataset,
    cfg: &LikelihoodConfig,
) -> Result<Option<String>> {
    for obs in &data.observations {
        if observation_terms(params, obs, cfg, false)?.loglik == f64::NEG_INFINITY {
            return Ok(Some(obs.id.clone()));
        }
    }
    Ok(None)
}

/// Gradient of the log posterior in `(beta, log_lengthscales)` order.
pub fn grad_log_posterior(params: &ModelParams, data: &Dataset, priors: &PriorSpec) -> Result<Vec<f64>> {
    grad_log_posterior_with(params, data, priors, &LikelihoodConfig::default())
}

pub fn grad_log_posterior_with(
    params: &ModelParams,
    data: &Dataset,
    priors: &PriorSpec,
    cfg: &LikelihoodConfig,
) -> Result<Vec<f64>> {
    match log_posterior_and_grad(params, data, priors, cfg)? {
        (_, Some(g)) => Ok(g),
        (_, None) => Err(Error::Domain(
            "log posterior is -inf at these parameters; gradient undefined".into(),
        )),
    }
}

/// Log posterior and, when it is finite, its gradient.
pub fn log_posterior_and_grad(
    params: &ModelParams,
    data: &Dataset,
    priors: &PriorSpec,
    cfg: &LikelihoodConfig,
) -> Result<(f64, Option<Vec<f64>>)> {
    check_dataset_mode(cfg)?;
    let d = params.beta.len();
    let g = params.log_lengthscales.len();
    priors.validate(d, g)?;
    let mut ll = 0.0;
    let mut grad = vec![0.0; d + g];
    for obs in &data.observations {
        let t = observation_terms(params, obs, cfg, true)?;
        if t.loglik == f64::NEG_INFINITY {
            return Ok((f64::NEG_INFINITY, None));
        }
        ll += t.loglik;
        for (a, b) in grad.iter_mut().zip(t.grad_beta.iter().chain(&t.grad_loglen)) {
            *a += b;
        }
    }
    if cfg.lengthscale_gradient == LengthscaleGradient::FiniteDifference
        && matches!(cfg.mode, SimilarityMode::Rbf)
    {
        for k in 0..g {
            let theta = params.log_lengthscales[k];
            let h = 1e-5 * theta.abs().max(1.0);
            let mut plus = params.clone();
            plus.log_lengthscales[k] = theta + h;
            let mut minus = params.clone();
            minus.log_lengthscales[k] = theta - h;
            let fp = dataset_log_likelihood(&plus, data, cfg)?;
            let fm = dataset_log_likelihood(&minus, data, cfg)?;
            if !(fp.is_finite() && fm.is_finite()) {
                return Err(Error::Domain(format!(
                    "finite-difference step for log-lengthscale {k} leaves the support"
                )));
            }
            grad[d + k] = (fp - fm) / (2.0 * h);
        }
    }
    for (a, b) in grad.iter_mut().zip(priors.grad(params)) {
        *a += b;
    }
    Ok((ll + priors.log_density(params), Some(grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Assortment, FeatureLayout};
    use crate::data::DatasetSchema;

    fn mat(n: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(n, n, v)
    }

    fn s(v: &[usize]) -> SubsetIndex {
        SubsetIndex::from_unsorted(v.to_vec())
    }

    #[test]
    fn log_det_submatrix_examples() {
        assert_eq!(log_det_submatrix(&DMatrix::identity(3, 3), &s(&[0, 2])).unwrap(), 0.0);
        assert_eq!(
            log_det_submatrix(&mat(2, &[1.0, 1.0, 1.0, 1.0]), &s(&[0, 1])).unwrap(),
            f64::NEG_INFINITY
        );
        let v = log_det_submatrix(&mat(2, &[4.0, 0.0, 0.0, 9.0]), &s(&[0, 1])).unwrap();
        assert!((v - 36f64.ln()).abs() < 1e-12);
        assert_eq!(log_det_submatrix(&DMatrix::identity(2, 2), &SubsetIndex::empty()).unwrap(), 0.0);
        assert!(log_det_submatrix(&DMatrix::identity(2, 2), &s(&[2])).is_err());
    }

    #[test]
    fn negative_determinants() {
        // Clearly indefinite: an error, not a zero.
        let bad = mat(2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(log_det_submatrix(&bad, &s(&[0, 1])), Err(Error::Numerical(_))));
        // Rounding-size negative: zero probability.
        let tiny = mat(2, &[1.0, 1.0 + 1e-13, 1.0 + 1e-13, 1.0]);
        assert_eq!(log_det_submatrix(&tiny, &s(&[0, 1])).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn normalizer_examples() {
        assert!((log_normalizer(&DMatrix::identity(2, 2)).unwrap() - 4f64.ln()).abs() < 1e-14);
        let j = mat(2, &[1.0, 1.0, 1.0, 1.0]);
        assert!((log_normalizer(&j).unwrap() - 3f64.ln()).abs() < 1e-14);
        assert!((enumerate_pmf(&j).unwrap().normalizer - 3.0).abs() < 1e-14);
        let indefinite = mat(2, &[0.0, 3.0, 3.0, 0.0]);
        assert!(matches!(log_normalizer(&indefinite), Err(Error::Numerical(_))));
    }

    #[test]
    fn pmf_examples() {
        let p = enumerate_pmf(&DMatrix::identity(2, 2)).unwrap();
        assert!(p.probs.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let p = enumerate_pmf(&mat(2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        for (c, want) in [(vec![], 1.0 / 3.0), (vec![0], 1.0 / 3.0), (vec![1], 1.0 / 3.0), (vec![0, 1], 0.0)] {
            assert!((p.prob(&s(&c)) - want).abs() < 1e-15);
        }
        assert!(matches!(
            enumerate_pmf(&DMatrix::identity(16, 16)),
            Err(Error::Capacity { n: 16, cap: 15 })
        ));
    }

    #[test]
    fn subset_likelihood_examples() {
        let q = vec![1.0, 1.0];
        let b = KernelBundle::from_parts(q.clone(), DMatrix::from_element(2, 2, 1.0));
        let v = subset_log_likelihood(&b, &s(&[0])).unwrap();
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert_eq!(subset_log_likelihood(&b, &s(&[0, 1])).unwrap(), f64::NEG_INFINITY);
        assert_eq!(subset_log_likelihood_decomposed(&b, &s(&[0, 1])).unwrap(), f64::NEG_INFINITY);
        let b = KernelBundle::from_parts(q, DMatrix::identity(2, 2));
        for c in [vec![], vec![0], vec![1], vec![0, 1]] {
            assert!((subset_log_likelihood(&b, &s(&c)).unwrap() - 0.25f64.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn implied_utility_examples() {
        let b = KernelBundle::from_parts(vec![1.3, 0.4], mat(2, &[1.0, 0.5, 0.5, 1.0]));
        let u = implied_utility(&b, &SubsetIndex::empty()).unwrap();
        assert_eq!((u.total, u.additive_part, u.correction), (0.0, 0.0, 0.0));

        let b = KernelBundle::from_parts(vec![1.0, 1.0], mat(2, &[1.0, 0.5, 0.5, 1.0]));
        let u = implied_utility(&b, &s(&[0, 1])).unwrap();
        assert!((u.total - 0.75f64.ln()).abs() < 1e-14);
        assert_eq!(u.additive_part, 0.0);
        assert!((u.correction - 0.75f64.ln()).abs() < 1e-14);

        let b = KernelBundle::from_parts(vec![2.0, 0.3, 1.1], DMatrix::identity(3, 3));
        let u = implied_utility(&b, &s(&[0, 2])).unwrap();
        assert_eq!(u.correction, 0.0);
        assert!((u.total - u.additive_part).abs() < 1e-14);
    }

    fn one_item_dataset(x: f64, chosen: bool) -> Dataset {
        let schema = DatasetSchema::plain(vec!["x".into()]);
        let a = Assortment::from_rows(vec![vec![x]]).unwrap();
        let c = if chosen { s(&[0]) } else { SubsetIndex::empty() };
        Dataset::new(schema, vec![Observation::new("o", a, c).unwrap()]).unwrap()
    }

    #[test]
    fn dataset_posterior_examples() {
        let layout = FeatureLayout::all(1);
        let priors = PriorSpec::default_for(&layout);
        let params = ModelParams::new(vec![0.7], vec![0.2], layout).unwrap();
        let empty = Dataset::new(DatasetSchema::plain(vec!["x".into()]), vec![]).unwrap();
        assert_eq!(
            dataset_log_posterior(&params, &empty, &priors).unwrap(),
            priors.log_density(&params)
        );
        // beta . x = 0 and S = I: the single item is chosen with probability 1/2.
        let d = one_item_dataset(0.0, true);
        let cfg = LikelihoodConfig::with_mode(SimilarityMode::Identity);
        let v = dataset_log_posterior_with(&params, &d, &priors, &cfg).unwrap();
        assert!((v - (0.5f64.ln() + priors.log_density(&params))).abs() < 1e-14);
    }

    #[test]
    fn gradient_rejects_impossible_data() {
        let schema = DatasetSchema::plain(vec!["x".into()]);
        let a = Assortment::from_rows(vec![vec![1.0], vec![1.0]]).unwrap();
        let d = Dataset::new(schema, vec![Observation::new("dup", a, s(&[0, 1])).unwrap()]).unwrap();
        let layout = FeatureLayout::all(1);
        let p = ModelParams::zeros(layout.clone());
        let priors = PriorSpec::default_for(&layout);
        assert_eq!(dataset_log_posterior(&p, &d, &priors).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(grad_log_posterior(&p, &d, &priors), Err(Error::Domain(_))));
        let cfg = LikelihoodConfig::default();
        assert_eq!(first_impossible_observation(&p, &d, &cfg).unwrap().as_deref(), Some("dup"));
    }
}
