//! Quality, similarity and L-ensemble kernels built from item features.
//!
//! An item's quality is `exp(0.5 * beta . x)` over the quality features and
//! the similarity of two items is an anisotropic RBF over the similarity
//! features. The kernel is `L_ij = q_i * S_ij * q_j`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// Items on offer, one feature row per item.
#[derive(Debug, Clone, PartialEq)]
pub struct Assortment {
    ids: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl Assortment {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return arg("an assortment needs at least one item");
        }
        if ids.len() != rows.len() {
            return arg(format!("{} ids for {} feature rows", ids.len(), rows.len()));
        }
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return arg(format!("item {i} has {} features, expected {dim}", row.len()));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return arg(format!("item {i} has non-finite feature {v}"));
            }
            data.extend_from_slice(row);
        }
        let mut sorted: Vec<&String> = ids.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return arg(format!("duplicate item id {:?}", w[0]));
        }
        Ok(Self { ids, dim, data })
    }

    /// Assortment with ids "0", "1", ...
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(ids, rows)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.len())
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Which feature columns feed the quality and similarity models.
///
/// `lengthscale_groups[k]` is the lengthscale used by similarity feature
/// `similarity[k]`; a group can span several features (one lengthscale for
/// a one-hot block, or an isotropic distance).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub quality: Vec<usize>,
    pub similarity: Vec<usize>,
    pub lengthscale_groups: Vec<usize>,
}

impl FeatureLayout {
    /// Every feature in both models, one lengthscale per feature.
    pub fn all(d: usize) -> Self {
        Self {
            quality: (0..d).collect(),
            similarity: (0..d).collect(),
            lengthscale_groups: (0..d).collect(),
        }
    }

    /// Quality features only; the similarity is the identity.
    pub fn quality_only(d: usize) -> Self {
        Self { quality: (0..d).collect(), similarity: vec![], lengthscale_groups: vec![] }
    }

    pub fn n_quality(&self) -> usize {
        self.quality.len()
    }

    pub fn n_lengthscales(&self) -> usize {
        self.lengthscale_groups.iter().max().map_or(0, |&g| g + 1)
    }

    pub fn n_params(&self) -> usize {
        self.n_quality() + self.n_lengthscales()
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Some(&i) = self.quality.iter().chain(&self.similarity).find(|&&i| i >= d) {
            return arg(format!("feature index {i} out of range for dimension {d}"));
        }
        if self.lengthscale_groups.len() != self.similarity.len() {
            return arg(format!(
                "{} lengthscale groups for {} similarity features",
                self.lengthscale_groups.len(),
                self.similarity.len()
            ));
        }
        let g = self.n_lengthscales();
        if (0..g).any(|k| !self.lengthscale_groups.contains(&k)) {
            return arg("lengthscale groups must be numbered 0..G without gaps");
        }
        Ok(())
    }
}

/// Quality coefficients and log-lengthscales, with the feature layout they apply to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub log_lengthscales: Vec<f64>,
    pub layout: FeatureLayout,
}

impl ModelParams {
    pub fn new(beta: Vec<f64>, log_lengthscales: Vec<f64>, layout: FeatureLayout) -> Result<Self> {
        let p = Self { beta, log_lengthscales, layout };
        p.check_shape()?;
        Ok(p)
    }

    /// beta = 0, log-lengthscales = 0.
    pub fn zeros(layout: FeatureLayout) -> Self {
        Self {
            beta: vec![0.0; layout.n_quality()],
            log_lengthscales: vec![0.0; layout.n_lengthscales()],
            layout,
        }
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.beta.len() != self.layout.n_quality() {
            return arg(format!(
                "beta has length {}, layout has {} quality features",
                self.beta.len(),
                self.layout.n_quality()
            ));
        }
        if self.log_lengthscales.len() != self.layout.n_lengthscales() {
            return arg(format!(
                "{} log-lengthscales for {} lengthscale groups",
                self.log_lengthscales.len(),
                self.layout.n_lengthscales()
            ));
        }
        if self.beta.iter().chain(&self.log_lengthscales).any(|v| !v.is_finite()) {
            return arg("parameters must be finite");
        }
        Ok(())
    }

    /// Flat parameter vector `(beta, log_lengthscales)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.beta.iter().chain(&self.log_lengthscales).copied().collect()
    }

    pub fn from_vec(layout: &FeatureLayout, theta: &[f64]) -> Result<Self> {
        let d = layout.n_quality();
        if theta.len() != layout.n_params() {
            return arg(format!("parameter vector has length {}, expected {}", theta.len(), layout.n_params()));
        }
        Ok(Self {
            beta: theta[..d].to_vec(),
            log_lengthscales: theta[d..].to_vec(),
            layout: layout.clone(),
        })
    }

    /// Lengthscale for each similarity feature, expanded from the groups.
    pub fn feature_lengthscales(&self) -> Vec<f64> {
        self.layout
            .lengthscale_groups
            .iter()
            .map(|&g| self.log_lengthscales[g].exp())
            .collect()
    }

    /// beta . x over the quality features of a full feature row.
    pub fn utility(&self, x: &[f64]) -> f64 {
        self.layout.quality.iter().zip(&self.beta).map(|(&k, b)| b * x[k]).sum()
    }
}

/// How the similarity matrix is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum SimilarityMode {
    Rbf,
    Identity,
    AllOnes,
    Fixed(DMatrix<f64>),
}

/// Quality vector, similarity matrix and the resulting kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBundle {
    pub q: Vec<f64>,
    pub s: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

impl KernelBundle {
    /// Assembles `L_ij = q_i S_ij q_j`.
    pub fn from_parts(q: Vec<f64>, s: DMatrix<f64>) -> Self {
        let n = q.len();
        let l = DMatrix::from_fn(n, n, |i, j| q[i] * s[(i, j)] * q[j]);
        Self { q, s, l }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }
}

/// `exp(0.5 * beta . x)`.
pub fn quality(beta: &[f64], x: &[f64]) -> Result<f64> {
    if beta.len() != x.len() {
        return arg(format!("beta has length {}, features have length {}", beta.len(), x.len()));
    }
    let u: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
    Ok((0.5 * u).exp())
}

/// Anisotropic RBF similarity, `exp(-0.5 * sum_k (x_ik - x_jk)^2 / l_k^2)`.
pub fn rbf_similarity(lengthscales: &[f64], xi: &[f64], xj: &[f64]) -> Result<f64> {
    if xi.len() != lengthscales.len() || xj.len() != lengthscales.len() {
        return arg(format!(
            "{} lengthscales for features of length {} and {}",
            lengthscales.len(),
            xi.len(),
            xj.len()
        ));
    }
    if let Some(l) = lengthscales.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return arg(format!("lengthscales must be positive and finite, got {l}"));
    }
    Ok(rbf_unchecked(lengthscales, xi.iter().copied(), xj.iter().copied()))
}

fn rbf_unchecked(
    lengthscales: &[f64],
    xi: impl Iterator<Item = f64>,
    xj: impl Iterator<Item = f64>,
) -> f64 {
    let r2: f64 = xi
        .zip(xj)
        .zip(lengthscales)
        .map(|((a, b), l)| {
            let z = (a - b) / l;
            z * z
        })
        .sum();
    (-0.5 * r2).exp()
}

/// RBF similarity matrix over the layout's similarity features.
pub fn rbf_matrix(params: &ModelParams, a: &Assortment) -> Result<DMatrix<f64>> {
    let ls = params.feature_lengthscales();
    if let Some(l) = ls.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return arg(format!("lengthscales must be positive and finite, got {l}"));
    }
    let idx = &params.layout.similarity;
    let n = a.len();
    let mut s = DMatrix::identity(n, n);
    for i in 0..n {
        let xi = a.row(i);
        for j in 0..i {
            let xj = a.row(j);
            let v = rbf_unchecked(&ls, idx.iter().map(|&k| xi[k]), idx.iter().map(|&k| xj[k]));
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Builds the kernel for assortment `a` under `mode`.
pub fn build_kernel(params: &ModelParams, a: &Assortment, mode: &SimilarityMode) -> Result<KernelBundle> {
    build_kernel_jittered(params, a, mode, 0.0)
}

/// As [`build_kernel`], but replaces S by `(S + jitter*I) / (1 + jitter)`,
/// which keeps the unit diagonal and lifts the smallest eigenvalue.
pub fn build_kernel_jittered(
    params: &ModelParams,
    a: &Assortment,
    mode: &SimilarityMode,
    jitter: f64,
) -> Result<KernelBundle> {
    params.check_shape()?;
    params.layout.validate(a.dim())?;
    if !(jitter >= 0.0 && jitter.is_finite()) {
        return arg(format!("jitter must be a nonnegative finite number, got {jitter}"));
    }
    let n = a.len();
    let q: Vec<f64> = a.rows().map(|x| (0.5 * params.utility(x)).exp()).collect();
    let mut s = match mode {
        SimilarityMode::Rbf => rbf_matrix(params, a)?,
        SimilarityMode::Identity => DMatrix::identity(n, n),
        SimilarityMode::AllOnes => DMatrix::from_element(n, n, 1.0),
        SimilarityMode::Fixed(m) => {
            validate_similarity(m, n)?;
            m.clone()
        }
    };
    if jitter > 0.0 {
        for i in 0..n {
            s[(i, i)] += jitter;
        }
        s /= 1.0 + jitter;
    }
    Ok(KernelBundle::from_parts(q, s))
}

fn validate_similarity(m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Validation(format!(
            "fixed similarity is {}x{}, assortment has {n} items",
            m.nrows(),
            m.ncols()
        )));
    }
    if (0..n).any(|i| m[(i, i)] != 1.0) {
        return Err(Error::Validation("fixed similarity must have a unit diagonal".into()));
    }
    if m.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Validation("fixed similarity entries must lie in [0, 1]".into()));
    }
    if !psd_check(m, 1e-10)? {
        return Err(Error::Validation("fixed similarity is not symmetric positive semi-definite".into()));
    }
    Ok(())
}

/// True iff `m` is symmetric and its smallest eigenvalue is at least
/// `-tol * max(1, |m|_2)`.
pub fn psd_check(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    if !m.is_square() {
        return arg(format!("psd_check needs a square matrix, got {}x{}", m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(true);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Ok(false);
    }
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return Ok(false);
            }
        }
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym).eigenvalues;
    let norm = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    Ok(eig.min() >= -tol * norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn quality_examples() {
        assert_eq!(quality(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(close(quality(&[2.0, 0.0], &[1.0, 5.0]).unwrap(), E, 1e-12));
        assert!(close(quality(&[1.0], &[4f64.ln()]).unwrap(), 2.0, 1e-12));
        assert!(quality(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn rbf_examples() {
        assert_eq!(rbf_similarity(&[0.3, 7.0], &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(close(rbf_similarity(&[1.0], &[0.0], &[1.0]).unwrap(), (-0.5f64).exp(), 1e-12));
        assert!(close(
            rbf_similarity(&[1.0, 2.0], &[0.0, 0.0], &[1.0, 2.0]).unwrap(),
            (-1.0f64).exp(),
            1e-12
        ));
        assert!(rbf_similarity(&[0.0], &[0.0], &[1.0]).is_err());
        assert!(rbf_similarity(&[-1.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn two_item_kernel_determinant() {
        // beta = 0 gives unit qualities; S_12 = exp(-0.5) at unit distance.
        let a = Assortment::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let p = ModelParams::zeros(FeatureLayout::all(1));
        let k = build_kernel(&p, &a, &SimilarityMode::Rbf).unwrap();
        let s = (-0.5f64).exp();
        assert!(close(k.l[(0, 1)], s, 1e-15));
        assert!(close(k.l.determinant(), 1.0 - s * s, 1e-12));
    }

    #[test]
    fn identity_and_all_ones_modes() {
        let a = Assortment::from_rows(vec![vec![0.5, 1.0], vec![-1.0, 2.0]]).unwrap();
        let p = ModelParams::new(vec![0.7, -0.2], vec![0.0, 0.0], FeatureLayout::all(2)).unwrap();
        let k = build_kernel(&p, &a, &SimilarityMode::Identity).unwrap();
        for i in 0..2 {
            assert!(close(k.l[(i, i)], p.utility(a.row(i)).exp(), 1e-12));
        }
        assert_eq!(k.l[(0, 1)], 0.0);

        let p0 = ModelParams::zeros(FeatureLayout::all(2));
        let k = build_kernel(&p0, &a, &SimilarityMode::AllOnes).unwrap();
        assert_eq!(k.l, DMatrix::from_element(2, 2, 1.0));
        assert_eq!(k.l.rank(1e-12), 1);
    }

    #[test]
    fn fixed_mode_validation() {
        let a = Assortment::from_rows(vec![vec![0.0], vec![1.0]]).unwrap();
        let p = ModelParams::zeros(FeatureLayout::all(1));
        let good = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert!(build_kernel(&p, &a, &SimilarityMode::Fixed(good)).is_ok());
        let not_unit = DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 0.3, 1.0]);
        assert!(matches!(
            build_kernel(&p, &a, &SimilarityMode::Fixed(not_unit)),
            Err(Error::Validation(_))
        ));
        let wrong_size = DMatrix::identity(3, 3);
        assert!(build_kernel(&p, &a, &SimilarityMode::Fixed(wrong_size)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.5, 1.0]);
        assert!(build_kernel(&p, &a, &SimilarityMode::Fixed(asym)).is_err());
    }

    #[test]
    fn psd_check_examples() {
        assert!(psd_check(&DMatrix::identity(3, 3), 1e-10).unwrap());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(!psd_check(&indefinite, 1e-10).unwrap());
        assert!(psd_check(&DMatrix::from_element(3, 3, 1.0), 1e-10).unwrap());
        assert!(psd_check(&DMatrix::zeros(2, 3), 1e-10).is_err());
    }

    #[test]
    fn jitter_keeps_unit_diagonal() {
        let a = Assortment::from_rows(vec![vec![0.0], vec![0.0]]).unwrap();
        let p = ModelParams::zeros(FeatureLayout::all(1));
        let k = build_kernel_jittered(&p, &a, &SimilarityMode::Rbf, 0.1).unwrap();
        assert_eq!(k.s[(0, 0)], 1.0);
        assert!(k.s.determinant() > 0.0);
    }

    #[test]
    fn assortment_validation() {
        assert!(Assortment::from_rows(vec![]).is_err());
        assert!(Assortment::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Assortment::from_rows(vec![vec![f64::NAN]]).is_err());
        assert!(Assortment::new(vec!["a".into(), "a".into()], vec![vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn layout_validation() {
        let mut l = FeatureLayout::all(3);
        assert!(l.validate(3).is_ok());
        assert!(l.validate(2).is_err());
        l.lengthscale_groups = vec![0, 2, 2];
        assert!(l.validate(3).is_err());
        l.lengthscale_groups = vec![0, 0, 0];
        assert_eq!(l.n_lengthscales(), 1);
        assert!(l.validate(3).is_ok());
    }
}
