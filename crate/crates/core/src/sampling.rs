//! Exact samplers for an L-ensemble.
//!
//! Three routes to the same distribution: the eigendecomposition sampler,
//! inverse-CDF over the enumerated pmf, and the random-utility sampler that
//! picks the subset maximizing `log det(L_C) + Gumbel noise`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::likelihood::{enumerate_pmf_capped, log_det_submatrix, ENUMERATION_CAP};
use crate::rng::{gumbel, open_unit};
use crate::subset::SubsetIndex;

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const EIGEN_RTOL: f64 = 1e-12;

/// Eigendecomposition of a kernel, reusable across draws.
#[derive(Debug, Clone)]
pub struct SpectralSampler {
    n: usize,
    /// Inclusion probability `lambda / (1 + lambda)` for each eigenvector.
    inclusion: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralSampler {
    pub fn new(l: &DMatrix<f64>) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::Argument(format!("kernel must be square, got {}x{}", l.nrows(), l.ncols())));
        }
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("kernel has non-finite entries".into()));
        }
        let n = l.nrows();
        if n == 0 {
            return Ok(Self { n, inclusion: Vec::new(), vectors: DMatrix::zeros(0, 0) });
        }
        let sym = (l + l.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;
        let lmax = eig.eigenvalues.max().max(0.0);
        let inclusion = eig
            .eigenvalues
            .iter()
            .map(|&lam| {
                if lam <= EIGEN_RTOL * lmax || lam <= 0.0 {
                    0.0
                } else {
                    lam / (1.0 + lam)
                }
            })
            .collect();
        Ok(Self { n, inclusion, vectors: eig.eigenvectors })
    }

    /// Expected subset size, `sum lambda / (1 + lambda)`.
    pub fn expected_size(&self) -> f64 {
        self.inclusion.iter().sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SubsetIndex {
        let selected: Vec<usize> = self
            .inclusion
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0 && rng.random::<f64>() < p)
            .map(|(k, _)| k)
            .collect();
        let mut basis: Vec<DVector<f64>> =
            selected.iter().map(|&k| self.vectors.column(k).into_owned()).collect();
        let mut items = Vec::with_capacity(basis.len());
        while !basis.is_empty() {
            // P(i) proportional to the squared norm of row i of the basis.
            let weights: Vec<f64> = (0..self.n)
                .map(|i| basis.iter().map(|v| v[i] * v[i]).sum())
                .collect();
            let i = categorical(&weights, rng);
            items.push(i);

            // Eliminate the coordinate i from the span, dropping one vector.
            let (pivot, _) = basis
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v[i].abs()))
                .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            let vp = basis.swap_remove(pivot);
            for v in basis.iter_mut() {
                let f = v[i] / vp[i];
                v.axpy(-f, &vp, 1.0);
            }
            gram_schmidt(&mut basis);
        }
        SubsetIndex::from_unsorted(items)
    }
}

fn gram_schmidt(basis: &mut Vec<DVector<f64>>) {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(basis.len());
    for mut v in basis.drain(..) {
        for u in &out {
            let c = u.dot(&v);
            v.axpy(-c, u, 1.0);
        }
        let norm = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    *basis = out;
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = open_unit(rng) * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// One exact draw via the eigendecomposition of `l`.
pub fn spectral_sample<R: Rng + ?Sized>(l: &DMatrix<f64>, rng: &mut R) -> Result<SubsetIndex> {
    Ok(SpectralSampler::new(l)?.sample(rng))
}

/// Inverse-CDF sampler over the enumerated pmf.
#[derive(Debug, Clone)]
pub struct EnumerationSampler {
    n: usize,
    cdf: Vec<f64>,
}

impl EnumerationSampler {
    pub fn new(l: &DMatrix<f64>) -> Result<Self> {
        let pmf = enumerate_pmf_capped(l, ENUMERATION_CAP)?;
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Pin the top of the CDF to the last subset with positive mass.
        if let Some(k) = pmf.probs.iter().rposition(|&p| p > 0.0) {
            cdf[k..].iter_mut().for_each(|c| *c = 1.0);
        }
        Ok(Self { n: pmf.n, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SubsetIndex {
        let u = open_unit(rng);
        let mask = self.cdf.partition_point(|&c| c < u);
        SubsetIndex::from_mask(mask as u64, self.n)
    }
}

pub fn enumeration_sample<R: Rng + ?Sized>(l: &DMatrix<f64>, rng: &mut R) -> Result<SubsetIndex> {
    Ok(EnumerationSampler::new(l)?.sample(rng))
}

/// Random-utility sampler: argmax over subsets of `log det(L_C) + eps(C)`
/// with iid standard Gumbel `eps`. Zero-determinant subsets never win.
#[derive(Debug, Clone)]
pub struct GumbelRumSampler {
    n: usize,
    /// `(mask, log det L_C)` for every subset with finite utility.
    utilities: Vec<(u64, f64)>,
}

impl GumbelRumSampler {
    pub fn new(l: &DMatrix<f64>) -> Result<Self> {
        let n = l.nrows();
        if n > ENUMERATION_CAP {
            return Err(Error::Capacity { n, cap: ENUMERATION_CAP });
        }
        let mut utilities = Vec::with_capacity(1 << n);
        for mask in 0..(1u64 << n) {
            let v = log_det_submatrix(l, &SubsetIndex::from_mask(mask, n))?;
            if v.is_finite() {
                utilities.push((mask, v));
            }
        }
        Ok(Self { n, utilities })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SubsetIndex {
        let mut best = (0u64, f64::NEG_INFINITY);
        for &(mask, v) in &self.utilities {
            let u = v + gumbel(rng);
            if u > best.1 {
                best = (mask, u);
            }
        }
        SubsetIndex::from_mask(best.0, self.n)
    }
}

pub fn gumbel_rum_sample<R: Rng + ?Sized>(l: &DMatrix<f64>, rng: &mut R) -> Result<SubsetIndex> {
    Ok(GumbelRumSampler::new(l)?.sample(rng))
}

/// Empirical distribution of `draws` samples as a probability per subset mask.
pub fn empirical_pmf<F: FnMut() -> SubsetIndex>(n: usize, draws: usize, mut sample: F) -> Vec<f64> {
    let mut counts = vec![0usize; 1 << n];
    for _ in 0..draws {
        counts[sample().to_mask() as usize] += 1;
    }
    counts.iter().map(|&c| c as f64 / draws as f64).collect()
}

/// Total-variation distance between two pmfs on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
