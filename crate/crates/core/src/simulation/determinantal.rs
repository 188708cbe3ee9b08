use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::data::{Dataset, DatasetSchema, Observation};
use crate::error::{arg, Result};
use crate::kernel::{build_kernel, Assortment, ModelParams, SimilarityMode};
use crate::rng::RngState;
use crate::sampling::SpectralSampler;

/// Observations drawn from a known determinantal model: `n_items` items per
/// assortment with iid standard normal features, choices sampled exactly.
/// Observation `i` draws from `rng.derive(&[i])`.
pub fn gen_determinantal_dataset(
    truth: &ModelParams,
    schema: &DatasetSchema,
    n_obs: usize,
    n_items: usize,
    rng: &RngState,
) -> Result<Dataset> {
    if n_items == 0 {
        return arg("assortments need at least one item");
    }
    if schema.layout() != truth.layout {
        return arg("schema layout differs from the generating parameters");
    }
    let d = schema.dim();
    let obs = (0..n_obs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.derive(&[i as u64]).rng();
            let rows: Vec<Vec<f64>> =
                (0..n_items).map(|_| (0..d).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
            let a = Assortment::from_rows(rows)?;
            let l = build_kernel(truth, &a, &SimilarityMode::Rbf)?.l;
            let chosen = SpectralSampler::new(&l)?.sample(&mut r);
            Observation::new(format!("obs-{i}"), a, chosen)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema.clone(), obs)
}

/// `d` features in both models sharing one lengthscale.
pub fn isotropic_schema(d: usize) -> DatasetSchema {
    DatasetSchema {
        lengthscale_groups: vec![0; d],
        ..DatasetSchema::plain((0..d).map(|k| format!("x{k}")).collect())
    }
}
