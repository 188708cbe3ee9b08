use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetSchema, Observation};
use crate::error::{arg, Result};
use crate::kernel::Assortment;
use crate::rng::RngState;
use crate::subset::SubsetIndex;

/// Hard-core spatial selection process on a square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfig {
    pub n_items: usize,
    pub square_half_width: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub radius: f64,
}

impl Default for SpatialConfig {
    fn default() -> Self {
        Self { n_items: 15, square_half_width: 2.0, gamma0: -5.0, gamma1: 2.5, radius: 0.0 }
    }
}

impl SpatialConfig {
    pub fn with_radius(radius: f64) -> Self {
        Self { radius, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_items == 0 {
            return arg("a spatial assortment needs at least one item");
        }
        if !(self.square_half_width > 0.0 && self.square_half_width.is_finite()) {
            return arg("square half-width must be positive and finite");
        }
        if !(self.radius >= 0.0) || !self.gamma0.is_finite() || !self.gamma1.is_finite() {
            return arg("radius must be nonnegative and the gammas finite");
        }
        Ok(())
    }
}

/// Feature columns: constant, x, y, distance to the origin. Quality uses all
/// four; similarity uses (x, y) with one shared lengthscale; the distance is
/// standardized before fitting.
pub fn spatial_schema() -> DatasetSchema {
    DatasetSchema {
        feature_names: ["const", "x", "y", "dist"].map(String::from).to_vec(),
        quality_mask: vec![0, 1, 2, 3],
        similarity_mask: vec![1, 2],
        lengthscale_groups: vec![0, 0],
        continuous: vec![3],
        standardization: None,
    }
}

/// Sequential hard-core thinning. Survivors are visited by decreasing y
/// (ties: increasing x, then index); each one still standing removes every
/// later survivor strictly closer than `2r`.
pub fn matern_iii_thin(points: &[(f64, f64)], survivors: &[bool], r: f64) -> Vec<bool> {
    assert_eq!(points.len(), survivors.len(), "points and survivor flags differ in length");
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| survivors[i]).collect();
    order.sort_by(|&a, &b| {
        points[b].1.total_cmp(&points[a].1).then(points[a].0.total_cmp(&points[b].0)).then(a.cmp(&b))
    });
    let mut keep = survivors.to_vec();
    let reach = 2.0 * r;
    for (k, &i) in order.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        for &j in &order[k + 1..] {
            let (dx, dy) = (points[i].0 - points[j].0, points[i].1 - points[j].1);
            if keep[j] && dx.hypot(dy) < reach {
                keep[j] = false;
            }
        }
    }
    keep
}

/// Items, survival-thinned labels and the final hard-core selection.
pub fn gen_spatial_observation<R: Rng + ?Sized>(
    cfg: &SpatialConfig,
    id: impl Into<String>,
    rng: &mut R,
) -> Result<Observation> {
    cfg.validate()?;
    let w = cfg.square_half_width;
    let points: Vec<(f64, f64)> =
        (0..cfg.n_items).map(|_| (rng.random_range(-w..=w), rng.random_range(-w..=w))).collect();
    let survivors: Vec<bool> = points
        .iter()
        .map(|&(x, y)| {
            let keep_prob = (cfg.gamma0 + cfg.gamma1 * x.hypot(y)).exp().min(1.0);
            let u: f64 = rng.random();
            u < keep_prob
        })
        .collect();
    let labels = matern_iii_thin(&points, &survivors, cfg.radius);
    let rows = points.iter().map(|&(x, y)| vec![1.0, x, y, x.hypot(y)]).collect();
    Observation::new(id, Assortment::from_rows(rows)?, SubsetIndex::from_labels(&labels))
}

/// `n` observations; observation `i` draws from `rng.derive(&[i])`.
pub fn gen_spatial_dataset(cfg: &SpatialConfig, n: usize, prefix: &str, rng: &RngState) -> Result<Dataset> {
    let obs = (0..n)
        .into_par_iter()
        .map(|i| gen_spatial_observation(cfg, format!("{prefix}{i}"), &mut rng.derive(&[i as u64]).rng()))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(spatial_schema(), obs)
}

/// Training and evaluation data for one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusData {
    pub radius: f64,
    pub train: Dataset,
    pub eval: Dataset,
}

/// Independent train/eval datasets per radius. Observation `i` of split `s`
/// (0 = train, 1 = eval) at radius index `k` draws from `rng.derive(&[k, s, i])`.
pub fn radius_sweep(
    radii: &[f64],
    n_train: usize,
    n_eval: usize,
    cfg: &SpatialConfig,
    rng: &RngState,
) -> Result<Vec<RadiusData>> {
    if radii.is_empty() {
        return arg("radius sweep needs at least one radius");
    }
    radii
        .iter()
        .enumerate()
        .map(|(k, &radius)| {
            let c = SpatialConfig { radius, ..cfg.clone() };
            let base = rng.derive(&[k as u64]);
            Ok(RadiusData {
                radius,
                train: gen_spatial_dataset(&c, n_train, &format!("r{k}-train-"), &base.derive(&[0]))?,
                eval: gen_spatial_dataset(&c, n_eval, &format!("r{k}-eval-"), &base.derive(&[1]))?,
            })
        })
        .collect()
}
