use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetSchema, Observation};
use crate::error::{arg, Error, Result};
use crate::kernel::Assortment;
use crate::rng::RngState;
use crate::subset::SubsetIndex;

pub const CHANNELS: [u8; 8] = [9, 10, 11, 12, 13, 14, 15, 16];
pub const SPREADING_FACTORS: [u8; 4] = [8, 9, 10, 11];
pub const POWER_RANGE: (i32, i32) = (-4, 23);

/// One packet sent by one device during an observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub device: usize,
    pub channel: u8,
    pub sf: u8,
    pub power: i32,
    pub delay: f64,
    pub airtime: f64,
}

impl Transmission {
    pub fn end(&self) -> f64 {
        self.delay + self.airtime
    }

    /// Closed-interval overlap of `[delay, delay + airtime]`.
    pub fn overlaps(&self, other: &Transmission) -> bool {
        self.delay <= other.end() && other.delay <= self.end()
    }
}

pub fn default_airtimes() -> BTreeMap<u8, f64> {
    BTreeMap::from([(8, 113.0), (9, 206.0), (10, 371.0), (11, 741.0)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraGenConfig {
    pub n_devices: usize,
    /// Delays are uniform integers on `[0, d_max]` milliseconds.
    pub d_max: f64,
    pub channels: Vec<u8>,
    pub sfs: Vec<u8>,
    pub airtime_ms: BTreeMap<u8, f64>,
    /// Added to an item's relative delay so that different spreading
    /// factors sit far apart in similarity space.
    pub relative_delay_offset: f64,
}

impl Default for LoraGenConfig {
    fn default() -> Self {
        Self {
            n_devices: 8,
            d_max: 2000.0,
            channels: CHANNELS.to_vec(),
            sfs: SPREADING_FACTORS.to_vec(),
            airtime_ms: default_airtimes(),
            relative_delay_offset: 100.0,
        }
    }
}

impl LoraGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 {
            return arg("need at least one device");
        }
        if !(self.d_max >= 0.0 && self.d_max.is_finite()) {
            return arg("d_max must be nonnegative and finite");
        }
        if self.channels.is_empty() || self.sfs.is_empty() {
            return arg("channel and spreading-factor subsets must be nonempty");
        }
        if let Some(c) = self.channels.iter().find(|c| !CHANNELS.contains(c)) {
            return arg(format!("channel {c} outside 9..=16"));
        }
        for sf in &self.sfs {
            if !SPREADING_FACTORS.contains(sf) {
                return arg(format!("spreading factor {sf} outside 8..=11"));
            }
            match self.airtime_ms.get(sf) {
                Some(&a) if a > 0.0 && a.is_finite() => {}
                _ => return arg(format!("no positive airtime for SF{sf}")),
            }
        }
        if !(self.relative_delay_offset > 0.0 && self.relative_delay_offset.is_finite()) {
            return arg("relative delay offset must be positive");
        }
        Ok(())
    }
}

/// One transmission per device with uniformly drawn parameters.
pub fn gen_lora_assortment<R: Rng + ?Sized>(cfg: &LoraGenConfig, rng: &mut R) -> Result<Vec<Transmission>> {
    cfg.validate()?;
    let d_max = cfg.d_max.floor() as i64;
    Ok((0..cfg.n_devices)
        .map(|device| {
            let delay = rng.random_range(0..=d_max) as f64;
            let power = rng.random_range(POWER_RANGE.0..=POWER_RANGE.1);
            let channel = *cfg.channels.choose(rng).expect("nonempty");
            let sf = *cfg.sfs.choose(rng).expect("nonempty");
            Transmission { device, channel, sf, power, delay, airtime: cfg.airtime_ms[&sf] }
        })
        .collect())
}

/// A network configuration drawn per observation: 7-9 devices, a long or
/// short delay window, and random subsets of 8/4/2 channels and 4/2
/// spreading factors.
pub fn gen_varied_config<R: Rng + ?Sized>(base: &LoraGenConfig, rng: &mut R) -> LoraGenConfig {
    let n_devices = rng.random_range(7..=9);
    let d_max = *[2000.0, 600.0].choose(rng).expect("nonempty");
    let n_ch = *[8usize, 4, 2].choose(rng).expect("nonempty");
    let n_sf = *[4usize, 2].choose(rng).expect("nonempty");
    let mut channels = CHANNELS.to_vec();
    channels.shuffle(rng);
    channels.truncate(n_ch);
    channels.sort_unstable();
    let mut sfs = SPREADING_FACTORS.to_vec();
    sfs.shuffle(rng);
    sfs.truncate(n_sf);
    sfs.sort_unstable();
    LoraGenConfig { n_devices, d_max, channels, sfs, ..base.clone() }
}

pub const QUALITY_FEATURES: [&str; 5] = ["const", "ch_overlap", "ch_sf_overlap", "power", "delay"];

/// Quality rows `[1, ch-overlap, ch-sf-overlap, power, delay]` and similarity
/// rows `[channel one-hot (9..=16), relative delay per SF (8..=11)]`. Power
/// and delay are left raw; the dataset schema marks them for standardization.
pub fn lora_features(tx: &[Transmission], cfg: &LoraGenConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if tx.is_empty() {
        return arg("empty LoRa assortment");
    }
    let mut xq = Vec::with_capacity(tx.len());
    let mut xs = Vec::with_capacity(tx.len());
    for (i, t) in tx.iter().enumerate() {
        let ch = CHANNELS
            .iter()
            .position(|&c| c == t.channel)
            .ok_or_else(|| Error::Data(format!("device {}: unknown channel {}", t.device, t.channel)))?;
        let sf = SPREADING_FACTORS
            .iter()
            .position(|&s| s == t.sf)
            .ok_or_else(|| Error::Data(format!("device {}: unknown spreading factor {}", t.device, t.sf)))?;
        if !(t.airtime > 0.0) {
            return Err(Error::Data(format!("device {}: airtime must be positive", t.device)));
        }
        let concurrent = |same_sf: bool| {
            tx.iter().enumerate().any(|(j, o)| {
                j != i && o.channel == t.channel && (!same_sf || o.sf == t.sf) && o.overlaps(t)
            })
        };
        let ch_overlap = concurrent(false);
        let ch_sf_overlap = concurrent(true);
        xq.push(vec![1.0, ch_overlap as u8 as f64, ch_sf_overlap as u8 as f64, t.power as f64, t.delay]);

        let mut s = vec![0.0; CHANNELS.len() + SPREADING_FACTORS.len()];
        s[ch] = 1.0;
        s[CHANNELS.len() + sf] = t.delay / t.airtime + cfg.relative_delay_offset;
        xs.push(s);
    }
    Ok((xq, xs))
}

/// Schema for rows `X_q ++ X_s`: one lengthscale for the channel block and
/// one for the relative-delay block.
pub fn lora_schema() -> DatasetSchema {
    let mut names: Vec<String> = QUALITY_FEATURES.iter().map(|s| s.to_string()).collect();
    names.extend(CHANNELS.iter().map(|c| format!("ch{c}")));
    names.extend(SPREADING_FACTORS.iter().map(|s| format!("rel_delay_sf{s}")));
    let nq = QUALITY_FEATURES.len();
    DatasetSchema {
        feature_names: names,
        quality_mask: (0..nq).collect(),
        similarity_mask: (nq..nq + 12).collect(),
        lengthscale_groups: [vec![0; 8], vec![1; 4]].concat(),
        continuous: vec![3, 4],
        standardization: None,
    }
}

/// Ground-truth reception rule for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CaptureRule {
    /// Within each (channel, SF) group the receiver locks onto the first
    /// arrival and loses everything that overlaps it in time. Arrivals
    /// within `tie_window` airtimes of the earliest count as simultaneous
    /// and are resolved by higher power, then earlier delay, then lower
    /// device id.
    FirstLock { tie_window: f64 },
}

impl Default for CaptureRule {
    fn default() -> Self {
        CaptureRule::FirstLock { tie_window: 0.0 }
    }
}

/// Indices of the received transmissions.
pub fn synthetic_capture_labels(tx: &[Transmission], rule: &CaptureRule) -> SubsetIndex {
    let CaptureRule::FirstLock { tie_window } = *rule;
    let mut groups: BTreeMap<(u8, u8), Vec<usize>> = BTreeMap::new();
    for (i, t) in tx.iter().enumerate() {
        groups.entry((t.channel, t.sf)).or_default().push(i);
    }
    let mut received = Vec::new();
    for mut pending in groups.into_values() {
        pending.sort_by(|&a, &b| tx[a].delay.total_cmp(&tx[b].delay).then(tx[a].device.cmp(&tx[b].device)));
        while let Some(&first) = pending.first() {
            let horizon = tx[first].delay + tie_window.max(0.0) * tx[first].airtime;
            let winner = pending
                .iter()
                .copied()
                .take_while(|&i| tx[i].delay <= horizon)
                .min_by(|&a, &b| {
                    tx[b].power
                        .cmp(&tx[a].power)
                        .then(tx[a].delay.total_cmp(&tx[b].delay))
                        .then(tx[a].device.cmp(&tx[b].device))
                })
                .expect("nonempty");
            received.push(winner);
            pending.retain(|&i| i != winner && !tx[i].overlaps(&tx[winner]));
        }
    }
    SubsetIndex::from_unsorted(received)
}

/// How each observation's network configuration is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LoraScenario {
    Fixed,
    Varied,
}

/// `n` labelled LoRa observations with raw (unstandardized) features.
/// Observation `i` draws from `rng.derive(&[i])`.
pub fn gen_lora_dataset(
    base: &LoraGenConfig,
    scenario: &LoraScenario,
    rule: &CaptureRule,
    n: usize,
    rng: &RngState,
) -> Result<Dataset> {
    base.validate()?;
    let obs = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.derive(&[i as u64]).rng();
            let cfg = match scenario {
                LoraScenario::Fixed => base.clone(),
                LoraScenario::Varied => gen_varied_config(base, &mut r),
            };
            let tx = gen_lora_assortment(&cfg, &mut r)?;
            let chosen = synthetic_capture_labels(&tx, rule);
            let (xq, xs) = lora_features(&tx, &cfg)?;
            let rows = xq.into_iter().zip(xs).map(|(q, s)| [q, s].concat()).collect();
            let ids = tx.iter().map(|t| format!("dev{}", t.device)).collect();
            Observation::new(format!("lora-{i}"), Assortment::new(ids, rows)?, chosen)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(lora_schema(), obs)
}
