//! Observations, datasets, standardization and the JSONL wire format.
//!
//! A dataset file holds a header object on the first line and one
//! observation per following line:
//!
//! ```text
//! {"format":"detchoice-dataset","version":1,"feature_names":[..],"quality_mask":[..],
//!  "similarity_mask":[..],"lengthscale_groups":[..],"continuous":[..],"standardization":null}
//! {"id":"obs-0","items":[{"id":"0","x":[1.0,0.5],"chosen":true}, ...]}
//! ```
//!
//! Floats are written in shortest round-trip form, so `parse(write(d)) == d`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Assortment, FeatureLayout};
use crate::subset::SubsetIndex;

pub const FORMAT_NAME: &str = "detchoice-dataset";
pub const FORMAT_VERSION: u32 = 1;

/// One assortment and the subset chosen from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub assortment: Assortment,
    pub chosen: SubsetIndex,
}

impl Observation {
    pub fn new(id: impl Into<String>, assortment: Assortment, chosen: SubsetIndex) -> Result<Self> {
        chosen.check_bounds(assortment.len())?;
        Ok(Self { id: id.into(), assortment, chosen })
    }

    pub fn labels(&self) -> Vec<bool> {
        self.chosen.to_labels(self.assortment.len())
    }
}

/// Per-column centring and scaling applied to continuous features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<usize>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardization {
    /// Column means and population standard deviations over every item of
    /// every observation. Zero-variance columns keep sd = 1.
    pub fn fit(observations: &[Observation], columns: &[usize]) -> Self {
        let mut count = 0usize;
        let mut mean = vec![0.0; columns.len()];
        let mut m2 = vec![0.0; columns.len()];
        for obs in observations {
            for x in obs.assortment.rows() {
                count += 1;
                for (k, &c) in columns.iter().enumerate() {
                    let delta = x[c] - mean[k];
                    mean[k] += delta / count as f64;
                    m2[k] += delta * (x[c] - mean[k]);
                }
            }
        }
        let sd = m2
            .iter()
            .map(|&v| {
                let s = if count > 0 { (v / count as f64).sqrt() } else { 0.0 };
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { columns: columns.to_vec(), mean, sd }
    }

    pub fn apply_row(&self, x: &mut [f64]) {
        for ((&c, m), s) in self.columns.iter().zip(&self.mean).zip(&self.sd) {
            x[c] = (x[c] - m) / s;
        }
    }
}

/// Column names and model roles shared by every observation in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub feature_names: Vec<String>,
    pub quality_mask: Vec<usize>,
    pub similarity_mask: Vec<usize>,
    pub lengthscale_groups: Vec<usize>,
    /// Columns that get standardized before fitting.
    #[serde(default)]
    pub continuous: Vec<usize>,
    /// Present iff the features stored with this schema are already standardized.
    #[serde(default)]
    pub standardization: Option<Standardization>,
}

impl DatasetSchema {
    /// All features in both models, one lengthscale each, nothing continuous.
    pub fn plain(feature_names: Vec<String>) -> Self {
        let d = feature_names.len();
        let layout = FeatureLayout::all(d);
        Self {
            feature_names,
            quality_mask: layout.quality,
            similarity_mask: layout.similarity,
            lengthscale_groups: layout.lengthscale_groups,
            continuous: Vec::new(),
            standardization: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            quality: self.quality_mask.clone(),
            similarity: self.similarity_mask.clone(),
            lengthscale_groups: self.lengthscale_groups.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout().validate(self.dim()).map_err(|e| Error::Data(format!("schema: {e}")))?;
        if let Some(&c) = self.continuous.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::Data(format!("schema: continuous column {c} out of range")));
        }
        Ok(())
    }

    /// Differences in column names or model roles, for schema-mismatch reports.
    pub fn mismatches(&self, other: &DatasetSchema) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.feature_names.len().max(other.feature_names.len());
        for k in 0..n {
            let a = self.feature_names.get(k).map(String::as_str).unwrap_or("<missing>");
            let b = other.feature_names.get(k).map(String::as_str).unwrap_or("<missing>");
            if a != b {
                out.push(format!("column {k}: {a} vs {b}"));
            }
        }
        if self.quality_mask != other.quality_mask {
            out.push(format!("quality_mask: {:?} vs {:?}", self.quality_mask, other.quality_mask));
        }
        if self.similarity_mask != other.similarity_mask {
            out.push(format!(
                "similarity_mask: {:?} vs {:?}",
                self.similarity_mask, other.similarity_mask
            ));
        }
        if self.lengthscale_groups != other.lengthscale_groups {
            out.push(format!(
                "lengthscale_groups: {:?} vs {:?}",
                self.lengthscale_groups, other.lengthscale_groups
            ));
        }
        out
    }
}

/// A schema plus its observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: DatasetSchema,
    pub observations: Vec<Observation>,
}

impl Dataset {
    pub fn new(schema: DatasetSchema, observations: Vec<Observation>) -> Result<Self> {
        schema.validate()?;
        let d = schema.dim();
        for obs in &observations {
            if obs.assortment.dim() != d {
                return Err(Error::Data(format!(
                    "observation {} has {} features, schema has {d}",
                    obs.id,
                    obs.assortment.dim()
                )));
            }
        }
        Ok(Self { schema, observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn layout(&self) -> FeatureLayout {
        self.schema.layout()
    }

    /// Standardization constants for the continuous columns of this dataset.
    pub fn fit_standardization(&self) -> Standardization {
        Standardization::fit(&self.observations, &self.schema.continuous)
    }

    /// Copy with `st` applied to every item. Fails if already standardized.
    pub fn standardized(&self, st: &Standardization) -> Result<Self> {
        if self.schema.standardization.is_some() {
            return Err(Error::Data("dataset is already standardized".into()));
        }
        let mut out = self.clone();
        for obs in &mut out.observations {
            for i in 0..obs.assortment.len() {
                st.apply_row(obs.assortment.row_mut(i));
            }
        }
        out.schema.standardization = Some(st.clone());
        Ok(out)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = Header {
            format: FORMAT_NAME.into(),
            version: FORMAT_VERSION,
            schema: self.schema.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for obs in &self.observations {
            let line = ObservationLine {
                id: obs.id.clone(),
                items: (0..obs.assortment.len())
                    .map(|i| ItemLine {
                        id: obs.assortment.ids()[i].clone(),
                        x: obs.assortment.row(i).to_vec(),
                        chosen: obs.chosen.contains(i),
                    })
                    .collect(),
            };
            serde_json::to_writer(&mut w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses the JSONL format. Errors carry 1-based line numbers.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let header: Header = loop {
            match lines.next() {
                None => return Err(Error::Data("line 1: missing dataset header".into())),
                Some((k, line)) => {
                    let line = line.map_err(|e| Error::Data(format!("line {}: {e}", k + 1)))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    break serde_json::from_str(&line)
                        .map_err(|e| Error::Data(format!("line {}: bad header: {e}", k + 1)))?;
                }
            }
        };
        if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
            return Err(Error::Data(format!(
                "line 1: unsupported format {} v{}",
                header.format, header.version
            )));
        }
        header.schema.validate()?;
        let d = header.schema.dim();
        let mut observations = Vec::new();
        for (k, line) in lines {
            let lineno = k + 1;
            let line = line.map_err(|e| Error::Data(format!("line {lineno}: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ObservationLine = serde_json::from_str(&line)
                .map_err(|e| Error::Data(format!("line {lineno}: {e}")))?;
            let mut ids = Vec::with_capacity(parsed.items.len());
            let mut rows = Vec::with_capacity(parsed.items.len());
            let mut labels = Vec::with_capacity(parsed.items.len());
            for item in parsed.items {
                if item.x.len() != d {
                    return Err(Error::Data(format!(
                        "line {lineno}: item {} has {} features, header declares {d}",
                        item.id,
                        item.x.len()
                    )));
                }
                ids.push(item.id);
                rows.push(item.x);
                labels.push(item.chosen);
            }
            let assortment =
                Assortment::new(ids, rows).map_err(|e| Error::Data(format!("line {lineno}: {e}")))?;
            observations.push(Observation {
                id: parsed.id,
                assortment,
                chosen: SubsetIndex::from_labels(&labels),
            });
        }
        Dataset::new(header.schema, observations)
    }

    pub fn from_jsonl_str(s: &str) -> Result<Self> {
        Self::read_jsonl(s.as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(flatten)]
    schema: DatasetSchema,
}

#[derive(Serialize, Deserialize)]
struct ObservationLine {
    id: String,
    items: Vec<ItemLine>,
}

#[derive(Serialize, Deserialize)]
struct ItemLine {
    id: String,
    x: Vec<f64>,
    chosen: bool,
}
