//! Class-imbalance oversampling plans and the per-epoch batch count.
//!
//! For every class `t` except the majority class,
//! `β_t = sqrt(C_train / C_t)` and
//! `n_extra_t = round(α_t · β_t / max β · N_train)`, where `C_train` is the
//! total cell count, `C_t` the count of class `t` and `N_train` the number of
//! training images. Extra images for class `t` are drawn with replacement,
//! with probability proportional to the share of class-`t` cells they hold.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};

/// Per-image cell counts by class.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub image_ids: Vec<String>,
    /// One row per image, one column per class.
    pub counts: Vec<Vec<u64>>,
}

impl DatasetManifest {
    pub fn new(classes: Vec<String>, image_ids: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if classes.is_empty() {
            return arg_err("manifest has no class columns");
        }
        if image_ids.len() != counts.len() {
            return arg_err(format!("{} image ids but {} count rows", image_ids.len(), counts.len()));
        }
        if let Some((i, _)) = counts.iter().enumerate().find(|(_, r)| r.len() != classes.len()) {
            return arg_err(format!("row {} has the wrong number of class counts", i + 1));
        }
        let m = DatasetManifest {
            classes,
            image_ids,
            counts,
        };
        if m.class_totals().iter().all(|&c| c == 0) {
            return arg_err("manifest has no cells");
        }
        Ok(m)
    }

    /// Reads `image_id,<class>,<class>,...` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 2 {
            return Err(Error::Malformed("manifest needs image_id plus at least one class column".into()));
        }
        let classes: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut ids = Vec::new();
        let mut counts = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            ids.push(rec[0].to_owned());
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.parse::<u64>().map_err(|_| {
                        Error::Malformed(format!("row {}: count {v:?} is not a non-negative integer", line + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            counts.push(row);
        }
        Self::new(classes, ids, counts)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn n_images(&self) -> usize {
        self.image_ids.len()
    }

    pub fn class_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.classes.len()];
        for row in &self.counts {
            for (t, &c) in totals.iter_mut().zip(row) {
                *t += c;
            }
        }
        totals
    }

    /// Index of the class with the most cells (first on ties).
    pub fn majority_class(&self) -> usize {
        let totals = self.class_totals();
        let max = *totals.iter().max().unwrap();
        totals.iter().position(|&c| c == max).unwrap()
    }
}

/// Per-class α values with an optional fallback.
///
/// JSON form: `{"neutrophil": 1.6, "eosinophil": 1.6, "default": 0.9}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphas {
    pub per_class: BTreeMap<String, f64>,
}

impl Alphas {
    pub const DEFAULT_KEY: &'static str = "default";

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn alpha_for(&self, class: &str) -> Result<f64> {
        let a = self
            .per_class
            .get(class)
            .or_else(|| self.per_class.get(Self::DEFAULT_KEY))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no alpha for class {class:?} and no default")))?;
        if !(a >= 0.0 && a.is_finite()) {
            return arg_err(format!("alpha for {class:?} must be finite and non-negative, got {a}"));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPlan {
    pub class: String,
    pub cells: u64,
    pub alpha: f64,
    pub beta: f64,
    /// Unrounded `α · β / max β · N_train`.
    pub n_extra_exact: f64,
    pub n_extra: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraDraws {
    pub class: String,
    pub image_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversamplePlan {
    pub majority_class: String,
    pub n_train: usize,
    pub c_train: u64,
    pub classes: Vec<ClassPlan>,
    /// `N_train + Σ n_extra`.
    pub total_images: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub draws: Vec<ExtraDraws>,
}

impl OversamplePlan {
    pub fn total_extra(&self) -> usize {
        self.classes.iter().map(|c| c.n_extra).sum()
    }

    /// Attaches the sampled multiset for `seed`.
    pub fn with_draws(mut self, manifest: &DatasetManifest, seed: u64) -> Result<Self> {
        self.draws = sample_extra_images(manifest, &self, seed)?;
        self.seed = Some(seed);
        Ok(self)
    }
}

pub fn oversample_counts(manifest: &DatasetManifest, alphas: &Alphas) -> Result<OversamplePlan> {
    let totals = manifest.class_totals();
    let c_train: u64 = totals.iter().sum();
    let n_train = manifest.n_images();
    let majority = manifest.majority_class();

    let mut rows = Vec::new();
    for (t, name) in manifest.classes.iter().enumerate() {
        if t == majority {
            continue;
        }
        if totals[t] == 0 {
            return arg_err(format!("minority class {name:?} has no cells"));
        }
        let beta = (c_train as f64 / totals[t] as f64).sqrt();
        rows.push((name.clone(), totals[t], alphas.alpha_for(name)?, beta));
    }
    let max_beta = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    let classes: Vec<ClassPlan> = rows
        .into_iter()
        .map(|(class, cells, alpha, beta)| {
            let exact = alpha * beta / max_beta * n_train as f64;
            ClassPlan {
                class,
                cells,
                alpha,
                beta,
                n_extra_exact: exact,
                n_extra: exact.round() as usize,
            }
        })
        .collect();
    let total_images = n_train + classes.iter().map(|c| c.n_extra).sum::<usize>();
    Ok(OversamplePlan {
        majority_class: manifest.classes[majority].clone(),
        n_train,
        c_train,
        classes,
        total_images,
        seed: None,
        draws: Vec::new(),
    })
}

/// Draws `n_extra` images per minority class with replacement.
///
/// One ChaCha8 stream seeded with `seed` is consumed class by class in
/// plan order, so the result depends only on (manifest, plan, seed).
pub fn sample_extra_images(manifest: &DatasetManifest, plan: &OversamplePlan, seed: u64) -> Result<Vec<ExtraDraws>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(plan.classes.len());
    for cp in &plan.classes {
        let t = manifest
            .classes
            .iter()
            .position(|c| *c == cp.class)
            .ok_or_else(|| Error::InvalidArgument(format!("class {:?} not in manifest", cp.class)))?;
        let mut ids = Vec::with_capacity(cp.n_extra);
        if cp.n_extra > 0 {
            let weights: Vec<u64> = manifest.counts.iter().map(|row| row[t]).collect();
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidArgument(format!("class {:?}: {e}", cp.class)))?;
            for _ in 0..cp.n_extra {
                ids.push(manifest.image_ids[dist.sample(&mut rng)].clone());
            }
        }
        out.push(ExtraDraws {
            class: cp.class.clone(),
            image_ids: ids,
        });
    }
    Ok(out)
}

/// `⌈ n_train / n_batch · (H / 256)² ⌉`, evaluated in integers.
pub fn epoch_batch_count(n_train: u64, n_batch: u64, image_height: u64) -> Result<u64> {
    if n_batch == 0 || image_height == 0 {
        return arg_err("batch size and image height must be positive");
    }
    let num = n_train as u128 * image_height as u128 * image_height as u128;
    let den = n_batch as u128 * 256 * 256;
    Ok(num.div_ceil(den) as u64)
}
