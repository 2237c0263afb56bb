//! Pseudo-label bootstrapping: round schedule, top-confidence selection,
//! the provenance-tracking label pool and reproducible seed sampling.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::formats::LabelFile;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BootstrapError {
    #[error("plan needs {needed} labeled images but the corpus has {corpus}")]
    PlanExceedsCorpus { needed: u128, corpus: usize },
    #[error("seed size must be at least 1")]
    EmptySeed,
    #[error("asked for {k} images but only {available} candidates have detections")]
    NotEnoughCandidates { k: usize, available: usize },
    #[error("image {image_id} is already in the pool")]
    Collision { image_id: String },
    #[error("image {image_id} appears more than once")]
    DuplicateImage { image_id: String },
    #[error("cannot sample {size} seed images from a corpus of {corpus}")]
    SeedTooLarge { size: usize, corpus: usize },
    #[error("unknown aggregate {0:?}; expected max or mean")]
    UnknownAggregate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BootstrapPlan {
    pub seed: usize,
    pub per_round: usize,
    pub rounds: usize,
    pub corpus: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RoundPlan {
    pub round: usize,
    pub train_size: usize,
    /// Images left to predict on after training this round.
    pub predict_size: usize,
}

impl BootstrapPlan {
    pub fn validate(&self) -> Result<(), BootstrapError> {
        if self.seed == 0 {
            return Err(BootstrapError::EmptySeed);
        }
        let needed = self.seed as u128 + self.rounds as u128 * self.per_round as u128;
        if needed > self.corpus as u128 {
            return Err(BootstrapError::PlanExceedsCorpus {
                needed,
                corpus: self.corpus,
            });
        }
        Ok(())
    }

    pub fn final_train_size(&self) -> usize {
        self.seed + self.rounds * self.per_round
    }
}

/// One entry per round 0..=rounds. Round r trains on seed + r·per_round
/// images; the last entry is the final prediction over the remainder.
pub fn plan_rounds(plan: &BootstrapPlan) -> Result<Vec<RoundPlan>, BootstrapError> {
    plan.validate()?;
    Ok((0..=plan.rounds)
        .map(|round| {
            let train_size = plan.seed + round * plan.per_round;
            RoundPlan {
                round,
                train_size,
                predict_size: plan.corpus - train_size,
            }
        })
        .collect())
}

/// How one image's detection confidences collapse to a single score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

impl Aggregate {
    pub fn apply(self, confidences: &[f64]) -> Option<f64> {
        if confidences.is_empty() {
            return None;
        }
        Some(match self {
            Aggregate::Max => confidences.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Mean => confidences.iter().sum::<f64>() / confidences.len() as f64,
        })
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Max => "max",
            Aggregate::Mean => "mean",
        })
    }
}

impl FromStr for Aggregate {
    type Err = BootstrapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Aggregate::Max),
            "mean" => Ok(Aggregate::Mean),
            other => Err(BootstrapError::UnknownAggregate(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScoredImage {
    pub image_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Selection {
    /// Best first.
    pub selected: Vec<ScoredImage>,
    /// Images whose prediction carried no confidences at all.
    pub excluded: Vec<String>,
    pub candidates: usize,
}

/// Picks the `k` prediction files with the highest image score; ties go to
/// the smaller image id. Entries without a confidence do not count as
/// detections.
pub fn select_top_k(predictions: &[LabelFile], k: usize, aggregate: Aggregate) -> Result<Selection, BootstrapError> {
    let mut scored = Vec::with_capacity(predictions.len());
    let mut excluded = Vec::new();
    for file in predictions {
        let confidences: Vec<f64> = file.entries.iter().filter_map(|e| e.confidence).collect();
        match aggregate.apply(&confidences) {
            Some(score) => scored.push(ScoredImage {
                image_id: file.image_id.clone(),
                score,
            }),
            None => excluded.push(file.image_id.clone()),
        }
    }
    let mut ids: Vec<&str> = predictions.iter().map(|p| p.image_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(BootstrapError::DuplicateImage {
            image_id: w[0].to_string(),
        });
    }
    if k > scored.len() {
        return Err(BootstrapError::NotEnoughCandidates {
            k,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.image_id.cmp(&b.image_id)));
    let candidates = scored.len();
    scored.truncate(k);
    excluded.sort();
    Ok(Selection {
        selected: scored,
        excluded,
        candidates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Provenance {
    Human,
    Pseudo { round: usize, confidence: f64 },
}

impl Provenance {
    pub fn is_human(&self) -> bool {
        matches!(self, Provenance::Human)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PoolEntry {
    pub label: LabelFile,
    pub provenance: Provenance,
}

/// Labeled images keyed by image id, each with where its label came from.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct LabeledPool {
    entries: BTreeMap<String, PoolEntry>,
}

impl LabeledPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_human(labels: impl IntoIterator<Item = LabelFile>) -> Result<Self, BootstrapError> {
        let mut pool = Self::new();
        for label in labels {
            let image_id = label.image_id.clone();
            if pool.entries.contains_key(&image_id) {
                return Err(BootstrapError::DuplicateImage { image_id });
            }
            pool.entries.insert(
                image_id,
                PoolEntry {
                    label,
                    provenance: Provenance::Human,
                },
            );
        }
        Ok(pool)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, image_id: &str) -> bool {
        self.entries.contains_key(image_id)
    }

    pub fn get(&self, image_id: &str) -> Option<&PoolEntry> {
        self.entries.get(image_id)
    }

    /// In image-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &PoolEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn human_count(&self) -> usize {
        self.entries.values().filter(|e| e.provenance.is_human()).count()
    }

    pub fn pseudo_count(&self) -> usize {
        self.len() - self.human_count()
    }

    /// Adds pseudo labels as one all-or-nothing step.
    pub fn merge(&mut self, additions: Vec<(LabelFile, f64)>, round: usize) -> Result<(), BootstrapError> {
        let mut seen: Vec<&str> = Vec::with_capacity(additions.len());
        for (label, _) in &additions {
            if self.entries.contains_key(&label.image_id) {
                return Err(BootstrapError::Collision {
                    image_id: label.image_id.clone(),
                });
            }
            seen.push(&label.image_id);
        }
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(BootstrapError::DuplicateImage {
                image_id: w[0].to_string(),
            });
        }
        for (label, confidence) in additions {
            self.entries.insert(
                label.image_id.clone(),
                PoolEntry {
                    label,
                    provenance: Provenance::Pseudo { round, confidence },
                },
            );
        }
        Ok(())
    }
}

/// Functional form of [`LabeledPool::merge`].
pub fn merge_pool(
    pool: &LabeledPool,
    additions: Vec<(LabelFile, f64)>,
    round: usize,
) -> Result<LabeledPool, BootstrapError> {
    let mut next = pool.clone();
    next.merge(additions, round)?;
    Ok(next)
}

/// Draws `size` distinct images from the corpus. The result depends only on
/// the set of corpus ids and `rng_seed`, and comes back sorted.
pub fn sample_seed(corpus: &[String], size: usize, rng_seed: u64) -> Result<Vec<String>, BootstrapError> {
    let mut sorted: Vec<&String> = corpus.iter().collect();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(BootstrapError::DuplicateImage { image_id: w[0].clone() });
    }
    if size > sorted.len() {
        return Err(BootstrapError::SeedTooLarge {
            size,
            corpus: sorted.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut picked: Vec<String> = rand::seq::index::sample(&mut rng, sorted.len(), size)
        .into_iter()
        .map(|i| sorted[i].clone())
        .collect();
    picked.sort();
    Ok(picked)
}
